"""
Uniform finite-difference discretization of the Laplacian on (0, 1)^d, d = 1, 2.

State fields are numpy arrays over *all* grid nodes, boundary nodes included,
with shape ``(n + 2,) * dim`` and ``field[i, j]`` living at ``(x_i, y_j)``.
Only interior nodes are unknowns of the method-of-lines system

    u' = A u + c(t) + f(u),

the boundary nodes being eliminated by a second-order one-sided closure of the
boundary operator

    B u = alpha * u + beta * du/dn,
    du/dn ~ (3 u_0 - 4 u_1 + u_2) / (2 dx)     (outward normal)

so that ``reconstruct`` and ``boundary_operator`` are exact inverses of each
other: a field whose boundary nodes were reconstructed from data ``b`` has
discrete trace ``B u == b`` up to rounding.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Mapping

import numpy as np
import scipy.sparse as sp

from .errors import BoundarySpecError, DimensionError

FACES = {1: ("left", "right"), 2: ("left", "right", "bottom", "top")}

# face -> (normal axis, high side?)
_FACE_GEOMETRY = {
    "left": (0, False),
    "right": (0, True),
    "bottom": (1, False),
    "top": (1, True),
}

# 2D corners: (x index, y index) -> the two faces meeting there
_CORNERS = {
    (0, 0): ("left", "bottom"),
    (-1, 0): ("right", "bottom"),
    (0, -1): ("left", "top"),
    (-1, -1): ("right", "top"),
}


@dataclass(frozen=True)
class Grid:
    """Uniform grid on the unit interval or unit square, ``n`` interior nodes per axis."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DimensionError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 2:
            raise DimensionError(f"need at least 2 interior nodes per axis, got {self.n}")

    @property
    def dx(self) -> float:
        return 1.0 / (self.n + 1)

    @property
    def nodes(self) -> np.ndarray:
        """1D coordinates of all nodes along one axis, boundaries included."""
        return np.arange(self.n + 2) * self.dx

    @property
    def shape(self) -> tuple:
        return (self.n + 2,) * self.dim

    @property
    def n_total(self) -> int:
        """Number of unknowns (interior nodes)."""
        return self.n ** self.dim

    @property
    def interior(self) -> tuple:
        return (slice(1, -1),) * self.dim

    def mesh(self):
        """Coordinate arrays broadcastable to :attr:`shape` (``ij`` indexing)."""
        if self.dim == 1:
            return (self.nodes,)
        return tuple(np.meshgrid(self.nodes, self.nodes, indexing="ij"))

    def sample(self, func: Callable) -> np.ndarray:
        """Evaluate ``func(x)`` or ``func(x, y)`` on every node."""
        return np.broadcast_to(np.asarray(func(*self.mesh()), dtype=float), self.shape).copy()

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.n + 2, self.dx)
        w[0] = w[-1] = 0.5 * self.dx
        if self.dim == 1:
            return w
        return np.outer(w, w)

    def face_positions(self, face: str) -> np.ndarray:
        """Tangential coordinates of the (non-corner) nodes of ``face``."""
        if self.dim == 1:
            return np.zeros(1)
        return self.nodes[1:-1]

    def face_index(self, face: str, depth: int) -> tuple:
        """Index of the node line at distance ``depth`` from ``face`` (corners excluded)."""
        axis, high = _FACE_GEOMETRY[face]
        k = self.n + 1 - depth if high else depth
        if self.dim == 1:
            return (slice(k, k + 1),)
        if axis == 0:
            return (k, slice(1, -1))
        return (slice(1, -1), k)


def _as_data(value) -> Callable:
    if callable(value):
        return value
    const = float(value)
    return lambda s, t: np.full(np.shape(s), const)


@dataclass(frozen=True)
class BoundaryCondition:
    """``alpha * u + beta * du/dn = value(s, t)`` on one face.

    ``value`` receives the tangential coordinates ``s`` of the face nodes
    (a dummy length-one array in 1D) and the time ``t``.
    """

    kind: str
    value: Callable = field(default=lambda s, t: np.zeros(np.shape(s)))
    alpha: float = 1.0
    beta: float = 0.0

    def __call__(self, s, t) -> np.ndarray:
        return np.broadcast_to(np.asarray(self.value(s, t), dtype=float), np.shape(s)).astype(float)


def dirichlet(value=0.0) -> BoundaryCondition:
    return BoundaryCondition("dirichlet", _as_data(value), 1.0, 0.0)


def neumann(value=0.0) -> BoundaryCondition:
    return BoundaryCondition("neumann", _as_data(value), 0.0, 1.0)


def robin(alpha: float, beta: float, value=0.0) -> BoundaryCondition:
    if beta == 0.0:
        raise BoundarySpecError("Robin condition needs beta != 0 (use dirichlet() instead)")
    return BoundaryCondition("robin", _as_data(value), float(alpha), float(beta))


class BoundarySpec(dict):
    """Mapping face name -> :class:`BoundaryCondition`."""

    def validate(self, dim: int) -> None:
        expected = set(FACES[dim])
        if set(self) != expected:
            raise DimensionError(f"boundary spec faces {sorted(self)} do not match "
                                 f"the {dim}D faces {sorted(expected)}")
        for face, bc in self.items():
            if bc.kind not in ("dirichlet", "neumann", "robin"):
                raise BoundarySpecError(f"unknown boundary kind {bc.kind!r} on {face}")
            if bc.kind != "dirichlet" and bc.beta == 0.0:
                raise BoundarySpecError(f"derivative condition on {face} has beta = 0")

    def scaled(self, factor: float) -> "BoundarySpec":
        """Same operators with data multiplied by ``factor``."""
        return BoundarySpec({
            face: BoundaryCondition(bc.kind, lambda s, t, bc=bc: factor * bc(s, t), bc.alpha, bc.beta)
            for face, bc in self.items()
        })


def _elimination(bc: BoundaryCondition, dx: float):
    """Weights with ``u_boundary = gain * b + w1 * u_1 + w2 * u_2``."""
    denom = bc.alpha + 1.5 * bc.beta / dx
    if abs(denom) < 1e-14:
        raise BoundarySpecError("degenerate Robin coefficients: alpha + 3 beta / (2 dx) = 0")
    half = bc.beta / (2.0 * dx)
    return 1.0 / denom, 4.0 * half / denom, -half / denom


def _closure_1d(n: int, dx: float, lo: BoundaryCondition, hi: BoundaryCondition) -> sp.csr_matrix:
    L = sp.diags([np.ones(n - 1), -2.0 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="lil")
    for bc, (i1, i2) in ((lo, (0, 1)), (hi, (n - 1, n - 2))):
        _, w1, w2 = _elimination(bc, dx)
        L[i1, i1] += w1
        L[i1, i2] += w2
    return sp.csr_matrix(L) / dx**2


@dataclass(frozen=True, eq=False)
class DiscreteDiffusion:
    """The homogeneous-BC matrix ``A`` plus the affine boundary machinery.

    ``constrained=False`` describes the diffusion-free problem (``A = 0``,
    no boundary constraint): its flows act on every node alike.
    """

    grid: Grid
    bc: BoundarySpec
    A: sp.csr_matrix
    constrained: bool = True

    @property
    def n_total(self) -> int:
        return self.A.shape[0]

    @cached_property
    def _closure(self) -> dict:
        g = self.grid
        return {face: (_elimination(bc, g.dx), [g.face_index(face, k) for k in range(3)])
                for face, bc in self.bc.items()}

    def boundary_values(self, t: float) -> dict:
        return {face: bc(self.grid.face_positions(face), t) for face, bc in self.bc.items()}

    def forcing(self, values: Mapping[str, np.ndarray]) -> np.ndarray:
        """Interior forcing vector produced by boundary data ``values``."""
        g = self.grid
        c = np.zeros(g.shape)
        if self.constrained:
            for face, ((gain, _, _), idx) in self._closure.items():
                c[idx[1]] += gain * np.asarray(values[face]) / g.dx**2
        return c[g.interior].ravel()

    def forcing_at(self, t: float) -> np.ndarray:
        return self.forcing(self.boundary_values(t))

    def interior(self, field: np.ndarray) -> np.ndarray:
        return field[self.grid.interior].ravel()

    def reconstruct(self, u_interior: np.ndarray, values: Mapping[str, np.ndarray],
                    t: float | None = None) -> np.ndarray:
        """Full field from interior values and boundary data.

        Corner nodes (2D) use the boundary data callables at time ``t`` when
        given; otherwise they take the mean of their two edge neighbours.
        """
        g = self.grid
        u_interior = np.asarray(u_interior, dtype=float)
        if u_interior.size != g.n_total:
            raise DimensionError(f"interior vector has {u_interior.size} entries, "
                                 f"expected {g.n_total}")
        out = np.zeros(g.shape)
        out[g.interior] = u_interior.reshape((g.n,) * g.dim)
        for face, ((gain, w1, w2), idx) in self._closure.items():
            out[idx[0]] = gain * np.asarray(values[face]) + w1 * out[idx[1]] + w2 * out[idx[2]]
        if g.dim == 2:
            self._fill_corners(out, t)
        return out

    def _fill_corners(self, out: np.ndarray, t: float | None) -> None:
        g = self.grid
        for (ix, iy), faces in _CORNERS.items():
            if t is None:
                out[ix, iy] = 0.5 * (out[ix, 1 if iy == 0 else -2] + out[1 if ix == 0 else -2, iy])
                continue
            dirichlet_faces = [f for f in faces if self.bc[f].kind == "dirichlet"]
            estimates = []
            for face in (dirichlet_faces or faces):
                bc = self.bc[face]
                axis, _ = _FACE_GEOMETRY[face]
                # tangential coordinate of the corner along this face
                s = np.array([g.nodes[iy] if axis == 0 else g.nodes[ix]])
                gain, w1, w2 = _elimination(bc, g.dx)
                step = 1 if (ix if axis == 0 else iy) == 0 else -1
                if axis == 0:
                    u1, u2 = out[ix + step, iy], out[ix + 2 * step, iy]
                else:
                    u1, u2 = out[ix, iy + step], out[ix, iy + 2 * step]
                estimates.append(gain * bc(s, t)[0] + w1 * u1 + w2 * u2)
            out[ix, iy] = np.mean(estimates)

    def boundary_operator(self, field: np.ndarray) -> dict:
        """Discrete ``B`` applied to a full field, per face (corners excluded)."""
        g = self.grid
        result = {}
        for face, bc in self.bc.items():
            u0, u1, u2 = (field[g.face_index(face, k)] for k in range(3))
            result[face] = bc.alpha * u0 + bc.beta * (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * g.dx)
        return result


def build_laplacian(grid: Grid, bc: BoundarySpec) -> DiscreteDiffusion:
    """Second-order centred Laplacian with the boundary nodes eliminated."""
    bc = bc if isinstance(bc, BoundarySpec) else BoundarySpec(bc)
    bc.validate(grid.dim)
    n, dx = grid.n, grid.dx
    Lx = _closure_1d(n, dx, bc["left"], bc["right"])
    if grid.dim == 1:
        A = Lx
    else:
        Ly = _closure_1d(n, dx, bc["bottom"], bc["top"])
        eye = sp.identity(n, format="csr")
        A = sp.kron(Lx, eye) + sp.kron(eye, Ly)
    return DiscreteDiffusion(grid, bc, sp.csr_matrix(A))


def null_diffusion(grid: Grid, bc: BoundarySpec) -> DiscreteDiffusion:
    """``D = 0`` on the whole grid; the boundary spec is kept only for ``B``."""
    bc = bc if isinstance(bc, BoundarySpec) else BoundarySpec(bc)
    bc.validate(grid.dim)
    size = int(np.prod(grid.shape))
    return DiscreteDiffusion(grid, bc, sp.csr_matrix((size, size)), constrained=False)


def apply_boundary_reconstruction(d: DiscreteDiffusion, u_interior: np.ndarray, t: float) -> np.ndarray:
    """Full state at time ``t``: boundary nodes filled from ``b(t)``."""
    return d.reconstruct(u_interior, d.boundary_values(t), t)
