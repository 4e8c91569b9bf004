"""
Sub-problem flows composed by the splitting schemes.

All flows take and return full state fields (boundary nodes included).  The
reaction and projection flows act pointwise on every node; the diffusion flow
advances the interior exactly and rebuilds the boundary nodes from ``b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import BlowUpError, DimensionError
from .matfun import MatFunBackend
from .mesh import DiscreteDiffusion, Grid

BLOWUP_THRESHOLD = 1e-12


@dataclass
class FlowCounters:
    diffusion: int = 0
    reaction: int = 0

    @property
    def total(self) -> int:
        return self.diffusion + self.reaction


class ReactionTerm:
    """A source term ``f`` acting on full fields.

    Subclasses may provide an exact ``flow(u0, t)`` and a ``boundary_trace``
    giving ``B f(u)`` by the chain rule.
    """

    name = "reaction"
    lipschitz: float | None = None

    def __init__(self, evaluate: Callable | None = None, name: str | None = None,
                 flow: Callable | None = None):
        if evaluate is not None:
            self._evaluate = evaluate
        if name is not None:
            self.name = name
        if flow is not None:
            self.flow = flow

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self._evaluate(u)

    def _evaluate(self, u):
        raise NotImplementedError

    flow = None

    @property
    def has_flow(self) -> bool:
        return self.flow is not None

    def boundary_trace(self, u: np.ndarray, d: DiscreteDiffusion):
        return None


class ZeroReaction(ReactionTerm):
    name = "zero"

    def _evaluate(self, u):
        return np.zeros_like(u)

    def flow(self, u0, t):
        return np.array(u0, dtype=float)

    def boundary_trace(self, u, d):
        return {face: np.zeros(d.grid.face_positions(face).shape) for face in d.bc}


class QuadraticReaction(ReactionTerm):
    """``f(x, u) = c(x) u^2`` with the closed-form flow ``u0 / (1 - c t u0)``.

    ``coeff`` is sampled on the grid; ``coeff_grad`` (optional) returns the
    gradient components of ``c`` and is used for the chain-rule trace.
    """

    name = "quadratic"

    def __init__(self, grid: Grid, coeff, coeff_grad: Callable | None = None, name=None):
        super().__init__(name=name)
        self.grid = grid
        self.coeff = grid.sample(coeff) if callable(coeff) else np.full(grid.shape, float(coeff))
        self._coeff_grad = coeff_grad

    def _evaluate(self, u):
        return self.coeff * u * u

    def flow(self, u0, t):
        denom = 1.0 - self.coeff * t * u0
        bad = denom <= BLOWUP_THRESHOLD
        if np.any(bad):
            node = tuple(int(i) for i in np.argwhere(bad)[0])
            raise BlowUpError(f"quadratic flow blows up before t = {t:g} at node {node}", node)
        return u0 / denom

    def _normal_coeff_derivative(self, face, d):
        g = d.grid
        if self._coeff_grad is None:
            return np.zeros(g.face_positions(face).shape)
        grads = [np.broadcast_to(np.asarray(c, dtype=float), g.shape) for c in self._coeff_grad(*g.mesh())]
        axis = {"left": 0, "right": 0, "bottom": 1, "top": 1}[face]
        sign = 1.0 if face in ("right", "top") else -1.0
        return sign * grads[axis][g.face_index(face, 0)]

    def boundary_trace(self, u, d):
        """``alpha f(u) + beta (dc/dn u^2 + 2 c u du/dn)`` with the discrete ``du/dn``."""
        g = d.grid
        bu = d.boundary_operator(u)
        out = {}
        for face, bc in d.bc.items():
            ub = u[g.face_index(face, 0)]
            cb = self.coeff[g.face_index(face, 0)]
            value = bc.alpha * cb * ub * ub
            if bc.beta != 0.0:
                dudn = (bu[face] - bc.alpha * ub) / bc.beta
                value = value + bc.beta * (self._normal_coeff_derivative(face, d) * ub * ub
                                           + 2.0 * cb * ub * dudn)
            out[face] = value
        return out


class IntegralReaction(ReactionTerm):
    """``f(u)(x) = -int_0^1 u(s)^4 / (1 + |x - s|)^2 ds`` by the trapezoidal rule on all nodes."""

    name = "integral"

    def __init__(self, grid: Grid):
        super().__init__()
        if grid.dim != 1:
            raise DimensionError("the integral source term is one-dimensional")
        x = grid.nodes
        self.kernel = grid.trapezoid_weights()[None, :] / (1.0 + np.abs(x[:, None] - x[None, :]))**2

    def _evaluate(self, u):
        u2 = u * u
        return -(self.kernel @ (u2 * u2))


def _field_of(q) -> np.ndarray:
    return q.values if hasattr(q, "values") else np.asarray(q, dtype=float)


def _rk4(rhs: Callable, u: np.ndarray, t: float, substeps: int) -> np.ndarray:
    h = t / substeps
    # divergence is reported below, not as floating-point warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(substeps):
            k1 = rhs(u)
            k2 = rhs(u + 0.5 * h * k1)
            k3 = rhs(u + 0.5 * h * k2)
            k4 = rhs(u + h * k3)
            u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(u)):
                break
    if not np.all(np.isfinite(u)):
        raise BlowUpError(f"reaction sub-steps diverged over t = {t:g}")
    return u


def reaction_flow(f: ReactionTerm, u0: np.ndarray, t: float, substeps: int = 5,
                  counters: FlowCounters | None = None) -> np.ndarray:
    """Flow of ``u' = f(u)`` over time ``t`` (exact when ``f`` has a closed form)."""
    if t < 0:
        raise ValueError("reaction flow needs t >= 0")
    if counters is not None:
        counters.reaction += 1
    if f.has_flow:
        return f.flow(u0, t)
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    return _rk4(f, np.asarray(u0, dtype=float), t, substeps)


def reaction_minus_q_flow(f: ReactionTerm, q, u0: np.ndarray, t: float, substeps: int = 5,
                          counters: FlowCounters | None = None) -> np.ndarray:
    """RK4 flow of ``u' = f(u) - q`` with ``q`` frozen in time."""
    if t < 0:
        raise ValueError("reaction flow needs t >= 0")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if counters is not None:
        counters.reaction += 1
    qv = _field_of(q)
    return _rk4(lambda u: f(u) - qv, np.asarray(u0, dtype=float), t, substeps)


def projection_flow(q, u0: np.ndarray, t: float) -> np.ndarray:
    """Exact flow of ``u' = -q``: ``u0 - t q``.  Not counted."""
    return u0 - t * _field_of(q)


def diffusion_flow(d: DiscreteDiffusion, backend: MatFunBackend, u0: np.ndarray, t0: float,
                   tau: float, g=None, counters: FlowCounters | None = None) -> np.ndarray:
    """Exact flow of ``u' = D u + g`` with ``B u = b(t)`` from ``t0`` to ``t0 + tau``.

    The boundary forcing is fitted as ``c(t0 + s) = c0 + s c1`` over the step,
    which is exact when ``b`` is affine in time.
    """
    if tau <= 0:
        raise ValueError("diffusion flow needs tau > 0")
    grid = d.grid
    if np.shape(u0) != grid.shape:
        raise DimensionError(f"state has shape {np.shape(u0)}, expected {grid.shape}")
    if counters is not None:
        counters.diffusion += 1
    if not d.constrained:
        return u0 + tau * _field_of(g) if g is not None else np.array(u0, dtype=float)
    c0 = d.forcing_at(t0)
    c1 = (d.forcing_at(t0 + tau) - c0) / tau
    forcing = c0
    if g is not None:
        gv = _field_of(g)
        forcing = c0 + (d.interior(gv) if gv.shape == grid.shape else gv)
    interior = backend.combination(d, tau, d.interior(u0), forcing, c1 if np.any(c1) else None)
    return d.reconstruct(interior, d.boundary_values(t0 + tau), t0 + tau)
