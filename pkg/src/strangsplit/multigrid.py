"""
Geometric multigrid V-cycles with damped Jacobi smoothing for the
eliminated-boundary Laplacian ``A`` of :mod:`strangsplit.mesh`.

Coarse grids need not be nested: prolongation linearly interpolates the
coarse field (boundary nodes filled by the homogeneous closure of that level)
at the fine interior nodes, restriction is its scaled transpose and the coarse
operators are Galerkin products ``R A P``.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import MultigridConvergenceError
from .mesh import DiscreteDiffusion, _elimination


@dataclass(frozen=True)
class MultigridConfig:
    cycles: int = 2
    pre_sweeps: int = 3
    post_sweeps: int = 3
    damping: float = 2.0 / 3.0
    tol: float | None = None      # iterate to this relative residual instead of a fixed count
    max_cycles: int = 200
    coarsest: int = 3


def _prolongation_1d(n_fine: int, n_coarse: int, lo, hi) -> sp.csr_matrix:
    dxc = 1.0 / (n_coarse + 1)
    # coarse interior -> coarse full (homogeneous boundary closure)
    ext = np.zeros((n_coarse + 2, n_coarse))
    ext[1:-1] = np.eye(n_coarse)
    _, w1, w2 = _elimination(lo, dxc)
    ext[0, 0], ext[0, 1] = w1, w2
    _, w1, w2 = _elimination(hi, dxc)
    ext[-1, -1], ext[-1, -2] = w1, w2
    # linear interpolation at the fine interior nodes
    xf = np.arange(1, n_fine + 1) / (n_fine + 1)
    pos = xf / dxc
    left = np.minimum(np.floor(pos).astype(int), n_coarse)
    frac = pos - left
    interp = np.zeros((n_fine, n_coarse + 2))
    rows = np.arange(n_fine)
    interp[rows, left] += 1.0 - frac
    interp[rows, np.minimum(left + 1, n_coarse + 1)] += frac
    return sp.csr_matrix(interp @ ext)


class Hierarchy:
    def __init__(self, d: DiscreteDiffusion, coarsest: int = 3):
        self.levels = [d.A.tocsr()]
        self.prolong = []
        n = d.grid.n
        bc = d.bc
        while n > coarsest:
            nc = (n - 1) // 2
            if nc < 2:
                # the closure of a coarse level needs two interior nodes
                break
            P = _prolongation_1d(n, nc, bc["left"], bc["right"])
            if d.grid.dim == 2:
                P = sp.kron(P, _prolongation_1d(n, nc, bc["bottom"], bc["top"]), format="csr")
            R = P.T.tocsr() * (((nc + 1) / (n + 1)) ** d.grid.dim)
            self.prolong.append((P, R))
            self.levels.append((R @ self.levels[-1] @ P).tocsr())
            n = nc
        self.coarse_dense = self.levels[-1].toarray()
        self.diagonals = [L.diagonal() for L in self.levels]

    def residual(self, level, x, rhs):
        return rhs - self.levels[level] @ x

    def v_cycle(self, level, x, rhs, cfg: MultigridConfig):
        if level == len(self.levels) - 1:
            return np.linalg.solve(self.coarse_dense, rhs)
        A = self.levels[level]
        dinv = cfg.damping / self.diagonals[level]
        for _ in range(cfg.pre_sweeps):
            x = x + dinv * (rhs - A @ x)
        P, R = self.prolong[level]
        r_coarse = R @ (rhs - A @ x)
        x = x + P @ self.v_cycle(level + 1, np.zeros(P.shape[1]), r_coarse, cfg)
        for _ in range(cfg.post_sweeps):
            x = x + dinv * (rhs - A @ x)
        return x


_HIERARCHIES: "weakref.WeakKeyDictionary[DiscreteDiffusion, dict]" = weakref.WeakKeyDictionary()


def hierarchy_for(d: DiscreteDiffusion, coarsest: int = 3) -> Hierarchy:
    per_d = _HIERARCHIES.setdefault(d, {})
    if coarsest not in per_d:
        per_d[coarsest] = Hierarchy(d, coarsest)
    return per_d[coarsest]


def solve(d: DiscreteDiffusion, rhs: np.ndarray, cfg: MultigridConfig = MultigridConfig(),
          x0: np.ndarray | None = None, history: list | None = None) -> np.ndarray:
    """Approximately solve ``A x = rhs`` by V-cycles.

    With ``cfg.tol`` unset exactly ``cfg.cycles`` cycles are run; otherwise
    cycles continue until the relative residual drops below ``cfg.tol`` and
    :class:`MultigridConvergenceError` is raised after ``cfg.max_cycles``.
    Relative residuals after each cycle are appended to ``history``.
    """
    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        return np.zeros_like(rhs)
    h = hierarchy_for(d, cfg.coarsest)
    x = np.zeros_like(rhs) if x0 is None else np.array(x0, dtype=float)
    budget = cfg.cycles if cfg.tol is None else cfg.max_cycles
    rel = np.inf
    for _ in range(budget):
        x = h.v_cycle(0, x, rhs, cfg)
        rel = np.linalg.norm(h.residual(0, x, rhs)) / scale
        if history is not None:
            history.append(rel)
        if cfg.tol is not None and rel <= cfg.tol:
            return x
    if cfg.tol is not None:
        raise MultigridConvergenceError(f"no convergence in {budget} V-cycles", rel)
    return x
