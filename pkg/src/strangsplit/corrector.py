"""
Corrector functions q_n: a boundary trace prescribed by one of the rules
below, extended into the interior either harmonically (multigrid) or from a
closed-form expression.

Trace rules (tau is the full outer step, w = reaction half-step of u_n):

    m5a:  B q = (2 / tau) (B w - B u_n)
    m5b:  B q = (2 / tau) (B w - b(t_n))
    m3:   B q = B f(u_n)
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import multigrid
from .errors import BoundarySpecError, CorrectorBoundError, TraceMismatchError
from .flows import ReactionTerm
from .mesh import DiscreteDiffusion, build_laplacian
from .multigrid import MultigridConfig

DEFAULT_CAP = 1e8


@dataclass
class Corrector:
    values: np.ndarray              # full field, boundary nodes included
    trace: dict                     # requested B q per face
    provenance: str = "zero"        # "analytic" | "harmonic" | "zero"

    def norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def check(self, cap: float = DEFAULT_CAP) -> "Corrector":
        if not np.all(np.isfinite(self.values)):
            raise CorrectorBoundError("corrector has non-finite values")
        size = self.norm()
        if size > cap:
            raise CorrectorBoundError(f"corrector sup-norm {size:.3e} exceeds cap {cap:.3e}")
        return self


@dataclass(frozen=True)
class CorrectorRule:
    """How a scheme builds its corrector.

    ``variant`` is one of ``"m5a"``, ``"m5b"``, ``"m3"`` or ``"none"``.
    ``expression(u_n, d)`` (analytic extension) returns a full field.
    """

    variant: str = "none"
    extension: str = "harmonic"
    expression: Callable | None = None
    smoother: MultigridConfig = field(default_factory=MultigridConfig)
    trace_rtol: float = 1e-8
    cap: float = DEFAULT_CAP

    def __post_init__(self):
        if self.variant not in ("m5a", "m5b", "m3", "none"):
            raise ValueError(f"unknown corrector variant {self.variant!r}")
        if self.extension not in ("harmonic", "analytic"):
            raise ValueError(f"unknown corrector extension {self.extension!r}")
        if self.extension == "analytic" and self.expression is None and self.variant != "none":
            raise ValueError("analytic extension needs an expression")


def boundary_trace_m5a(u_n: np.ndarray, w: np.ndarray, tau: float, d: DiscreteDiffusion) -> dict:
    if tau <= 0:
        raise ValueError("trace needs tau > 0")
    bw, bu = d.boundary_operator(w), d.boundary_operator(u_n)
    return {face: (2.0 / tau) * (bw[face] - bu[face]) for face in bw}


def boundary_trace_m5b(w: np.ndarray, b_n: Mapping[str, np.ndarray], tau: float,
                       d: DiscreteDiffusion) -> dict:
    if tau <= 0:
        raise ValueError("trace needs tau > 0")
    bw = d.boundary_operator(w)
    return {face: (2.0 / tau) * (bw[face] - np.asarray(b_n[face])) for face in bw}


def boundary_trace_m3(u_n: np.ndarray, f: ReactionTerm, d: DiscreteDiffusion) -> dict:
    """``B f(u_n)``; chain rule when ``f`` supports it, else ``B`` on the field ``f(u_n)``."""
    trace = f.boundary_trace(u_n, d)
    if trace is None:
        trace = d.boundary_operator(f(u_n))
    return trace


def trace_discrepancy(values: np.ndarray, trace: Mapping[str, np.ndarray], d: DiscreteDiffusion) -> dict:
    """Relative mismatch per face between ``B values`` and ``trace``."""
    got = d.boundary_operator(values)
    out = {}
    for face, want in trace.items():
        want = np.asarray(want)
        diff = float(np.max(np.abs(got[face] - want)))
        ref = max(float(np.max(np.abs(want))), float(np.max(np.abs(got[face]))))
        out[face] = 0.0 if diff == 0.0 else diff / ref
    return out


_LAPLACIANS: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _laplacian_for(d: DiscreteDiffusion) -> DiscreteDiffusion:
    # a diffusion-free problem still extends its correctors harmonically
    if d not in _LAPLACIANS:
        _LAPLACIANS[d] = build_laplacian(d.grid, d.bc)
    return _LAPLACIANS[d]


def extend_harmonic(trace: Mapping[str, np.ndarray], d: DiscreteDiffusion,
                    smoother: MultigridConfig = MultigridConfig(),
                    history: list | None = None) -> Corrector:
    """Discrete ``Delta q = 0`` in the interior with ``B q = trace``."""
    if all(bc.alpha == 0.0 for bc in d.bc.values()):
        raise BoundarySpecError("harmonic extension is not unique with pure Neumann data")
    trace = {face: np.asarray(v, dtype=float) for face, v in trace.items()}
    if not all(np.all(np.isfinite(v)) for v in trace.values()):
        raise ValueError("non-finite corrector trace")
    op = d if d.constrained else _laplacian_for(d)
    rhs = -op.forcing(trace)
    q_int = multigrid.solve(op, rhs, smoother, history=history)
    values = op.reconstruct(q_int, trace)
    return Corrector(values, trace, "harmonic" if np.any(rhs) else "zero")


def extend_analytic(expression: Callable, u_n: np.ndarray, d: DiscreteDiffusion,
                    trace: Mapping[str, np.ndarray] | None = None, rtol: float = 1e-8) -> Corrector:
    """Sample ``expression(u_n, d)`` on the grid and verify its trace."""
    values = np.broadcast_to(np.asarray(expression(u_n, d), dtype=float), d.grid.shape).copy()
    if trace is not None:
        for face, rel in trace_discrepancy(values, trace, d).items():
            if rel > rtol:
                raise TraceMismatchError(face, rel)
    else:
        trace = d.boundary_operator(values)
    return Corrector(values, dict(trace), "analytic")


def zero_corrector(d: DiscreteDiffusion) -> Corrector:
    trace = {face: np.zeros(d.grid.face_positions(face).shape) for face in d.bc}
    return Corrector(d.grid.zeros(), trace, "zero")


def build(rule: CorrectorRule, trace: Mapping[str, np.ndarray] | None, u_n: np.ndarray,
          d: DiscreteDiffusion) -> Corrector:
    if rule.variant == "none" or trace is None:
        return zero_corrector(d)
    if rule.extension == "analytic":
        q = extend_analytic(rule.expression, u_n, d, trace, rule.trace_rtol)
    else:
        q = extend_harmonic(trace, d, rule.smoother)
    return q.check(rule.cap)
