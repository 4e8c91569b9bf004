"""
Registry of the benchmark problems.

    quadratic1d   u_t = u_xx + m u^2,              u(0) = 1, du/dn(1) = 1
    integro1d     u_t = u_xx - K[u^4],              u(0) = 2(2 - t), du/dn(1) = 0
    stiff2d       u_t = lap u + (1 - M sin(pi x) sin(pi y)) u^2,
                  u = (1 + e^y)/2 on the left face, Neumann e/2, -1/2, e/2 on right, bottom, top

All on (0, 1)^dim up to T = 0.1.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from ..corrector import CorrectorRule
from ..errors import ConfigError
from ..flows import IntegralReaction, QuadraticReaction, ReactionTerm
from ..mesh import BoundarySpec, Grid, build_laplacian, dirichlet, neumann
from ..schemes import DiscreteProblem

SCALES = ("desk", "paper")
IC_TOLERANCE = 1e-8


@dataclass
class ProblemSpec:
    name: str
    dim: int
    bc: BoundarySpec
    initial: Callable                       # u0(x) or u0(x, y)
    reaction: Callable                      # grid -> ReactionTerm
    n: int                                  # interior nodes per axis
    T: float = 0.1
    params: dict = field(default_factory=dict)
    tau_base: float = 0.02                  # sweep tau = tau_base * 2^-k
    k_range: tuple = (0, 6)
    tau_ref: float = 0.02 * 2.0**-14
    m3_expression: Callable | None = None   # (u_n, d) -> full field
    initial_grad: Callable | None = None    # exact gradient of u0, for the consistency check

    @property
    def label(self) -> str:
        extra = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.name}({extra})" if extra else self.name

    def taus(self, k_range: tuple | None = None) -> list:
        lo, hi = self.k_range if k_range is None else k_range
        return [self.tau_base * 2.0**-k for k in range(lo, hi + 1)]

    def grid(self) -> Grid:
        return Grid(self.dim, self.n)

    def with_overrides(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)

    def check_initial_condition(self, tol: float = IC_TOLERANCE) -> float:
        """Largest violation of ``B u0 = b(0)`` over the faces, using the exact gradient of u0."""
        if self.initial_grad is None:
            return 0.0
        s = np.linspace(0.0, 1.0, 33)[1:-1]
        worst = 0.0
        for face, bc in self.bc.items():
            if self.dim == 1:
                pts = (np.array([0.0 if face == "left" else 1.0]),)
                s_face = np.zeros(1)
            else:
                const = np.full_like(s, 0.0 if face in ("left", "bottom") else 1.0)
                pts = (const, s) if face in ("left", "right") else (s, const)
                s_face = s
            axis = 0 if face in ("left", "right") else 1
            sign = 1.0 if face in ("right", "top") else -1.0
            u = np.asarray(self.initial(*pts), dtype=float)
            dudn = sign * np.asarray(self.initial_grad(*pts)[axis], dtype=float)
            gap = bc.alpha * u + bc.beta * dudn - bc(s_face, 0.0)
            worst = max(worst, float(np.max(np.abs(gap))))
        if worst > tol:
            raise ConfigError(f"{self.label}: initial condition violates the boundary "
                              f"conditions by {worst:.3e}")
        return worst

    def corrector_rule(self, variant: str, smoother=None, extension: str | None = None) -> CorrectorRule:
        kwargs = {} if smoother is None else {"smoother": smoother}
        if variant == "m3" and extension != "harmonic" and self.m3_expression is not None:
            return CorrectorRule("m3", "analytic", self.m3_expression, **kwargs)
        if variant not in ("m3", "m5a", "m5b"):
            variant = "none"
        return CorrectorRule(variant, "harmonic", **kwargs)

    def discretize(self) -> DiscreteProblem:
        self.check_initial_condition()
        grid = self.grid()
        d = build_laplacian(grid, self.bc)
        sampled = grid.sample(self.initial)
        # boundary nodes from the interior and b(0), so that the discrete B u0 = b(0)
        u0 = d.reconstruct(d.interior(sampled), d.boundary_values(0.0), 0.0)
        return DiscreteProblem(d, self.reaction(grid), u0, self.T, self.label, self.m3_expression)


def _right_value(u):
    return float(np.ravel(u)[-1])


def quadratic1d(m: float = 1.0, n: int = 500) -> ProblemSpec:
    bc = BoundarySpec(left=dirichlet(1.0), right=neumann(1.0))

    def initial(x):
        return 1.0 + 2.0 / np.pi - (2.0 / np.pi) * np.cos(0.5 * np.pi * x)

    def initial_grad(x):
        return (np.sin(0.5 * np.pi * x),)

    def m3_expression(u, d):
        x = d.grid.nodes
        return m + 2.0 * m * x * _right_value(u)

    return ProblemSpec("quadratic1d", 1, bc, initial, lambda g: QuadraticReaction(g, m),
                       n, params={"m": m}, m3_expression=m3_expression, initial_grad=initial_grad)


def integro1d(n: int = 500) -> ProblemSpec:
    bc = BoundarySpec(left=dirichlet(lambda s, t: np.full(np.shape(s), 2.0 * (2.0 - t))),
                      right=neumann(0.0))

    def initial(x):
        return 2.0 * (np.cos(np.pi * x) + 1.0)

    def initial_grad(x):
        return (-2.0 * np.pi * np.sin(np.pi * x),)

    return ProblemSpec("integro1d", 1, bc, initial, IntegralReaction, n, initial_grad=initial_grad)


def stiff2d(M: float = 100.0, scale: str = "desk", n: int | None = None) -> ProblemSpec:
    if scale not in SCALES:
        raise ConfigError(f"scale must be one of {SCALES}, got {scale!r}")
    e = np.e
    bc = BoundarySpec(
        left=dirichlet(lambda s, t: 0.5 * (1.0 + np.exp(s))),
        right=neumann(0.5 * e),
        bottom=neumann(-0.5),
        top=neumann(0.5 * e),
    )

    def initial(x, y):
        return 0.5 * (np.exp(x) + np.exp(y))

    def initial_grad(x, y):
        return (0.5 * np.exp(x), 0.5 * np.exp(y))

    def coeff(x, y):
        return 1.0 - M * np.sin(np.pi * x) * np.sin(np.pi * y)

    def coeff_grad(x, y):
        return (-M * np.pi * np.cos(np.pi * x) * np.sin(np.pi * y),
                -M * np.pi * np.sin(np.pi * x) * np.cos(np.pi * y))

    if n is None:
        n = 127 if scale == "paper" else 63
    tau_ref = 0.1 * 2.0**-14 if scale == "paper" else 0.1 * 2.0**-11
    return ProblemSpec("stiff2d", 2, bc, initial,
                       lambda g: QuadraticReaction(g, coeff, coeff_grad),
                       n, params={"M": M}, tau_base=0.1, k_range=(0, 8), tau_ref=tau_ref,
                       initial_grad=initial_grad)


def stiff1d_m3_expression(M: float):
    """Closed-form m3 corrector of the 1D analogue of the stiff problem
    (u(0) = 1, du/dn(1) = 1, f = (1 - M sin(pi x)) u^2)."""

    def expression(u, d):
        ub = _right_value(u)
        return 1.0 + (M * np.pi * ub * ub + 2.0 * ub) * d.grid.nodes

    return expression


def builtin_problems(scale: str = "paper") -> list:
    return [quadratic1d(1.0), quadratic1d(5.0), integro1d(),
            stiff2d(1.0, scale), stiff2d(100.0, scale)]


PROBLEMS = ("quadratic1d", "integro1d", "stiff2d")


def get_problem(name: str, m: float | None = None, M: float | None = None,
                scale: str = "desk", n: int | None = None) -> ProblemSpec:
    if scale not in SCALES:
        raise ConfigError(f"scale must be one of {SCALES}, got {scale!r}")
    if name == "quadratic1d":
        return quadratic1d(1.0 if m is None else m, 500 if n is None else n)
    if name == "integro1d":
        return integro1d(500 if n is None else n)
    if name == "stiff2d":
        return stiff2d(100.0 if M is None else M, scale, n)
    raise ConfigError(f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}")
