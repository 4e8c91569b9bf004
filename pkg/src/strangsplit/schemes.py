"""
Splitting time integrators and the RK4 method-of-lines reference.

Schemes (flows are full-field maps; see :mod:`strangsplit.flows`):

    strang   u+ = F_{t/2} o D_t o F_{t/2} (u)                (reaction outermost)
    strang   u+ = D_{t/2} o F_t o D_{t/2} (u)                (ordering="diffusion")
    m3       u+ = D^{+q}_{t/2} o F^{-q}_t o D^{+q}_{t/2} (u),   B q = B f(u)
    m5a/m5b  u+ = F_{t/2} o P_{t/2} o D^{+q}_t o P_{t/2} o F_{t/2} (u)

with P_s(v) = v - s q the projection and q built from w = F_{t/2}(u).  With
``fused=True`` (strang, m5b) the reaction half-steps of consecutive steps are
merged into one full step, so N steps cost N diffusion and N + 1 reaction flows.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import corrector as corr
from .corrector import CorrectorRule
from .errors import ConfigError, NumericalFailure, StepFailure
from .flows import (FlowCounters, ReactionTerm, diffusion_flow, projection_flow,
                    reaction_flow, reaction_minus_q_flow)
from .matfun import MatFunBackend
from .mesh import DiscreteDiffusion, apply_boundary_reconstruction

SCHEMES = ("strang", "m3", "m5a", "m5b", "rk4")
_ALIASES = {"strangm3": "m3", "strangm5a": "m5a", "strangm5b": "m5b", "rk4ref": "rk4"}
FUSABLE = ("strang", "m5b")


def canonical_scheme(name: str) -> str:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in SCHEMES:
        raise ConfigError(f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}")
    return key


@dataclass
class DiscreteProblem:
    d: DiscreteDiffusion
    reaction: ReactionTerm
    u0: np.ndarray           # full initial field with B u0 = b(0)
    T: float = 0.1
    name: str = "problem"
    m3_expression: object = None  # optional closed-form corrector for m3

    @property
    def grid(self):
        return self.d.grid


@dataclass
class SchemeConfig:
    scheme: str = "m5b"
    tau: float = 0.01
    T: float = 0.1
    fused: bool | None = None          # None: fuse whenever the scheme allows it
    ordering: str = "reaction"         # classical Strang only: "reaction" or "diffusion" outermost
    reaction_substeps: int = 5         # RK4 sub-steps per half step (non-analytic reactions)
    backend: MatFunBackend = field(default_factory=MatFunBackend)
    corrector: CorrectorRule | None = None
    record: bool = True                # keep every u_n (fused runs then need uncounted half flows)

    def __post_init__(self):
        self.scheme = canonical_scheme(self.scheme)
        if self.ordering not in ("reaction", "diffusion"):
            raise ConfigError(f"ordering must be 'reaction' or 'diffusion', got {self.ordering!r}")
        if not self.tau > 0 or not self.T > 0:
            raise ConfigError("tau and T must be positive")
        ratio = self.T / self.tau
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ConfigError(f"T / tau = {ratio:.12g} is not a positive integer")
        if self.fused is None:
            self.fused = self.scheme in FUSABLE and (self.scheme != "strang" or self.ordering == "reaction")
        elif self.fused and not (self.scheme in FUSABLE and self.ordering == "reaction"):
            raise ConfigError(f"scheme {self.scheme!r} cannot fuse its reaction half steps")
        if self.reaction_substeps < 1:
            raise ConfigError("reaction_substeps must be >= 1")
        if self.corrector is None:
            variant = self.scheme if self.scheme in ("m3", "m5a", "m5b") else "none"
            self.corrector = CorrectorRule(variant=variant)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.tau))


@dataclass
class Trajectory:
    times: np.ndarray
    states: list
    counters: FlowCounters
    corrector_norms: list = field(default_factory=list)
    trace_errors: list = field(default_factory=list)   # max relative B q mismatch per step
    correctors: list = field(default_factory=list)     # q_n fields, one per step

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


class _Stepper:
    """Shared state of one integration run."""

    def __init__(self, problem: DiscreteProblem, cfg: SchemeConfig, counters: FlowCounters):
        self.p = problem
        self.cfg = cfg
        self.d = problem.d
        self.f = problem.reaction
        self.counters = counters
        self.norms = []
        self.trace_errors = []
        self.correctors = []

    def half(self, u, counted=True):
        return reaction_flow(self.f, u, 0.5 * self.cfg.tau, self.cfg.reaction_substeps,
                             self.counters if counted else None)

    def full(self, u):
        return reaction_flow(self.f, u, self.cfg.tau, 2 * self.cfg.reaction_substeps, self.counters)

    def diffuse(self, u, t0, tau, q=None):
        return diffusion_flow(self.d, self.cfg.backend, u, t0, tau, q, self.counters)

    def corrector(self, trace, u_n):
        rule = self.cfg.corrector
        q = corr.build(rule, trace, u_n, self.d)
        self.norms.append(q.norm())
        self.correctors.append(q.values)
        if trace is not None and rule.variant != "none":
            mismatch = corr.trace_discrepancy(q.values, trace, self.d)
            self.trace_errors.append(max(mismatch.values()))
        return q

    def m5_trace(self, u_n, w, t_n):
        variant = self.cfg.corrector.variant
        if variant == "m5a":
            return corr.boundary_trace_m5a(u_n, w, self.cfg.tau, self.d)
        if variant == "m5b":
            return corr.boundary_trace_m5b(w, self.d.boundary_values(t_n), self.cfg.tau, self.d)
        return None

    def m5_core(self, w, q, t_n):
        """Projection, corrected diffusion, projection."""
        h = 0.5 * self.cfg.tau
        v = projection_flow(q, w, h)
        v = self.diffuse(v, t_n, self.cfg.tau, q)
        return projection_flow(q, v, h)


def step_strang(st: _Stepper, u_n, t_n):
    tau = st.cfg.tau
    if st.cfg.ordering == "diffusion":
        v = st.diffuse(u_n, t_n, 0.5 * tau)
        v = st.full(v)
        return st.diffuse(v, t_n + 0.5 * tau, 0.5 * tau)
    v = st.half(u_n)
    v = st.diffuse(v, t_n, tau)
    return st.half(v)


def step_m3(st: _Stepper, u_n, t_n):
    tau = st.cfg.tau
    rule = st.cfg.corrector
    trace = corr.boundary_trace_m3(u_n, st.f, st.d) if rule.variant != "none" else None
    q = st.corrector(trace, u_n)
    v = st.diffuse(u_n, t_n, 0.5 * tau, q)
    v = reaction_minus_q_flow(st.f, q, v, tau, 2 * st.cfg.reaction_substeps, st.counters)
    return st.diffuse(v, t_n + 0.5 * tau, 0.5 * tau, q)


def step_m5(st: _Stepper, u_n, t_n):
    w = st.half(u_n)
    q = st.corrector(st.m5_trace(u_n, w, t_n), u_n)
    return st.half(st.m5_core(w, q, t_n))


_STEPS = {"strang": step_strang, "m3": step_m3, "m5a": step_m5, "m5b": step_m5}


def integrate(problem: DiscreteProblem, cfg: SchemeConfig) -> Trajectory:
    """Run ``cfg.steps`` steps of ``cfg.scheme`` from ``problem.u0``."""
    if cfg.scheme == "rk4":
        return rk4_reference(problem, cfg.tau, cfg.T, cfg.tau)
    counters = FlowCounters()
    st = _Stepper(problem, cfg, counters)
    N, tau = cfg.steps, cfg.tau
    u = np.array(problem.u0, dtype=float)
    states = [u]
    n = 0
    try:
        if cfg.fused:
            # w_n = F_{tau/2}(u_n), kept across steps; F_{tau/2} o F_{tau/2} = F_tau
            w = st.half(u)
            for n in range(N):
                t_n = n * tau
                if cfg.scheme == "strang":
                    v = st.diffuse(w, t_n, tau)
                else:
                    q = st.corrector(st.m5_trace(u, w, t_n), u)
                    v = st.m5_core(w, q, t_n)
                if n == N - 1:
                    u = st.half(v)
                    states.append(u)
                    break
                w = st.full(v)
                if cfg.record:
                    # observation only: not part of the scheme's cost
                    u = st.half(v, counted=False)
                    states.append(u)
        else:
            step = _STEPS[cfg.scheme]
            for n in range(N):
                u = step(st, u, n * tau)
                if cfg.record or n == N - 1:
                    states.append(u)
    except NumericalFailure as exc:
        raise StepFailure(n, exc) from exc
    times = np.arange(N + 1) * tau if cfg.record else np.array([0.0, N * tau])
    return Trajectory(times, states, counters, st.norms, st.trace_errors, st.correctors)


def rk4_reference(problem: DiscreteProblem, tau_ref: float, T: float | None = None,
                  output_every: float | None = None) -> Trajectory:
    """Classical RK4 on the method-of-lines system ``u' = A u + c(t) + f(u)``.

    States are stored every ``output_every`` (a multiple of ``tau_ref``).
    """
    T = problem.T if T is None else T
    output_every = tau_ref if output_every is None else output_every
    n_steps = int(round(T / tau_ref))
    stride = int(round(output_every / tau_ref))
    if abs(n_steps * tau_ref - T) > 1e-9 * T or abs(stride * tau_ref - output_every) > 1e-9 * output_every:
        raise ConfigError("tau_ref must divide both T and the output interval")
    if n_steps % stride:
        raise ConfigError("output interval must divide T")
    d, f, A = problem.d, problem.reaction, problem.d.A
    if not d.constrained:
        raise ConfigError("the RK4 reference needs a diffusion operator with boundary conditions")

    memo = {}

    def data(t):
        # stage times repeat (t + h/2 twice, t + h reused next step)
        if t not in memo:
            if len(memo) > 4:
                memo.clear()
            values = d.boundary_values(t)
            memo[t] = (values, d.forcing(values))
        return memo[t]

    def rhs(t, y):
        values, c = data(t)
        full = d.reconstruct(y, values, t)
        return A @ y + c + d.interior(f(full))

    y = d.interior(problem.u0)
    limit = 1e12 * max(1.0, np.max(np.abs(y)))
    states = [np.array(problem.u0, dtype=float)]
    h = tau_ref
    # instability is detected below at the checkpoints
    with np.errstate(over="ignore", invalid="ignore"):
        _rk4_loop(rhs, y, h, n_steps, stride, limit, states, d)
    times = np.arange(len(states)) * output_every
    return Trajectory(times, states, FlowCounters())


def _rk4_loop(rhs, y, h, n_steps, stride, limit, states, d):
    for k in range(n_steps):
        t, t_mid, t_end = k * h, (k + 0.5) * h, (k + 1) * h
        k1 = rhs(t, y)
        k2 = rhs(t_mid, y + 0.5 * h * k1)
        k3 = rhs(t_mid, y + 0.5 * h * k2)
        k4 = rhs(t_end, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (k + 1) % stride == 0:
            if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > limit:
                raise StepFailure(k, NumericalFailure("RK4 reference became unstable"))
            states.append(apply_boundary_reconstruction(d, y, (k + 1) * h))
