"""Quick invariant checks against independent oracles, run by ``strangsplit selftest``."""
from __future__ import annotations

import math

import numpy as np

from ..flows import QuadraticReaction, ZeroReaction, diffusion_flow
from ..matfun import MatFunBackend
from ..mesh import BoundarySpec, Grid, build_laplacian, dirichlet, neumann, null_diffusion
from ..schemes import DiscreteProblem, SchemeConfig, integrate
from .problems import quadratic1d


def taylor_phi(X: np.ndarray, k: int, terms: int = 100) -> np.ndarray:
    """sum_j X^j / (j + k)! by plain Taylor summation (small ||X|| only)."""
    n = X.shape[0]
    out = np.zeros((n, n))
    term = np.eye(n) / math.factorial(k)
    for j in range(terms):
        out = out + term
        term = term @ X / (j + k + 1)
    return out


def random_negdef(rng: np.random.Generator, n: int = 8) -> np.ndarray:
    Q = rng.standard_normal((n, n))
    return -(Q @ Q.T) / n - 0.1 * np.eye(n)


def check_matfun(seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    backend = MatFunBackend("dense")
    worst = 0.0
    for _ in range(5):
        A, v = random_negdef(rng), rng.standard_normal(8)
        for tau in (0.01, 0.1, 1.0):
            got = backend.combination(A, tau, v, v, v)
            want = sum(tau**k * taylor_phi(tau * A, k) @ v for k in range(3))
            worst = max(worst, np.max(np.abs(got - want)) / np.max(np.abs(want)))
    return worst


def check_eigenvalues(n: int = 9) -> float:
    g = Grid(1, n)
    d = build_laplacian(g, BoundarySpec(left=dirichlet(0.0), right=dirichlet(0.0)))
    k = np.arange(1, n + 1)
    want = np.sort(-(4.0 / g.dx**2) * np.sin(k * np.pi * g.dx / 2.0) ** 2)
    got = np.sort(np.linalg.eigvalsh(d.A.toarray()))
    return float(np.max(np.abs(got - want)) / np.max(np.abs(want)))


def check_flow_counts() -> bool:
    spec = quadratic1d(1.0, n=20)
    p = spec.discretize()
    ok = True
    for scheme, law in (("strang", lambda N: 2 * N + 1), ("m3", lambda N: 3 * N),
                        ("m5a", lambda N: 3 * N), ("m5b", lambda N: 2 * N + 1)):
        for N in (1, 4):
            cfg = SchemeConfig(scheme, 0.1 / N, 0.1, corrector=spec.corrector_rule(scheme))
            ok &= integrate(p, cfg).counters.total == law(N)
    return ok


def check_reaction_exactness() -> float:
    g = Grid(1, 10)
    bc = BoundarySpec(left=dirichlet(1.0), right=neumann(1.0))
    d = null_diffusion(g, bc)
    f = QuadraticReaction(g, 1.0)
    u0 = 1.0 + 0.3 * g.nodes
    traj = integrate(DiscreteProblem(d, f, u0, 0.1), SchemeConfig("m5a", 0.02, 0.1))
    return float(np.max(np.abs(traj.final - f.flow(u0, 0.1))))


def check_linear_exactness() -> float:
    g = Grid(1, 30)
    bc = BoundarySpec(left=dirichlet(lambda s, t: np.full(np.shape(s), 1.0 + t)), right=neumann(0.5))
    d = build_laplacian(g, bc)
    u0 = d.reconstruct(d.interior(g.sample(lambda x: 1.0 + 0.5 * x + np.sin(np.pi * x))),
                       d.boundary_values(0.0), 0.0)
    exact = diffusion_flow(d, MatFunBackend(), u0, 0.0, 0.1)
    worst = 0.0
    for scheme in ("strang", "m3", "m5a", "m5b"):
        traj = integrate(DiscreteProblem(d, ZeroReaction(), u0, 0.1), SchemeConfig(scheme, 0.025, 0.1))
        worst = max(worst, float(np.max(np.abs(traj.final - exact))))
    return worst


CHECKS = (
    ("matfun Taylor oracle", check_matfun, 1e-11),
    ("Dirichlet Laplacian eigenvalues", check_eigenvalues, 1e-12),
    ("flow-count laws", check_flow_counts, None),
    ("D = 0 exactness of m5a", check_reaction_exactness, 1e-12),
    ("f = 0 exactness of all schemes", check_linear_exactness, 1e-9),
)


def run() -> list:
    """[(name, passed, value)] for every check."""
    results = []
    for name, check, tol in CHECKS:
        value = check()
        passed = bool(value) if tol is None else bool(value <= tol)
        results.append((name, passed, value))
    return results
