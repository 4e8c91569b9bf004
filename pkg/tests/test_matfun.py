import numpy as np
import pytest
import scipy.sparse as sp

from oracles import random_negdef, taylor_phi
from strangsplit.errors import ConfigError
from strangsplit.matfun import MatFunBackend, expm_action, phi1_action, phi2_action
from strangsplit.mesh import BoundarySpec, Grid, build_laplacian, dirichlet, neumann

DENSE = MatFunBackend("dense")
KRYLOV = MatFunBackend("krylov", tol=1e-12)


def rel(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


@pytest.mark.parametrize("backend", [DENSE, KRYLOV], ids=["dense", "krylov"])
def test_tau_zero_and_diagonal(backend):
    A = np.diag([-1.0, -2.0])
    v = np.array([1.0, 1.0])
    assert np.array_equal(expm_action(backend, A, 0.0, v), v)
    np.testing.assert_allclose(expm_action(backend, A, 1.0, v), np.exp([-1.0, -2.0]), rtol=1e-13)


@pytest.mark.parametrize("backend", [DENSE, KRYLOV], ids=["dense", "krylov"])
def test_phi_scalar_values(backend):
    A = np.array([[-1.0]])
    v = np.array([1.0])
    assert phi1_action(backend, A, 1.0, v)[0] == pytest.approx(1 - np.exp(-1), rel=1e-13)
    assert phi2_action(backend, A, 1.0, v)[0] == pytest.approx(np.exp(-1), rel=1e-13)
    Z = np.zeros((3, 3))
    w = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(phi1_action(backend, Z, 0.7, w), w, rtol=1e-14)
    np.testing.assert_allclose(phi2_action(backend, Z, 0.7, w), w / 2, rtol=1e-14)


def test_taylor_oracle_tau03():
    rng = np.random.default_rng(1)
    A = random_negdef(rng)
    v = rng.standard_normal(8)
    for k, action in enumerate((expm_action, phi1_action, phi2_action)):
        got = action(DENSE, A, 0.3, v)
        assert rel(got, taylor_phi(0.3 * A, k) @ v) < 1e-12


@pytest.mark.parametrize("tau", [0.01, 0.1, 1.0])
def test_phi_identities(tau):
    rng = np.random.default_rng(2)
    A = random_negdef(rng)
    v = rng.standard_normal(8)
    e = expm_action(DENSE, A, tau, v)
    p1 = phi1_action(DENSE, A, tau, v)
    p2 = phi2_action(DENSE, A, tau, v)
    assert rel(tau * A @ p1, e - v) < 1e-11
    assert rel(tau * A @ p2, p1 - v) < 1e-11


def test_linearity():
    rng = np.random.default_rng(4)
    A = random_negdef(rng)
    x, y = rng.standard_normal(8), rng.standard_normal(8)
    for action in (expm_action, phi1_action, phi2_action):
        lhs = action(DENSE, A, 0.5, 2.0 * x - 3.0 * y)
        rhs = 2.0 * action(DENSE, A, 0.5, x) - 3.0 * action(DENSE, A, 0.5, y)
        assert rel(lhs, rhs) < 1e-12


def test_semigroup():
    rng = np.random.default_rng(5)
    A = random_negdef(rng)
    v = rng.standard_normal(8)
    two = expm_action(DENSE, A, 0.2, expm_action(DENSE, A, 0.3, v))
    assert rel(two, expm_action(DENSE, A, 0.5, v)) < 1e-13


def test_doubling_cache_matches_direct():
    rng = np.random.default_rng(6)
    A = random_negdef(rng, 20)
    v0, v1, v2 = rng.standard_normal((3, 20))
    cached = MatFunBackend("dense")
    cached.combination(A, 0.01, v0, v1, v2)           # seeds the cache
    doubled = cached.combination(A, 0.08, v0, v1, v2)
    fresh = MatFunBackend("dense").combination(A, 0.08, v0, v1, v2)
    assert rel(doubled, fresh) < 1e-13


def laplacian_1d(n):
    g = Grid(1, n)
    return build_laplacian(g, BoundarySpec(left=dirichlet(1.0), right=neumann(1.0)))


@pytest.mark.parametrize("n", [50, 500])
@pytest.mark.parametrize("tau", [1e-3, 1e-2, 1e-1])
def test_krylov_matches_dense(n, tau):
    d = laplacian_1d(n)
    rng = np.random.default_rng(n)
    v = rng.standard_normal(n)
    krylov = MatFunBackend("krylov")
    for action in (expm_action, phi1_action, phi2_action):
        a, b = action(krylov, d, tau, v), action(DENSE, d, tau, v)
        assert rel(a, b) < 1e-9


def test_contraction():
    d = laplacian_1d(100)
    rng = np.random.default_rng(8)
    for tau in (1e-4, 1e-2, 1.0):
        v = rng.standard_normal(100)
        for backend in (DENSE, MatFunBackend("krylov")):
            w = expm_action(backend, d, tau, v)
            assert np.linalg.norm(w) <= np.linalg.norm(v) * (1 + 1e-12)


def test_sparse_input_and_combination():
    rng = np.random.default_rng(9)
    A = random_negdef(rng)
    v0, v1, v2 = rng.standard_normal((3, 8))
    want = sum(0.4**k * taylor_phi(0.4 * A, k) @ v for k, v in enumerate((v0, v1, v2)))
    assert rel(DENSE.combination(sp.csr_matrix(A), 0.4, v0, v1, v2), want) < 1e-12
    assert rel(KRYLOV.combination(A, 0.4, v0, v1, v2), want) < 1e-11


def test_backend_validation():
    with pytest.raises(ConfigError):
        MatFunBackend("magic")
    with pytest.raises(ConfigError):
        MatFunBackend("krylov", tol=0.0)
    with pytest.raises(ConfigError):
        MatFunBackend("dense", dense_cap=10).combination(np.eye(20), 1.0, np.ones(20))
    assert MatFunBackend().resolve(100) == "dense"
    assert MatFunBackend().resolve(5000) == "krylov"
    with pytest.raises(ValueError):
        DENSE.combination(np.eye(2), -1.0, np.ones(2))
