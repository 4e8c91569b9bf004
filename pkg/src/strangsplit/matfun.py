"""
Actions of exp(tA), phi_1(tA) and phi_2(tA) on vectors.

    phi_1(z) = (e^z - 1) / z,     phi_2(z) = (phi_1(z) - 1) / z

Everything goes through :meth:`MatFunBackend.combination`, which returns

    e^{tA} v0 + t phi_1(tA) v1 + t^2 phi_2(tA) v2,

i.e. the value at time t of w' = A w + v1 + s v2, w(0) = v0.

Two backends:

* dense: exp of the block matrix [[tA, I, 0], [0, 0, I], [0, 0, 0]] by
  scaling and squaring with Pade(13) (scipy), whose first block row is
  [e^{tA}, phi_1(tA), phi_2(tA)].  Results are cached per step size, and a
  step size twice a cached one is obtained by the doubling relations
      e^{2z} = (e^z)^2
      phi_1(2z) = (e^z + 1) phi_1(z) / 2
      phi_2(2z) = ((e^z + 1) phi_2(z) + phi_1(z)) / 4
* krylov: Arnoldi on the (n + p) x (n + p) augmented matrix
  [[A, v2/s, v1/s], [0, 0, 1], [0, 0, 0]] applied to [v0; 0; s], with the
  Saad a-posteriori error estimate and time sub-stepping when the subspace
  dimension is exhausted.
"""
from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import ConfigError, KrylovConvergenceError


def _matrix(A):
    """Accept a DiscreteDiffusion, a sparse matrix or an array."""
    if isinstance(A, np.ndarray) or sp.issparse(A):
        return A
    return A.A


@dataclass(eq=False)
class MatFunBackend:
    kind: str = "auto"
    krylov_dim: int = 64
    tol: float = 1e-10
    dense_cap: int = 2000
    max_substeps: int = 100_000
    cache_size: int = 16
    _cache: OrderedDict = field(default_factory=OrderedDict, init=False, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("auto", "dense", "krylov"):
            raise ConfigError(f"unknown matfun backend {self.kind!r}")
        if not self.tol > 0:
            raise ConfigError("Krylov tolerance must be positive")
        if self.krylov_dim < 2:
            raise ConfigError("Krylov dimension must be at least 2")

    def resolve(self, n: int) -> str:
        if self.kind == "auto":
            return "dense" if n <= self.dense_cap else "krylov"
        if self.kind == "dense" and n > self.dense_cap:
            raise ConfigError(f"dense backend limited to n <= {self.dense_cap}, got n = {n}")
        return self.kind

    def combination(self, A, tau: float, v0, v1=None, v2=None) -> np.ndarray:
        """``e^{tau A} v0 + tau phi_1(tau A) v1 + tau^2 phi_2(tau A) v2``."""
        M = _matrix(A)
        v0 = np.asarray(v0, dtype=float)
        if tau < 0:
            raise ValueError("tau must be non-negative")
        terms = (v1, v2)
        if tau == 0.0:
            return v0.copy()
        if self.resolve(M.shape[0]) == "dense":
            order = 2 if v2 is not None else (1 if v1 is not None else 0)
            funcs = self._dense_functions(M, tau, order)
            out = funcs[0] @ v0
            for k, v in enumerate(terms, start=1):
                if v is not None:
                    out = out + tau**k * (funcs[k] @ np.asarray(v, dtype=float))
            return out
        return _krylov_combination(M, tau, v0, v1, v2, self.krylov_dim, self.tol, self.max_substeps)

    # dense path ------------------------------------------------------------

    def _dense_functions(self, M, tau: float, order: int):
        key_matrix = id(M)
        with self._lock:
            hit = self._cache.get((key_matrix, tau))
            if hit is not None and len(hit[1]) > order:
                self._cache.move_to_end((key_matrix, tau))
                return hit[1]
            # look for tau / 2^j among cached entries
            base = None
            for j in range(1, 12):
                cand = self._cache.get((key_matrix, tau / 2**j))
                if cand is not None and len(cand[1]) > order:
                    base = (j, cand[1])
                    break
        if base is not None:
            j, funcs = base
            funcs = list(funcs)
            for _ in range(j):
                funcs = _double(funcs)
        else:
            dense = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
            funcs = _dense_phi(tau * dense, order)
        with self._lock:
            self._cache[(key_matrix, tau)] = (M, funcs)
            self._cache.move_to_end((key_matrix, tau))
            while len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        return funcs


def _dense_phi(X: np.ndarray, order: int):
    """[e^X, phi_1(X), ..., phi_order(X)] from one block exponential."""
    n = X.shape[0]
    if order == 0:
        return [scipy.linalg.expm(X)]
    big = np.zeros(((order + 1) * n, (order + 1) * n))
    big[:n, :n] = X
    for k in range(order):
        big[k * n:(k + 1) * n, (k + 1) * n:(k + 2) * n] = np.eye(n)
    E = scipy.linalg.expm(big)
    return [E[:n, k * n:(k + 1) * n].copy() for k in range(order + 1)]


def _double(funcs):
    E = funcs[0]
    out = [E @ E]
    if len(funcs) > 1:
        EpI = E + np.eye(E.shape[0])
        out.append(0.5 * EpI @ funcs[1])
    if len(funcs) > 2:
        out.append(0.25 * (EpI @ funcs[2] + funcs[1]))
    return out


# krylov path ---------------------------------------------------------------

def _krylov_combination(M, tau, v0, v1, v2, m_max, tol, max_substeps):
    n = M.shape[0]
    v1 = None if v1 is None or not np.any(v1) else np.asarray(v1, dtype=float)
    v2 = None if v2 is None or not np.any(v2) else np.asarray(v2, dtype=float)
    if v2 is not None:
        cols = [v2, v1 if v1 is not None else np.zeros(n)]
    elif v1 is not None:
        cols = [v1]
    else:
        return _expv(lambda x: M @ x, v0, tau, m_max, tol, max_substeps)
    p = len(cols)
    # column k multiplies s^(p-1-k); scale so the augmented entries match the forcing size
    scale = max(tau**(p - k) * np.linalg.norm(c) for k, c in enumerate(cols))
    W = np.column_stack(cols) / scale

    def matvec(x):
        y = np.empty_like(x)
        y[:n] = M @ x[:n] + W @ x[n:]
        y[n:-1] = x[n + 1:]
        y[-1] = 0.0
        return y

    x0 = np.zeros(n + p)
    x0[:n] = v0
    x0[-1] = scale
    return _expv(matvec, x0, tau, m_max, tol, max_substeps)[:n]


def _error_estimate(H, m, hnext, dt, beta):
    """Coefficients of the m-dim approximation and the Saad error estimate."""
    Hbar = np.zeros((m + 1, m + 1))
    Hbar[:m, :m] = dt * H[:m, :m]
    Hbar[m, m - 1] = dt * hnext
    F = scipy.linalg.expm(Hbar)
    return F[:m, 0], beta * abs(F[m, 0])


def _expv(matvec, x, t_end, m_max, tol, max_substeps):
    """exp(t_end * Op) x by restarted Arnoldi with adaptive sub-steps."""
    N = x.shape[0]
    m_max = min(m_max, N)
    w = np.array(x, dtype=float)
    t = 0.0
    dt = t_end
    steps = 0
    while t < t_end:
        beta = np.linalg.norm(w)
        if beta == 0.0:
            return w
        dt = min(dt, t_end - t)
        V = np.zeros((m_max + 1, N))
        H = np.zeros((m_max + 1, m_max))
        V[0] = w / beta
        coeffs = None
        m = 0
        for j in range(m_max):
            q = matvec(V[j])
            for _ in range(2):
                h = V[:j + 1] @ q
                q -= V[:j + 1].T @ h
                H[:j + 1, j] += h
            hnext = np.linalg.norm(q)
            H[j + 1, j] = hnext
            m = j + 1
            if hnext <= 1e-12 * max(1.0, np.abs(H[:m, :m]).max()):
                # invariant subspace: exact for the whole remaining interval
                dt = t_end - t
                coeffs = scipy.linalg.expm(dt * H[:m, :m])[:, 0]
                break
            V[j + 1] = q / hnext
            if m % 4 == 0 or m == m_max:
                c, err = _error_estimate(H, m, hnext, dt, beta)
                if err <= tol * beta * dt / t_end:
                    coeffs = c
                    break
        if coeffs is None:
            # subspace exhausted: shrink the step on the same basis
            for _ in range(60):
                c, err = _error_estimate(H, m, hnext, dt, beta)
                allowed = tol * beta * dt / t_end
                if err <= allowed:
                    coeffs = c
                    break
                dt *= max(0.1, 0.9 * (allowed / err) ** (1.0 / m))
            if coeffs is None:
                raise KrylovConvergenceError("Krylov step size underflow", err / beta)
            grow = False
        else:
            grow = m < m_max
        w = beta * (V[:m].T @ coeffs)
        t = t_end if t_end - (t + dt) <= 1e-14 * t_end else t + dt
        steps += 1
        if steps > max_substeps:
            raise KrylovConvergenceError(f"no convergence within {max_substeps} sub-steps",
                                         err / beta)
        if grow:
            dt *= 2.0
    return w


def expm_action(backend: MatFunBackend, A, tau: float, v) -> np.ndarray:
    return backend.combination(A, tau, v)


def phi1_action(backend: MatFunBackend, A, tau: float, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if tau == 0.0:
        return v.copy()
    return backend.combination(A, tau, np.zeros_like(v), v / tau)


def phi2_action(backend: MatFunBackend, A, tau: float, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if tau == 0.0:
        return 0.5 * v
    return backend.combination(A, tau, np.zeros_like(v), None, v / tau**2)
