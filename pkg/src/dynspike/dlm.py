"""Gaussian dynamic linear models: Kalman filter and FFBS.

The model is

    y_t     = f_t + F_t' theta_t + gamma_t u_t,           u_t ~ N(0, 1)
    theta_t = g_t + G_t theta_{t-1} + Gamma_t v_t,        v_t ~ N(0, I)

with theta_0 ~ N(m0, V0). All system quantities are stored per time point so
that the same kernels serve any realized regime path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np


class DegeneracyError(FloatingPointError):
    """A predictive variance or factorization broke down at some time index."""


@dataclass(frozen=True)
class ConditionalDlm:
    f: np.ndarray  # (T,)
    F: np.ndarray  # (T, q)
    gamma: np.ndarray  # (T,)
    g: np.ndarray  # (T, q)
    G: np.ndarray  # (T, q, q)
    Gamma: np.ndarray  # (T, q, q)
    m0: np.ndarray  # (q,)
    V0: np.ndarray  # (q, q)

    def __post_init__(self):
        T, q = self.F.shape
        shapes = {
            "f": (self.f.shape, (T,)),
            "gamma": (self.gamma.shape, (T,)),
            "g": (self.g.shape, (T, q)),
            "G": (self.G.shape, (T, q, q)),
            "Gamma": (self.Gamma.shape, (T, q, q)),
            "m0": (self.m0.shape, (q,)),
            "V0": (self.V0.shape, (q, q)),
        }
        for name, (got, want) in shapes.items():
            if got != want:
                raise ValueError(f"{name} has shape {got}, expected {want}")
        if np.any(self.gamma < 0):
            raise ValueError("gamma_t must be nonnegative")
        if not np.allclose(self.V0, self.V0.T):
            raise ValueError("V0 must be symmetric")

    @property
    def T(self) -> int:
        return self.F.shape[0]

    @property
    def q(self) -> int:
        return self.F.shape[1]

    def arrays(self):
        return (
            np.ascontiguousarray(self.f, dtype=np.float64),
            np.ascontiguousarray(self.F, dtype=np.float64),
            np.ascontiguousarray(self.gamma, dtype=np.float64),
            np.ascontiguousarray(self.g, dtype=np.float64),
            np.ascontiguousarray(self.G, dtype=np.float64),
            np.ascontiguousarray(self.Gamma, dtype=np.float64),
            np.ascontiguousarray(self.m0, dtype=np.float64),
            np.ascontiguousarray(self.V0, dtype=np.float64),
        )


@dataclass(frozen=True)
class FilterStats:
    m: np.ndarray  # (T, q) filtered means
    V: np.ndarray  # (T, q, q) filtered covariances
    R: np.ndarray  # (T,) one-step predictive variances
    loglik: np.ndarray  # (T,) log p(y_t | y_{1:t-1})

    @property
    def total_loglik(self) -> float:
        return float(self.loglik.sum())


# ---------------------------------------------------------------------------
# numba kernels
# ---------------------------------------------------------------------------

LOG_2PI = math.log(2.0 * math.pi)


@numba.njit(cache=True)
def _symmetrize(A):
    n = A.shape[0]
    for i in range(n):
        for k in range(i + 1, n):
            v = 0.5 * (A[i, k] + A[k, i])
            A[i, k] = v
            A[k, i] = v


@numba.njit(cache=True)
def _predict(m, V, g, G, Gam):
    """Prior moments of theta_t given y_{1:t-1}."""
    a = g + G @ m
    P = G @ V @ G.T + Gam @ Gam.T
    _symmetrize(P)
    return a, P


@numba.njit(cache=True)
def _update(a, P, f, F, gam, y):
    """One predictive-and-update step; returns (m, V, R, loglik) with R <= 0 flagged by R itself."""
    PF = P @ F
    R = F @ PF + gam * gam
    if not (R > 0.0):
        return a, P, R, -np.inf
    J = PF / R
    e = y - f - F @ a
    m = a + J * e
    V = P - np.outer(J, J) * R
    _symmetrize(V)
    ll = -0.5 * (LOG_2PI + math.log(R) + e * e / R)
    return m, V, R, ll


@numba.njit(cache=True)
def _kalman(f, F, gam, g, G, Gam, m0, V0, y):
    T, q = F.shape
    ms = np.empty((T, q))
    Vs = np.empty((T, q, q))
    Rs = np.empty(T)
    lls = np.empty(T)
    m = m0.copy()
    V = V0.copy()
    bad = -1
    for t in range(T):
        a, P = _predict(m, V, g[t], G[t], Gam[t])
        m, V, R, ll = _update(a, P, f[t], F[t], gam[t], y[t])
        if not (R > 0.0):
            bad = t
            break
        ms[t] = m
        Vs[t] = V
        Rs[t] = R
        lls[t] = ll
    return ms, Vs, Rs, lls, bad


@numba.njit(cache=True)
def _cholesky(A):
    """Lower Cholesky factor; returns (L, ok)."""
    n = A.shape[0]
    L = np.zeros((n, n))
    scale = 0.0
    for i in range(n):
        scale = max(scale, abs(A[i, i]))
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 1e-13 * scale or s <= 0.0:
            return L, False
        d = math.sqrt(s)
        L[j, j] = d
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / d
    return L, True


@numba.njit(cache=True)
def psd_factor(A):
    """Square-root factor S with S S' = A, tolerant of rank deficiency."""
    L, ok = _cholesky(A)
    if ok:
        return L
    w, U = np.linalg.eigh(A)
    tr = 0.0
    for i in range(w.shape[0]):
        tr += abs(w[i])
    n = A.shape[0]
    S = np.zeros((n, n))
    for k in range(n):
        if w[k] > 1e-12 * tr:
            r = math.sqrt(w[k])
            for i in range(n):
                S[i, k] = U[i, k] * r
    return S


@numba.njit(cache=True)
def _pinv_sym(A):
    w, U = np.linalg.eigh(A)
    tr = 0.0
    for i in range(w.shape[0]):
        tr += abs(w[i])
    n = A.shape[0]
    inv_w = np.zeros(n)
    for k in range(n):
        if w[k] > 1e-12 * tr:
            inv_w[k] = 1.0 / w[k]
    return (U * inv_w) @ U.T


@numba.njit(cache=True)
def _ffbs(m, V, g, G, Gam, z):
    """Backward sampling given filtered moments; z holds standard normals."""
    T, q = m.shape
    theta = np.empty((T, q))
    theta[T - 1] = m[T - 1] + psd_factor(V[T - 1]) @ z[T - 1]
    for t in range(T - 2, -1, -1):
        Gn = G[t + 1]
        P = Gn @ V[t] @ Gn.T + Gam[t + 1] @ Gam[t + 1].T
        _symmetrize(P)
        L, ok = _cholesky(P)
        VG = V[t] @ Gn.T
        if ok:
            # gain = V G' P^{-1} via two triangular solves
            gain = np.linalg.solve(P, VG.T).T
        else:
            gain = VG @ _pinv_sym(P)
        mean = m[t] + gain @ (theta[t + 1] - g[t + 1] - Gn @ m[t])
        cov = V[t] - gain @ Gn @ V[t]
        _symmetrize(cov)
        theta[t] = mean + psd_factor(cov) @ z[t]
    return theta


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def kalman_filter(dlm: ConditionalDlm, y) -> FilterStats:
    y = np.ascontiguousarray(y, dtype=np.float64)
    if y.shape != (dlm.T,):
        raise ValueError(f"y has shape {y.shape}, expected ({dlm.T},)")
    m, V, R, ll, bad = _kalman(*dlm.arrays(), y)
    if bad >= 0:
        raise DegeneracyError(f"non-positive predictive variance R_t at t={bad + 1}")
    return FilterStats(m=m, V=V, R=R, loglik=ll)


@numba.njit(cache=True)
def _ffbs_many(m, V, g, G, Gam, z):
    out = np.empty(z.shape)
    for i in range(z.shape[0]):
        out[i] = _ffbs(m, V, g, G, Gam, z[i])
    return out


def ffbs_sample(dlm: ConditionalDlm, y, stats: FilterStats, rng: np.random.Generator, size: int | None = None):
    """Joint draw(s) of theta_{1:T} from p(theta | y, system).

    Returns a (T, q) path, or (size, T, q) independent paths.
    """
    if stats.m.shape != (dlm.T, dlm.q) or np.shape(y) != (dlm.T,):
        raise ValueError("filter statistics or observations do not match the model dimensions")
    f, F, gam, g, G, Gam, m0, V0 = dlm.arrays()
    if size is None:
        z = rng.standard_normal((dlm.T, dlm.q))
        return _ffbs(stats.m, stats.V, g, G, Gam, z)
    z = rng.standard_normal((int(size), dlm.T, dlm.q))
    return _ffbs_many(stats.m, stats.V, g, G, Gam, z)


def build_conditional_dlm(X, K, tau2, phi, sigma2: float) -> ConditionalDlm:
    """Scaled-state regression DLM realized from a regime matrix.

    Loadings are ``F[t, j] = X[t, j] * sqrt(K[t, j] * tau2[j])``; the states
    follow independent stationary AR(1) processes with unit marginal variance
    (G = diag(phi), Gamma = diag(sqrt(1 - phi^2))) started from N(0, I).
    """
    X = np.asarray(X, dtype=float)
    K = np.asarray(K, dtype=float)
    tau2 = np.asarray(tau2, dtype=float)
    phi = np.asarray(phi, dtype=float)
    T, q = X.shape
    if K.shape != (T, q) or tau2.shape != (q,) or phi.shape != (q,):
        raise ValueError("inconsistent dimensions for X, K, tau2, phi")
    if np.any(K <= 0) or np.any(K > 1):
        raise ValueError("regime values must lie in (0, 1]")
    if np.any(tau2 <= 0):
        raise ValueError("tau2 must be positive")
    if np.any(phi <= 0) or np.any(phi >= 1):
        raise ValueError("phi must lie in (0, 1)")
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    F = X * np.sqrt(K * tau2)
    G1 = np.diag(phi)
    Gam1 = np.diag(np.sqrt(1.0 - phi**2))
    return ConditionalDlm(
        f=np.zeros(T),
        F=F,
        gamma=np.full(T, math.sqrt(sigma2)),
        g=np.zeros((T, q)),
        G=np.broadcast_to(G1, (T, q, q)).copy(),
        Gamma=np.broadcast_to(Gam1, (T, q, q)).copy(),
        m0=np.zeros(q),
        V0=np.eye(q),
    )


def unscale_states(beta_tilde, K, tau2) -> np.ndarray:
    """beta = sqrt(psi) * beta_tilde with psi = K * tau2."""
    return np.sqrt(np.asarray(K) * np.asarray(tau2)) * np.asarray(beta_tilde)
