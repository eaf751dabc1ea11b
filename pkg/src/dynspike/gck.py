"""Gerlach-Carter-Kohn sampling of binary regime paths without the states.

For a dynamic mixture model whose system matrices at time t depend on the
regime only through its value at t, the single-site conditional

    p(K_t | y, K_{s != t})  oc  p(y_{t+1:n} | y_{1:t}, K) p(y_t | y_{1:t-1}, K_{1:t}) p(K_t | K_{s != t})

is evaluated for every t in one forward pass: the first factor comes from a
quadratic form (Omega_t, mu_t) computed once by a backward recursion, the
second from one Kalman step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numba
import numpy as np

from .dlm import ConditionalDlm, DegeneracyError, FilterStats, _predict, _symmetrize, _update


class NumericalError(FloatingPointError):
    pass


@dataclass(frozen=True)
class BackwardStats:
    Omega: np.ndarray  # (T, q, q)
    mu: np.ndarray  # (T, q)


@dataclass(frozen=True)
class RegimePrior:
    """Two-state Markov prior on {spike, slab}; index 0 is the spike ``r``.

    ``trans[i, k]`` is P(K_t = state k | K_{t-1} = state i).
    """

    trans: np.ndarray
    initial: float = 0.5

    def __post_init__(self):
        P = np.asarray(self.trans, dtype=float)
        if P.shape != (2, 2) or np.any(P < 0) or np.any(P > 1) or not np.allclose(P.sum(axis=1), 1.0):
            raise ValueError(f"transition matrix must be 2x2 row-stochastic, got {self.trans!r}")
        if not 0.0 <= self.initial <= 1.0:
            raise ValueError("initial slab probability must lie in [0, 1]")

    @classmethod
    def from_persistence(cls, omega11: float, omega00: float, initial: float = 0.5) -> "RegimePrior":
        return cls(np.array([[omega00, 1.0 - omega00], [1.0 - omega11, omega11]]), initial)

    def log_terms(self):
        with np.errstate(divide="ignore"):
            log_init = np.log(np.array([1.0 - self.initial, self.initial]))
            log_trans = np.log(np.asarray(self.trans, dtype=float))
        return log_init, log_trans


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------


@numba.njit(cache=True)
def _step_matrices(f, F, gam, g, G, Gam):
    """Conditional-noise factors for one transition: (a, A, B, C, r)."""
    q = F.shape[0]
    u = Gam.T @ F
    uu = u @ u
    r = uu + gam * gam
    if not (r > 0.0):
        return np.zeros(q), np.zeros((q, q)), np.zeros(q), np.zeros((q, q)), r
    B = Gam @ u / r
    IBF = np.eye(q) - np.outer(B, F)
    a = IBF @ g - B * f
    A = IBF @ G
    # symmetric square root of I - u u'/r is I - c u u'
    if uu > 0.0:
        c = (1.0 - math.sqrt(gam * gam / r)) / uu
    else:
        c = 0.0
    C = Gam @ (np.eye(q) - c * np.outer(u, u))
    return a, A, B, C, r


@numba.njit(cache=True)
def _backward(f, F, gam, g, G, Gam, y):
    T, q = F.shape
    Omega = np.zeros((T, q, q))
    mu = np.zeros((T, q))
    bad = -1
    for t in range(T - 2, -1, -1):
        n = t + 1
        a, A, B, C, r = _step_matrices(f[n], F[n], gam[n], g[n], G[n], Gam[n])
        if not (r > 0.0):
            bad = n
            break
        Om = Omega[n]
        OC = Om @ C
        D = C.T @ OC + np.eye(q)
        E = np.linalg.solve(D, OC.T)  # D^{-1} C' Omega
        M = Om - OC @ E
        GF = G[n].T @ F[n]
        Onew = A.T @ M @ A + np.outer(GF, GF) / r
        _symmetrize(Onew)
        Omega[t] = Onew
        # (I - Omega C D^{-1} C') = (I - E' C')' ... applied to the vector directly
        w = mu[n] - Om @ (a + B * y[n])
        w2 = w - OC @ np.linalg.solve(D, C.T @ w)
        mu[t] = A.T @ w2 + GF * (y[n] - f[n] - F[n] @ g[n]) / r
    return Omega, mu, bad


@numba.njit(cache=True)
def _log_future(m, V, Om, mu):
    """log p(y_{t+1:n} | y_{1:t}, K) up to a K_t-free constant."""
    q = m.shape[0]
    Mx = np.eye(q) + Om @ V
    sign, logdet = np.linalg.slogdet(Mx)
    d = mu - Om @ m
    x = np.linalg.solve(Mx, d)
    quad = m @ Om @ m - 2.0 * (mu @ m) - d @ V @ x
    return -0.5 * logdet - 0.5 * quad


@numba.njit(cache=True)
def _filter_from(m, V, f, F, gam, g, G, Gam, y, start):
    """Sum of log predictive densities for y[start:] from filtered (m, V)."""
    total = 0.0
    for s in range(start, y.shape[0]):
        a, P = _predict(m, V, g[s], G[s], Gam[s])
        m, V, R, ll = _update(a, P, f[s], F[s], gam[s], y[s])
        if not (R > 0.0):
            return -np.inf
        total += ll
    return total


@numba.njit(cache=True)
def _select(sys2, cur):
    out = np.empty(sys2.shape[1:])
    for t in range(cur.shape[0]):
        out[t] = sys2[cur[t], t]
    return out


@numba.njit(cache=True)
def _gck_sweep(f2, F2, gam2, g2, G2, Gam2, m0, V0, y, cur, log_init, log_trans, rng, naive):
    """One left-to-right sweep over a binary regime path.

    ``*2`` arrays hold the system realized under state 0 and 1 at each t.
    Returns the new path, the slab probabilities used at each t, and an error
    code (-1 if fine, else 1 + the failing time index).
    """
    T = y.shape[0]
    cur = cur.copy()
    f = _select(f2, cur)
    F = _select(F2, cur)
    gam = _select(gam2, cur)
    g = _select(g2, cur)
    G = _select(G2, cur)
    Gam = _select(Gam2, cur)
    if naive:
        Omega = np.zeros((1, 1, 1))
        mu = np.zeros((1, 1))
    else:
        Omega, mu, bad = _backward(f, F, gam, g, G, Gam, y)
        if bad >= 0:
            return cur, np.zeros(T), bad + 1
    prob1 = np.empty(T)
    m = m0.copy()
    V = V0.copy()
    lp = np.empty(2)
    q = m0.shape[0]
    ms = np.empty((2, q))
    Vs = np.empty((2, q, q))
    for t in range(T):
        for c in range(2):
            a, P = _predict(m, V, g2[c, t], G2[c, t], Gam2[c, t])
            mc, Vc, R, ll = _update(a, P, f2[c, t], F2[c, t], gam2[c, t], y[t])
            if not (R > 0.0):
                lp[c] = -np.inf
                ms[c] = a
                Vs[c] = P
                continue
            if t == 0:
                prior = log_init[c]
            else:
                prior = log_trans[cur[t - 1], c]
            if t < T - 1:
                prior += log_trans[c, cur[t + 1]]
                if naive:
                    fut = _filter_from(mc, Vc, f, F, gam, g, G, Gam, y, t + 1)
                else:
                    fut = _log_future(mc, Vc, Omega[t], mu[t])
            else:
                fut = 0.0
            lp[c] = ll + fut + prior
            ms[c] = mc
            Vs[c] = Vc
        hi = max(lp[0], lp[1])
        if hi == -np.inf or not np.isfinite(hi):
            return cur, prob1, t + 1
        w0 = math.exp(lp[0] - hi)
        w1 = math.exp(lp[1] - hi)
        p1 = w1 / (w0 + w1)
        prob1[t] = p1
        k = 1 if rng.random() < p1 else 0
        cur[t] = k
        if naive:
            # keep the reference path in sync with the committed value
            f[t] = f2[k, t]
            F[t] = F2[k, t]
            gam[t] = gam2[k, t]
            g[t] = g2[k, t]
            G[t] = G2[k, t]
            Gam[t] = Gam2[k, t]
        m = ms[k].copy()
        V = Vs[k].copy()
    return cur, prob1, -1


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def backward_recursion(dlm: ConditionalDlm, y) -> BackwardStats:
    """Backward quadratic-form recursion for p(y_{t+1:n} | theta_t, K)."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    f, F, gam, g, G, Gam, _, _ = dlm.arrays()
    Omega, mu, bad = _backward(f, F, gam, g, G, Gam, y)
    if bad >= 0:
        raise DegeneracyError(f"non-positive r_t at t={bad + 1}")
    return BackwardStats(Omega=Omega, mu=mu)


def filtered_factor(V: np.ndarray) -> np.ndarray:
    """Factor T with T T' = V that is null or has full column rank."""
    V = 0.5 * (V + V.T)
    w, U = np.linalg.eigh(V)
    tol = 1e-12 * max(np.abs(w).sum(), 1e-300)
    keep = w > tol
    return U[:, keep] * np.sqrt(w[keep])


def predictive_factor(m: np.ndarray, V: np.ndarray, Omega: np.ndarray, mu: np.ndarray) -> float:
    """log p(y_{t+1:n} | y_{1:t}, K) up to a constant, via the factor of V.

    ``m, V`` are the filtered moments at t and ``Omega, mu`` the backward
    statistics at the same t.
    """
    Tt = filtered_factor(V)
    quad = m @ Omega @ m - 2.0 * mu @ m
    if Tt.shape[1] == 0:
        return float(-0.5 * quad)
    H = Tt.T @ Omega @ Tt + np.eye(Tt.shape[1])
    h = Tt.T @ (mu - Omega @ m)
    sign, logdet = np.linalg.slogdet(H)
    val = -0.5 * logdet - 0.5 * (quad - h @ np.linalg.solve(H, h))
    if not np.isfinite(val):
        raise NumericalError("non-finite predictive factor")
    return float(val)


@dataclass(frozen=True)
class SweepResult:
    path: np.ndarray  # (T,) 0 = spike, 1 = slab
    slab_prob: np.ndarray  # (T,) conditional slab probability used at each t


def gck_sweep(dlm_spike: ConditionalDlm, dlm_slab: ConditionalDlm, y, current, prior: RegimePrior,
              rng: np.random.Generator, naive: bool = False) -> SweepResult:
    """Sample a binary path given the two per-time system alternatives.

    ``dlm_spike`` / ``dlm_slab`` are the systems realized with the regime set
    to the spike / slab value at every t (all other inputs fixed).
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    a0 = dlm_spike.arrays()
    a1 = dlm_slab.arrays()
    stacked = [np.ascontiguousarray(np.stack([u, v])) for u, v in zip(a0[:6], a1[:6])]
    cur = np.ascontiguousarray(current, dtype=np.int64)
    if cur.shape != y.shape or np.any((cur != 0) & (cur != 1)):
        raise ValueError("current path must be a 0/1 vector of length T")
    log_init, log_trans = prior.log_terms()
    path, prob, err = _gck_sweep(*stacked, a1[6], a1[7], y, cur, log_init, log_trans, rng, naive)
    if err > 0:
        raise NumericalError(f"zero probability mass for both regimes at t={err}")
    return SweepResult(path=path, slab_prob=prob)


def sample_regime_path(dlm_builder: Callable[[np.ndarray], ConditionalDlm], y, K, j: int, prior: RegimePrior,
                       r: float, rng: np.random.Generator, naive: bool = False) -> SweepResult:
    """Resample column ``j`` of the regime matrix ``K`` (values in {r, 1})."""
    K = np.asarray(K, dtype=float)
    Ks = K.copy()
    Ks[:, j] = r
    K1 = K.copy()
    K1[:, j] = 1.0
    current = (K[:, j] == 1.0).astype(np.int64)
    return gck_sweep(dlm_builder(Ks), dlm_builder(K1), y, current, prior, rng, naive=naive)
