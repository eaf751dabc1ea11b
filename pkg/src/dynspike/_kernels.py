"""Allocation-free numba kernels specialised to the scaled-state regression DLM.

Model: y_t = sum_j X[t, j] * sc[t, j] * theta[t, j] + sigma u_t with
theta_t = phi * theta_{t-1} + s * v_t, s = sqrt(1 - phi^2), theta_0 ~ N(0, I),
where sc = sqrt(K * tau2). Diagonal transition structure turns most
matrix products into O(q^2) updates; the remaining O(q^3) work is one or two
Cholesky factorizations per time step.
"""

import math

import numba
import numpy as np

LOG_2PI = math.log(2.0 * math.pi)
# reassociation lets LLVM vectorize the reductions; NaN/inf semantics are kept
_FM = {"reassoc", "contract", "nsz", "arcp"}


@numba.njit(cache=True, fastmath=_FM)
def _chol_inplace(A, L):
    """L <- lower Cholesky factor of A; returns False when A is not PD."""
    n = A.shape[0]
    scale = 0.0
    for i in range(n):
        scale = max(scale, abs(A[i, i]))
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 1e-14 * scale or s <= 0.0:
            return False
        d = math.sqrt(s)
        L[j, j] = d
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / d
        for i in range(j):
            L[i, j] = 0.0
    return True


@numba.njit(cache=True, fastmath=_FM)
def _fsolve(L, b, out):
    """out <- L^{-1} b for lower-triangular L."""
    n = L.shape[0]
    for i in range(n):
        s = b[i]
        for k in range(i):
            s -= L[i, k] * out[k]
        out[i] = s / L[i, i]


@numba.njit(cache=True, fastmath=_FM)
def _bsolve(L, b, out):
    """out <- L'^{-1} b for lower-triangular L."""
    n = L.shape[0]
    for i in range(n - 1, -1, -1):
        s = b[i]
        for k in range(i + 1, n):
            s -= L[k, i] * out[k]
        out[i] = s / L[i, i]


@numba.njit(cache=True, fastmath=_FM)
def _psd_sample(S, z, L, out):
    """out <- draw from N(0, S) using z; eigen fallback for singular S."""
    n = S.shape[0]
    if _chol_inplace(S, L):
        for i in range(n):
            s = 0.0
            for k in range(i + 1):
                s += L[i, k] * z[k]
            out[i] = s
        return
    w, U = np.linalg.eigh(S)
    tr = 0.0
    for k in range(n):
        tr += abs(w[k])
    for i in range(n):
        out[i] = 0.0
    for k in range(n):
        if w[k] > 1e-12 * tr:
            r = math.sqrt(w[k]) * z[k]
            for i in range(n):
                out[i] += U[i, k] * r


@numba.njit(cache=True, fastmath=_FM)
def reg_backward(F, phi, s, sigma2, y, Omega, mu):
    """Backward quadratic forms for the regression DLM with loadings F (T, q).

    Fills Omega (T, q, q) and mu (T, q); Omega[T-1] = 0, mu[T-1] = 0.
    """
    T, q = F.shape
    u = np.empty(q)
    b = np.empty(q)
    B = np.empty(q)
    Ob = np.empty(q)
    OC = np.empty((q, q))
    D = np.empty((q, q))
    LD = np.zeros((q, q))
    W = np.empty((q, q))
    M = np.empty((q, q))
    MA = np.empty((q, q))
    tmpq = np.empty(q)
    tmp2 = np.empty(q)
    bOC = np.empty(q)
    MB = np.empty(q)
    BMA = np.empty(q)
    w = np.empty(q)
    for i in range(q):
        mu[T - 1, i] = 0.0
        for k in range(q):
            Omega[T - 1, i, k] = 0.0
    for t in range(T - 2, -1, -1):
        n = t + 1
        Fn = F[n]
        Om = Omega[n]
        mun = mu[n]
        uu = 0.0
        for i in range(q):
            u[i] = s[i] * Fn[i]
            uu += u[i] * u[i]
        r = uu + sigma2
        for i in range(q):
            b[i] = s[i] * u[i]
            B[i] = b[i] / r
        c = (1.0 - math.sqrt(sigma2 / r)) / uu if uu > 0.0 else 0.0
        # OC = Omega C with C = diag(s) - c b u'
        for i in range(q):
            acc = 0.0
            for k in range(q):
                acc += Om[i, k] * b[k]
            Ob[i] = acc
        for i in range(q):
            for k in range(q):
                OC[i, k] = Om[i, k] * s[k] - c * Ob[i] * u[k]
        # D = C' OC + I, C' X = diag(s) X - c u (b' X)
        for k in range(q):
            acc = 0.0
            for i in range(q):
                acc += b[i] * OC[i, k]
            bOC[k] = acc
        for i in range(q):
            for k in range(q):
                D[i, k] = s[i] * OC[i, k] - c * u[i] * bOC[k]
            D[i, i] += 1.0
        for i in range(q):
            for k in range(i + 1, q):
                v = 0.5 * (D[i, k] + D[k, i])
                D[i, k] = v
                D[k, i] = v
        _chol_inplace(D, LD)
        # rows of W hold LD^{-1} OC[i, :]', so W W' = OC D^{-1} OC'
        for i in range(q):
            _fsolve(LD, OC[i], W[i])
        # M = Omega - OC D^{-1} OC'
        for i in range(q):
            for k in range(i, q):
                acc = 0.0
                for l in range(q):
                    acc += W[i, l] * W[k, l]
                M[i, k] = Om[i, k] - acc
                M[k, i] = M[i, k]
        # A = (I - B F') diag(phi);  A' M A
        for i in range(q):
            acc = 0.0
            for k in range(q):
                acc += M[i, k] * B[k]
            MB[i] = acc
        for i in range(q):
            for k in range(q):
                MA[i, k] = (M[i, k] - MB[i] * Fn[k]) * phi[k]
        for k in range(q):
            acc = 0.0
            for i in range(q):
                acc += B[i] * MA[i, k]
            BMA[k] = acc
        Ot = Omega[t]
        for i in range(q):
            gi = phi[i] * Fn[i]
            for k in range(q):
                Ot[i, k] = phi[i] * (MA[i, k] - Fn[i] * BMA[k]) + gi * phi[k] * Fn[k] / r
        for i in range(q):
            for k in range(i + 1, q):
                v = 0.5 * (Ot[i, k] + Ot[k, i])
                Ot[i, k] = v
                Ot[k, i] = v
        # mu_t = A' (I - OC D^{-1} C') (mu - Omega B y) + G'F y / r
        yn = y[n]
        for i in range(q):
            acc = 0.0
            for k in range(q):
                acc += Om[i, k] * B[k]
            w[i] = mun[i] - acc * yn
        bw = 0.0
        for i in range(q):
            bw += b[i] * w[i]
        for i in range(q):
            tmpq[i] = s[i] * w[i] - c * u[i] * bw
        _fsolve(LD, tmpq, tmp2)
        _bsolve(LD, tmp2, tmpq)
        for i in range(q):
            acc = 0.0
            for k in range(q):
                acc += OC[i, k] * tmpq[k]
            w[i] -= acc
        bw = 0.0
        for i in range(q):
            bw += B[i] * w[i]
        for i in range(q):
            mu[t, i] = phi[i] * (w[i] - Fn[i] * bw) + phi[i] * Fn[i] * yn / r


@numba.njit(cache=True, fastmath=_FM)
def reg_column_sweep(X, sc, j, spike_scale, slab_scale, phi, sigma2, y, cur, log_init, log_trans, rng,
                     Omega, mu, prob_out):
    """GCK sweep of regime column j for the regression DLM.

    ``sc`` (T, q) holds sqrt(K * tau2) for the incoming regimes and is updated
    in place for column j; ``cur`` (T,) 0/1 is updated in place. Candidate
    evaluation combines the one-step prior N(a, P) with the backward
    quadratic form once per t, after which each candidate costs O(q^2).
    Returns -1 on success, else the failing time index.
    """
    T, q = X.shape
    s = np.empty(q)
    for i in range(q):
        s[i] = math.sqrt(1.0 - phi[i] * phi[i])
    F = np.empty((T, q))
    for t in range(T):
        for i in range(q):
            F[t, i] = X[t, i] * sc[t, i]
    reg_backward(F, phi, s, sigma2, y, Omega, mu)

    m = np.zeros(q)
    V = np.eye(q)
    a = np.empty(q)
    P = np.empty((q, q))
    LP = np.zeros((q, q))
    LPT = np.zeros((q, q))
    OL = np.empty((q, q))
    N = np.empty((q, q))
    LN = np.zeros((q, q))
    Lv = np.empty(q)
    tmp = np.empty(q)
    tmp2 = np.empty(q)
    mstar = np.empty(q)
    Ft = np.empty(q)
    k = np.empty(q)
    l0 = np.empty(q)
    lj = np.empty(q)
    lp = np.empty(2)
    cand = np.empty(2)
    cand[0] = spike_scale
    cand[1] = slab_scale
    for t in range(T):
        for i in range(q):
            a[i] = phi[i] * m[i]
            for l in range(q):
                P[i, l] = phi[i] * phi[l] * V[i, l]
            P[i, i] += s[i] * s[i]
        for i in range(q):
            Ft[i] = F[t, i]
        Ft[j] = 0.0
        if not _chol_inplace(P, LP):
            return t
        for i in range(q):
            for l in range(q):
                LPT[i, l] = LP[l, i]
        # l0 = LP' F_without_j, lj = LP[j, :]'  (so LP' F_c = l0 + lj * F_c[j])
        for i in range(q):
            acc = 0.0
            for l in range(i, q):
                acc += LPT[i, l] * Ft[l]
            l0[i] = acc
            lj[i] = LP[j, i]
        Om = Omega[t]
        # N = I + LP' Omega LP; OL[i, l] = (Omega LP)[l, i]
        for i in range(q):
            for l in range(q):
                acc = 0.0
                for r_ in range(i, q):
                    acc += Om[l, r_] * LPT[i, r_]
                OL[i, l] = acc
        for i in range(q):
            for l in range(i, q):
                acc = 0.0
                for r_ in range(i, q):
                    acc += LPT[i, r_] * OL[l, r_]
                N[i, l] = acc
                N[l, i] = acc
            N[i, i] += 1.0
        if not _chol_inplace(N, LN):
            return t
        # m* = a + LP N^{-1} LP' (mu - Omega a)
        for i in range(q):
            acc = 0.0
            for l in range(q):
                acc += Om[i, l] * a[l]
            tmp[i] = mu[t, i] - acc
        for i in range(q):
            acc = 0.0
            for l in range(i, q):
                acc += LPT[i, l] * tmp[l]
            Lv[i] = acc
        _fsolve(LN, Lv, tmp)
        _bsolve(LN, tmp, tmp2)
        for i in range(q):
            acc = 0.0
            for l in range(i + 1):
                acc += LP[i, l] * tmp2[l]
            mstar[i] = a[i] + acc
        mF0 = 0.0
        for i in range(q):
            mF0 += mstar[i] * Ft[i]
        for c in range(2):
            fj = X[t, j] * cand[c]
            for i in range(q):
                Lv[i] = l0[i] + lj[i] * fj
            _fsolve(LN, Lv, tmp)
            var = sigma2
            for i in range(q):
                var += tmp[i] * tmp[i]
            e = y[t] - (mF0 + mstar[j] * fj)
            ll = -0.5 * (LOG_2PI + math.log(var) + e * e / var)
            if t == 0:
                prior = log_init[c]
            else:
                prior = log_trans[cur[t - 1], c]
            if t < T - 1:
                prior += log_trans[c, cur[t + 1]]
            lp[c] = ll + prior
        hi = max(lp[0], lp[1])
        if not np.isfinite(hi):
            return t
        w0 = math.exp(lp[0] - hi)
        w1 = math.exp(lp[1] - hi)
        p1 = w1 / (w0 + w1)
        prob_out[t] = p1
        kk = 1 if rng.random() < p1 else 0
        cur[t] = kk
        sc[t, j] = cand[kk]
        Ft[j] = X[t, j] * cand[kk]
        # Kalman update with the committed loading
        R = sigma2
        for i in range(q):
            acc = 0.0
            for l in range(q):
                acc += P[i, l] * Ft[l]
            k[i] = acc
            R += Ft[i] * acc
        e = y[t]
        for i in range(q):
            e -= Ft[i] * a[i]
        for i in range(q):
            m[i] = a[i] + k[i] * e / R
            for l in range(q):
                V[i, l] = P[i, l] - k[i] * k[l] / R
        for i in range(q):
            for l in range(i + 1, q):
                v = 0.5 * (V[i, l] + V[l, i])
                V[i, l] = v
                V[l, i] = v
    return -1


@numba.njit(cache=True, fastmath=_FM)
def reg_ffbs(X, sc, phi, sigma2, y, z):
    """Kalman filter + backward sampling of the scaled states; returns theta (T, q)."""
    T, q = X.shape
    s2 = np.empty(q)
    for i in range(q):
        s2[i] = 1.0 - phi[i] * phi[i]
    ms = np.empty((T, q))
    Vs = np.empty((T, q, q))
    m = np.zeros(q)
    V = np.eye(q)
    a = np.empty(q)
    P = np.empty((q, q))
    Ft = np.empty(q)
    k = np.empty(q)
    for t in range(T):
        for i in range(q):
            a[i] = phi[i] * m[i]
            Ft[i] = X[t, i] * sc[t, i]
            for l in range(q):
                P[i, l] = phi[i] * phi[l] * V[i, l]
            P[i, i] += s2[i]
        R = sigma2
        for i in range(q):
            acc = 0.0
            for l in range(q):
                acc += P[i, l] * Ft[l]
            k[i] = acc
            R += Ft[i] * acc
        e = y[t]
        for i in range(q):
            e -= Ft[i] * a[i]
        for i in range(q):
            m[i] = a[i] + k[i] * e / R
            for l in range(q):
                V[i, l] = P[i, l] - k[i] * k[l] / R
        for i in range(q):
            for l in range(i + 1, q):
                v = 0.5 * (V[i, l] + V[l, i])
                V[i, l] = v
                V[l, i] = v
        ms[t] = m
        Vs[t] = V

    theta = np.empty((T, q))
    L = np.zeros((q, q))
    LP = np.zeros((q, q))
    H = np.empty((q, q))
    cov = np.empty((q, q))
    col = np.empty(q)
    tmp = np.empty(q)
    d = np.empty(q)
    draw = np.empty(q)
    _psd_sample(Vs[T - 1].copy(), z[T - 1], L, draw)
    for i in range(q):
        theta[T - 1, i] = ms[T - 1, i] + draw[i]
    for t in range(T - 2, -1, -1):
        Vt = Vs[t]
        for i in range(q):
            for l in range(q):
                P[i, l] = phi[i] * phi[l] * Vt[i, l]
            P[i, i] += s2[i]
        _chol_inplace(P, LP)  # PD since s2 > 0
        # rows of H hold LP^{-1} diag(phi) V_t[:, l], i.e. H = (LP^{-1} diag(phi) V_t)'
        for l in range(q):
            for i in range(q):
                col[i] = phi[i] * Vt[l, i]
            _fsolve(LP, col, H[l])
        for i in range(q):
            for l in range(i, q):
                acc = 0.0
                for r_ in range(q):
                    acc += H[i, r_] * H[l, r_]
                cov[i, l] = Vt[i, l] - acc
                cov[l, i] = cov[i, l]
        for i in range(q):
            d[i] = theta[t + 1, i] - phi[i] * ms[t, i]
        _fsolve(LP, d, tmp)
        _psd_sample(cov, z[t], L, draw)
        for i in range(q):
            acc = 0.0
            for r_ in range(q):
                acc += H[i, r_] * tmp[r_]
            theta[t, i] = ms[t, i] + acc + draw[i]
    return theta
