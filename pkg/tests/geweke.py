"""Successive-conditional (Geweke) simulator for the full sampler.

Each replicate starts from an exact draw of (parameters, data) from the
prior, then alternates one MCMC iteration with a fresh draw of y given the
parameters. If every update leaves the posterior invariant, the parameters
after any number of cycles are still exact prior draws.
"""

import numpy as np
from scipy import stats

from dynspike.datagen import Dataset
from dynspike.priors import Hyperparameters, PriorKind, Q_prior_scale, slab_weight
from dynspike.sampler import McmcConfig, McmcState, mcmc_step

GEWEKE_HP = Hyperparameters(r=0.1, nu=5.0, a_tau=0.5, c_psi=6.0, C_psi=3.0, a_sigma=5.0, b_sigma=4.0,
                            a_phi=8.0, b_phi=2.0, a_omega=6.0, b_omega=2.0, alpha=50.0)


def prior_state(rng, T, q, kind: PriorKind, hp: Hyperparameters) -> McmcState:
    phi = rng.beta(hp.a_phi, hp.b_phi, size=q)
    w11 = rng.beta(hp.a_omega, hp.b_omega, size=q)
    w00 = rng.beta(hp.a_omega, hp.b_omega, size=q)
    Q = Q_prior_scale(kind, hp, slab_weight(w11, w00, hp.slab_weight)) / rng.gamma(hp.c_psi, size=q)
    if kind is PriorKind.NMIG:
        tau2 = Q / rng.gamma(hp.nu, size=q)
    else:
        tau2 = rng.gamma(hp.shape_tau(kind), 2.0 * Q)
    S = np.empty((T, q), dtype=bool)
    S[0] = rng.random(q) < 0.5
    for t in range(1, T):
        stay = np.where(S[t - 1], w11, w00)
        S[t] = np.where(rng.random(q) < stay, S[t - 1], ~S[t - 1])
    bt = np.empty((T, q))
    bt[0] = rng.standard_normal(q)
    for t in range(1, T):
        bt[t] = phi * bt[t - 1] + np.sqrt(1.0 - phi**2) * rng.standard_normal(q)
    sigma2 = hp.b_sigma / rng.gamma(hp.a_sigma)
    return McmcState(beta_tilde=bt, K=np.where(S, 1.0, hp.r), tau2=tau2, Q=Q, phi=phi, omega11=w11,
                     omega00=w00, sigma2=float(sigma2))


def draw_y(rng, X, state):
    return np.sum(X * state.beta, axis=1) + np.sqrt(state.sigma2) * rng.standard_normal(X.shape[0])


def run(kind, n_rep, n_cycles, seed, T=30, q=2, hp=GEWEKE_HP, step=mcmc_step):
    """Final (phi_1, omega11_1, omega00_1, sigma2) of each replicate."""
    kind = PriorKind.parse(kind)
    rng = np.random.default_rng(seed)
    cfg = McmcConfig(n_iter=2, n_burn=1, kind=kind, hp=hp)
    X = rng.standard_normal((T, q))
    out = np.empty((n_rep, 4))
    for i in range(n_rep):
        s = prior_state(rng, T, q, kind, hp)
        for _ in range(n_cycles):
            data = Dataset(y=draw_y(rng, X, s), X=X)
            s = step(s, data, cfg, rng)
        out[i] = s.phi[0], s.omega11[0], s.omega00[0], s.sigma2
    return out


def ks_distances(draws, hp=GEWEKE_HP):
    cdfs = (
        stats.beta(hp.a_phi, hp.b_phi).cdf,
        stats.beta(hp.a_omega, hp.b_omega).cdf,
        stats.beta(hp.a_omega, hp.b_omega).cdf,
        stats.invgamma(hp.a_sigma, scale=hp.b_sigma).cdf,
    )
    return {name: float(stats.kstest(draws[:, k], cdf).statistic)
            for k, (name, cdf) in enumerate(zip(("phi", "omega11", "omega00", "sigma2"), cdfs))}
