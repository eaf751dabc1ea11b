"""MCMC for dynamic regression with Markov-switching spike-and-slab variances.

One iteration updates, in order:

1. each regime column ``K[:, j]`` by a GCK sweep with the states integrated out;
2. the scaled states jointly by FFBS given the new regimes;
3. ``sigma2`` from its inverse-gamma conditional;
4. each ``tau2[j]`` given the unscaled path (the scaled path is then
   recomputed so that ``beta`` itself is unchanged);
5. each ``phi[j]`` by Metropolis-Hastings with a mean-matching Beta proposal;
6. each pair of transition probabilities by a Beta proposal from the regime
   counts, corrected for the dependence of the ``Q`` prior on them;
7. each ``Q[j]``.

Drawing the regimes before the states keeps the marginal-then-conditional
pair (K, then states given K) a valid blocked update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .datagen import Dataset
from .dists import ParameterDomainError, sample_beta, sample_inv_gamma
from .dlm import build_conditional_dlm
from .gck import RegimePrior, sample_regime_path
from .priors import (
    Hyperparameters,
    PriorKind,
    Q_prior_logpdf,
    initial_Q,
    log_beta_pdf,
    preset,
    sample_Q,
    sample_tau2,
    slab_weight,
)


class SamplerError(RuntimeError):
    """A Gibbs/MH sub-step failed; ``step`` names it."""

    def __init__(self, step: str, message: str, iteration: int | None = None):
        self.step = step
        self.detail = message
        self.iteration = iteration
        where = f"iteration {iteration}, " if iteration is not None else ""
        super().__init__(f"{where}step '{step}': {message}")


@dataclass
class McmcState:
    beta_tilde: np.ndarray  # (T, q)
    K: np.ndarray  # (T, q) values in {r, 1}
    tau2: np.ndarray  # (q,)
    Q: np.ndarray  # (q,)
    phi: np.ndarray  # (q,)
    omega11: np.ndarray  # (q,)
    omega00: np.ndarray  # (q,)
    sigma2: float
    phi_accepted: np.ndarray | None = None
    omega_accepted: np.ndarray | None = None

    @property
    def psi(self) -> np.ndarray:
        return self.K * self.tau2

    @property
    def beta(self) -> np.ndarray:
        return np.sqrt(self.psi) * self.beta_tilde

    def copy(self) -> "McmcState":
        return McmcState(**{k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()})

    def check(self, r: float) -> None:
        problems = []
        if not np.all(np.isfinite(self.beta_tilde)):
            problems.append("non-finite scaled states")
        if not np.all((self.K == r) | (self.K == 1.0)):
            problems.append("regimes outside {r, 1}")
        for name in ("tau2", "Q"):
            v = getattr(self, name)
            if not np.all(np.isfinite(v) & (v > 0)):
                problems.append(f"{name} not positive")
        for name in ("phi", "omega11", "omega00"):
            v = getattr(self, name)
            if not np.all((v > 0) & (v < 1)):
                problems.append(f"{name} outside (0, 1)")
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            problems.append("sigma2 not positive")
        if problems:
            raise SamplerError("check", "; ".join(problems))


BLOCKS = ("regimes", "states", "sigma2", "tau2", "phi", "omega", "Q")


@dataclass(frozen=True)
class McmcConfig:
    n_iter: int = 10_000
    n_burn: int = 5_000
    seed: int = 0
    kind: PriorKind = PriorKind.NMIG
    hp: Hyperparameters = field(default_factory=lambda: preset("example1"))
    thin: int = 1
    save_paths: bool = False
    naive_gck: bool = False
    debug: bool = False
    # blocks held at their current value, e.g. ("regimes", "phi")
    fixed: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", PriorKind.parse(self.kind))
        unknown = set(self.fixed) - set(BLOCKS)
        if unknown:
            raise ValueError(f"unknown block(s) {sorted(unknown)}; choose from {BLOCKS}")
        if self.n_iter < 1 or self.n_burn < 0 or self.n_burn >= self.n_iter:
            raise ValueError(f"need 0 <= n_burn < n_iter, got n_burn={self.n_burn}, n_iter={self.n_iter}")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        self.hp.validate_for(self.kind)

    def replace(self, **kwargs) -> "McmcConfig":
        return replace(self, **kwargs)


# ---------------------------------------------------------------------------
# individual updates
# ---------------------------------------------------------------------------


def initial_state(data: Dataset, kind: PriorKind, hp: Hyperparameters) -> McmcState:
    T, q = data.X.shape
    a_phi = hp.a_phi / (hp.a_phi + hp.b_phi)
    a_om = hp.a_omega / (hp.a_omega + hp.b_omega)
    sigma2 = float(np.var(data.y, ddof=1)) if T > 1 else 1.0
    return McmcState(
        beta_tilde=np.zeros((T, q)),
        K=np.ones((T, q)),
        tau2=np.ones(q),
        Q=np.full(q, initial_Q(kind, hp)),
        phi=np.full(q, a_phi),
        omega11=np.full(q, a_om),
        omega00=np.full(q, a_om),
        sigma2=sigma2 if sigma2 > 0 else 1.0,
    )


def _ar_moments(bt):
    x0 = bt[:-1]
    x1 = bt[1:]
    return float(x0 @ x0), float(x1 @ x0), float(x1 @ x1)


def phi_log_target(phi, beta_tilde_j, hp: Hyperparameters):
    """Unnormalized log conditional of phi given one scaled path.

    Beta prior times the AR(1) transition densities of the scaled path for
    t >= 2 (the stationary start does not involve phi).
    """
    phi = np.asarray(phi, dtype=float)
    s00, s01, s11 = _ar_moments(np.asarray(beta_tilde_j, dtype=float))
    n = len(beta_tilde_j) - 1
    one_m = 1.0 - phi * phi
    quad = s11 - 2.0 * phi * s01 + phi * phi * s00
    return (hp.a_phi - 1.0) * np.log(phi) + (hp.b_phi - 1.0) * np.log1p(-phi) - 0.5 * n * np.log(one_m) \
        - 0.5 * quad / one_m


def _proposal_logpdf(x, current, alpha):
    return log_beta_pdf(x, alpha, alpha * (1.0 - current) / current)


def mh_update_phi(phi_j: float, beta_j, psi_j, hp: Hyperparameters, rng: np.random.Generator):
    """One MH step for an AR coefficient; returns (phi, accepted)."""
    bt = np.asarray(beta_j, dtype=float) / np.sqrt(np.asarray(psi_j, dtype=float))
    return _mh_phi_scaled(phi_j, bt, hp, rng)


def _mh_phi_scaled(phi_j, bt, hp, rng):
    alpha = hp.alpha
    prop = float(rng.beta(alpha, alpha * (1.0 - phi_j) / phi_j))
    u = rng.random()
    if not (0.0 < prop < 1.0) or prop >= 1.0 - 1e-15:
        return phi_j, False
    log_ratio = (phi_log_target(prop, bt, hp) - phi_log_target(phi_j, bt, hp)
                 + _proposal_logpdf(phi_j, prop, alpha) - _proposal_logpdf(prop, phi_j, alpha))
    if np.isfinite(log_ratio) and math.log(u) < log_ratio:
        return prop, True
    return phi_j, False


def transition_counts(S_j) -> tuple[int, int, int, int]:
    """(#1->1, #1->0, #0->0, #0->1) over t = 2..T for a 0/1 regime path."""
    s = np.asarray(S_j, dtype=np.int64)
    pairs = np.bincount(2 * s[:-1] + s[1:], minlength=4)
    return int(pairs[3]), int(pairs[2]), int(pairs[0]), int(pairs[1])


def update_transition_probs(K_j, hp: Hyperparameters, rng: np.random.Generator):
    """Beta draws of (omega11, omega00) given one regime path with values in {r, 1}."""
    n11, n10, n00, n01 = transition_counts(np.asarray(K_j) == 1.0)
    w11 = float(sample_beta(hp.a_omega + n11, hp.b_omega + n10, rng))
    w00 = float(sample_beta(hp.a_omega + n00, hp.b_omega + n01, rng))
    return w11, w00


def _update_omega(S_j, w11, w00, Q_j, kind, hp, rng):
    """Beta proposal from the counts, accepted by the ratio of Q prior densities."""
    p11, p00 = update_transition_probs(np.where(S_j, 1.0, hp.r), hp, rng)
    u = rng.random()
    p11 = min(max(p11, 1e-12), 1.0 - 1e-12)
    p00 = min(max(p00, 1e-12), 1.0 - 1e-12)
    w_new = _slab_weight_scalar(p11, p00, hp.slab_weight)
    w_old = _slab_weight_scalar(w11, w00, hp.slab_weight)
    log_ratio = Q_prior_logpdf(kind, hp, Q_j, w_new) - Q_prior_logpdf(kind, hp, Q_j, w_old)
    if math.log(u) < log_ratio:
        return p11, p00, True
    return w11, w00, False


def _slab_weight_scalar(w11, w00, mode):
    if mode == "persistence":
        return w11
    return (1.0 - w00) / (2.0 - w00 - w11)


def _log_regime_terms(w11, w00):
    with np.errstate(divide="ignore"):
        log_trans = np.log(np.array([[w00, 1.0 - w00], [1.0 - w11, w11]]))
    return np.log(np.array([0.5, 0.5])), log_trans


def sample_regimes(state: McmcState, data: Dataset, hp: Hyperparameters, rng: np.random.Generator,
                   naive: bool = False) -> np.ndarray:
    """Sweep all regime columns j = 1..q in order; returns the new K."""
    X = np.ascontiguousarray(data.X, dtype=float)
    y = np.ascontiguousarray(data.y, dtype=float)
    T, q = X.shape
    K = state.K.copy()
    if naive:
        def build(KK):
            return build_conditional_dlm(X, KK, state.tau2, state.phi, state.sigma2)

        for j in range(q):
            prior = RegimePrior.from_persistence(state.omega11[j], state.omega00[j])
            res = sample_regime_path(build, y, K, j, prior, hp.r, rng, naive=True)
            K[:, j] = np.where(res.path == 1, 1.0, hp.r)
        return K
    sc = np.ascontiguousarray(np.sqrt(K * state.tau2))
    Omega = np.empty((T, q, q))
    mu = np.empty((T, q))
    prob = np.empty(T)
    phi = np.ascontiguousarray(state.phi, dtype=float)
    for j in range(q):
        cur = (K[:, j] == 1.0).astype(np.int64)
        log_init, log_trans = _log_regime_terms(state.omega11[j], state.omega00[j])
        tau = math.sqrt(state.tau2[j])
        err = _kernels.reg_column_sweep(X, sc, j, math.sqrt(hp.r) * tau, tau, phi, state.sigma2, y, cur,
                                        log_init, log_trans, rng, Omega, mu, prob)
        if err >= 0:
            raise FloatingPointError(f"regime sweep of predictor {j + 1} broke down at t={err + 1}")
        K[:, j] = np.where(cur == 1, 1.0, hp.r)
    return K


def sample_states(X, y, K, tau2, phi, sigma2, rng) -> np.ndarray:
    T, q = X.shape
    z = rng.standard_normal((T, q))
    sc = np.ascontiguousarray(np.sqrt(K * tau2))
    return _kernels.reg_ffbs(np.ascontiguousarray(X, dtype=float), sc, np.ascontiguousarray(phi, dtype=float),
                             float(sigma2), np.ascontiguousarray(y, dtype=float), z)


def mcmc_step(state: McmcState, data: Dataset, cfg: McmcConfig, rng: np.random.Generator) -> McmcState:
    hp, kind = cfg.hp, cfg.kind
    X, y = data.X, data.y
    T, q = X.shape
    s = state.copy()
    free = [b for b in BLOCKS if b not in cfg.fixed]
    step = "regimes"
    try:
        if "regimes" in free:
            s.K = sample_regimes(s, data, hp, rng, naive=cfg.naive_gck)

        step = "states"
        if "states" in free:
            s.beta_tilde = sample_states(X, y, s.K, s.tau2, s.phi, s.sigma2, rng)

        step = "sigma2"
        if "sigma2" in free:
            resid = y - np.sum(X * s.beta, axis=1)
            s.sigma2 = float(sample_inv_gamma(hp.a_sigma + 0.5 * T, hp.b_sigma + 0.5 * float(resid @ resid), rng))

        step = "tau2"
        if "tau2" in free:
            beta = s.beta
            for j in range(q):
                s.tau2[j] = sample_tau2(kind, hp, s.Q[j], beta[:, j], s.K[:, j], s.phi[j], rng)
            s.beta_tilde = beta / np.sqrt(s.K * s.tau2)

        step = "phi"
        acc = np.zeros(q, dtype=bool)
        if "phi" in free:
            for j in range(q):
                s.phi[j], acc[j] = _mh_phi_scaled(s.phi[j], s.beta_tilde[:, j], hp, rng)
        s.phi_accepted = acc

        step = "omega"
        acc = np.zeros(q, dtype=bool)
        if "omega" in free:
            S = s.K == 1.0
            for j in range(q):
                s.omega11[j], s.omega00[j], acc[j] = _update_omega(S[:, j], s.omega11[j], s.omega00[j], s.Q[j],
                                                                   kind, hp, rng)
        s.omega_accepted = acc

        step = "Q"
        if "Q" in free:
            w = slab_weight(s.omega11, s.omega00, hp.slab_weight)
            for j in range(q):
                s.Q[j] = sample_Q(kind, hp, s.tau2[j], float(w[j]), rng)
    except SamplerError:
        raise
    except (FloatingPointError, ParameterDomainError, np.linalg.LinAlgError, ValueError) as exc:
        raise SamplerError(step, str(exc)) from exc
    if cfg.debug:
        s.check(hp.r)
    return s


# ---------------------------------------------------------------------------
# chains and summaries
# ---------------------------------------------------------------------------

SCALAR_BLOCKS = ("sigma2", "phi", "omega11", "omega00", "tau2", "Q")


@dataclass
class PosteriorSummary:
    beta_mean: np.ndarray  # (T, q)
    beta_median: np.ndarray
    beta_q025: np.ndarray
    beta_q975: np.ndarray
    inclusion: np.ndarray  # (T, q) frequency of the slab regime
    scalars: dict  # block name -> kept draws, (n,) for sigma2 else (n, q)
    acceptance_phi: np.ndarray  # (q,)
    acceptance_omega: np.ndarray  # (q,)
    n_kept: int
    names: list
    draws: dict | None = None

    def scalar_rows(self):
        """(parameter, mean, q2.5, median, q97.5) per scalar parameter."""
        rows = []
        for block in SCALAR_BLOCKS:
            d = self.scalars[block]
            cols = [(block, d)] if d.ndim == 1 else [(f"{block}[{n}]", d[:, j]) for j, n in enumerate(self.names)]
            for name, v in cols:
                lo, med, hi = np.quantile(v, [0.025, 0.5, 0.975])
                rows.append((name, float(np.mean(v)), float(lo), float(med), float(hi)))
        return rows


def run_chain(data: Dataset, cfg: McmcConfig, init: McmcState | None = None, callback=None) -> PosteriorSummary:
    """Run one chain and summarize the kept draws.

    ``callback(iteration, state)`` is invoked after every iteration if given.
    """
    rng = np.random.default_rng(cfg.seed)
    state = init.copy() if init is not None else initial_state(data, cfg.kind, cfg.hp)
    T, q = data.X.shape
    kept = range(cfg.n_burn, cfg.n_iter, cfg.thin)
    n_keep = len(kept)
    # single precision only when double would be unreasonably large
    compact = not cfg.save_paths and n_keep * T * q > 50_000_000
    beta_draws = np.empty((n_keep, T, q), dtype=np.float32 if compact else np.float64)
    beta_sum = np.zeros((T, q))
    incl = np.zeros((T, q))
    K_draws = np.empty((n_keep, T, q), dtype=np.int8) if cfg.save_paths else None
    scal = {b: np.empty(n_keep) if b == "sigma2" else np.empty((n_keep, q)) for b in SCALAR_BLOCKS}
    acc_phi = np.zeros(q)
    acc_om = np.zeros(q)
    k = 0
    for it in range(cfg.n_iter):
        try:
            state = mcmc_step(state, data, cfg, rng)
        except SamplerError as exc:
            raise SamplerError(exc.step, exc.detail, it) from exc
        if callback is not None:
            callback(it, state)
        if it >= cfg.n_burn:
            acc_phi += state.phi_accepted
            acc_om += state.omega_accepted
            if (it - cfg.n_burn) % cfg.thin == 0:
                b = state.beta
                beta_draws[k] = b
                beta_sum += b
                incl += state.K == 1.0
                if K_draws is not None:
                    K_draws[k] = state.K == 1.0
                scal["sigma2"][k] = state.sigma2
                for block in SCALAR_BLOCKS[1:]:
                    scal[block][k] = getattr(state, block)
                k += 1
    n_post = cfg.n_iter - cfg.n_burn
    qs = np.quantile(beta_draws, [0.025, 0.5, 0.975], axis=0).astype(np.float64)
    draws = None
    if cfg.save_paths:
        draws = {"beta": beta_draws, "K": K_draws, **{b: v for b, v in scal.items()}}
    return PosteriorSummary(
        beta_mean=beta_sum / n_keep,
        beta_median=qs[1],
        beta_q025=qs[0],
        beta_q975=qs[2],
        inclusion=incl / n_keep,
        scalars=scal,
        acceptance_phi=acc_phi / n_post,
        acceptance_omega=acc_om / n_post,
        n_kept=n_keep,
        names=list(data.names),
        draws=draws,
    )


def compute_rmse(estimate, truth) -> float:
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    return float(np.sqrt(np.mean((estimate - truth) ** 2)))
