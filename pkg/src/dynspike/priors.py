"""Dynamic spike-and-slab prior family and its scale-parameter conditionals.

Coefficient variances are ``psi[t, j] = K[t, j] * tau2[j]`` with ``K`` in
``{r, 1}``. The mixing law of ``tau2[j]`` given ``Q[j]`` selects the family:

=============  ===================================  ================
kind           tau2 | Q                             constant c
=============  ===================================  ================
NMIG           InvGamma(nu, Q)                      1 / (nu - 1)
Normal-Gamma   Gamma(a_tau, rate 1 / (2 Q))         2 a_tau
Laplace        Gamma(1, rate 1 / (2 Q))             2
=============  ===================================  ================

``Q[j] ~ InvGamma(c_psi, C_psi / f*(w))`` with ``f*(w) = c ((1 - w) r + w)``
keeps the prior variance of the coefficients comparable across kinds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy import special

from .dists import (
    GigParams,
    ParameterDomainError,
    density_laplace,
    density_normal_gamma,
    density_scaled_t,
    gig_logpdf,
    inv_gamma_logpdf,
    sample_gig,
    sample_inv_gamma,
)


class PriorKind(enum.Enum):
    NMIG = "nmig"
    NORMAL_GAMMA = "ng"
    LAPLACE = "laplace"

    @classmethod
    def parse(cls, value: "str | PriorKind") -> "PriorKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown prior kind {value!r}; expected one of nmig, ng, laplace") from None


SLAB_WEIGHT_MODES = ("stationary", "persistence")


@dataclass(frozen=True)
class Hyperparameters:
    r: float = 0.005
    nu: float = 5.0
    a_tau: float = 0.5
    c_psi: float = 51.0
    C_psi: float = 5.0
    a_sigma: float = 1e-4
    b_sigma: float = 1e-4
    a_phi: float = 77.6
    b_phi: float = 2.4
    a_omega: float = 77.6
    b_omega: float = 2.4
    alpha: float = 1000.0
    # how w in f*(w) is formed from the transition probabilities
    slab_weight: str = "stationary"

    def __post_init__(self):
        for name, value in asdict(self).items():
            if name == "slab_weight":
                continue
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterDomainError(f"hyperparameter {name} must be finite and > 0, got {value!r}")
        if self.r >= 0.5:
            raise ParameterDomainError(f"spike ratio r must be < 0.5, got {self.r}")
        if self.slab_weight not in SLAB_WEIGHT_MODES:
            raise ParameterDomainError(f"slab_weight must be one of {SLAB_WEIGHT_MODES}, got {self.slab_weight!r}")

    def validate_for(self, kind: PriorKind) -> None:
        if kind is PriorKind.NMIG and self.nu <= 1:
            raise ParameterDomainError(f"NMIG requires nu > 1, got {self.nu}")

    def shape_tau(self, kind: PriorKind) -> float:
        """Gamma shape of the mixing law (1 for the Laplace mixture)."""
        return 1.0 if kind is PriorKind.LAPLACE else self.a_tau

    def with_overrides(self, **kwargs) -> "Hyperparameters":
        return replace(self, **kwargs)


PRESETS = {
    "example1": Hyperparameters(),
    "example2": Hyperparameters(nu=25.0, c_psi=50.0, C_psi=1.5, a_sigma=5.0, b_sigma=1.5),
    "inflation": Hyperparameters(r=0.05, nu=50.0, c_psi=50.0, C_psi=0.05, a_sigma=31.0, b_sigma=4.22),
}


def preset(name: str) -> Hyperparameters:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None


def family_constant(kind: PriorKind, hp: Hyperparameters) -> float:
    """c with slab variance c Q and spike variance c Q r."""
    kind = PriorKind.parse(kind)
    if kind is PriorKind.NMIG:
        hp.validate_for(kind)
        return 1.0 / (hp.nu - 1.0)
    return 2.0 * hp.shape_tau(kind)


def f_star(c: float, slab_prob: float, r: float) -> float:
    return c * ((1.0 - slab_prob) * r + slab_prob)


def slab_weight(omega11, omega00, mode: str = "stationary"):
    """Slab probability entering f*(w).

    ``stationary`` uses the long-run slab probability of the two-state chain,
    ``persistence`` uses P(slab -> slab) directly.
    """
    omega11 = np.asarray(omega11, dtype=float)
    omega00 = np.asarray(omega00, dtype=float)
    if mode == "persistence":
        return omega11
    if mode != "stationary":
        raise ValueError(f"unknown slab-weight mode {mode!r}")
    denom = 2.0 - omega00 - omega11
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(denom > 0, (1.0 - omega00) / np.where(denom > 0, denom, 1.0), 0.5)
    return w


def Q_prior_scale(kind: PriorKind, hp: Hyperparameters, slab_prob) -> np.ndarray:
    return hp.C_psi / f_star(family_constant(kind, hp), np.asarray(slab_prob, dtype=float), hp.r)


def Q_prior_logpdf(kind: PriorKind, hp: Hyperparameters, Q, slab_prob):
    return inv_gamma_logpdf(Q, hp.c_psi, Q_prior_scale(kind, hp, slab_prob))


# ---------------------------------------------------------------------------
# full conditionals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InvGammaParams:
    shape: float
    scale: float


def _draw(params, rng):
    if isinstance(params, GigParams):
        return sample_gig(params, rng)
    return float(sample_inv_gamma(params.shape, params.scale, rng))


def conditional_logpdf(params, x):
    """Normalized log density of a conditional returned by this module."""
    if isinstance(params, GigParams):
        return gig_logpdf(x, params.p, params.g, params.h)
    return inv_gamma_logpdf(x, params.shape, params.scale)


def transition_sum(beta, K, phi: float) -> float:
    """Sum of squared standardized innovations of one coefficient path.

    ``sum_t (beta_t - sqrt(K_t / K_{t-1}) phi beta_{t-1})^2 / (K_t (1 - phi^2))``
    for t >= 2, plus ``beta_1^2 / K_1`` for the stationary start.
    """
    beta = np.asarray(beta, dtype=float)
    K = np.asarray(K, dtype=float)
    lead = beta[0] ** 2 / K[0]
    innov = beta[1:] - np.sqrt(K[1:] / K[:-1]) * phi * beta[:-1]
    return float(lead + np.sum(innov**2 / (K[1:] * (1.0 - phi * phi))))


def tau2_conditional(kind: PriorKind, hp: Hyperparameters, Q: float, h: float, T: int):
    kind = PriorKind.parse(kind)
    if not (h > 0 and math.isfinite(h)):
        raise FloatingPointError(f"degenerate quadratic form h={h!r} in the tau2 conditional")
    if kind is PriorKind.NMIG:
        return InvGammaParams(hp.nu + 0.5 * T, Q + 0.5 * h)
    return GigParams(p=hp.shape_tau(kind) - 0.5 * T, g=1.0 / Q, h=h)


def sample_tau2(kind: PriorKind, hp: Hyperparameters, Q_j: float, beta_path, K_path, phi_j: float,
                rng: np.random.Generator) -> float:
    h = transition_sum(beta_path, K_path, phi_j)
    return _draw(tau2_conditional(kind, hp, Q_j, h, len(beta_path)), rng)


def Q_conditional(kind: PriorKind, hp: Hyperparameters, tau2_j: float, slab_prob: float):
    kind = PriorKind.parse(kind)
    S = float(Q_prior_scale(kind, hp, slab_prob))
    if kind is PriorKind.NMIG:
        return GigParams(p=hp.nu - hp.c_psi, g=2.0 / tau2_j, h=2.0 * S)
    return InvGammaParams(hp.c_psi + hp.shape_tau(kind), 0.5 * tau2_j + S)


def sample_Q(kind: PriorKind, hp: Hyperparameters, tau2_j: float, slab_prob: float,
             rng: np.random.Generator) -> float:
    return _draw(Q_conditional(kind, hp, tau2_j, slab_prob), rng)


# ---------------------------------------------------------------------------
# marginal coefficient densities
# ---------------------------------------------------------------------------


def _component_density(kind: PriorKind, hp: Hyperparameters, var_scale: float, x):
    """Density of beta | Q mixed over tau2, with Q replaced by ``var_scale``."""
    if kind is PriorKind.NMIG:
        return density_scaled_t(x, 2.0 * hp.nu, var_scale / hp.nu)
    if kind is PriorKind.LAPLACE:
        return density_laplace(x, math.sqrt(var_scale))
    return density_normal_gamma(x, hp.a_tau, var_scale)


def marginal_beta_density(kind: PriorKind, hp: Hyperparameters, Q_j: float, slab_prob: float, x):
    """w * slab(x) + (1 - w) * spike(x), spike scale reduced by r."""
    kind = PriorKind.parse(kind)
    slab = _component_density(kind, hp, Q_j, x)
    spike = _component_density(kind, hp, hp.r * Q_j, x)
    return slab_prob * slab + (1.0 - slab_prob) * spike


def laplace_t_density(hp: Hyperparameters, Q_j: float, slab_prob: float, x):
    """Student-t slab with a Laplace spike; density only, not a sampler path."""
    slab = density_scaled_t(x, 2.0 * hp.nu, Q_j / hp.nu)
    spike = density_laplace(x, math.sqrt(hp.r * Q_j))
    return slab_prob * slab + (1.0 - slab_prob) * spike


def initial_Q(kind: PriorKind, hp: Hyperparameters) -> float:
    """Prior mean of Q at the prior-mean transition probabilities."""
    w0 = float(slab_weight(hp.a_omega / (hp.a_omega + hp.b_omega), hp.a_omega / (hp.a_omega + hp.b_omega),
                           hp.slab_weight))
    if hp.c_psi <= 1:
        return float(Q_prior_scale(kind, hp, w0))
    return float(Q_prior_scale(kind, hp, w0)) / (hp.c_psi - 1.0)


def log_beta_pdf(x, a, b):
    return (a - 1.0) * np.log(x) + (b - 1.0) * np.log1p(-x) - special.betaln(a, b)
