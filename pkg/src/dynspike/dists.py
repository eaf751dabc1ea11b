"""Random variate generation and densities used by the sampler.

Parametrization used throughout the package:

* ``Gamma(shape, rate)`` with mean ``shape / rate``;
* ``InvGamma(shape, scale)`` with mean ``scale / (shape - 1)``;
* ``GIG(p, g, h)`` with density proportional to
  ``x**(p - 1) * exp(-(g * x + h / x) / 2)`` on ``x > 0``.

All samplers take an explicit :class:`numpy.random.Generator`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np
from scipy import special


class ParameterDomainError(ValueError):
    """Raised when a distribution parameter is outside its domain."""


def _check_positive(**kwargs: float) -> None:
    for name, value in kwargs.items():
        if isinstance(value, (float, int)):
            if not (math.isfinite(value) and value > 0):
                raise ParameterDomainError(f"{name} must be finite and > 0, got {value!r}")
            continue
        if not (np.all(np.isfinite(value)) and np.all(np.asarray(value) > 0)):
            raise ParameterDomainError(f"{name} must be finite and > 0, got {value!r}")


# ---------------------------------------------------------------------------
# Gamma family
# ---------------------------------------------------------------------------


def sample_gamma(shape, rate, rng: np.random.Generator, size=None):
    _check_positive(shape=shape, rate=rate)
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size=size)


def sample_inv_gamma(shape, scale, rng: np.random.Generator, size=None):
    """Draw from InvGamma(shape, scale) as ``scale / Gamma(shape, 1)``."""
    _check_positive(shape=shape, scale=scale)
    return np.asarray(scale, dtype=float) / rng.gamma(shape, 1.0, size=size)


def sample_beta(a, b, rng: np.random.Generator, size=None):
    _check_positive(a=a, b=b)
    return rng.beta(a, b, size=size)


def inv_gamma_logpdf(x, shape, scale):
    x = np.asarray(x, dtype=float)
    return shape * np.log(scale) - special.gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x


# ---------------------------------------------------------------------------
# Generalized inverse Gaussian
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GigParams:
    p: float
    g: float
    h: float

    def __post_init__(self):
        if not math.isfinite(self.p):
            raise ParameterDomainError(f"GIG order p must be finite, got {self.p!r}")
        _check_positive(g=self.g, h=self.h)


@numba.njit(cache=True)
def _gig_mode(lam, omega):
    # mode of x**(lam-1) exp(-omega/2 (x + 1/x))
    if lam >= 1.0:
        return (math.sqrt((lam - 1.0) ** 2 + omega * omega) + (lam - 1.0)) / omega
    return omega / (math.sqrt((1.0 - lam) ** 2 + omega * omega) + (1.0 - lam))


@numba.njit(cache=True)
def _gig_rou_noshift(lam, omega, rng):
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * math.log(xm) - s * (xm + 1.0 / xm)
    ym = ((lam + 1.0) + math.sqrt((lam + 1.0) ** 2 + omega * omega)) / omega
    um = math.exp(0.5 * (lam + 1.0) * math.log(ym) - s * (ym + 1.0 / ym) - nc)
    while True:
        u = um * rng.random()
        v = rng.random()
        if v <= 0.0:
            continue
        x = u / v
        if x <= 0.0:
            continue
        if math.log(v) <= t * math.log(x) - s * (x + 1.0 / x) - nc:
            return x


@numba.njit(cache=True)
def _gig_rou_shift(lam, omega, rng):
    # ratio-of-uniforms with the v-coordinate shifted by the mode
    t = 0.5 * (lam - 1.0)
    s = 0.25 * omega
    xm = _gig_mode(lam, omega)
    nc = t * math.log(xm) - s * (xm + 1.0 / xm)

    # extrema of (x - xm) sqrt(f(x)) solve y^3 + a y^2 + b y + c = 0
    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    c = xm
    p = b - a * a / 3.0
    q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c
    arg = -q / (2.0 * math.sqrt(-(p * p * p) / 27.0))
    arg = min(1.0, max(-1.0, arg))
    fi = math.acos(arg)
    fak = 2.0 * math.sqrt(-p / 3.0)
    y1 = fak * math.cos(fi / 3.0) - a / 3.0
    y2 = fak * math.cos(fi / 3.0 + 4.0 / 3.0 * math.pi) - a / 3.0
    uplus = (y1 - xm) * math.exp(t * math.log(y1) - s * (y1 + 1.0 / y1) - nc)
    uminus = (y2 - xm) * math.exp(t * math.log(y2) - s * (y2 + 1.0 / y2) - nc)
    while True:
        u = uminus + rng.random() * (uplus - uminus)
        v = rng.random()
        if v <= 0.0:
            continue
        x = u / v + xm
        if x <= 0.0:
            continue
        if math.log(v) <= t * math.log(x) - s * (x + 1.0 / x) - nc:
            return x


@numba.njit(cache=True)
def _gig_nonconcave(lam, omega, rng):
    # 0 <= lam < 1 with small omega: piecewise hat (constant, power, exponential)
    xm = _gig_mode(lam, omega)
    x0 = omega / (1.0 - lam)
    k0 = math.exp((lam - 1.0) * math.log(xm) - 0.5 * omega * (xm + 1.0 / xm))
    a0 = k0 * x0
    if x0 >= 2.0 / omega:
        k1 = 0.0
        a1 = 0.0
        k2 = x0 ** (lam - 1.0)
        a2 = k2 * 2.0 * math.exp(-omega * x0 / 2.0) / omega
    else:
        k1 = math.exp(-omega)
        if lam == 0.0:
            a1 = k1 * math.log(2.0 / (omega * omega))
        else:
            a1 = k1 / lam * ((2.0 / omega) ** lam - x0 ** lam)
        k2 = (2.0 / omega) ** (lam - 1.0)
        a2 = k2 * 2.0 * math.exp(-1.0) / omega
    atot = a0 + a1 + a2
    while True:
        v = atot * rng.random()
        if v <= a0:
            x = x0 * v / a0
            hx = k0
        elif v - a0 <= a1:
            v -= a0
            if lam == 0.0:
                x = omega * math.exp(math.exp(omega) * v)
                hx = k1 / x
            else:
                x = (x0 ** lam + lam / k1 * v) ** (1.0 / lam)
                hx = k1 * x ** (lam - 1.0)
        else:
            v -= a0 + a1
            lo = max(x0, 2.0 / omega)
            x = -2.0 / omega * math.log(math.exp(-omega / 2.0 * lo) - omega / (2.0 * k2) * v)
            hx = k2 * math.exp(-omega / 2.0 * x)
        if x <= 0.0:
            continue
        u = rng.random() * hx
        if u > 0.0 and math.log(u) <= (lam - 1.0) * math.log(x) - omega / 2.0 * (x + 1.0 / x):
            return x


@numba.njit(cache=True)
def _gig_standard(lam, omega, rng):
    """One draw of GIG(lam, omega) in the two-parameter form, lam >= 0."""
    if lam > 2.0 or omega > 3.0:
        return _gig_rou_shift(lam, omega, rng)
    if lam >= 1.0 - 2.25 * omega * omega or omega > 0.2:
        return _gig_rou_noshift(lam, omega, rng)
    return _gig_nonconcave(lam, omega, rng)


@numba.njit(cache=True)
def gig_draw(p, g, h, rng):
    omega = math.sqrt(g * h)
    scale = math.sqrt(h / g)
    x = _gig_standard(abs(p), omega, rng)
    if p < 0.0:
        return scale / x
    return scale * x


@numba.njit(cache=True)
def _gig_many(p, g, h, n, rng):
    out = np.empty(n)
    for i in range(n):
        out[i] = gig_draw(p, g, h, rng)
    return out


def sample_gig(params: GigParams, rng: np.random.Generator, size: int | None = None):
    """Draw from GIG(p, g, h).

    Uses the Hörmann-Leydold rejection schemes: ratio-of-uniforms shifted by
    the mode for large order or concentration, plain ratio-of-uniforms in the
    intermediate region, and a three-piece hat where the density is not
    T-concave. Negative orders are handled through ``1 / GIG(-p, h, g)``.
    """
    if size is None:
        return float(gig_draw(params.p, params.g, params.h, rng))
    return _gig_many(params.p, params.g, params.h, int(size), rng)


def gig_logpdf(x, p, g, h):
    """Normalized GIG log density."""
    x = np.asarray(x, dtype=float)
    omega = math.sqrt(g * h)
    # log K_p(omega) via the exponentially scaled Bessel function
    log_bessel = math.log(special.kve(p, omega)) - omega
    log_norm = 0.5 * p * math.log(g / h) - math.log(2.0) - log_bessel
    return log_norm + (p - 1.0) * np.log(x) - 0.5 * (g * x + h / x)


# ---------------------------------------------------------------------------
# Marginal densities of scale mixtures of normals
# ---------------------------------------------------------------------------


def density_normal_gamma(x, a: float, scale_gamma2: float):
    """Normal-Gamma density: N(0, psi) mixed over psi ~ Gamma(a, 1 / (2 gamma^2)).

    Closed form through the modified Bessel function of the second kind
    ``K_{a - 1/2}``; the variance is ``2 a gamma^2``. The density is infinite
    at zero when ``a <= 1/2``.
    """
    _check_positive(a=a, scale_gamma2=scale_gamma2)
    x = np.abs(np.asarray(x, dtype=float))
    gam = math.sqrt(scale_gamma2)
    nu = a - 0.5
    log_const = -(
        0.5 * math.log(math.pi)
        + (a - 0.5) * math.log(2.0)
        + (a + 0.5) * math.log(gam)
        + special.gammaln(a)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        z = x / gam
        logk = np.log(special.kve(nu, z)) - z
        out = np.exp(log_const + nu * np.log(x) + logk)
    at_zero = x == 0
    if np.any(at_zero):
        # limit x -> 0: K_nu(z) ~ Gamma(|nu|) 2^(|nu|-1) z^(-|nu|)
        if nu > 0:
            val = math.exp(log_const + special.gammaln(nu) + (nu - 1.0) * math.log(2.0) + nu * math.log(gam))
        else:
            val = math.inf
        out = np.where(at_zero, val, out)
    return out if out.ndim else float(out)


def density_scaled_t(x, dof: float, scale2: float):
    """Student-t density with zero location and squared scale ``scale2``."""
    _check_positive(dof=dof, scale2=scale2)
    x = np.asarray(x, dtype=float)
    s = math.sqrt(scale2)
    z = x / s
    logc = special.gammaln((dof + 1) / 2) - special.gammaln(dof / 2) - 0.5 * math.log(dof * math.pi) - math.log(s)
    out = np.exp(logc - 0.5 * (dof + 1) * np.log1p(z * z / dof))
    return out if out.ndim else float(out)


def density_laplace(x, scale: float):
    _check_positive(scale=scale)
    x = np.asarray(x, dtype=float)
    out = np.exp(-np.abs(x) / scale) / (2.0 * scale)
    return out if out.ndim else float(out)
