import math

import numpy as np
import pytest
from scipy import integrate, stats

from dynspike.dists import (
    GigParams,
    ParameterDomainError,
    density_laplace,
    density_normal_gamma,
    density_scaled_t,
    gig_logpdf,
    sample_beta,
    sample_gamma,
    sample_gig,
    sample_inv_gamma,
)

N = 1_000_000


def rng(seed=0):
    return np.random.default_rng(seed)


def within_se(draws, mean, var, k=5.0):
    se = math.sqrt(var / len(draws))
    return abs(draws.mean() - mean) < k * se


def gig_moment(p, g, h, k=1):
    f = lambda x: x**k * math.exp(gig_logpdf(x, p, g, h))
    mode = (p - 1 + math.sqrt((p - 1) ** 2 + g * h)) / g if p >= 1 else h / ((1 - p) + math.sqrt((1 - p) ** 2 + g * h))
    a, _ = integrate.quad(f, 0, mode, limit=200)
    b, _ = integrate.quad(f, mode, np.inf, limit=200)
    return a + b


def gig_cdf_sup(draws, p, g, h, n_points=400):
    xs = np.quantile(draws, np.linspace(0.0025, 0.9975, n_points))
    pdf = lambda x: math.exp(gig_logpdf(x, p, g, h))
    cdf = np.empty(n_points)
    acc, _ = integrate.quad(pdf, 0, xs[0], limit=200)
    cdf[0] = acc
    for i in range(1, n_points):
        piece, _ = integrate.quad(pdf, xs[i - 1], xs[i], limit=200)
        acc += piece
        cdf[i] = acc
    ecdf = np.searchsorted(np.sort(draws), xs, side="right") / len(draws)
    return float(np.max(np.abs(ecdf - cdf)))


# --- gamma / inverse gamma / beta -------------------------------------------------------------


def test_gamma_mean_matches_normal_gamma_variance():
    lam, gamma2 = 0.7, 1.3
    d = sample_gamma(lam, 1.0 / (2 * gamma2), rng(), size=N)
    assert abs(d.mean() / (2 * lam * gamma2) - 1) < 0.01


def test_gamma_exponential_case():
    d = sample_gamma(1.0, 2.0, rng(1), size=N)
    assert within_se(d, 0.5, 0.25)


def test_gamma_variance():
    d = sample_gamma(3.0, 4.0, rng(2), size=N)
    # excess kurtosis 2 gives Var(s^2) = 4 sigma^4 / n
    assert abs(d.var() - 3 / 16) < 5 * 2 * (3 / 16) / math.sqrt(N)


def test_inverse_gamma_mean():
    d = sample_inv_gamma(5.0, 2.0, rng(3), size=N)
    mean, var = 2.0 / 4.0, 2.0**2 / (4**2 * 3)
    assert within_se(d, mean, var)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
def test_domain_errors(bad):
    with pytest.raises(ParameterDomainError):
        sample_gamma(bad, 1.0, rng())
    with pytest.raises(ParameterDomainError):
        sample_beta(1.0, bad, rng())
    with pytest.raises(ParameterDomainError):
        GigParams(0.5, bad, 1.0)


def test_beta_prior_mean():
    d = sample_beta(77.6, 2.4, rng(4), size=N)
    assert abs(d.mean() - 0.97) < 5e-4


def test_beta_uniform_ks():
    d = sample_beta(1.0, 1.0, rng(5), size=100_000)
    assert stats.kstest(d, "uniform").pvalue > 1e-3


def test_beta_variance():
    a, b = 2.0, 5.0
    d = sample_beta(a, b, rng(6), size=N)
    assert abs(d.var() - a * b / ((a + b) ** 2 * (a + b + 1))) < 2e-4


def test_determinism():
    a = sample_gig(GigParams(-3.0, 1.0, 2.0), rng(9), size=100)
    b = sample_gig(GigParams(-3.0, 1.0, 2.0), rng(9), size=100)
    assert np.array_equal(a, b)
    assert np.array_equal(sample_gamma(2.0, 1.0, rng(9), size=10), sample_gamma(2.0, 1.0, rng(9), size=10))


# --- GIG ----------------------------------------------------------------------------------------


def test_gig_large_negative_order():
    d = sample_gig(GigParams(0.5 - 100.0, 1.0 / 0.3, 40.0), rng(10), size=10_000)
    assert np.all(np.isfinite(d)) and np.all(d > 0)


def test_gig_reciprocal_symmetry():
    d = sample_gig(GigParams(0.0, 2.0, 2.0), rng(11), size=200_000)
    assert stats.ks_2samp(d[:100_000], 1.0 / d[100_000:]).pvalue > 1e-3


def test_gig_mean_quadrature():
    p, g, h = 2.0, 3.0, 5.0
    d = sample_gig(GigParams(p, g, h), rng(12), size=N)
    assert abs(d.mean() / gig_moment(p, g, h) - 1) < 0.01


def test_gig_density_normalized():
    for p, g, h in [(-5.0, 1.0, 3.0), (0.3, 0.2, 0.1), (4.0, 2.0, 0.5)]:
        assert gig_moment(p, g, h, k=0) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("p,g,h", [(-99.5, 1.0, 150.0), (-0.5, 2.0, 0.3), (0.0, 1.0, 1.0), (0.5, 0.05, 0.02),
                                   (2.0, 3.0, 5.0)])
def test_gig_cdf(p, g, h):
    # each triple lands in a different rejection branch
    d = sample_gig(GigParams(p, g, h), rng(13), size=200_000)
    assert gig_cdf_sup(d, p, g, h) < 0.01


@pytest.mark.parametrize("p,g,h", [(-3.5, 0.8, 2.0), (1.5, 0.01, 0.02), (6.0, 4.0, 4.0)])
def test_gig_moments_within_se(p, g, h):
    d = sample_gig(GigParams(p, g, h), rng(14), size=N)
    m1 = gig_moment(p, g, h)
    var = gig_moment(p, g, h, k=2) - m1**2
    assert within_se(d, m1, var)


# --- densities ----------------------------------------------------------------------------------


def _quad(f, k=0):
    a, _ = integrate.quad(lambda x: x**k * f(x), 0, 1, limit=400, epsabs=1e-13)
    b, _ = integrate.quad(lambda x: x**k * f(x), 1, np.inf, limit=400, epsabs=1e-13)
    return 2 * (a + b)


def test_normal_gamma_normalized():
    assert _quad(lambda x: density_normal_gamma(x, 0.5, 1.0)) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("a,g2", [(0.5, 1.0), (2.0, 0.7), (1.0, 3.0)])
def test_normal_gamma_variance(a, g2):
    assert _quad(lambda x: density_normal_gamma(x, a, g2), 2) == pytest.approx(2 * a * g2, rel=1e-6)


def test_normal_gamma_kurtosis():
    a, g2 = 2.0, 1.0
    f = lambda x: density_normal_gamma(x, a, g2)
    v = _quad(f, 2)
    assert _quad(f, 4) / v**2 - 3 == pytest.approx(3 / a, abs=1e-4)


def test_normal_gamma_matches_mixture():
    # N(0, psi) mixed over psi ~ Gamma(a, rate 1/(2 g2)), integrated directly
    a, g2, x = 1.7, 0.6, 0.8
    f = lambda s: stats.norm.pdf(x, scale=math.sqrt(s)) * stats.gamma.pdf(s, a, scale=2 * g2)
    assert density_normal_gamma(x, a, g2) == pytest.approx(integrate.quad(f, 0, np.inf)[0], rel=1e-8)


def test_normal_gamma_at_zero():
    assert math.isinf(density_normal_gamma(0.0, 0.5, 1.0))
    a, g2 = 2.0, 1.0
    assert density_normal_gamma(0.0, a, g2) == pytest.approx(density_normal_gamma(1e-7, a, g2), rel=1e-6)


def test_t_density_normal_limit():
    assert density_scaled_t(0.0, 1e6, 1.0) == pytest.approx(0.39894, abs=1e-3)


def test_t_density_variance_and_mass():
    f = lambda x: density_scaled_t(x, 10.0, 2.0)
    assert _quad(f) == pytest.approx(1.0, abs=1e-6)
    assert _quad(f, 2) == pytest.approx(2.0 * 10 / 8, rel=1e-6)


def test_t_mixture_spike_higher_at_zero():
    nu, r = 5.0, 0.0025
    Q = 0.05 / (0.25 * (0.5 * r + 0.5))  # IG(2, 0.05 / f*) mean at w = 0.5
    spike = 0.5 * density_scaled_t(0.0, 2 * nu, r * Q / nu)
    slab = 0.5 * density_scaled_t(0.0, 2 * nu, Q / nu)
    assert spike > slab


def test_laplace_density():
    f = lambda x: density_laplace(x, 0.7)
    assert _quad(f) == pytest.approx(1.0, abs=1e-6)
    assert _quad(f, 2) == pytest.approx(2 * 0.49, rel=1e-6)
