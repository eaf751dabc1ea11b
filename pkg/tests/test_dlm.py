import numpy as np
import pytest

from dynspike.dlm import (
    ConditionalDlm,
    build_conditional_dlm,
    ffbs_sample,
    kalman_filter,
    unscale_states,
)
from oracles import filtered_moments, marginal_loglik, random_dlm, smoothed_moments


def test_filter_matches_joint_gaussian():
    rng = np.random.default_rng(0)
    dlm = random_dlm(rng, 3, 2)
    y = rng.normal(size=3)
    st = kalman_filter(dlm, y)
    for t in range(3):
        m, V = filtered_moments(dlm, y, t)
        assert np.allclose(st.m[t], m, atol=1e-10)
        assert np.allclose(st.V[t], V, atol=1e-10)


@pytest.mark.parametrize("seed", range(100))
def test_loglik_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    T, q = int(rng.integers(1, 6)), int(rng.integers(1, 4))
    dlm = random_dlm(rng, T, q, singular_gamma=seed % 3 == 0)
    y = rng.normal(size=T)
    st = kalman_filter(dlm, y)
    assert st.total_loglik == pytest.approx(marginal_loglik(dlm, y), abs=1e-8)
    for V in st.V:
        assert np.array_equal(V, V.T)
        assert np.linalg.eigvalsh(V).min() >= -1e-10
    assert np.all(st.R > 0)


def test_static_regression_limit():
    # G = I, Gamma = 0: the filter is the conjugate regression posterior
    rng = np.random.default_rng(1)
    T, q, s2 = 8, 2, 0.5
    X = rng.normal(size=(T, q))
    y = rng.normal(size=T)
    dlm = ConditionalDlm(f=np.zeros(T), F=X, gamma=np.full(T, np.sqrt(s2)), g=np.zeros((T, q)),
                         G=np.broadcast_to(np.eye(q), (T, q, q)).copy(), Gamma=np.zeros((T, q, q)),
                         m0=np.zeros(q), V0=np.eye(q))
    st = kalman_filter(dlm, y)
    P = np.linalg.inv(np.eye(q) + X.T @ X / s2)
    assert np.allclose(st.V[-1], P, atol=1e-12)
    assert np.allclose(st.m[-1], P @ X.T @ y / s2, atol=1e-12)


def _check_ffbs(dlm, y, rng, n=200_000, k=4.0):
    draws = ffbs_sample(dlm, y, kalman_filter(dlm, y), rng, size=n).reshape(n, -1)
    m, S = smoothed_moments(dlm, y)
    se_m = np.sqrt(np.diag(S) / n)
    assert np.all(np.abs(draws.mean(0) - m) < k * se_m)
    C = np.cov(draws, rowvar=False)
    se_c = np.sqrt((np.outer(np.diag(S), np.diag(S)) + S**2) / n)
    assert np.all(np.abs(C - S) < k * se_c)


def test_ffbs_moments_scalar_state():
    rng = np.random.default_rng(2)
    dlm = random_dlm(rng, 3, 1)
    _check_ffbs(dlm, rng.normal(size=3), rng)


def test_ffbs_moments_singular_noise():
    rng = np.random.default_rng(3)
    dlm = random_dlm(rng, 3, 2, singular_gamma=True)
    _check_ffbs(dlm, rng.normal(size=3), rng)


def test_ffbs_single_draw_shape_and_determinism():
    rng = np.random.default_rng(4)
    dlm = random_dlm(rng, 5, 2)
    y = rng.normal(size=5)
    st = kalman_filter(dlm, y)
    a = ffbs_sample(dlm, y, st, np.random.default_rng(7))
    b = ffbs_sample(dlm, y, st, np.random.default_rng(7))
    assert a.shape == (5, 2) and np.array_equal(a, b)


def test_build_unit_scale():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(6, 3))
    dlm = build_conditional_dlm(X, np.ones((6, 3)), np.ones(3), np.array([0.5, 0.9, 0.97]), 2.0)
    assert np.array_equal(dlm.F, X)
    assert np.allclose(dlm.G[0], np.diag([0.5, 0.9, 0.97]))
    assert np.allclose(dlm.Gamma[3] @ dlm.Gamma[3], np.diag(1 - np.array([0.5, 0.9, 0.97]) ** 2))
    assert np.allclose(dlm.gamma, np.sqrt(2.0))
    assert np.array_equal(dlm.V0, np.eye(3)) and np.array_equal(dlm.m0, np.zeros(3))


def test_build_spike_scale():
    X = np.ones((2, 1))
    dlm = build_conditional_dlm(X, np.full((2, 1), 0.005), np.array([4.0]), np.array([0.9]), 1.0)
    assert dlm.F[0, 0] == pytest.approx(np.sqrt(0.02))


def test_build_is_pure():
    rng = np.random.default_rng(6)
    args = (rng.normal(size=(4, 2)), np.ones((4, 2)), np.array([1.0, 2.0]), np.array([0.5, 0.6]), 1.0)
    a, b = build_conditional_dlm(*args), build_conditional_dlm(*args)
    assert all(np.array_equal(u, v) for u, v in zip(a.arrays(), b.arrays()))


@pytest.mark.parametrize("bad", [dict(phi=np.array([1.0])), dict(tau2=np.array([0.0])), dict(sigma2=0.0)])
def test_build_domain_errors(bad):
    kw = dict(X=np.ones((3, 1)), K=np.ones((3, 1)), tau2=np.array([1.0]), phi=np.array([0.5]), sigma2=1.0)
    kw.update(bad)
    with pytest.raises(ValueError):
        build_conditional_dlm(**kw)


def test_unscaled_paths_follow_switching_ar():
    # scaled AR(1) with unit variance, rescaled by sqrt(K tau2)
    rng = np.random.default_rng(8)
    T, phi, tau2 = 50, 0.9, 3.0
    K = np.where(rng.random(T) < 0.5, 0.005, 1.0)
    bt = np.empty(T)
    bt[0] = rng.normal()
    e = rng.normal(size=T)
    for t in range(1, T):
        bt[t] = phi * bt[t - 1] + np.sqrt(1 - phi**2) * e[t]
    beta = unscale_states(bt, K, tau2)
    noise = beta[1:] - np.sqrt(K[1:] / K[:-1]) * phi * beta[:-1]
    assert np.allclose(noise, np.sqrt(K[1:] * tau2 * (1 - phi**2)) * e[1:], atol=1e-12)
