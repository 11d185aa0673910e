import numpy as np
import pytest

import ssmort as sm
from oracles import (
    bruteforce_filter_moments,
    bruteforce_loglik,
    bruteforce_smoother,
    random_init,
    random_system,
)


def scalar_system(trans=1.0, drift=0.0, state_var=1.0, loading=1.0, intercept=0.0, obs_var=1.0):
    return sm.SystemMatrices(
        obs_intercept=np.array([intercept]),
        obs_matrix=np.array([[loading]]),
        trans_matrix=np.array([[trans]]),
        trans_intercept=np.array([drift]),
        trans_noise_cov=np.array([[state_var]]),
        obs_noise_var=obs_var,
    )


# ---------------------------------------------------------------- kalman_step

def test_kalman_step_hand_computed_scalar():
    sys = scalar_system()
    state, logpdf = sm.kalman_step((np.array([0.0]), np.array([[1.0]])), sys, np.array([1.0]))
    assert state.a[0] == 0.0
    assert state.R[0, 0] == 2.0
    assert state.f[0] == 0.0
    assert state.Q[0, 0] == 3.0
    assert abs(state.m[0] - 2.0 / 3.0) < 1e-15
    assert abs(state.C[0, 0] - 2.0 / 3.0) < 1e-15
    assert abs(logpdf - (-0.5 * (np.log(2 * np.pi * 3) + 1.0 / 3.0))) < 1e-12


def test_kalman_step_uninformative_observation_limit():
    sys = scalar_system(obs_var=1e12)
    state, _ = sm.kalman_step((np.array([0.3]), np.array([[1.5]])), sys, np.array([4.0]))
    assert abs(state.m[0] - state.a[0]) / abs(state.a[0]) < 1e-6
    assert abs(state.C[0, 0] - state.R[0, 0]) / state.R[0, 0] < 1e-6


def test_kalman_step_matches_joint_conditioning_oracle():
    rng = np.random.default_rng(17)
    for _ in range(10):
        sys = random_system(rng, d=4, p=3, full_noise=True)
        m0, C0 = random_init(rng, 4)
        y = rng.normal(size=(3, 1))
        state, _ = sm.kalman_step((m0, C0), sys, y[:, 0])
        mean, cov = bruteforce_filter_moments(sys, m0, C0, y, t=1)
        assert np.max(np.abs(state.m - mean)) < 1e-9
        assert np.max(np.abs(state.C - cov)) < 1e-9


def test_kalman_step_rejects_singular_predictive():
    sys = scalar_system(state_var=0.0, obs_var=0.0)
    with pytest.raises(sm.IllConditionedSystemError):
        sm.kalman_step((np.array([0.0]), np.array([[0.0]])), sys, np.array([1.0]))


# ---------------------------------------------------------------- kalman_filter

def test_filter_loglik_scalar_single_step():
    sys = scalar_system()
    flt = sm.kalman_filter(np.array([[1.0]]), sys, (np.array([0.0]), np.array([[1.0]])))
    expected = -0.5 * (np.log(2 * np.pi * 3) + 1.0 / 3.0)
    assert abs(flt.log_likelihood - expected) < 1e-9
    assert abs(expected - (-1.63491)) < 5e-6


def test_filter_loglik_matches_bruteforce_joint():
    rng = np.random.default_rng(23)
    for _ in range(10):
        d, p, n = rng.integers(1, 5), rng.integers(1, 4), 2
        sys = random_system(rng, int(d), int(p), full_noise=bool(rng.integers(2)))
        m0, C0 = random_init(rng, int(d))
        y = rng.normal(size=(int(p), n))
        flt = sm.kalman_filter(y, sys, (m0, C0))
        assert abs(flt.log_likelihood - bruteforce_loglik(sys, m0, C0, y)) < 1e-8


def test_filter_degenerate_state_gives_iid_residual_loglik():
    """With no state noise and a point initial state, the predictive is
    a fixed deterministic mean plus iid observation noise."""
    rng = np.random.default_rng(3)
    p, d, n = 2, 2, 5
    sys = sm.SystemMatrices(
        obs_intercept=rng.normal(size=p),
        obs_matrix=rng.normal(size=(p, d)),
        trans_matrix=rng.normal(size=(d, d)) * 0.5,
        trans_intercept=rng.normal(size=d),
        trans_noise_cov=np.zeros((d, d)),
        obs_noise_var=0.3,
    )
    m0 = rng.normal(size=d)
    y = rng.normal(size=(p, n))
    flt = sm.kalman_filter(y, sys, (m0, np.zeros((d, d))))

    state = m0.copy()
    expected = 0.0
    for t in range(n):
        state = sys.trans_matrix @ state + sys.trans_intercept
        resid = y[:, t] - (sys.obs_intercept + sys.obs_matrix @ state)
        expected += -0.5 * np.sum(np.log(2 * np.pi * 0.3) + resid**2 / 0.3)
    assert abs(flt.log_likelihood - expected) < 1e-9


def test_filter_covariances_stay_symmetric_psd():
    rng = np.random.default_rng(29)
    for _ in range(20):
        d, p = int(rng.integers(1, 5)), int(rng.integers(1, 4))
        sys = random_system(rng, d, p, full_noise=True)
        m0, C0 = random_init(rng, d)
        y = rng.normal(size=(p, 5))
        flt = sm.kalman_filter(y, sys, (m0, C0))
        for step in flt.steps:
            assert np.max(np.abs(step.C - step.C.T)) < 1e-10
            assert np.linalg.eigvalsh(step.C).min() > -1e-10
            assert np.max(np.abs(step.R - step.R.T)) < 1e-10
            assert np.linalg.eigvalsh(step.R).min() > -1e-10


# ---------------------------------------------------------------- FFBS

def test_ffbs_degenerate_noise_returns_deterministic_trajectory():
    sys = scalar_system(trans=0.9, drift=0.2, state_var=0.0, obs_var=1e-12)
    m0, C0 = np.array([1.0]), np.array([[0.0]])
    y = np.zeros((1, 4))
    flt = sm.kalman_filter(y, sys, (m0, C0))
    rng = np.random.default_rng(0)
    path = sm.ffbs_sample(flt, sys, rng)
    expected = [1.0]
    for _ in range(4):
        expected.append(0.9 * expected[-1] + 0.2)
    assert np.max(np.abs(path.states[:, 0] - expected)) < 1e-9


def test_ffbs_single_step_scalar_moments():
    sys = scalar_system()
    flt = sm.kalman_filter(np.array([[1.0]]), sys, (np.array([0.0]), np.array([[1.0]])))
    m1, C1 = flt.steps[0].m[0], flt.steps[0].C[0, 0]
    rng = np.random.default_rng(42)
    draws = sm.ffbs_sample(flt, sys, rng, size=100_000)[:, 1, 0]
    se_mean = np.sqrt(C1 / draws.size)
    assert abs(draws.mean() - m1) < 4 * se_mean
    se_var = C1 * np.sqrt(2.0 / (draws.size - 1))
    assert abs(draws.var(ddof=1) - C1) < 4 * se_var


def test_ffbs_moments_match_bruteforce_smoother_scalar():
    rng = np.random.default_rng(31)
    sys = random_system(rng, d=1, p=1)
    m0, C0 = random_init(rng, 1)
    y = rng.normal(size=(1, 3))
    flt = sm.kalman_filter(y, sys, (m0, C0))
    mean, cov = bruteforce_smoother(sys, m0, C0, y)

    draws = sm.ffbs_sample(flt, sys, np.random.default_rng(7), size=100_000)
    flat = draws[:, :, 0]  # (N, n+1)
    N = flat.shape[0]
    for t in range(4):
        se = np.sqrt(cov[t, t] / N)
        assert abs(flat[:, t].mean() - mean[t, 0]) < 4 * se
    emp_cov = np.cov(flat.T)
    for s in range(4):
        for t in range(4):
            se = np.sqrt((cov[s, s] * cov[t, t] + cov[s, t] ** 2) / N)
            assert abs(emp_cov[s, t] - cov[s, t]) < 4 * se


def test_ffbs_cohort_system_matches_smoother_and_keeps_identity():
    """The shift-aware backward pass must agree with the exact joint
    smoother and reproduce shifted coordinates bitwise."""
    window = sm.AgeYearWindow(ages=[1, 2], years=[1, 2, 3])
    spec = sm.ModelSpec(sm.ModelKind.FULL_COHORT, window)
    params = sm.StaticParams(
        alpha=np.array([-4.0, -3.0]),
        beta=np.array([0.6, 0.4]),
        theta=-0.2,
        sigma2_eps=0.05,
        sigma2_kappa=0.3,
        beta_gamma=np.array([0.7, 0.3]),
        eta=0.1,
        lam=0.5,
        sigma2_gamma=0.4,
    )
    sys = sm.build_system(spec, params)
    m0, C0 = np.zeros(3), 10.0 * np.eye(3)
    rng = np.random.default_rng(13)
    y = rng.normal(loc=-3.5, size=(2, 3))
    flt = sm.kalman_filter(y, sys, (m0, C0))

    draws = sm.ffbs_sample(flt, sys, np.random.default_rng(99), size=100_000)
    # shift identity, bitwise: oldest-age slot copies the younger slot one step back
    assert np.array_equal(draws[:, 1:, 2], draws[:, :-1, 1])
    mean, cov = bruteforce_smoother(sys, m0, C0, y)
    N, d = draws.shape[0], 3
    flat = draws.reshape(N, -1)
    for k in range(mean.size):
        se = np.sqrt(max(cov[k, k], 1e-12) / N)
        assert abs(flat[:, k].mean() - mean.reshape(-1)[k]) < 4 * se + 1e-9
    emp_cov = np.cov(flat.T)
    for a in range(mean.size):
        for b in range(mean.size):
            se = np.sqrt((cov[a, a] * cov[b, b] + cov[a, b] ** 2) / N)
            assert abs(emp_cov[a, b] - cov[a, b]) < 4 * se + 1e-9

    single = sm.ffbs_sample(flt, sys, np.random.default_rng(5))
    assert single.shift_identity_error() == 0.0


def test_ffbs_smoothing_covariances_symmetric():
    rng = np.random.default_rng(37)
    sys = random_system(rng, d=3, p=2, full_noise=True)
    m0, C0 = random_init(rng, 3)
    y = rng.normal(size=(2, 4))
    flt = sm.kalman_filter(y, sys, (m0, C0))
    T = sys.trans_matrix
    for t in range(len(flt.steps) - 1, -1, -1):
        C_t = flt.init_cov if t == 0 else flt.steps[t - 1].C
        R_next = flt.steps[t].R
        G = np.linalg.solve(R_next, T @ C_t).T
        H = C_t - G @ T @ C_t
        H = 0.5 * (H + H.T)
        assert np.max(np.abs(H - H.T)) < 1e-10
        assert np.linalg.eigvalsh(H).min() > -1e-10
