"""Kalman forward filtering and forward-filtering-backward-sampling (FFBS).

Generic over :class:`~ssmort.model.SystemMatrices`; the mortality models
plug in through their system matrices, but the routines accept any
linear-Gaussian system (including scalar ones used in tests).

The forward pass computes, for t = 1..n,

    a_t = T m_{t-1} + c,          R_t = T C_{t-1} T' + W
    f_t = d + Z a_t,              Q_t = Z R_t Z' + s2 I
    m_t = a_t + R_t Z' Q_t^{-1} (y_t - f_t)
    C_t = R_t - R_t Z' Q_t^{-1} Z R_t

with (Z, d, T, c, W, s2) the observation/transition quantities, and
accumulates the predictive log likelihood sum_t ln N(y_t; f_t, Q_t).

The backward pass draws state_n ~ N(m_n, C_n) and then, for t = n-1..0,

    state_t | state_{t+1} ~ N(h_t, H_t)
    h_t = m_t + C_t T' R_{t+1}^{-1} (state_{t+1} - a_{t+1})
    H_t = C_t - C_t T' R_{t+1}^{-1} T C_t.

Cohort systems carry deterministic shift coordinates; those entries of
state_t are copied bitwise from state_{t+1} and only the two stochastic
coordinates (period factor, oldest-age cohort slot) are sampled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .model import DataPanel, StatePath, SystemMatrices

__all__ = [
    "FilterState",
    "FilterOutput",
    "IllConditionedSystemError",
    "kalman_step",
    "kalman_filter",
    "ffbs_sample",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


class IllConditionedSystemError(RuntimeError):
    """The observation predictive covariance is numerically singular."""


@dataclass(frozen=True)
class FilterState:
    """Moments produced by one filtering update.

    a/R are the one-step state predictive moments, f/Q the observation
    predictive moments, m/C the filtered (posterior) moments.
    """

    a: np.ndarray
    R: np.ndarray
    f: np.ndarray
    Q: np.ndarray
    m: np.ndarray
    C: np.ndarray


@dataclass(frozen=True)
class FilterOutput:
    """Filtering moments for t = 1..n plus the predictive log likelihood.

    ``init_mean``/``init_cov`` record the t = 0 prior the filter started
    from; the backward sampler needs them for its final step.
    """

    steps: tuple[FilterState, ...]
    log_likelihood: float
    init_mean: np.ndarray
    init_cov: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.steps)


def _symmetrize(mat: np.ndarray) -> np.ndarray:
    return 0.5 * (mat + mat.T)


def kalman_step(
    prev: tuple[np.ndarray, np.ndarray], sys: SystemMatrices, y_t: np.ndarray
) -> tuple[FilterState, float]:
    """One predict/update cycle; returns the new moments and the
    log density of y_t under its predictive distribution."""
    m_prev = np.atleast_1d(np.asarray(prev[0], dtype=float))
    C_prev = np.atleast_2d(np.asarray(prev[1], dtype=float))
    y_t = np.atleast_1d(np.asarray(y_t, dtype=float))
    Z, T = sys.obs_matrix, sys.trans_matrix

    a = T @ m_prev + sys.trans_intercept
    R = _symmetrize(T @ C_prev @ T.T + sys.trans_noise_cov)
    f = sys.obs_intercept + Z @ a
    Q = Z @ R @ Z.T
    Q.flat[:: sys.obs_dim + 1] += sys.obs_noise_var
    try:
        chol = cho_factor(Q, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise IllConditionedSystemError("observation predictive covariance is not positive definite") from exc

    v = y_t - f
    ZR = Z @ R                                       # (p, d)
    gain = cho_solve(chol, ZR, check_finite=False)   # Q^{-1} Z R
    Qinv_v = cho_solve(chol, v, check_finite=False)
    m = a + ZR.T @ Qinv_v
    C = _symmetrize(R - ZR.T @ gain)

    logdet = 2.0 * float(np.sum(np.log(np.diag(chol[0]))))
    logpdf = -0.5 * (y_t.size * _LOG_2PI + logdet + float(v @ Qinv_v))
    return FilterState(a=a, R=R, f=f, Q=Q, m=m, C=C), logpdf


def kalman_filter(
    panel: DataPanel | np.ndarray,
    sys: SystemMatrices,
    init: tuple[np.ndarray, np.ndarray],
) -> FilterOutput:
    """Run the forward filter over the columns y_1..y_n of a panel.

    ``panel`` may be a :class:`DataPanel` or a plain (p, n) array whose
    columns are the observation vectors.
    """
    y = panel.log_rates if isinstance(panel, DataPanel) else np.atleast_2d(np.asarray(panel, dtype=float))
    if y.shape[0] != sys.obs_dim:
        raise ValueError(f"panel has {y.shape[0]} rows, system observes {sys.obs_dim}")
    m0 = np.atleast_1d(np.asarray(init[0], dtype=float))
    C0 = np.atleast_2d(np.asarray(init[1], dtype=float))

    steps: list[FilterState] = []
    loglik = 0.0
    m, C = m0, C0
    for t in range(y.shape[1]):
        state, logpdf = kalman_step((m, C), sys, y[:, t])
        steps.append(state)
        loglik += logpdf
        m, C = state.m, state.C
    return FilterOutput(steps=tuple(steps), log_likelihood=loglik, init_mean=m0, init_cov=C0)


def _solve_psd(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve mat @ X = rhs for a symmetric PSD ``mat``.

    Cholesky first; a rank-deficient transition-noise structure can leave
    ``mat`` semidefinite, in which case the diagonal is jittered by 1e-12
    and, failing that, a pseudo-inverse restricted to the nondegenerate
    subspace is used.
    """
    try:
        return cho_solve(cho_factor(mat, lower=True, check_finite=False), rhs, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    try:
        jittered = mat + 1e-12 * np.eye(mat.shape[0])
        return cho_solve(cho_factor(jittered, lower=True, check_finite=False), rhs, check_finite=False)
    except np.linalg.LinAlgError:
        return np.linalg.pinv(mat, hermitian=True) @ rhs


def _gaussian_factor(cov: np.ndarray) -> np.ndarray:
    """Factor A with A A' = cov for a symmetric PSD matrix; negative
    eigenvalues from roundoff are clipped to zero."""
    if cov.shape == (2, 2):
        # closed-form lower-triangular factor, clipping roundoff negatives
        a = max(cov[0, 0], 0.0)
        root_a = np.sqrt(a)
        b = 0.5 * (cov[0, 1] + cov[1, 0])
        off = b / root_a if root_a > 0.0 else 0.0
        rest = np.sqrt(max(cov[1, 1] - off * off, 0.0))
        return np.array([[root_a, 0.0], [off, rest]])
    w, v = np.linalg.eigh(_symmetrize(cov))
    return v * np.sqrt(np.clip(w, 0.0, None))


def ffbs_sample(
    flt: FilterOutput,
    sys: SystemMatrices,
    rng: np.random.Generator,
    size: int | None = None,
) -> StatePath | np.ndarray:
    """Draw the latent state path state_{0..n} given the filter output.

    With ``size=None`` one path is drawn and returned as a
    :class:`StatePath`; with an integer ``size``, that many independent
    paths are drawn (vectorized) and returned as a (size, n+1, d) array.
    For cohort systems the shifted coordinates are copied from the next
    state, so the cohort-shift identity holds bitwise.
    """
    n = flt.n_steps
    d = sys.state_dim
    T = sys.trans_matrix
    n_draws = 1 if size is None else int(size)

    states = np.empty((n_draws, n + 1, d))
    last = flt.steps[-1]
    z = rng.standard_normal((n_draws, d))
    states[:, n, :] = last.m + z @ _gaussian_factor(last.C).T

    free = np.array([0, d - 1]) if (sys.cohort_shift and d >= 3) else None
    free_grid = (free[:, None], free[None, :]) if free is not None else None

    for t in range(n - 1, -1, -1):
        if t == 0:
            m_t, C_t = flt.init_mean, flt.init_cov
        else:
            m_t, C_t = flt.steps[t - 1].m, flt.steps[t - 1].C
        nxt = flt.steps[t]
        # gain G = C_t T' R_{t+1}^{-1}, computed as a PSD solve
        G = _solve_psd(nxt.R, T @ C_t).T
        h = m_t + (states[:, t + 1, :] - nxt.a) @ G.T
        H = _symmetrize(C_t - G @ T @ C_t)
        if free is None:
            z = rng.standard_normal((n_draws, d))
            states[:, t, :] = h + z @ _gaussian_factor(H).T
        else:
            states[:, t, 1 : d - 1] = states[:, t + 1, 2:d]
            z = rng.standard_normal((n_draws, 2))
            noise = z @ _gaussian_factor(H[free_grid]).T
            states[:, t, free] = h[:, free] + noise

    if size is None:
        return StatePath(states[0])
    return states
