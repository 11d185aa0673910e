import numpy as np
import pytest

import ssmort as sm


@pytest.fixture
def small_window() -> sm.AgeYearWindow:
    """p=3 ages, n=4 years; birth years -2..3 when ages/years are 1-based."""
    return sm.AgeYearWindow(ages=[1, 2, 3], years=[1, 2, 3, 4])


@pytest.fixture
def toy_cohort_truth():
    """A p=5, n=10 full cohort model with a known parameter set."""
    window = sm.AgeYearWindow.from_ranges(60, 64, 2000, 2009)
    spec = sm.ModelSpec(sm.ModelKind.FULL_COHORT, window)
    p = window.n_ages
    params = sm.StaticParams(
        alpha=np.linspace(-4.5, -2.5, p),
        beta=np.array([0.3, 0.25, 0.2, 0.15, 0.1]),
        theta=-0.25,
        sigma2_eps=3e-4,
        sigma2_kappa=0.04,
        beta_gamma=np.array([0.1, 0.15, 0.2, 0.25, 0.3]),
        eta=-0.05,
        lam=0.8,
        sigma2_gamma=0.08,
    )
    return spec, params


def repeated_chain(
    spec: sm.ModelSpec, params: sm.StaticParams, path: sm.StatePath, n_draws: int = 2, seed: int = 0
) -> sm.PosteriorChain:
    """A chain whose every stored draw is the same (params, path) pair."""
    p = spec.window.n_ages
    L = n_draws
    config = sm.SamplerConfig(iterations=L, burn_in=0, seed=seed)
    kwargs = dict(
        spec=spec,
        config=config,
        alpha=np.tile(params.alpha, (L, 1)),
        beta=np.tile(params.beta, (L, 1)),
        theta=np.full(L, params.theta),
        sigma2_eps=np.full(L, params.sigma2_eps),
        sigma2_kappa=np.full(L, params.sigma2_kappa),
        states=np.tile(path.states, (L, 1, 1)),
    )
    if spec.kind.has_cohort:
        kwargs.update(
            eta=np.full(L, params.eta),
            lam=np.full(L, params.lam),
            sigma2_gamma=np.full(L, params.sigma2_gamma),
        )
        if spec.kind is sm.ModelKind.FULL_COHORT:
            kwargs["beta_gamma"] = np.tile(params.beta_gamma, (L, 1))
    return sm.PosteriorChain(**kwargs)


def make_cohort_path(window: sm.AgeYearWindow, cohort_values: dict[int, float], kappa=None) -> sm.StatePath:
    """Assemble a shift-consistent StatePath from per-cohort values.

    Cohorts not supplied (possible only for the pre-window corner) get 0.
    """
    p, n = window.n_ages, window.n_years
    states = np.zeros((n + 1, p + 1))
    if kappa is not None:
        states[:, 0] = kappa
    t1, x1 = int(window.years[0]), int(window.ages[0])
    for j in range(n + 1):
        year = t1 - 1 + j
        for i in range(p):
            states[j, 1 + i] = cohort_values.get(year - (x1 + i), 0.0)
    return sm.StatePath(states)
