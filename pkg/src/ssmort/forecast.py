"""Posterior predictive simulation of future factors and log death rates.

For every stored draw the factor path is extended ``k`` steps through the
state equation (period random walk with drift; AR(1) cohort coordinate
plus exact shift), and future observation vectors are drawn around the
implied means with that draw's observation noise.  Parameter uncertainty
is therefore carried through automatically: each horizon step mixes over
the whole chain.

Noise streams are derived from (chain seed, draw index, horizon), with
separate child streams for the period innovation, the cohort innovation
and the observation noise, so results are reproducible and the
Lee-Carter special case consumes exactly the same period/observation
noise as the cohort machinery would.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gibbs import PosteriorChain
from .model import ModelKind

__all__ = [
    "ForecastResult",
    "FactorProjection",
    "forecast",
    "project_factors",
    "save_forecast_draws_csv",
    "save_forecast_summary_csv",
    "save_factor_projection_csv",
]

QUANTILE_LEVEL = 0.95


@dataclass(frozen=True)
class ForecastResult:
    """Simulated future log rates and factors, with 95% summaries.

    ``log_rates`` has shape (draws, ages, horizon), ``factors``
    (draws, horizon, state_dim).  Summary grids (mean/lower/upper) are on
    the log-rate scale; ``rate_summary()`` gives the death-rate scale.
    """

    ages: np.ndarray
    years: np.ndarray
    log_rates: np.ndarray
    factors: np.ndarray
    mean: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @property
    def horizon(self) -> int:
        return self.years.size

    @property
    def rates(self) -> np.ndarray:
        return np.exp(self.log_rates)

    def rate_summary(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(mean, lower, upper) grids of death rates exp(y)."""
        lo, hi = 0.5 * (1 - QUANTILE_LEVEL), 0.5 * (1 + QUANTILE_LEVEL)
        rates = self.rates
        return (
            rates.mean(axis=0),
            np.quantile(rates, lo, axis=0),
            np.quantile(rates, hi, axis=0),
        )


@dataclass(frozen=True)
class FactorProjection:
    """Mean and 95% band of the projected period factor per future year
    and (cohort models) of the cohort factor per new birth year."""

    years: np.ndarray
    kappa_mean: np.ndarray
    kappa_lower: np.ndarray
    kappa_upper: np.ndarray
    cohorts: np.ndarray | None = None
    gamma_mean: np.ndarray | None = None
    gamma_lower: np.ndarray | None = None
    gamma_upper: np.ndarray | None = None


def _draw_streams(seed: int, draw: int, horizon: int):
    children = np.random.SeedSequence([int(seed), int(draw), int(horizon)]).spawn(3)
    return tuple(np.random.default_rng(c) for c in children)


def _simulate(chain: PosteriorChain, k: int, with_obs: bool):
    """Extend every stored draw k steps; returns (factors, log_rates)."""
    if k < 1:
        raise ValueError("forecast horizon must be at least 1")
    L = len(chain)
    if L == 0:
        raise ValueError("chain holds no draws")
    spec = chain.spec
    p, d = spec.window.n_ages, spec.state_dim
    cohort = spec.kind.has_cohort
    seed = chain.config.seed

    z_kappa = np.empty((L, k))
    z_gamma = np.empty((L, k)) if cohort else None
    z_obs = np.empty((L, k, p)) if with_obs else None
    for ell in range(L):
        rng_k, rng_g, rng_o = _draw_streams(seed, ell, k)
        z_kappa[ell] = rng_k.standard_normal(k)
        if cohort:
            z_gamma[ell] = rng_g.standard_normal(k)
        if with_obs:
            z_obs[ell] = rng_o.standard_normal((k, p))

    theta = chain.theta
    sd_kappa = np.sqrt(chain.sigma2_kappa)
    alpha, beta = chain.alpha, chain.beta
    sd_obs = np.sqrt(chain.sigma2_eps)
    if cohort:
        lam, eta = chain.lam, chain.eta
        sd_gamma = np.sqrt(chain.sigma2_gamma)
        bg = np.ones((L, p)) if chain.beta_gamma is None else chain.beta_gamma

    factors = np.empty((L, k, d))
    log_rates = np.empty((L, p, k)) if with_obs else None
    state = chain.states[:, -1, :].copy()
    for j in range(k):
        nxt = np.empty_like(state)
        nxt[:, 0] = state[:, 0] + theta + sd_kappa * z_kappa[:, j]
        if cohort:
            nxt[:, 1] = lam * state[:, 1] + eta + sd_gamma * z_gamma[:, j]
            nxt[:, 2:] = state[:, 1:-1]
        state = nxt
        factors[:, j, :] = state
        if with_obs:
            mean = alpha + beta * state[:, :1]
            if cohort:
                mean = mean + bg * state[:, 1:]
            log_rates[:, :, j] = mean + sd_obs[:, None] * z_obs[:, j, :]
    return factors, log_rates


def forecast(chain: PosteriorChain, k: int) -> ForecastResult:
    """k-step-ahead posterior predictive draws of log death rates."""
    factors, log_rates = _simulate(chain, k, with_obs=True)
    window = chain.spec.window
    lo, hi = 0.5 * (1 - QUANTILE_LEVEL), 0.5 * (1 + QUANTILE_LEVEL)
    return ForecastResult(
        ages=window.ages.copy(),
        years=np.arange(window.years[-1] + 1, window.years[-1] + k + 1),
        log_rates=log_rates,
        factors=factors,
        mean=log_rates.mean(axis=0),
        lower=np.quantile(log_rates, lo, axis=0),
        upper=np.quantile(log_rates, hi, axis=0),
    )


def project_factors(chain: PosteriorChain, k: int) -> FactorProjection:
    """Summaries of the projected period factor and, for cohort models,
    of the newly projected cohort factor values (one per future birth
    year beyond the window's latest cohort)."""
    factors, _ = _simulate(chain, k, with_obs=False)
    window = chain.spec.window
    lo, hi = 0.5 * (1 - QUANTILE_LEVEL), 0.5 * (1 + QUANTILE_LEVEL)
    years = np.arange(window.years[-1] + 1, window.years[-1] + k + 1)
    kappa = factors[:, :, 0]
    out = dict(
        years=years,
        kappa_mean=kappa.mean(axis=0),
        kappa_lower=np.quantile(kappa, lo, axis=0),
        kappa_upper=np.quantile(kappa, hi, axis=0),
    )
    if chain.spec.kind is not ModelKind.LC:
        gamma = factors[:, :, 1]  # youngest-age slot = newly born cohort each year
        last_cohort = int(window.years[-1] - window.ages[0])
        out.update(
            cohorts=np.arange(last_cohort + 1, last_cohort + k + 1),
            gamma_mean=gamma.mean(axis=0),
            gamma_lower=np.quantile(gamma, lo, axis=0),
            gamma_upper=np.quantile(gamma, hi, axis=0),
        )
    return FactorProjection(**out)


def save_forecast_draws_csv(result: ForecastResult, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["draw", "year", "age", "logRate"])
        L = result.log_rates.shape[0]
        for ell in range(L):
            for j, year in enumerate(result.years):
                for i, age in enumerate(result.ages):
                    writer.writerow([ell, int(year), int(age), f"{result.log_rates[ell, i, j]:.17g}"])


def save_forecast_summary_csv(result: ForecastResult, path: str | Path, scale: str = "log") -> None:
    if scale == "log":
        mean, lower, upper = result.mean, result.lower, result.upper
    elif scale == "rate":
        mean, lower, upper = result.rate_summary()
    else:
        raise ValueError("scale must be 'log' or 'rate'")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "age", "mean", "q02.5", "q97.5"])
        for j, year in enumerate(result.years):
            for i, age in enumerate(result.ages):
                writer.writerow(
                    [int(year), int(age), f"{mean[i, j]:.17g}", f"{lower[i, j]:.17g}", f"{upper[i, j]:.17g}"]
                )


def save_factor_projection_csv(proj: FactorProjection, kappa_path: str | Path, gamma_path: str | Path | None = None) -> None:
    with open(kappa_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["year", "mean", "q02.5", "q97.5"])
        for j, year in enumerate(proj.years):
            writer.writerow(
                [int(year), f"{proj.kappa_mean[j]:.17g}", f"{proj.kappa_lower[j]:.17g}", f"{proj.kappa_upper[j]:.17g}"]
            )
    if gamma_path is not None and proj.cohorts is not None:
        with open(gamma_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["cohort", "mean", "q02.5", "q97.5"])
            for j, cohort in enumerate(proj.cohorts):
                writer.writerow(
                    [int(cohort), f"{proj.gamma_mean[j]:.17g}", f"{proj.gamma_lower[j]:.17g}", f"{proj.gamma_upper[j]:.17g}"]
                )
