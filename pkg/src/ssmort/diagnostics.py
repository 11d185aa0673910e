"""In-sample residual grids and conditional DIC for model ranking.

Residuals are one-step-ahead: the posterior-mean static parameters are
plugged into the forward filter and ``e_t = y_t - f_t`` is reported per
cell, so cohort structure missed by a model shows up as diagonal bands
in the (age, year) grid.

Model ranking uses the conditional deviance information criterion: the
deviance is minus twice the observation log likelihood conditional on
the latent factor path, ``pD = mean deviance - deviance at the posterior
mean``, and ``DIC = mean deviance + pD``.  Smaller is better.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .gibbs import PosteriorChain
from .lgssm import kalman_filter
from .model import AgeYearWindow, DataPanel, ModelSpec, StatePath, StaticParams, build_system

__all__ = [
    "ResidualGrid",
    "DicReport",
    "compute_residuals",
    "conditional_loglik",
    "compute_dic",
    "save_residuals_csv",
    "save_dic_json",
]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ResidualGrid:
    """Observed minus one-step-ahead predicted log rates, by (age, year)."""

    window: AgeYearWindow
    residuals: np.ndarray

    def __post_init__(self):
        if self.residuals.shape != (self.window.n_ages, self.window.n_years):
            raise ValueError("residual grid does not match its window")

    def rows(self):
        """(age, year, cohort, residual) tuples, age-major."""
        for i, age in enumerate(self.window.ages):
            for j, year in enumerate(self.window.years):
                yield int(age), int(year), int(year - age), float(self.residuals[i, j])


@dataclass(frozen=True)
class DicReport:
    mean_deviance: float
    deviance_at_mean: float

    @property
    def p_d(self) -> float:
        return self.mean_deviance - self.deviance_at_mean

    @property
    def dic(self) -> float:
        return 2.0 * self.mean_deviance - self.deviance_at_mean

    def as_dict(self) -> dict:
        return {
            "mean_deviance": self.mean_deviance,
            "deviance_at_mean": self.deviance_at_mean,
            "p_d": self.p_d,
            "dic": self.dic,
        }


def compute_residuals(panel: DataPanel, chain: PosteriorChain) -> ResidualGrid:
    """One-step-ahead residuals under the posterior-mean parameters."""
    if len(chain) == 0:
        raise ValueError("chain holds no draws")
    params = chain.posterior_mean_params()
    sys = build_system(chain.spec, params)
    init = chain.config.hyperpriors.filter_init(chain.spec.state_dim)
    flt = kalman_filter(panel, sys, init)
    predicted = np.column_stack([step.f for step in flt.steps])
    return ResidualGrid(window=panel.window, residuals=panel.log_rates - predicted)


def conditional_loglik(
    panel: DataPanel, params: StaticParams, path: StatePath, spec: ModelSpec
) -> float:
    """Gaussian observation log likelihood given the latent path:
    -0.5 * sum over cells of [ln(2 pi s2) + (residual^2 / s2)]."""
    s2 = params.sigma2_eps
    if s2 <= 0:
        raise ValueError("sigma2_eps must be positive")
    y = panel.log_rates
    fit = params.alpha[:, None] + params.beta[:, None] * path.kappa[1:]
    if spec.kind.has_cohort:
        fit = fit + params.beta_gamma[:, None] * path.gamma[1:].T
    resid = y - fit
    return float(-0.5 * (y.size * (_LOG_2PI + np.log(s2)) + np.sum(resid * resid) / s2))


def compute_dic(panel: DataPanel, chain: PosteriorChain, spec: ModelSpec | None = None) -> DicReport:
    """Conditional DIC over the stored draws.

    The plug-in deviance uses the coordinate-wise posterior mean of both
    the static parameters and the (constrained) latent path.
    """
    if len(chain) < 2:
        raise ValueError("DIC needs a chain with at least two draws")
    spec = chain.spec if spec is None else spec
    deviances = np.array(
        [-2.0 * conditional_loglik(panel, params, path, spec) for params, path in chain]
    )
    mean_dev = float(deviances.mean())
    at_mean = -2.0 * conditional_loglik(
        panel, chain.posterior_mean_params(), chain.posterior_mean_path(), spec
    )
    return DicReport(mean_deviance=mean_dev, deviance_at_mean=at_mean)


def save_residuals_csv(grid: ResidualGrid, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["age", "year", "cohort", "residual"])
        for age, year, cohort, value in grid.rows():
            writer.writerow([age, year, cohort, f"{value:.17g}"])


def save_dic_json(report: DicReport, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(report.as_dict(), fh, indent=2)
        fh.write("\n")
