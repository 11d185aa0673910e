"""Model-level types for stochastic mortality models with cohort effects.

Three nested models of the log crude death rate surface are supported:

* Lee-Carter (``lc``): age level + age-modulated period factor,
  ``y[x,t] = alpha_x + beta_x * kappa_t + eps``.
* Simplified cohort (``simplified-cohort``): adds a year-of-birth factor
  with unit loading, ``y[x,t] = alpha_x + beta_x * kappa_t + gamma_{t-x} + eps``.
* Full cohort (``full-cohort``): the cohort factor is age-modulated,
  ``y[x,t] = alpha_x + beta_x * kappa_t + beta_gamma_x * gamma_{t-x} + eps``.

The period factor follows a random walk with drift; the cohort factor
follows a stationary AR(1) in the youngest-age coordinate and is carried
through the state vector by an exact shift (a value born in year ``c``
reappears one age older one year later).  This module owns the cohort
index bookkeeping, construction of the linear-Gaussian system matrices
and the identification constraints that make the factor decomposition
unique.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

__all__ = [
    "ModelKind",
    "AgeYearWindow",
    "DataPanel",
    "ModelSpec",
    "StaticParams",
    "StatePath",
    "SystemMatrices",
    "DegenerateDrawError",
    "CorruptedPathError",
    "build_system",
    "apply_constraints",
    "center_state_path",
    "normalize_sum_to_one",
    "extract_cohort_series",
]


class DegenerateDrawError(ValueError):
    """A Gibbs draw cannot be normalized (e.g. loadings summing to zero)."""


class CorruptedPathError(ValueError):
    """A state path violates the cohort-shift identity beyond tolerance."""


class ModelKind(str, Enum):
    """Which member of the nested model family."""

    LC = "lc"
    SIMPLIFIED_COHORT = "simplified-cohort"
    FULL_COHORT = "full-cohort"

    @property
    def has_cohort(self) -> bool:
        return self is not ModelKind.LC


def _frozen_int_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=int).copy()
    arr.flags.writeable = False
    return arr


def _frozen_float_array(values, shape=None) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if shape is not None and arr.shape != tuple(shape):
        raise ValueError(f"expected shape {tuple(shape)}, got {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class AgeYearWindow:
    """Rectangular age x calendar-year grid with contiguous unit spacing.

    Ages ``x_1..x_p`` and years ``t_1..t_n`` must be strictly increasing
    and contiguous; the cohort machinery relies on unit steps in both
    directions.  Birth years covered by the grid are
    ``t_1 - x_p .. t_n - x_1`` (``n + p - 1`` of them).
    """

    ages: np.ndarray
    years: np.ndarray

    def __eq__(self, other) -> bool:
        if not isinstance(other, AgeYearWindow):
            return NotImplemented
        return np.array_equal(self.ages, other.ages) and np.array_equal(self.years, other.years)

    def __hash__(self) -> int:
        return hash((self.ages.tobytes(), self.years.tobytes()))

    def __post_init__(self):
        ages = _frozen_int_array(self.ages)
        years = _frozen_int_array(self.years)
        for name, axis in (("ages", ages), ("years", years)):
            if axis.ndim != 1 or axis.size < 2:
                raise ValueError(f"{name} must be a 1-d sequence with at least 2 entries")
            if not np.all(np.diff(axis) == 1):
                raise ValueError(f"{name} must be strictly increasing and contiguous")
        object.__setattr__(self, "ages", ages)
        object.__setattr__(self, "years", years)

    @classmethod
    def from_ranges(cls, age_lo: int, age_hi: int, year_lo: int, year_hi: int) -> "AgeYearWindow":
        return cls(np.arange(age_lo, age_hi + 1), np.arange(year_lo, year_hi + 1))

    @property
    def n_ages(self) -> int:
        return self.ages.size

    @property
    def n_years(self) -> int:
        return self.years.size

    @property
    def cohorts(self) -> np.ndarray:
        """Birth years t_1 - x_p .. t_n - x_1, length n + p - 1."""
        return np.arange(self.years[0] - self.ages[-1], self.years[-1] - self.ages[0] + 1)

    def cohort_index(self, age: int, year: int) -> int:
        """Year of birth for an in-window (age, year) cell."""
        if age < self.ages[0] or age > self.ages[-1]:
            raise ValueError(f"age {age} outside window [{self.ages[0]}, {self.ages[-1]}]")
        if year < self.years[0] or year > self.years[-1]:
            raise ValueError(f"year {year} outside window [{self.years[0]}, {self.years[-1]}]")
        return int(year) - int(age)


@dataclass(frozen=True)
class DataPanel:
    """Grid of log crude death rates; entry (i, j) is ln(deaths/exposure)
    at age ``ages[i]`` in year ``years[j]``."""

    window: AgeYearWindow
    log_rates: np.ndarray

    def __post_init__(self):
        rates = _frozen_float_array(self.log_rates, shape=(self.window.n_ages, self.window.n_years))
        if not np.all(np.isfinite(rates)):
            raise ValueError("log rates must all be finite")
        object.__setattr__(self, "log_rates", rates)


@dataclass(frozen=True)
class ModelSpec:
    """Model kind plus the data window it applies to."""

    kind: ModelKind
    window: AgeYearWindow

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))

    @property
    def state_dim(self) -> int:
        """1 for Lee-Carter; p + 1 (period + per-age cohort slot) otherwise."""
        return 1 if self.kind is ModelKind.LC else self.window.n_ages + 1


@dataclass(frozen=True)
class StaticParams:
    """Static parameters of the observation and state equations.

    ``beta_gamma``, ``eta``, ``lam`` and ``sigma2_gamma`` are ``None`` for
    Lee-Carter; the simplified cohort model pins ``beta_gamma`` to ones.
    """

    alpha: np.ndarray
    beta: np.ndarray
    theta: float
    sigma2_eps: float
    sigma2_kappa: float
    beta_gamma: np.ndarray | None = None
    eta: float | None = None
    lam: float | None = None
    sigma2_gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "alpha", _frozen_float_array(self.alpha))
        object.__setattr__(self, "beta", _frozen_float_array(self.beta, shape=self.alpha.shape))
        if self.beta_gamma is not None:
            object.__setattr__(
                self, "beta_gamma", _frozen_float_array(self.beta_gamma, shape=self.alpha.shape)
            )

    @property
    def has_cohort(self) -> bool:
        return self.beta_gamma is not None or self.sigma2_gamma is not None

    def validate(self, spec: ModelSpec, atol: float = 1e-8) -> None:
        """Check presence/absence of cohort fields and the identification
        constraints (sum of loadings one, |lam| <= 1, positive variances)."""
        p = spec.window.n_ages
        if self.alpha.shape != (p,):
            raise ValueError(f"alpha must have length {p}")
        if abs(float(self.beta.sum()) - 1.0) > atol:
            raise ValueError("beta must sum to one")
        if not (self.sigma2_eps > 0 and self.sigma2_kappa > 0):
            raise ValueError("variances must be positive")
        cohort_fields = (self.beta_gamma, self.eta, self.lam, self.sigma2_gamma)
        if spec.kind is ModelKind.LC:
            if any(f is not None for f in cohort_fields):
                raise ValueError("Lee-Carter parameters must not carry cohort fields")
            return
        if any(f is None for f in cohort_fields):
            raise ValueError(f"{spec.kind.value} parameters require cohort fields")
        if not self.sigma2_gamma > 0:
            raise ValueError("variances must be positive")
        if abs(self.lam) > 1.0:
            raise ValueError("cohort AR coefficient must lie in [-1, 1]")
        if spec.kind is ModelKind.FULL_COHORT:
            if abs(float(self.beta_gamma.sum()) - 1.0) > atol:
                raise ValueError("beta_gamma must sum to one")
        elif not np.all(self.beta_gamma == 1.0):
            raise ValueError("simplified cohort model pins beta_gamma to ones")


@dataclass(frozen=True)
class StatePath:
    """Latent factor trajectory, one row per time index t = 0..n.

    Row layout is ``(kappa_t,)`` for Lee-Carter and
    ``(kappa_t, gamma^{x_1}_t, ..., gamma^{x_p}_t)`` for cohort models,
    where ``gamma^{x}_t`` holds the cohort factor of the generation born
    in year ``t - x``.
    """

    states: np.ndarray

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim != 2:
            raise ValueError("states must be a (n+1, state_dim) array")
        states.flags.writeable = False
        object.__setattr__(self, "states", states)

    @property
    def n_steps(self) -> int:
        """Number of observed years n (path rows minus the t=0 seed row)."""
        return self.states.shape[0] - 1

    @property
    def kappa(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def gamma(self) -> np.ndarray:
        """Cohort block, shape (n+1, p); empty for Lee-Carter paths."""
        return self.states[:, 1:]

    def shift_identity_error(self) -> float:
        """Max violation of gamma^{x_i}_t == gamma^{x_{i-1}}_{t-1}."""
        g = self.gamma
        if g.shape[1] < 2:
            return 0.0
        return float(np.max(np.abs(g[1:, 1:] - g[:-1, :-1])))


@dataclass(frozen=True)
class SystemMatrices:
    """Linear-Gaussian system in the form

        y_t   = obs_intercept + obs_matrix @ state_t + N(0, obs_noise_var * I)
        state_t = trans_matrix @ state_{t-1} + trans_intercept + N(0, trans_noise_cov)

    ``cohort_shift`` marks systems whose state coordinates 2..d-1 are exact
    one-step copies of coordinates 1..d-2 (the cohort conveyor belt); the
    backward sampler exploits this to reproduce shifted entries bitwise.
    """

    obs_intercept: np.ndarray
    obs_matrix: np.ndarray
    trans_matrix: np.ndarray
    trans_intercept: np.ndarray
    trans_noise_cov: np.ndarray
    obs_noise_var: float
    cohort_shift: bool = False

    @property
    def state_dim(self) -> int:
        return self.trans_matrix.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.obs_matrix.shape[0]


def build_system(spec: ModelSpec, params: StaticParams) -> SystemMatrices:
    """Assemble the state-space system matrices for a model and parameter set.

    For cohort models the observation matrix has ``beta`` in its first
    column and the cohort loading on the (age-aligned) diagonal of the
    remaining block; the transition matrix propagates the period random
    walk, the AR(1) youngest-age cohort coordinate, and the shift rows.
    """
    p = spec.window.n_ages
    if params.alpha.shape != (p,):
        raise ValueError(f"params sized for p={params.alpha.shape[0]}, spec has p={p}")

    if spec.kind is ModelKind.LC:
        if params.has_cohort or params.eta is not None or params.lam is not None:
            raise ValueError("Lee-Carter parameters must not carry cohort fields")
        return SystemMatrices(
            obs_intercept=params.alpha.copy(),
            obs_matrix=params.beta.reshape(p, 1).copy(),
            trans_matrix=np.array([[1.0]]),
            trans_intercept=np.array([params.theta]),
            trans_noise_cov=np.array([[params.sigma2_kappa]]),
            obs_noise_var=params.sigma2_eps,
        )

    missing = params.beta_gamma is None or params.eta is None or params.lam is None
    if missing or params.sigma2_gamma is None:
        raise ValueError(f"{spec.kind.value} requires beta_gamma, eta, lam and sigma2_gamma")
    if spec.kind is ModelKind.SIMPLIFIED_COHORT and not np.all(params.beta_gamma == 1.0):
        raise ValueError("simplified cohort model pins beta_gamma to ones")

    d = p + 1
    obs = np.zeros((p, d))
    obs[:, 0] = params.beta
    obs[np.arange(p), np.arange(1, d)] = params.beta_gamma

    trans = np.zeros((d, d))
    trans[0, 0] = 1.0
    trans[1, 1] = params.lam
    trans[np.arange(2, d), np.arange(1, d - 1)] = 1.0

    intercept = np.zeros(d)
    intercept[0] = params.theta
    intercept[1] = params.eta

    noise = np.zeros((d, d))
    noise[0, 0] = params.sigma2_kappa
    noise[1, 1] = params.sigma2_gamma

    return SystemMatrices(
        obs_intercept=params.alpha.copy(),
        obs_matrix=obs,
        trans_matrix=trans,
        trans_intercept=intercept,
        trans_noise_cov=noise,
        obs_noise_var=params.sigma2_eps,
        cohort_shift=True,
    )


def extract_cohort_series(path: StatePath, window: AgeYearWindow, atol: float = 1e-9) -> dict[int, float]:
    """Read one cohort-factor value per birth year covered by the window.

    Each cohort appears in several (age, t) cells of the path; the shift
    identity makes them equal, so the value is read from the latest
    available time index.  Raises :class:`CorruptedPathError` if cells
    disagree beyond ``atol``.
    """
    p, n = window.n_ages, window.n_years
    gamma = path.gamma
    if gamma.shape != (n + 1, p):
        raise ValueError(f"path cohort block has shape {gamma.shape}, expected {(n + 1, p)}")
    err = path.shift_identity_error()
    if err > atol:
        raise CorruptedPathError(f"cohort-shift identity violated by {err:.3e} (tolerance {atol:.1e})")

    x1, xp = int(window.ages[0]), int(window.ages[-1])
    t1, tn = int(window.years[0]), int(window.years[-1])
    series: dict[int, float] = {}
    for c in range(t1 - xp, tn - x1 + 1):
        t_latest = min(tn, c + xp)
        age = t_latest - c
        series[c] = float(gamma[t_latest - (t1 - 1), age - x1])
    return series


def center_state_path(path: StatePath, spec: ModelSpec) -> StatePath:
    """Shift the period factor to zero mean over t = 1..n and (for cohort
    models) the cohort factor to zero mean over the window's n + p - 1
    birth years.

    The same additive shift is applied to every time index including the
    t = 0 seed row, so factor increments and the shift identity are
    preserved exactly.
    """
    states = path.states.copy()
    states[:, 0] -= states[1:, 0].mean()
    if spec.kind.has_cohort:
        series = extract_cohort_series(path, spec.window, atol=np.inf)
        states[:, 1:] -= np.mean(list(series.values()))
    return StatePath(states)


def normalize_sum_to_one(values: np.ndarray, name: str = "loadings") -> np.ndarray:
    total = float(np.sum(values))
    if total == 0.0:
        raise DegenerateDrawError(f"{name} sum to zero; draw cannot be normalized")
    return np.asarray(values, dtype=float) / total


def apply_constraints(
    path: StatePath, params: StaticParams, spec: ModelSpec
) -> tuple[StatePath, StaticParams]:
    """Impose the identification constraints on a raw draw.

    Centers the period factor (over t = 1..n) and the cohort factor (over
    all window cohorts), and rescales ``beta`` (and ``beta_gamma`` for the
    full cohort model) to sum to one.  No compensating adjustment is made
    to ``alpha`` or to the factors for the loading rescaling; constrained
    draws therefore reproduce fitted means only up to the shifts absorbed
    elsewhere in the sampler, which is the intended chain behaviour.
    """
    new_path = center_state_path(path, spec)
    updates: dict = {"beta": normalize_sum_to_one(params.beta, "beta")}
    if spec.kind is ModelKind.FULL_COHORT:
        updates["beta_gamma"] = normalize_sum_to_one(params.beta_gamma, "beta_gamma")
    return new_path, replace(params, **updates)
