"""Ingesting deaths/exposures tables, crude-rate panels and synthetic data.

Input tables follow the Human Mortality Database period 1x1 layout: a
title line, then a ``Year Age Female Male Total`` header, then one row
per (year, age) cell.  Both whitespace-aligned and comma-separated
variants are accepted; missing values are marked ``.`` and open age
intervals like ``110+`` parse as their lower bound (usable only when the
requested window excludes them).

Crude death rates are deaths over central exposure; the panels used for
fitting hold their natural logarithm.  Cells with zero exposure, zero
deaths (log undefined) or missing entries are rejected loudly, naming
the offending cell, rather than smoothed over.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import AgeYearWindow, DataPanel, ModelSpec, StatePath, StaticParams, build_system

__all__ = [
    "DataError",
    "RawVitalTable",
    "SyntheticTruth",
    "read_vital_table",
    "save_vital_table",
    "crude_rates",
    "death_probability",
    "initial_exposures",
    "simulate_panel",
    "save_panel_csv",
    "load_panel_csv",
    "save_panel_json",
    "load_panel_json",
]

_SEXES = ("female", "male", "total")


class DataError(ValueError):
    """Malformed or unusable input data."""


@dataclass(frozen=True)
class RawVitalTable:
    """Rows of a deaths or central-exposures table.

    ``open_age`` flags rows parsed from an open interval marker such as
    ``110+``.  Values may be NaN where the source file held a missing
    marker; consumers reject NaN cells inside their window.
    """

    kind: str  # "deaths" or "exposures"
    years: np.ndarray
    ages: np.ndarray
    open_age: np.ndarray
    female: np.ndarray
    male: np.ndarray
    total: np.ndarray

    def __post_init__(self):
        if self.kind not in ("deaths", "exposures"):
            raise ValueError("kind must be 'deaths' or 'exposures'")
        seen = set()
        for y, a in zip(self.years, self.ages):
            if (y, a) in seen:
                raise DataError(f"duplicate (year={y}, age={a}) row in {self.kind} table")
            seen.add((y, a))
        for name in _SEXES:
            vals = getattr(self, name)
            if np.any(vals[np.isfinite(vals)] < 0):
                raise DataError(f"negative {name} values in {self.kind} table")

    def lookup(self, sex: str) -> dict[tuple[int, int], float]:
        """(year, age) -> value map for one sex column."""
        vals = getattr(self, sex)
        return {
            (int(y), int(a)): float(v)
            for y, a, v in zip(self.years, self.ages, vals)
        }


def _parse_age(token: str) -> tuple[int, bool]:
    if token.endswith("+"):
        return int(token[:-1]), True
    return int(token), False


def _parse_value(token: str) -> float:
    if token == ".":
        return float("nan")
    return float(token)


def read_vital_table(path: str | Path, kind: str) -> RawVitalTable:
    """Parse an HMD-layout deaths or exposures file (whitespace or CSV)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with open(path) as fh:
        lines = [line.strip() for line in fh]

    rows = []
    header_seen = False
    for ln, line in enumerate(lines, start=1):
        if not line:
            continue
        parts = [tok.strip() for tok in line.split(",")] if "," in line else line.split()
        if not header_seen:
            if parts[0].lower() == "year":
                header_seen = True
            continue
        if len(parts) < 5:
            raise DataError(f"{path}:{ln}: expected 5 columns (Year Age Female Male Total)")
        try:
            year = int(parts[0])
            age, is_open = _parse_age(parts[1])
            female, male, total = (_parse_value(tok) for tok in parts[2:5])
        except ValueError as exc:
            raise DataError(f"{path}:{ln}: cannot parse row ({exc})") from exc
        rows.append((year, age, is_open, female, male, total))

    if not header_seen:
        raise DataError(f"{path}: no 'Year Age Female Male Total' header found")
    if not rows:
        raise DataError(f"{path}: table holds no data rows")
    years, ages, open_age, female, male, total = map(np.array, zip(*rows))
    return RawVitalTable(
        kind=kind,
        years=years.astype(int),
        ages=ages.astype(int),
        open_age=open_age.astype(bool),
        female=female.astype(float),
        male=male.astype(float),
        total=total.astype(float),
    )


def save_vital_table(table: RawVitalTable, path: str | Path, title: str | None = None) -> None:
    """Write a table back out in the whitespace-aligned layout."""
    title = title or f"{table.kind.capitalize()} (period 1x1)"
    with open(path, "w") as fh:
        fh.write(title + "\n\n")
        fh.write(f"{'Year':>6} {'Age':>6} {'Female':>18} {'Male':>18} {'Total':>18}\n")
        for i in range(table.years.size):
            age = f"{table.ages[i]}+" if table.open_age[i] else str(table.ages[i])
            cells = []
            for name in _SEXES:
                v = getattr(table, name)[i]
                cells.append("." if not np.isfinite(v) else f"{v:.17g}")
            fh.write(
                f"{table.years[i]:>6} {age:>6} {cells[0]:>18} {cells[1]:>18} {cells[2]:>18}\n"
            )


def crude_rates(
    deaths: RawVitalTable, exposures: RawVitalTable, sex: str, window: AgeYearWindow
) -> DataPanel:
    """Log crude death rates ln(D/E) over a window.

    Every window cell must be present in both tables with positive
    exposure and positive deaths; offending cells are reported by name.
    """
    if sex not in _SEXES:
        raise DataError(f"sex must be one of {_SEXES}")
    if deaths.kind != "deaths" or exposures.kind != "exposures":
        raise DataError("pass (deaths, exposures) tables in that order")
    d_map, e_map = deaths.lookup(sex), exposures.lookup(sex)

    log_rates = np.empty((window.n_ages, window.n_years))
    for i, age in enumerate(window.ages):
        for j, year in enumerate(window.years):
            key = (int(year), int(age))
            if key not in d_map or not np.isfinite(d_map[key]):
                raise DataError(f"missing deaths cell (age={age}, year={year})")
            if key not in e_map or not np.isfinite(e_map[key]):
                raise DataError(f"missing exposures cell (age={age}, year={year})")
            D, E = d_map[key], e_map[key]
            if E <= 0:
                raise DataError(f"nonpositive exposure at (age={age}, year={year})")
            if D <= 0:
                raise DataError(
                    f"zero deaths at (age={age}, year={year}): log crude rate undefined"
                )
            log_rates[i, j] = np.log(D / E)
    return DataPanel(window=window, log_rates=log_rates)


def death_probability(rate):
    """One-year death probability 1 - exp(-m) from a central death rate m."""
    return 1.0 - np.exp(-np.asarray(rate, dtype=float))


def initial_exposures(central_exposures, deaths):
    """Start-of-year exposure approximation E + D/2 (utility; the fitting
    pipeline works with central exposures)."""
    return np.asarray(central_exposures, dtype=float) + 0.5 * np.asarray(deaths, dtype=float)


@dataclass(frozen=True)
class SyntheticTruth:
    """A simulated panel together with the parameters and latent path
    that generated it."""

    params: StaticParams
    path: StatePath
    panel: DataPanel
    seed: int


def simulate_panel(
    spec: ModelSpec,
    params: StaticParams,
    init_state: np.ndarray | float,
    seed: int,
) -> SyntheticTruth:
    """Simulate a log-rate panel from known parameters.

    The latent path starts from ``init_state`` at t = 0 and follows the
    state equation; observations add N(0, sigma2_eps) noise per cell.
    The cohort shift is applied as an exact copy.  Deterministic given
    ``seed``.
    """
    p, n, d = spec.window.n_ages, spec.window.n_years, spec.state_dim
    phi0 = np.broadcast_to(np.asarray(init_state, dtype=float), (d,)).astype(float)
    sys = build_system(spec, params)
    rng = np.random.default_rng(seed)

    states = np.empty((n + 1, d))
    states[0] = phi0
    log_rates = np.empty((p, n))
    sd_kappa = np.sqrt(params.sigma2_kappa)
    sd_gamma = np.sqrt(params.sigma2_gamma) if spec.kind.has_cohort else 0.0
    sd_obs = np.sqrt(params.sigma2_eps)
    for t in range(1, n + 1):
        prev = states[t - 1]
        states[t, 0] = prev[0] + params.theta + sd_kappa * rng.standard_normal()
        if spec.kind.has_cohort:
            states[t, 1] = params.lam * prev[1] + params.eta + sd_gamma * rng.standard_normal()
            states[t, 2:] = prev[1:-1]
        mean = sys.obs_intercept + sys.obs_matrix @ states[t]
        log_rates[:, t - 1] = mean + sd_obs * rng.standard_normal(p)

    panel = DataPanel(window=spec.window, log_rates=log_rates)
    return SyntheticTruth(params=params, path=StatePath(states), panel=panel, seed=seed)


def save_panel_csv(panel: DataPanel, path: str | Path) -> None:
    """Age-by-year grid with a header row of years and leading age column."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["age"] + [int(y) for y in panel.window.years])
        for i, age in enumerate(panel.window.ages):
            writer.writerow([int(age)] + [f"{v:.17g}" for v in panel.log_rates[i]])


def load_panel_csv(path: str | Path) -> DataPanel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such panel file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3 or rows[0][0] != "age":
        raise DataError(f"{path}: not a log-rate panel CSV (expected 'age' header)")
    try:
        years = [int(y) for y in rows[0][1:]]
        ages = [int(r[0]) for r in rows[1:] if r]
        values = [[float(v) for v in r[1:]] for r in rows[1:] if r]
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed panel CSV ({exc})") from exc
    try:
        window = AgeYearWindow(ages, years)
        return DataPanel(window=window, log_rates=np.asarray(values))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def save_panel_json(panel: DataPanel, path: str | Path) -> None:
    payload = {
        "ages": [int(a) for a in panel.window.ages],
        "years": [int(y) for y in panel.window.years],
        "log_rates": panel.log_rates.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_panel_json(path: str | Path) -> DataPanel:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such panel file")
    try:
        with open(path) as fh:
            payload = json.load(fh)
        window = AgeYearWindow(payload["ages"], payload["years"])
        return DataPanel(window=window, log_rates=np.asarray(payload["log_rates"], dtype=float))
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"{path}: malformed panel JSON ({exc})") from exc
