"""Chain persistence: columnar CSV and an equivalent JSON form.

One row per stored draw.  Columns cover every static-parameter scalar,
the period factor at each time index (labelled by calendar year, starting
at the seed year t_1 - 1) and one value per window cohort (labelled by
birth year).  A metadata header records the model kind, window, seed,
iteration count, burn-in and thinning, so a chain file plus the fitted
panel is enough to reproduce diagnostics and forecasts.

The cohort block of the latent path is stored through its per-cohort
values; the single t = 0 oldest-age slot belongs to the birth year just
before the window and is not part of the schema.  On load it is filled
with 0.0, which no downstream computation reads.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .gibbs import PosteriorChain, SamplerConfig
from .model import AgeYearWindow, ModelKind, ModelSpec

__all__ = ["ChainFileError", "save_chain_csv", "save_chain_json", "load_chain"]


class ChainFileError(ValueError):
    """A chain file is missing, truncated or malformed."""


def _meta(chain: PosteriorChain) -> dict:
    window = chain.spec.window
    cfg = chain.config
    return {
        "model": chain.spec.kind.value,
        "age_lo": int(window.ages[0]),
        "age_hi": int(window.ages[-1]),
        "year_lo": int(window.years[0]),
        "year_hi": int(window.years[-1]),
        "seed": cfg.seed,
        "iterations": cfg.iterations,
        "burn_in": cfg.burn_in,
        "thin": cfg.thin,
    }


def _columns(chain: PosteriorChain) -> tuple[list[str], np.ndarray]:
    """Column names and the (L, n_cols) value matrix."""
    window = chain.spec.window
    kind = chain.spec.kind
    names: list[str] = []
    blocks: list[np.ndarray] = []

    def add(prefix, labels, block):
        names.extend(f"{prefix}_{lab}" for lab in labels)
        blocks.append(block)

    add("alpha", window.ages, chain.alpha)
    add("beta", window.ages, chain.beta)
    if chain.beta_gamma is not None:
        add("beta_gamma", window.ages, chain.beta_gamma)
    names.append("theta")
    blocks.append(chain.theta[:, None])
    if kind.has_cohort:
        names.extend(["eta", "lambda"])
        blocks.extend([chain.eta[:, None], chain.lam[:, None]])
    names.append("sigma2_eps")
    blocks.append(chain.sigma2_eps[:, None])
    names.append("sigma2_kappa")
    blocks.append(chain.sigma2_kappa[:, None])
    if kind.has_cohort:
        names.append("sigma2_gamma")
        blocks.append(chain.sigma2_gamma[:, None])

    years_with_seed = np.arange(window.years[0] - 1, window.years[-1] + 1)
    add("kappa", years_with_seed, chain.states[:, :, 0])
    if kind.has_cohort:
        x1, xp = int(window.ages[0]), int(window.ages[-1])
        t1, tn = int(window.years[0]), int(window.years[-1])
        cohort_cols = []
        for c in window.cohorts:
            t_latest = min(tn, c + xp)
            j, i = t_latest - (t1 - 1), (t_latest - c) - x1
            cohort_cols.append(chain.states[:, j, 1 + i])
        add("gamma", window.cohorts, np.column_stack(cohort_cols))

    return names, np.hstack(blocks)


def save_chain_csv(chain: PosteriorChain, path: str | Path) -> None:
    names, values = _columns(chain)
    with open(path, "w") as fh:
        fh.write("# " + json.dumps(_meta(chain)) + "\n")
        fh.write("draw," + ",".join(names) + "\n")
        for i, row in enumerate(values):
            fh.write(str(i) + "," + ",".join(f"{v:.17g}" for v in row) + "\n")


def save_chain_json(chain: PosteriorChain, path: str | Path) -> None:
    names, values = _columns(chain)
    payload = {"meta": _meta(chain), "columns": names, "draws": values.tolist()}
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def _rebuild(meta: dict, names: list[str], values: np.ndarray, path) -> PosteriorChain:
    try:
        kind = ModelKind(meta["model"])
        window = AgeYearWindow.from_ranges(meta["age_lo"], meta["age_hi"], meta["year_lo"], meta["year_hi"])
        spec = ModelSpec(kind, window)
        config = SamplerConfig(
            iterations=meta["iterations"],
            burn_in=meta["burn_in"],
            seed=meta["seed"],
            thin=meta.get("thin", 1),
        )
    except (KeyError, ValueError) as exc:
        raise ChainFileError(f"{path}: invalid metadata header ({exc})") from exc

    col = {name: values[:, i] for i, name in enumerate(names)}
    p, n = window.n_ages, window.n_years
    L = values.shape[0]

    def block(prefix, labels):
        try:
            return np.column_stack([col[f"{prefix}_{lab}"] for lab in labels])
        except KeyError as exc:
            raise ChainFileError(f"{path}: missing column {exc}") from exc

    def scalar(name):
        if name not in col:
            raise ChainFileError(f"{path}: missing column '{name}'")
        return col[name]

    kappa = block("kappa", np.arange(window.years[0] - 1, window.years[-1] + 1))
    if kind is ModelKind.LC:
        states = kappa[:, :, None]
        extra: dict = {}
    else:
        states = np.zeros((L, n + 1, p + 1))
        states[:, :, 0] = kappa
        gamma_cols = block("gamma", window.cohorts)
        by_cohort = {int(c): gamma_cols[:, k] for k, c in enumerate(window.cohorts)}
        x1 = int(window.ages[0])
        t1 = int(window.years[0])
        for j in range(n + 1):
            year = t1 - 1 + j
            for i in range(p):
                c = year - (x1 + i)
                if c in by_cohort:
                    states[:, j, 1 + i] = by_cohort[c]
        extra = {
            "eta": scalar("eta"),
            "lam": scalar("lambda"),
            "sigma2_gamma": scalar("sigma2_gamma"),
        }
        if kind is ModelKind.FULL_COHORT:
            extra["beta_gamma"] = block("beta_gamma", window.ages)

    return PosteriorChain(
        spec=spec,
        config=config,
        alpha=block("alpha", window.ages),
        beta=block("beta", window.ages),
        theta=scalar("theta"),
        sigma2_eps=scalar("sigma2_eps"),
        sigma2_kappa=scalar("sigma2_kappa"),
        states=states,
        **extra,
    )


def load_chain(path: str | Path) -> PosteriorChain:
    """Load a chain from its CSV or JSON form (detected by extension)."""
    path = Path(path)
    if not path.exists():
        raise ChainFileError(f"{path}: no such chain file")
    if path.suffix.lower() == ".json":
        try:
            with open(path) as fh:
                payload = json.load(fh)
            meta, names = payload["meta"], payload["columns"]
            values = np.asarray(payload["draws"], dtype=float)
            if values.ndim != 2 or values.shape[1] != len(names):
                raise ValueError("draw rows do not match the column list")
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise ChainFileError(f"{path}: corrupt chain file ({exc})") from exc
        return _rebuild(meta, names, values, path)

    with open(path) as fh:
        lines = [line.rstrip("\n") for line in fh]
    if len(lines) < 3 or not lines[0].startswith("#"):
        raise ChainFileError(f"{path}: corrupt chain file (missing header)")
    try:
        meta = json.loads(lines[0].lstrip("# "))
    except json.JSONDecodeError as exc:
        raise ChainFileError(f"{path}: corrupt metadata header") from exc
    header = lines[1].split(",")
    if header[0] != "draw":
        raise ChainFileError(f"{path}: corrupt chain file (unexpected header row)")
    names = header[1:]
    rows = []
    for ln, line in enumerate(lines[2:], start=3):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(names) + 1:
            raise ChainFileError(f"{path}: truncated or malformed row at line {ln}")
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise ChainFileError(f"{path}: non-numeric value at line {ln}") from exc
    if not rows:
        raise ChainFileError(f"{path}: chain file holds no draws")
    return _rebuild(meta, names, np.asarray(rows), path)
