"""Command-line front end: simulate, fit, diagnose, forecast, compare.

Each command writes its artifacts into one output directory together with
a ``manifest.json`` recording the resolved arguments, seeds and SHA-256
checksums of every written file, so a run can be reproduced bit for bit.

Exit codes: 0 success, 2 usage, 3 data error, 4 numeric failure.  The
``SSMORT_OUT_ROOT`` environment variable supplies a default output root
when ``--out`` is omitted.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .chainio import ChainFileError, load_chain, save_chain_csv, save_chain_json
from .data_io import (
    DataError,
    crude_rates,
    load_panel_csv,
    read_vital_table,
    save_panel_csv,
    simulate_panel,
)
from .diagnostics import compute_dic, compute_residuals, save_dic_json, save_residuals_csv
from .forecast import (
    forecast,
    project_factors,
    save_factor_projection_csv,
    save_forecast_draws_csv,
    save_forecast_summary_csv,
)
from .gibbs import PosteriorChain, SamplerConfig, SamplerError, run_chain
from .lgssm import IllConditionedSystemError
from .model import (
    AgeYearWindow,
    CorruptedPathError,
    DataPanel,
    DegenerateDrawError,
    ModelKind,
    ModelSpec,
    StaticParams,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
ENV_OUT_ROOT = "SSMORT_OUT_ROOT"

DEFAULT_AGES = "65:95"
DEFAULT_YEARS = "1970:2010"


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}")
    if hi < lo:
        raise argparse.ArgumentTypeError(f"range {text!r} is empty")
    return lo, hi


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _write_manifest(out_dir: Path, payload: dict, artifacts: list[Path]) -> None:
    payload = dict(payload)
    payload["artifacts"] = {p.name: _sha256(p) for p in artifacts}
    with open(out_dir / "manifest.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _resolve_out(args, default_name: str) -> Path:
    if args.out:
        out = Path(args.out)
    else:
        root = os.environ.get(ENV_OUT_ROOT)
        if not root:
            raise DataError(f"no --out given and {ENV_OUT_ROOT} is not set")
        out = Path(root) / default_name
    out.mkdir(parents=True, exist_ok=True)
    return out


def _window(args) -> AgeYearWindow:
    ages = _parse_range(args.ages or DEFAULT_AGES)
    years = _parse_range(args.years or DEFAULT_YEARS)
    return AgeYearWindow.from_ranges(ages[0], ages[1], years[0], years[1])


def _slice_panel(panel: DataPanel, args) -> DataPanel:
    """Restrict a loaded panel to explicitly requested age/year ranges."""
    if not args.ages and not args.years:
        return panel
    ages = _parse_range(args.ages) if args.ages else (panel.window.ages[0], panel.window.ages[-1])
    years = _parse_range(args.years) if args.years else (panel.window.years[0], panel.window.years[-1])
    w = panel.window
    if ages[0] < w.ages[0] or ages[1] > w.ages[-1] or years[0] < w.years[0] or years[1] > w.years[-1]:
        raise DataError("requested window extends beyond the panel")
    ai = slice(ages[0] - w.ages[0], ages[1] - w.ages[0] + 1)
    yi = slice(years[0] - w.years[0], years[1] - w.years[0] + 1)
    window = AgeYearWindow.from_ranges(ages[0], ages[1], years[0], years[1])
    return DataPanel(window=window, log_rates=panel.log_rates[ai, yi])


def _load_fit_panel(args) -> tuple[DataPanel, dict]:
    """Panel from either --panel or (--deaths, --exposures, --sex)."""
    if args.panel:
        panel = _slice_panel(load_panel_csv(args.panel), args)
        return panel, {"panel": str(args.panel)}
    if not (args.deaths and args.exposures):
        raise DataError("provide either --panel or both --deaths and --exposures")
    deaths = read_vital_table(args.deaths, "deaths")
    exposures = read_vital_table(args.exposures, "exposures")
    panel = crude_rates(deaths, exposures, args.sex, _window(args))
    inputs = {"deaths": str(args.deaths), "exposures": str(args.exposures), "sex": args.sex}
    return panel, inputs


def _params_from_json(path: Path, spec: ModelSpec) -> tuple[StaticParams, np.ndarray | float]:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: invalid parameter file ({exc})") from exc
    p = spec.window.n_ages

    def vec(name, default=None):
        if name not in raw:
            return default
        value = np.asarray(raw[name], dtype=float)
        return np.broadcast_to(value, (p,)).astype(float)

    try:
        kwargs = dict(
            alpha=vec("alpha", np.linspace(-5.0, -2.0, p)),
            beta=vec("beta", np.full(p, 1.0 / p)),
            theta=float(raw.get("theta", -0.2)),
            sigma2_eps=float(raw.get("sigma2_eps", 3e-4)),
            sigma2_kappa=float(raw.get("sigma2_kappa", 0.05)),
        )
        if spec.kind.has_cohort:
            default_bg = np.ones(p) if spec.kind is ModelKind.SIMPLIFIED_COHORT else np.full(p, 1.0 / p)
            kwargs.update(
                beta_gamma=vec("beta_gamma", default_bg),
                eta=float(raw.get("eta", -0.05)),
                lam=float(raw.get("lambda", 0.9)),
                sigma2_gamma=float(raw.get("sigma2_gamma", 0.05)),
            )
        params = StaticParams(**kwargs)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: invalid parameter file ({exc})") from exc
    init_state = raw.get("init_state", 0.0)
    init_state = np.asarray(init_state, dtype=float) if isinstance(init_state, list) else float(init_state)
    return params, init_state


def _default_truth(spec: ModelSpec) -> tuple[StaticParams, float]:
    p = spec.window.n_ages
    kwargs = dict(
        alpha=np.linspace(-5.0, -2.0, p),
        beta=np.full(p, 1.0 / p),
        theta=-0.2,
        sigma2_eps=3e-4,
        sigma2_kappa=0.05,
    )
    if spec.kind.has_cohort:
        bg = np.ones(p) if spec.kind is ModelKind.SIMPLIFIED_COHORT else np.full(p, 1.0 / p)
        kwargs.update(beta_gamma=bg, eta=-0.05, lam=0.9, sigma2_gamma=0.05)
    return StaticParams(**kwargs), 0.0


def _params_dict(params: StaticParams) -> dict:
    out = {
        "alpha": params.alpha.tolist(),
        "beta": params.beta.tolist(),
        "theta": params.theta,
        "sigma2_eps": params.sigma2_eps,
        "sigma2_kappa": params.sigma2_kappa,
    }
    if params.beta_gamma is not None:
        out.update(
            beta_gamma=params.beta_gamma.tolist(),
            eta=params.eta,
            lam=params.lam,
            sigma2_gamma=params.sigma2_gamma,
        )
    return out


def cmd_simulate(args) -> int:
    window = _window(args)
    spec = ModelSpec(ModelKind(args.model), window)
    if args.params:
        params, init_state = _params_from_json(Path(args.params), spec)
    else:
        params, init_state = _default_truth(spec)
    out = _resolve_out(args, f"simulate-{args.model}-seed{args.seed}")

    truth = simulate_panel(spec, params, init_state, args.seed)
    save_panel_csv(truth.panel, out / "panel.csv")
    with open(out / "truth.json", "w") as fh:
        json.dump(
            {
                "model": spec.kind.value,
                "ages": [int(window.ages[0]), int(window.ages[-1])],
                "years": [int(window.years[0]), int(window.years[-1])],
                "seed": args.seed,
                "params": _params_dict(params),
                "path": truth.path.states.tolist(),
            },
            fh,
        )
        fh.write("\n")
    _write_manifest(
        out,
        {
            "command": "simulate",
            "model": spec.kind.value,
            "ages": args.ages or DEFAULT_AGES,
            "years": args.years or DEFAULT_YEARS,
            "seed": args.seed,
            "params_file": str(args.params) if args.params else None,
            "out": str(out),
        },
        [out / "panel.csv", out / "truth.json"],
    )
    print(f"wrote synthetic panel and truth to {out}")
    return EXIT_OK


def _concat_chains(chains: list[PosteriorChain]) -> PosteriorChain:
    if len(chains) == 1:
        return chains[0]
    first = chains[0]

    def cat(name):
        parts = [getattr(c, name) for c in chains]
        return None if parts[0] is None else np.concatenate(parts, axis=0)

    return PosteriorChain(
        spec=first.spec,
        config=first.config,
        alpha=cat("alpha"),
        beta=cat("beta"),
        theta=cat("theta"),
        sigma2_eps=cat("sigma2_eps"),
        sigma2_kappa=cat("sigma2_kappa"),
        states=cat("states"),
        beta_gamma=cat("beta_gamma"),
        eta=cat("eta"),
        lam=cat("lam"),
        sigma2_gamma=cat("sigma2_gamma"),
    )


def _write_summary_csv(chain: PosteriorChain, path: Path) -> None:
    with open(path, "w") as fh:
        fh.write("parameter,mean,q02.5,q97.5,ess\n")
        for name, mean, lo, hi, ess in chain.summary():
            fh.write(f"{name},{mean:.17g},{lo:.17g},{hi:.17g},{ess:.17g}\n")


def cmd_fit(args) -> int:
    panel, inputs = _load_fit_panel(args)
    spec = ModelSpec(ModelKind(args.model), panel.window)
    out = _resolve_out(args, f"fit-{args.model}-seed{args.seed}")
    log_path = out / "fit.log"
    artifacts = [out / "panel.csv"]
    save_panel_csv(panel, out / "panel.csv")

    chains = []
    with open(log_path, "w") as log:
        for c in range(args.chains):
            seed = args.seed + c
            config = SamplerConfig(
                iterations=args.iters, burn_in=args.burnin, seed=seed, thin=args.thin
            )
            start = time.time()
            chain = run_chain(spec, panel, config)
            log.write(
                f"chain seed={seed}: {args.iters} iterations, kept {len(chain)}, "
                f"{time.time() - start:.1f}s\n"
            )
            name = "chain.csv" if args.chains == 1 else f"chain_s{seed}.csv"
            save_chain_csv(chain, out / name)
            artifacts.append(out / name)
            if args.chain_json:
                jname = name.replace(".csv", ".json")
                save_chain_json(chain, out / jname)
                artifacts.append(out / jname)
            chains.append(chain)

    _write_summary_csv(_concat_chains(chains), out / "summary.csv")
    artifacts.append(out / "summary.csv")
    _write_manifest(
        out,
        {
            "command": "fit",
            "model": args.model,
            "inputs": inputs,
            "ages": [int(panel.window.ages[0]), int(panel.window.ages[-1])],
            "years": [int(panel.window.years[0]), int(panel.window.years[-1])],
            "sampler": {
                "iterations": args.iters,
                "burn_in": args.burnin,
                "thin": args.thin,
                "chains": args.chains,
            },
            "seed": args.seed,
            "out": str(out),
        },
        artifacts + [log_path],
    )
    print(f"fit complete; chain and summaries in {out}")
    return EXIT_OK


def _resolve_chain_and_panel(chain_arg: str, panel_arg: str | None) -> tuple[PosteriorChain, DataPanel, Path]:
    chain_path = Path(chain_arg)
    if chain_path.is_dir():
        chain_path = chain_path / "chain.csv"
    chain = load_chain(chain_path)
    panel_path = Path(panel_arg) if panel_arg else chain_path.parent / "panel.csv"
    panel = load_panel_csv(panel_path)
    if panel.window != chain.spec.window:
        raise DataError(f"panel window {panel_path} does not match chain window {chain_path}")
    return chain, panel, chain_path


def cmd_diagnose(args) -> int:
    chain, panel, chain_path = _resolve_chain_and_panel(args.chain, args.panel)
    out = Path(args.out) if args.out else chain_path.parent
    out.mkdir(parents=True, exist_ok=True)
    grid = compute_residuals(panel, chain)
    report = compute_dic(panel, chain)
    save_residuals_csv(grid, out / "residuals.csv")
    save_dic_json(report, out / "dic.json")
    _write_manifest(
        out,
        {
            "command": "diagnose",
            "chain": str(chain_path),
            "panel": str(args.panel) if args.panel else str(chain_path.parent / "panel.csv"),
            "model": chain.spec.kind.value,
            "out": str(out),
        },
        [out / "residuals.csv", out / "dic.json"],
    )
    print(f"model {chain.spec.kind.value}: DIC {report.dic:.2f} (pD {report.p_d:.2f})")
    return EXIT_OK


def cmd_compare(args) -> int:
    rows = []
    for chain_arg in args.chain:
        chain, panel, chain_path = _resolve_chain_and_panel(chain_arg, None)
        report = compute_dic(panel, chain)
        rows.append((chain.spec.kind.value, str(chain_path), report))
    rows.sort(key=lambda r: r[2].dic)
    out = Path(args.out) if args.out else Path.cwd()
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w") as fh:
        fh.write("model,chain,dic,p_d,mean_deviance\n")
        for kind, path, rep in rows:
            fh.write(f"{kind},{path},{rep.dic:.17g},{rep.p_d:.17g},{rep.mean_deviance:.17g}\n")
    print(f"{'model':<20} {'DIC':>12} {'pD':>10}")
    for kind, _, rep in rows:
        print(f"{kind:<20} {rep.dic:>12.2f} {rep.p_d:>10.2f}")
    return EXIT_OK


def cmd_forecast(args) -> int:
    chain_path = Path(args.chain)
    if chain_path.is_dir():
        chain_path = chain_path / "chain.csv"
    chain = load_chain(chain_path)
    out = Path(args.out) if args.out else chain_path.parent / "forecast"
    out.mkdir(parents=True, exist_ok=True)
    result = forecast(chain, args.horizon)
    projection = project_factors(chain, args.horizon)
    save_forecast_draws_csv(result, out / "forecast_draws.csv")
    save_forecast_summary_csv(result, out / "forecast_summary.csv", scale="log")
    save_forecast_summary_csv(result, out / "forecast_summary_rates.csv", scale="rate")
    artifacts = [
        out / "forecast_draws.csv",
        out / "forecast_summary.csv",
        out / "forecast_summary_rates.csv",
        out / "factors_kappa.csv",
    ]
    gamma_path = out / "factors_cohort.csv" if chain.spec.kind.has_cohort else None
    save_factor_projection_csv(projection, out / "factors_kappa.csv", gamma_path)
    if gamma_path is not None:
        artifacts.append(gamma_path)
    _write_manifest(
        out,
        {
            "command": "forecast",
            "chain": str(chain_path),
            "horizon": args.horizon,
            "model": chain.spec.kind.value,
            "out": str(out),
        },
        artifacts,
    )
    print(f"forecast horizon {args.horizon} written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssmort",
        description="Bayesian state-space mortality models with cohort effects",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    models = [k.value for k in ModelKind]

    sim = sub.add_parser("simulate", help="write a synthetic panel from known parameters")
    sim.add_argument("--model", choices=models, required=True)
    sim.add_argument("--ages", default=None, help=f"age range LO:HI (default {DEFAULT_AGES})")
    sim.add_argument("--years", default=None, help=f"year range LO:HI (default {DEFAULT_YEARS})")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--params", default=None, help="JSON file of true parameters")
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=cmd_simulate)

    fit = sub.add_parser("fit", help="run the Gibbs sampler on a data panel")
    fit.add_argument("--model", choices=models, required=True)
    fit.add_argument("--deaths", default=None, help="HMD-layout deaths file")
    fit.add_argument("--exposures", default=None, help="HMD-layout central exposures file")
    fit.add_argument("--sex", choices=["female", "male", "total"], default="male")
    fit.add_argument("--panel", default=None, help="log-rate panel CSV (alternative to raw tables)")
    fit.add_argument("--ages", default=None, help=f"age range LO:HI (default {DEFAULT_AGES})")
    fit.add_argument("--years", default=None, help=f"year range LO:HI (default {DEFAULT_YEARS})")
    fit.add_argument("--iters", type=_positive_int, default=30_000)
    fit.add_argument("--burnin", type=int, default=15_000)
    fit.add_argument("--thin", type=_positive_int, default=1)
    fit.add_argument("--seed", type=int, default=1)
    fit.add_argument("--chains", type=_positive_int, default=1, help="chains with seeds seed..seed+N-1")
    fit.add_argument("--chain-json", action="store_true", help="also write the JSON chain form")
    fit.add_argument("--out", default=None)
    fit.set_defaults(func=cmd_fit)

    diag = sub.add_parser("diagnose", help="residual grid and DIC for a fitted chain")
    diag.add_argument("--chain", required=True, help="run directory or chain file")
    diag.add_argument("--panel", default=None, help="panel CSV (default: panel.csv next to the chain)")
    diag.add_argument("--out", default=None)
    diag.set_defaults(func=cmd_diagnose)

    cmp_ = sub.add_parser("compare", help="rank fitted chains by DIC (ascending)")
    cmp_.add_argument("--chain", action="append", required=True, help="repeatable: run dir or chain file")
    cmp_.add_argument("--out", default=None)
    cmp_.set_defaults(func=cmd_compare)

    fc = sub.add_parser("forecast", help="posterior predictive death-rate forecasts")
    fc.add_argument("--chain", required=True, help="run directory or chain file")
    fc.add_argument("--horizon", type=_positive_int, required=True)
    fc.add_argument("--out", default=None)
    fc.set_defaults(func=cmd_forecast)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataError, ChainFileError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (
        SamplerError,
        IllConditionedSystemError,
        DegenerateDrawError,
        CorruptedPathError,
        np.linalg.LinAlgError,
    ) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
