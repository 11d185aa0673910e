"""Rank the three models on data with and without cohort structure.

Two synthetic panels are generated: one from a cohort model with a
pronounced year-of-birth effect, one from plain Lee-Carter dynamics.
All three models are fitted to each panel and ranked by conditional
DIC; the residual grids show why the Lee-Carter fit fails on cohort
data (large residuals concentrate along birth-year diagonals).
"""

import numpy as np

import ssmort as sm

window = sm.AgeYearWindow.from_ranges(60, 67, 1995, 2019)  # 8 ages x 25 years
p = window.n_ages
KINDS = [sm.ModelKind.LC, sm.ModelKind.SIMPLIFIED_COHORT, sm.ModelKind.FULL_COHORT]


def fit_all(panel, seed):
    rows = []
    for kind in KINDS:
        spec = sm.ModelSpec(kind, window)
        chain = sm.run_chain(spec, panel, sm.SamplerConfig(iterations=1500, burn_in=750, seed=seed))
        report = sm.compute_dic(panel, chain)
        rows.append((kind.value, report, chain))
    return rows


def print_table(rows):
    print(f"  {'model':<20} {'DIC':>10} {'pD':>8}")
    for name, report, _ in sorted(rows, key=lambda r: r[1].dic):
        print(f"  {name:<20} {report.dic:>10.1f} {report.p_d:>8.1f}")


# ------------------------------------------------- cohort-driven surface
cohort_truth = sm.StaticParams(
    alpha=np.linspace(-4.6, -2.4, p),
    beta=np.full(p, 1 / p),
    theta=-0.3,
    sigma2_eps=3e-4,
    sigma2_kappa=0.03,
    beta_gamma=np.ones(p),   # simplified-model truth: unit cohort loading
    eta=0.0,
    lam=0.3,
    sigma2_gamma=0.02,
)
gen_spec = sm.ModelSpec(sm.ModelKind.SIMPLIFIED_COHORT, window)
cohort_panel = sm.simulate_panel(gen_spec, cohort_truth, 0.0, seed=11)

print("panel generated WITH a cohort effect:")
rows = fit_all(cohort_panel.panel, seed=1)
print_table(rows)

lc_chain = next(c for name, _, c in rows if name == "lc")
grid = sm.compute_residuals(cohort_panel.panel, lc_chain)
series = sm.extract_cohort_series(cohort_panel.path, window)
strongest = {c for c, _ in sorted(series.items(), key=lambda kv: -abs(kv[1]))[:3]}
on_diag = [abs(r) for a, y, c, r in grid.rows() if c in strongest]
off_diag = [abs(r) for a, y, c, r in grid.rows() if c not in strongest]
print(f"\n  Lee-Carter residuals, mean |e|: {np.mean(on_diag):.4f} on the three strongest")
print(f"  cohort diagonals vs {np.mean(off_diag):.4f} elsewhere -> diagonal banding\n")

# ------------------------------------------------- cohort-free surface
lc_truth = sm.StaticParams(
    alpha=np.linspace(-4.6, -2.4, p),
    beta=np.full(p, 1 / p),
    theta=-0.3,
    sigma2_eps=3e-4,
    sigma2_kappa=0.03,
)
lc_panel = sm.simulate_panel(sm.ModelSpec(sm.ModelKind.LC, window), lc_truth, 0.0, seed=12)

print("panel generated WITHOUT a cohort effect:")
rows = fit_all(lc_panel.panel, seed=2)
print_table(rows)
print("\n  with no cohort signal the DIC gaps shrink to effective-parameter scale;")
print("  the extra cohort machinery buys little fit improvement here.")
