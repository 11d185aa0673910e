import numpy as np
import pytest

import ssmort as sm

HMD_DEATHS = """Deaths (period 1x1),\tLast modified: 01 Jan 2020

  Year          Age             Female            Male           Total
  2000           69             100.00            120.00          220.00
  2000           70             110.00            130.00          240.00
  2000           71             120.00            140.00          260.00
  2001           69             101.00            121.00          222.00
  2001           70             111.00            131.00          242.00
  2001           71             121.00            141.00          262.00
  2001          110+              1.00              2.00            3.00
  2002           69               .                  .               .
  2002           70             112.00            132.00          244.00
  2002           71             122.00            142.00          264.00
"""

HMD_EXPOSURES = """Exposure to risk (period 1x1),\tLast modified: 01 Jan 2020

  Year          Age             Female            Male           Total
  2000           69            10000.0            9000.0         19000.0
  2000           70            10100.0            9100.0         19200.0
  2000           71            10200.0            9200.0         19400.0
  2001           69            10010.0            9010.0         19020.0
  2001           70            10110.0            9110.0         19220.0
  2001           71            10210.0            9210.0         19420.0
  2002           69            10020.0            9020.0         19040.0
  2002           70            10120.0            9120.0         19240.0
  2002           71            10220.0            9220.0         19440.0
"""


@pytest.fixture
def hmd_files(tmp_path):
    deaths = tmp_path / "Deaths_1x1.txt"
    exposures = tmp_path / "Exposures_1x1.txt"
    deaths.write_text(HMD_DEATHS)
    exposures.write_text(HMD_EXPOSURES)
    return deaths, exposures


def test_parse_whitespace_layout(hmd_files):
    deaths, _ = hmd_files
    table = sm.read_vital_table(deaths, "deaths")
    lut = table.lookup("male")
    assert lut[(2000, 70)] == 130.0
    assert table.open_age[np.flatnonzero(table.ages == 110)[0]]
    assert np.isnan(lut[(2002, 69)])


def test_parse_csv_layout(tmp_path):
    csv_file = tmp_path / "deaths.csv"
    csv_file.write_text(
        "Deaths (period 1x1)\nYear,Age,Female,Male,Total\n"
        "2000,69,100.0,120.0,220.0\n2000,70,110.0,130.0,240.0\n"
    )
    table = sm.read_vital_table(csv_file, "deaths")
    assert table.lookup("female")[(2000, 70)] == 110.0


def test_parse_rejects_malformed_rows(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("Year Age Female Male Total\n2000 70 oops 1 2\n")
    with pytest.raises(sm.DataError):
        sm.read_vital_table(bad, "deaths")
    missing_header = tmp_path / "nohdr.txt"
    missing_header.write_text("2000 70 1 2 3\n")
    with pytest.raises(sm.DataError):
        sm.read_vital_table(missing_header, "deaths")


def test_duplicate_cells_rejected():
    with pytest.raises(sm.DataError):
        sm.RawVitalTable(
            kind="deaths",
            years=np.array([2000, 2000]),
            ages=np.array([70, 70]),
            open_age=np.array([False, False]),
            female=np.ones(2),
            male=np.ones(2),
            total=np.ones(2),
        )


def test_crude_rates_definitional_arithmetic(hmd_files):
    deaths, exposures = hmd_files
    window = sm.AgeYearWindow.from_ranges(69, 70, 2000, 2001)
    d = sm.read_vital_table(deaths, "deaths")
    e = sm.read_vital_table(exposures, "exposures")
    panel = sm.crude_rates(d, e, "male", window)
    assert abs(panel.log_rates[0, 0] - np.log(120.0 / 9000.0)) < 1e-14


def test_log_rate_of_simple_ratio():
    window = sm.AgeYearWindow.from_ranges(60, 61, 2000, 2001)
    deaths = sm.RawVitalTable(
        kind="deaths",
        years=np.array([2000, 2000, 2001, 2001]),
        ages=np.array([60, 61, 60, 61]),
        open_age=np.zeros(4, dtype=bool),
        female=np.array([10.0, 10.0, 10.0, 10.0]),
        male=np.array([10.0, 10.0, 10.0, 10.0]),
        total=np.array([20.0, 20.0, 20.0, 20.0]),
    )
    exposures = sm.RawVitalTable(
        kind="exposures",
        years=deaths.years,
        ages=deaths.ages,
        open_age=deaths.open_age,
        female=np.full(4, 1000.0),
        male=np.full(4, 1000.0),
        total=np.full(4, 2000.0),
    )
    panel = sm.crude_rates(deaths, exposures, "female", window)
    assert np.allclose(panel.log_rates, np.log(0.01))
    assert abs(panel.log_rates[0, 0] - (-4.60517)) < 5e-6

    equal = sm.crude_rates(deaths, deaths_to_exposures(deaths), "female", window)
    assert np.allclose(equal.log_rates, 0.0)


def deaths_to_exposures(table: sm.RawVitalTable) -> sm.RawVitalTable:
    return sm.RawVitalTable(
        kind="exposures",
        years=table.years,
        ages=table.ages,
        open_age=table.open_age,
        female=table.female,
        male=table.male,
        total=table.total,
    )


def test_death_probability_conversion():
    assert abs(sm.death_probability(0.01) - 0.0099502) < 1e-7


def test_initial_exposure_approximation():
    assert sm.initial_exposures(100.0, 10.0) == 105.0


def test_crude_rates_rejects_bad_cells(hmd_files):
    deaths, exposures = hmd_files
    d = sm.read_vital_table(deaths, "deaths")
    e = sm.read_vital_table(exposures, "exposures")

    # missing marker inside the window
    with pytest.raises(sm.DataError) as err:
        sm.crude_rates(d, e, "male", sm.AgeYearWindow.from_ranges(69, 70, 2001, 2002))
    assert "age=69" in str(err.value) and "year=2002" in str(err.value)

    # cell absent from the table entirely
    with pytest.raises(sm.DataError):
        sm.crude_rates(d, e, "male", sm.AgeYearWindow.from_ranges(70, 71, 2002, 2003))


def test_crude_rates_rejects_zero_deaths_and_zero_exposure():
    window = sm.AgeYearWindow.from_ranges(60, 61, 2000, 2001)
    base = dict(
        years=np.array([2000, 2000, 2001, 2001]),
        ages=np.array([60, 61, 60, 61]),
        open_age=np.zeros(4, dtype=bool),
    )
    deaths = sm.RawVitalTable(
        kind="deaths", female=np.array([5.0, 0.0, 5.0, 5.0]),
        male=np.full(4, 5.0), total=np.full(4, 10.0), **base,
    )
    exposures = sm.RawVitalTable(
        kind="exposures", female=np.full(4, 100.0),
        male=np.array([100.0, 100.0, 0.0, 100.0]), total=np.full(4, 200.0), **base,
    )
    with pytest.raises(sm.DataError) as err:
        sm.crude_rates(deaths, exposures, "female", window)
    assert "zero deaths" in str(err.value) and "age=61" in str(err.value)
    with pytest.raises(sm.DataError) as err:
        sm.crude_rates(deaths, exposures, "male", window)
    assert "exposure" in str(err.value)


def test_round_trip_panel_through_vital_tables(toy_cohort_truth, tmp_path):
    """Writing a panel as a deaths table with unit exposures and re-deriving
    crude rates reproduces the panel."""
    spec, params = toy_cohort_truth
    truth = sm.simulate_panel(spec, params, 0.0, seed=9)
    window = spec.window
    years, ages = [], []
    vals = []
    for j, year in enumerate(window.years):
        for i, age in enumerate(window.ages):
            years.append(int(year))
            ages.append(int(age))
            vals.append(np.exp(truth.panel.log_rates[i, j]))
    arr = np.array(vals)
    deaths = sm.RawVitalTable(
        kind="deaths", years=np.array(years), ages=np.array(ages),
        open_age=np.zeros(len(vals), dtype=bool), female=arr, male=arr, total=arr,
    )
    ones = sm.RawVitalTable(
        kind="exposures", years=np.array(years), ages=np.array(ages),
        open_age=np.zeros(len(vals), dtype=bool),
        female=np.ones(len(vals)), male=np.ones(len(vals)), total=np.ones(len(vals)),
    )
    dpath = tmp_path / "d.txt"
    epath = tmp_path / "e.txt"
    sm.save_vital_table(deaths, dpath)
    sm.save_vital_table(ones, epath)
    panel = sm.crude_rates(
        sm.read_vital_table(dpath, "deaths"), sm.read_vital_table(epath, "exposures"), "male", window
    )
    assert np.max(np.abs(panel.log_rates - truth.panel.log_rates)) < 1e-12


def test_reference_window_dimensions():
    window = sm.AgeYearWindow.from_ranges(65, 95, 1970, 2010)
    assert window.n_ages == 31 and window.n_years == 41
    assert window.cohorts.size == 71
    assert window.cohorts[0] == 1875 and window.cohorts[-1] == 1945


# ---------------------------------------------------------------- simulation

def test_simulate_deterministic_when_variances_zero(toy_cohort_truth):
    spec, params = toy_cohort_truth
    flat = sm.StaticParams(
        alpha=params.alpha, beta=params.beta, theta=params.theta,
        sigma2_eps=0.0, sigma2_kappa=0.0,
        beta_gamma=params.beta_gamma, eta=params.eta, lam=params.lam, sigma2_gamma=0.0,
    )
    a = sm.simulate_panel(spec, flat, 0.0, seed=1)
    b = sm.simulate_panel(spec, flat, 0.0, seed=999)
    assert np.array_equal(a.panel.log_rates, b.panel.log_rates)
    # deterministic surface: alpha + beta kappa_t + beta_gamma gamma
    sys = sm.build_system(spec, flat)
    for t in range(1, spec.window.n_years + 1):
        mean = sys.obs_intercept + sys.obs_matrix @ a.path.states[t]
        assert np.array_equal(a.panel.log_rates[:, t - 1], mean)


def test_simulate_same_seed_identical(toy_cohort_truth):
    spec, params = toy_cohort_truth
    a = sm.simulate_panel(spec, params, 0.0, seed=77)
    b = sm.simulate_panel(spec, params, 0.0, seed=77)
    assert np.array_equal(a.panel.log_rates, b.panel.log_rates)
    assert np.array_equal(a.path.states, b.path.states)


def test_simulated_period_innovation_variance():
    window = sm.AgeYearWindow.from_ranges(60, 61, 2000, 2000 + 10_000 - 1)
    spec = sm.ModelSpec(sm.ModelKind.LC, window)
    params = sm.StaticParams(
        alpha=np.array([-4.0, -3.0]), beta=np.array([0.6, 0.4]), theta=-0.05,
        sigma2_eps=1e-6, sigma2_kappa=0.04,
    )
    truth = sm.simulate_panel(spec, params, 0.0, seed=5)
    increments = np.diff(truth.path.kappa) - params.theta
    assert abs(increments.var(ddof=1) - 0.04) / 0.04 < 0.05


def test_simulated_path_keeps_shift_identity(toy_cohort_truth):
    spec, params = toy_cohort_truth
    truth = sm.simulate_panel(spec, params, 0.0, seed=13)
    assert truth.path.shift_identity_error() == 0.0


# ---------------------------------------------------------------- panel files

def test_panel_csv_round_trip(toy_cohort_truth, tmp_path):
    spec, params = toy_cohort_truth
    truth = sm.simulate_panel(spec, params, 0.0, seed=2)
    path = tmp_path / "panel.csv"
    sm.save_panel_csv(truth.panel, path)
    loaded = sm.load_panel_csv(path)
    assert loaded.window == spec.window
    assert np.array_equal(loaded.log_rates, truth.panel.log_rates)


def test_panel_json_round_trip(toy_cohort_truth, tmp_path):
    spec, params = toy_cohort_truth
    truth = sm.simulate_panel(spec, params, 0.0, seed=2)
    path = tmp_path / "panel.json"
    sm.save_panel_json(truth.panel, path)
    loaded = sm.load_panel_json(path)
    assert np.array_equal(loaded.log_rates, truth.panel.log_rates)


def test_panel_csv_rejects_gappy_years(tmp_path):
    path = tmp_path / "gappy.csv"
    path.write_text("age,2000,2002\n60,-4.0,-4.1\n61,-3.9,-4.0\n")
    with pytest.raises(sm.DataError):
        sm.load_panel_csv(path)
