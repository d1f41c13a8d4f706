import numpy as np
import pytest

from stochhyst import analysis
from stochhyst.environment import ParameterTable, Seed, sample_environment
from stochhyst.solver import Loading, Trajectory, run_trajectory

TABLE = ParameterTable.standard()


def fake_trajectory(ell, sigma, rows_per_period, dissipated=None, elastic=None):
    n = len(ell)
    return Trajectory(t=np.arange(n, dtype=float), ell=np.asarray(ell, float),
                      sigma_bar=np.asarray(sigma, float),
                      elastic_energy=np.zeros(n) if elastic is None else np.asarray(elastic),
                      dissipated_energy=np.zeros(n) if dissipated is None else np.asarray(dissipated),
                      dt=1.0, steps_per_period=rows_per_period, stride=1,
                      period=float(rows_per_period), final_state=None,
                      iterations=np.zeros(n - 1, int), residuals=np.zeros(n - 1))


def test_loop_area_of_circle():
    th = np.linspace(0, 4 * np.pi, 2001)
    tr = fake_trajectory(np.cos(th), -np.sin(th), 1000)
    assert analysis.loop_area(tr, 0) == pytest.approx(np.pi, rel=1e-4)
    assert analysis.loop_area(tr, -1) == pytest.approx(np.pi, rel=1e-4)
    with pytest.raises(ValueError):
        analysis.loop_area(tr, 2)


def test_dissipated_energy_difference():
    tr = fake_trajectory(np.zeros(5), np.zeros(5), 2, dissipated=[0, 1, 3, 4, 7])
    assert analysis.dissipated_energy(tr, 0) == 3
    assert analysis.dissipated_energy(tr, 1) == 4
    with pytest.raises(ValueError):
        analysis.dissipated_energy(tr, 5)


def test_frozen_loading_dissipates_nothing():
    env = sample_environment(TABLE, 1 / 50, Seed(0))
    tr = run_trajectory(env, Loading.constant(0.0, period=1.0, periods=2), 100)
    assert analysis.dissipated_energy(tr) == 0.0
    assert analysis.loop_area(tr) == 0.0


def test_dissipation_lower_bound_friction_table():
    table = TABLE.with_mu((0.4, 0.7))
    for r in range(3):
        env = sample_environment(table, 1 / 100, Seed(r))
        tr = run_trajectory(env, Loading.sin2(0.1), 1000)
        assert analysis.loading_variation(tr) == pytest.approx(2.0, abs=1e-9)
        for p in range(tr.n_periods):
            assert analysis.dissipated_energy(tr, p) >= analysis.dissipation_lower_bound(tr, 0.4, p)


def test_viscous_dissipation_scales_with_rate():
    table = TABLE.with_mu((0.0,))
    env = sample_environment(table, 1 / 100, Seed(1))
    d = [analysis.dissipated_energy(run_trajectory(env, Loading.sin2(delta), 1000))
         for delta in (1.0, 0.25, 1 / 16)]
    assert d[0] / d[1] == pytest.approx(4.0, rel=0.2)
    assert d[1] / d[2] == pytest.approx(4.0, rel=0.1)


def test_elastic_loading_has_vanishing_loop():
    table = ParameterTable((1.0, 3.0), (0.0,), (1e-3,))
    env = sample_environment(table, 1 / 50, Seed(2))
    tr = run_trajectory(env, Loading.sin2(0.01), 1000)
    assert abs(analysis.loop_area(tr)) < 1e-3


def test_limit_cycle_gate_and_identity():
    env = sample_environment(TABLE, 1 / 200, Seed(7))
    tr = run_trajectory(env, Loading.sin2(0.1, periods=3), 2000)
    first, last = analysis.loop_report(tr, 0), analysis.loop_report(tr, -1)
    assert not first.on_limit_cycle
    assert last.on_limit_cycle and last.period_index == 2
    assert last.relative_gap <= 0.02
    assert last.area >= 0 and last.dissipated >= 0


def test_energy_balance_on_windows():
    env = sample_environment(TABLE, 1 / 100, Seed(3))
    tr = run_trajectory(env, Loading.sin2(0.1), 2000)
    for start, stop in ((1, 500), (500, 3000), (1, None)):
        assert abs(analysis.energy_balance_defect(tr, start, stop)) < 2e-3


def test_ensemble_stats_closed_forms():
    base = fake_trajectory(np.linspace(0, 1, 5), np.linspace(0, 1, 5), 4)
    same = analysis.ensemble_stats([base, base, base])
    assert np.all(same.var_sigma == 0)
    c = 0.3
    other = fake_trajectory(base.ell, base.sigma_bar + np.array([0, 0, 2 * c, 0, 0]), 4)
    st = analysis.ensemble_stats([base, other])
    assert st.var_sigma[2] == pytest.approx(2 * c**2)
    assert st.n_realizations == 2
    assert st.at_time(2.2) == (pytest.approx(0.5 + c), pytest.approx(2 * c**2))


def test_ensemble_stats_rejects_mismatched_grids():
    a = fake_trajectory(np.zeros(5), np.zeros(5), 4)
    b = fake_trajectory(np.zeros(3), np.zeros(3), 2)
    with pytest.raises(ValueError):
        analysis.ensemble_stats([a, b])
    with pytest.raises(ValueError):
        analysis.ensemble_stats([])


def test_variance_slope_synthetic():
    eps = np.array([1 / 100, 1 / 200, 1 / 400, 1 / 800])
    assert analysis.variance_slope(eps, 3 * eps).slope == pytest.approx(1.0)
    fit = analysis.variance_slope(eps, 0.5 * eps**2)
    assert fit.slope == pytest.approx(2.0) and fit.r2 == pytest.approx(1.0)
    assert fit.intercept == pytest.approx(np.log(0.5))


@pytest.mark.parametrize("eps,var", [([0.1, 0.2], [1, 2]), ([0.1, 0.2, 0.3], [1, 0, 2]),
                                     ([0.1, 0.2, 0.3], [1, 2])])
def test_variance_slope_validation(eps, var):
    with pytest.raises(ValueError):
        analysis.variance_slope(eps, var)


def test_stats_csv_and_plot_data():
    base = fake_trajectory(np.zeros(3), np.array([0.0, 1.0, 2.0]), 2)
    st = analysis.ensemble_stats([base, base])
    text = st.to_csv(["h"])
    assert text.splitlines()[:2] == ["# h", "time,mean,variance"]
    assert text.splitlines()[2] == "1.0,1.0,0.0"
    assert analysis.plot_data([1, 2], [3, 4]) == "1.0 3.0\n2.0 4.0\n"
