from types import SimpleNamespace

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from stochhyst.environment import ParameterTable, Seed, periodic_environment
from stochhyst.homogenized import (OmegaSample, closed_form_viscous, compare_eps_to_homogenized,
                                   g_star, h_star, homogenized_step, initial_macro,
                                   run_homogenized, volterra_stress)
from stochhyst.solver import Loading, run_trajectory

VISCOUS = ParameterTable((1.0, 3.0), (0.0,), (0.05, 0.1))


def test_single_atom_reduces_to_homogeneous_solver():
    table = ParameterTable((2.0,), (0.4,), (0.1,))
    loading = Loading.sin2(0.2)
    hom = run_homogenized(OmegaSample.enumerate(table), loading, 300)
    direct = run_trajectory(SimpleNamespace(weights=np.ones(1), A=np.array([2.0]),
                                            mu=np.array([0.4]), nu=np.array([0.1])),
                            loading, 300)
    np.testing.assert_array_equal(hom.trajectory.sigma_bar, direct.sigma_bar)
    assert np.max(np.abs(hom.thetas)) == 0.0


def test_step_api_matches_run():
    table = ParameterTable.standard()
    loading = Loading.sin2(0.1)
    sample, macro = initial_macro(OmegaSample.enumerate(table), loading)
    dt = loading.period / 200
    for _ in range(50):
        sample, macro = homogenized_step(sample, macro, loading, dt)
    run = run_homogenized(OmegaSample.enumerate(table), loading, 200)
    assert macro.Sigma_macro == pytest.approx(run.trajectory.sigma_bar[50], abs=1e-12)
    np.testing.assert_allclose(sample.thetas, run.thetas[50, 0], atol=1e-12)
    assert abs(sample.mean_theta()) <= 1e-10 * 50
    assert macro.macro_strain == pytest.approx(float(loading.ell(macro.t)))


def test_zero_mean_corrector_and_boundary():
    loading = Loading.sin2(0.1)
    run = run_homogenized(OmegaSample.enumerate(ParameterTable.standard()), loading, 2000)
    nsteps = 2 * 2000
    assert run.max_abs_mean_theta <= 1e-10 * nsteps
    assert np.max(run.boundary_defect) <= 1e-10 * nsteps
    assert np.all(run.thetas[0] == 0.0)


def test_member_inclusion_residual():
    """Each member solves Sigma - A e - nu de/dt in mu * sign(de/dt) up to tol."""
    table = ParameterTable.standard()
    loading = Loading.sin2(0.1, periods=1)
    run = run_homogenized(OmegaSample.enumerate(table), loading, 500)
    s = run.sample
    e = run.macro_strain[:, :, None] + run.thetas
    dt = run.trajectory.dt
    r = np.diff(e[:, 0, :], axis=0) / dt
    Sigma = run.trajectory.sigma_bar[1:, None]
    rest = Sigma - s.A * e[1:, 0, :] - s.nu * r
    moving = np.abs(r) > 1e-9
    assert np.all(np.abs(rest[moving] - s.mu[None, :].repeat(len(r), 0)[moving]
                         * np.sign(r[moving])) <= 1e-8)
    assert np.all(np.abs(rest[~moving]) <= s.mu[None, :].repeat(len(r), 0)[~moving] + 1e-8)


def test_periodic_specialization():
    """A periodic medium and the enumeration of its unit cell over shifts agree."""
    profile = [(1.0, 0.4, 0.05), (3.0, 0.0, 0.1)]
    table = ParameterTable((1.0, 3.0), (0.4, 0.0), (0.05, 0.1))
    sample = OmegaSample(np.array([1.0, 3.0]), np.array([0.4, 0.0]), np.array([0.05, 0.1]),
                         np.array([0.5, 0.5]), np.zeros(2), exhaustive=True)
    loading = Loading.sin2(0.1, periods=1)
    hom = run_homogenized(sample, loading, 400)
    env = periodic_environment(profile, 0.5, 0.0)
    direct = run_trajectory(env, loading, 400)
    np.testing.assert_allclose(direct.sigma_bar, hom.trajectory.sigma_bar, atol=1e-9)
    assert table.atoms()[3].sum() == pytest.approx(1.0)


def test_h_star_examples():
    assert h_star(VISCOUS, 0.0) == pytest.approx(1.0)
    tab = ParameterTable((1.0, 3.0), (0.0,), (0.1,))
    assert h_star(tab, 0.1) == pytest.approx(0.5 * (np.exp(-1) + np.exp(-3)), rel=1e-14)


def test_g_star_examples():
    assert g_star(VISCOUS, 0.0) == pytest.approx(0.5 * (1 / 0.05 + 1 / 0.1))
    tab = ParameterTable((1.0,), (0.0,), (1.0,))
    assert g_star(tab, -1.0) == pytest.approx(np.exp(-1))


def test_closed_form_examples_and_validation():
    loading = Loading.sin2(0.1)
    prof = np.array([0.1, -0.1])
    np.testing.assert_allclose(closed_form_viscous(VISCOUS, loading, 0.0, prof), prof)
    t = np.linspace(0, 5, 11)
    np.testing.assert_allclose(closed_form_viscous(VISCOUS, loading, t), loading.ell(t))
    with pytest.raises(ValueError):
        closed_form_viscous(ParameterTable.standard(), loading, t)


def test_exhaustive_homogenized_matches_closed_form():
    loading = Loading.sin2(0.1, periods=1)
    K = 8
    x = (np.arange(K) + 0.5) / K
    prof = 0.1 * np.cos(2 * np.pi * x)
    prof -= prof.mean()
    errs = []
    for spp in (500, 1000):
        run = run_homogenized(OmegaSample.enumerate(VISCOUS), loading, spp, initial_profile=prof)
        exact = closed_form_viscous(VISCOUS, loading, run.trajectory.t, prof)
        errs.append(np.max(np.abs(run.macro_strain - exact)))
    dt = loading.period / 500
    assert errs[0] <= 5 * dt
    assert 1.7 < errs[0] / errs[1] < 2.3


def test_initial_profile_validation():
    loading = Loading.sin2(0.1)
    with pytest.raises(ValueError):
        run_homogenized(OmegaSample.enumerate(VISCOUS), loading, 10, initial_profile=[0.1, 0.2])
    with pytest.raises(ValueError):
        run_homogenized(OmegaSample.enumerate(VISCOUS), loading, 10, initial_profile=[0.1, -0.1],
                        point_weights=[0.3, 0.3])


def ode_stress(table, loading, t):
    A, _, nu, p = table.atoms()

    def rhs(tt, e):
        s = (loading.ell_dot(tt) + np.sum(p * A * e / nu)) / np.sum(p / nu)
        return (s - A * e) / nu

    sol = solve_ivp(rhs, (t[0], t[-1]), np.zeros(len(A)), t_eval=t, rtol=1e-12, atol=1e-14,
                    method="DOP853")
    e = sol.y.T
    return (loading.ell_dot(t) + (e * (p * A / nu)).sum(1)) / np.sum(p / nu)


def test_volterra_stress_matches_ode_oracle():
    loading = Loading.sin2(0.1, periods=1)
    t = np.linspace(0, 1.25, 12501)
    assert np.max(np.abs(volterra_stress(VISCOUS, loading, t) - ode_stress(VISCOUS, loading, t))) < 1e-6


def test_volterra_stress_matches_stepper():
    loading = Loading.sin2(0.1, periods=1)
    gaps = []
    for spp in (500, 1000):
        run = run_homogenized(OmegaSample.enumerate(VISCOUS), loading, spp)
        v = volterra_stress(VISCOUS, loading, run.trajectory.t)
        gaps.append(np.max(np.abs(v[1:] - run.trajectory.sigma_bar[1:])))
    assert gaps[1] < gaps[0]
    with pytest.raises(ValueError):
        volterra_stress(VISCOUS, loading, np.array([0.0, 0.1, 0.3]))


def test_monte_carlo_sample():
    table = ParameterTable.standard()
    s = OmegaSample.from_table(table, 500, Seed(1))
    assert s.size == 500 and not s.exhaustive
    assert s.probs.sum() == pytest.approx(1.0)
    again = OmegaSample.draw(table, 500, Seed(1))
    np.testing.assert_array_equal(s.A, again.A)
    with pytest.raises(ValueError):
        OmegaSample.draw(table, 0, Seed(1))
    assert OmegaSample.from_table(table).exhaustive


def test_compare_deterministic_table_is_exact():
    table = ParameterTable((2.0,), (0.4,), (0.1,))
    rows, _ = compare_eps_to_homogenized(table, Loading.sin2(0.1, periods=1), [1 / 10, 1 / 50],
                                         2, steps_per_period=200)
    for row in rows:
        assert row["sup_error"] < 1e-9 and row["noise"] < 1e-9


def test_corrector_csv_layout():
    run = run_homogenized(OmegaSample.enumerate(VISCOUS), Loading.sin2(0.1), 20,
                          initial_profile=[0.05, -0.05])
    lines = run.corrector_csv().splitlines()
    assert lines[0] == "point,member,A,mu,nu,prob,theta"
    assert len(lines) == 1 + 2 * 4
    assert "np." not in run.corrector_csv()
