"""Homogenized two-scale limit in one dimension, and its viscous closed form.

In 1D the corrector problem reduces to: a single stress ``Sigma(t)`` shared by
every member ``omega`` of the probability space, each member obeying the
same implicit inclusion as a cell of the direct simulation with strain
``e(omega) = macro_strain + theta(omega)``, and the mean strain pinned by the
boundary condition. A finite sample of Omega is therefore stepped with the
direct-simulation kernel, the member probabilities playing the role of the
cell weights.

For purely viscous tables (``mu = 0``) the macro strain is explicit::

    D_x y*(t, x) = (D_x y(0, x) - ell(0)) h*(t) + ell(t)
    h*(t) = E[exp(-A t / nu)],   g*(s) = E[exp(A s / nu) / nu]

(domain length 1).
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from types import SimpleNamespace

import numpy as np

from .environment import ParameterTable, Seed, sample_environment
from .solver import (
    DEFAULT_MAX_ITER,
    DEFAULT_STEPS_PER_PERIOD,
    DEFAULT_TOL,
    Loading,
    SolverState,
    Trajectory,
    run_trajectory,
    step,
)


@dataclass(frozen=True, eq=False)
class OmegaSample:
    """Members of Omega with probabilities and their corrector strains."""

    A: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    probs: np.ndarray
    thetas: np.ndarray
    exhaustive: bool = False

    @property
    def weights(self) -> np.ndarray:
        return self.probs

    @property
    def size(self) -> int:
        return len(self.probs)

    @classmethod
    def enumerate(cls, table: ParameterTable) -> "OmegaSample":
        """All atoms of the table's joint law with exact probabilities."""
        A, mu, nu, p = table.atoms()
        return cls(A, mu, nu, p, np.zeros_like(p), exhaustive=True)

    @classmethod
    def draw(cls, table: ParameterTable, M: int, seed: Seed) -> "OmegaSample":
        """``M`` equally weighted i.i.d. draws from the table."""
        if M < 1:
            raise ValueError("M must be >= 1")
        rng = seed.generator()
        A = rng.choice(np.asarray(table.a_values), size=M, p=table.probs("a"))
        mu = rng.choice(np.asarray(table.mu_values), size=M, p=table.probs("mu"))
        nu = rng.choice(np.asarray(table.nu_values), size=M, p=table.probs("nu"))
        return cls(A, mu, nu, np.full(M, 1.0 / M), np.zeros(M))

    @classmethod
    def from_table(cls, table: ParameterTable, M: int = 0, seed: Seed | None = None):
        """Exhaustive enumeration when ``M == 0``, Monte-Carlo draws otherwise."""
        if M == 0:
            return cls.enumerate(table)
        return cls.draw(table, M, seed or Seed(0))

    def mean_theta(self) -> float:
        return float(np.dot(self.probs, self.thetas))


@dataclass(frozen=True)
class MacroState:
    t: float
    macro_strain: float
    Sigma_macro: float


def initial_macro(sample: OmegaSample, loading: Loading) -> tuple[OmegaSample, MacroState]:
    ell0 = float(loading.ell(0.0))
    s = replace(sample, thetas=np.zeros(sample.size))
    return s, MacroState(0.0, ell0, float(np.dot(s.probs, s.A)) * ell0)


def homogenized_step(sample: OmegaSample, macro: MacroState, loading: Loading, dt: float,
                     tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """One step of the uniform-macro two-scale system.

    The macro strain is pinned to ``ell(t)`` by the boundary condition, so
    ``mean(theta)`` measures the accumulated constraint defect.
    """
    ell0 = float(loading.ell(macro.t))
    e = macro.macro_strain + sample.thetas
    state = SolverState(macro.t, e - ell0, sample.A * e, macro.Sigma_macro)
    new = step(sample, state, loading, dt, tol, max_iter)
    ell1 = float(loading.ell(new.t))
    return (replace(sample, thetas=np.asarray(new.S)),
            MacroState(new.t, ell1, new.sigma_bar))


@dataclass
class HomogenizedRun:
    """Result of :func:`run_homogenized`.

    ``trajectory.sigma_bar`` holds the macroscopic stress ``Sigma(t)``;
    ``macro_strain`` has one column per macro point; ``thetas`` has shape
    ``(rows, points, members)``.
    """

    trajectory: Trajectory
    macro_strain: np.ndarray
    thetas: np.ndarray
    point_weights: np.ndarray
    sample: OmegaSample

    @property
    def boundary_defect(self) -> np.ndarray:
        """``|sum_k q_k macro_strain_k - ell(t)|`` per recorded row."""
        return np.abs(self.macro_strain @ self.point_weights - self.trajectory.ell)

    @property
    def max_abs_mean_theta(self) -> float:
        return float(np.max(np.abs(self.thetas @ self.sample.probs)))

    def corrector_csv(self, row: int = -1) -> str:
        lines = ["point,member,A,mu,nu,prob,theta"]
        th = self.thetas[row]
        s = self.sample
        for k in range(th.shape[0]):
            for m in range(th.shape[1]):
                vals = (float(v) for v in (s.A[m], s.mu[m], s.nu[m], s.probs[m], th[k, m]))
                lines.append(f"{k},{m}," + ",".join(repr(v) for v in vals))
        return "\n".join(lines) + "\n"


def run_homogenized(sample: OmegaSample, loading: Loading,
                    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD, stride: int = 1,
                    initial_profile=None, point_weights=None,
                    tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                    backend=None) -> HomogenizedRun:
    """Integrate the two-scale system from ``theta = 0``.

    ``initial_profile`` gives the initial macro strain at ``K`` macro points
    (weights ``point_weights``, uniform by default); omitted, the initial
    strain is uniform and equal to ``ell(0)``. All points share the stress
    ``Sigma(t)``, and the weighted mean macro strain follows ``ell(t)``.
    """
    ell0 = float(loading.ell(0.0))
    e0 = np.atleast_1d(np.asarray(ell0 if initial_profile is None else initial_profile,
                                  dtype=float))
    K, M = len(e0), sample.size
    q = np.full(K, 1.0 / K) if point_weights is None else np.asarray(point_weights, float)
    if len(q) != K or abs(q.sum() - 1.0) > 1e-12:
        raise ValueError("point weights must match the profile and sum to 1")
    if abs(float(q @ e0) - ell0) > 1e-9:
        raise ValueError("initial profile must average to ell(0)")

    tiled = SimpleNamespace(weights=np.outer(q, sample.probs).ravel(), A=np.tile(sample.A, K),
                            mu=np.tile(sample.mu, K), nu=np.tile(sample.nu, K))
    S0 = np.repeat(e0 - ell0, M)
    traj = run_trajectory(tiled, loading, steps_per_period, stride, tol, max_iter, S0=S0,
                          record_strains=True, backend=backend)
    e = (traj.ell[:, None] + traj.strains).reshape(len(traj.t), K, M)
    macro = e @ sample.probs
    thetas = e - macro[:, :, None]
    traj.meta["homogenized"] = True
    return HomogenizedRun(traj, macro, thetas, q, sample)


def _require_viscous(table: ParameterTable):
    if not table.is_viscous:
        raise ValueError("closed form requires a purely viscous table (all mu == 0)")


def h_star(table: ParameterTable, t):
    A, _, nu, p = table.atoms()
    t = np.asarray(t, dtype=float)
    return np.exp(-np.multiply.outer(t, A / nu)) @ p


def h_star_rate(table: ParameterTable) -> float:
    """``-dh*/dt`` at ``t = 0``, i.e. ``E[A/nu]``."""
    A, _, nu, p = table.atoms()
    return float(p @ (A / nu))


def g_star(table: ParameterTable, s):
    A, _, nu, p = table.atoms()
    s = np.asarray(s, dtype=float)
    return np.exp(np.multiply.outer(s, A / nu)) @ (p / nu)


def closed_form_viscous(table: ParameterTable, loading: Loading, t, initial_strain_profile=None):
    """Macro strain ``D_x y*(t, x)`` of a viscous medium.

    ``initial_strain_profile`` holds ``D_x y(0, x)`` at any set of points
    (uniform ``ell(0)`` when omitted). Returns shape ``t.shape + profile.shape``.
    """
    _require_viscous(table)
    ell0 = float(loading.ell(0.0))
    prof = np.asarray(ell0 if initial_strain_profile is None else initial_strain_profile,
                      dtype=float)
    t = np.asarray(t, dtype=float)
    h = h_star(table, t)
    ell_t = np.asarray(loading.ell(t), dtype=float)
    return np.multiply.outer(h, prof - ell0) + np.multiply.outer(ell_t, np.ones_like(prof))


def volterra_stress(table: ParameterTable, loading: Loading, t_grid) -> np.ndarray:
    """Macro stress from ``ell(t) = ell(0) h*(t) + int_0^t Sigma(s) g*(s - t) ds``.

    Trapezoid rule on a uniform grid; the starting value comes from the
    equation differentiated at ``t = 0``.
    """
    _require_viscous(table)
    t = np.asarray(t_grid, dtype=float)
    h = t[1] - t[0]
    if not np.allclose(np.diff(t), h, rtol=1e-9, atol=0.0):
        raise ValueError("uniform time grid required")
    ell = np.asarray(loading.ell(t), dtype=float)
    rhs = ell - ell[0] * h_star(table, t - t[0])
    kern = g_star(table, -h * np.arange(len(t)))  # kern[m] = g*(-m h)
    sigma = np.empty(len(t))
    sigma[0] = (float(loading.ell_dot(t[0])) + ell[0] * h_star_rate(table)) / kern[0]
    for n in range(1, len(t)):
        acc = 0.5 * sigma[0] * kern[n]
        if n > 1:
            acc += float(sigma[1:n] @ kern[n - 1:0:-1])
        sigma[n] = (rhs[n] / h - acc) / (0.5 * kern[0])
    return sigma


def _eps_ensemble(table, loading, eps, n_realizations, base_seed, steps_per_period, stride,
                  tol, max_iter, S0_fn=None, record_strains=False):
    out = []
    for r in range(n_realizations):
        env = sample_environment(table, eps, Seed(base_seed, r))
        S0 = None if S0_fn is None else S0_fn(env)
        out.append((env, run_trajectory(env, loading, steps_per_period, stride, tol, max_iter,
                                        S0=S0, record_strains=record_strains)))
    return out


def compare_eps_to_homogenized(table: ParameterTable, loading: Loading, eps_list,
                               n_realizations: int, base_seed: int = 0, M: int = 0,
                               steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
                               stride: int = 1, tol: float = DEFAULT_TOL,
                               max_iter: int = DEFAULT_MAX_ITER):
    """Sup-in-time gap between the realization-mean stress and ``Sigma(t)``.

    Returns ``(rows, homogenized_run)``; each row holds ``epsilon``,
    ``sup_error`` and ``noise`` (sup of the standard error of the mean).
    """
    sample = OmegaSample.from_table(table, M, Seed(base_seed, 10**6))
    hom = run_homogenized(sample, loading, steps_per_period, stride, tol=tol, max_iter=max_iter)
    Sigma = hom.trajectory.sigma_bar
    rows = []
    for eps in eps_list:
        runs = _eps_ensemble(table, loading, eps, n_realizations, base_seed, steps_per_period,
                             stride, tol, max_iter)
        sig = np.array([tr.sigma_bar for _, tr in runs])
        # row 0 is the initial guess, not a solved stress
        gap = np.abs(sig.mean(axis=0) - Sigma)[1:]
        noise = (sig.std(axis=0, ddof=1) / np.sqrt(len(runs)))[1:] if len(runs) > 1 else 0 * gap
        rows.append({"epsilon": float(eps), "sup_error": float(gap.max()),
                     "noise": float(np.max(noise))})
    return rows, hom


def viscous_strain_errors(table: ParameterTable, loading: Loading, eps: float,
                          n_realizations: int, base_seed: int = 0, amplitude: float = 0.1,
                          n_bins: int = 5, steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
                          stride: int = 10, tol: float = DEFAULT_TOL,
                          max_iter: int = DEFAULT_MAX_ITER) -> np.ndarray:
    """Per-realization strain error of direct simulations against the viscous closed form.

    Each realization starts from ``S_i(0) = amplitude * cos(2 pi x_i)`` (shifted
    to zero weighted mean). Strains are averaged over ``n_bins`` equal bins of
    ``[0, 1]``; a realization's error is the sup over time of the RMS over bins.
    """
    _require_viscous(table)

    def S0_fn(env):
        s = amplitude * np.cos(2.0 * np.pi * env.cell_centers())
        return s - float(env.weights @ s)

    errs = []
    for env, tr in _eps_ensemble(table, loading, eps, n_realizations, base_seed,
                                 steps_per_period, stride, tol, max_iter, S0_fn, True):
        bins = np.minimum((env.cell_centers() * n_bins).astype(int), n_bins - 1)
        P = np.zeros((n_bins, env.n_cells))
        P[bins, np.arange(env.n_cells)] = env.weights
        P /= P.sum(axis=1, keepdims=True)
        e = tr.ell[:, None] + tr.strains
        binned = e @ P.T
        exact = closed_form_viscous(table, loading, tr.t, P @ (tr.ell[0] + tr.strains[0]))
        errs.append(float(np.max(np.sqrt(np.mean((binned - exact) ** 2, axis=1)))))
    return np.array(errs)


def viscous_strain_error(table: ParameterTable, loading: Loading, eps: float, n_realizations: int,
                         **kwargs) -> float:
    """Mean over realizations of :func:`viscous_strain_errors`."""
    return float(np.mean(viscous_strain_errors(table, loading, eps, n_realizations, **kwargs)))
