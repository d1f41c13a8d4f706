"""Implicit time stepping of the cell-strain system under prescribed elongation.

Each cell ``i`` carries a relative strain ``S_i``; its elastic stress is
``Sigma_i = A_i (ell + S_i)``. Given a trial total stress the per-cell rates
follow in closed form, and the total stress is adjusted by a safeguarded
secant iteration until the weighted rates satisfy the boundary constraint
``sum_i w_i dS_i = 0``.

Any object exposing ``weights``, ``A``, ``mu`` and ``nu`` arrays can be
stepped (an :class:`~stochhyst.environment.Environment`, or the Omega
sample of the homogenized problem).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._backend import kernels

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
DEFAULT_STEPS_PER_PERIOD = 2000

CSV_COLUMNS = ("t", "ell", "sigma_bar", "elastic_energy", "dissipated_energy")


class MaxIterExceeded(RuntimeError):
    """The stress iteration did not meet its tolerance within ``max_iter``."""


@dataclass(frozen=True)
class Loading:
    """Prescribed elongation ``ell(t)`` with derivative ``ell_dot``.

    ``period`` is the length of one loading cycle and ``period_count`` the
    number of cycles integrated by :func:`run_trajectory`.
    """

    ell: Callable[[np.ndarray], np.ndarray]
    ell_dot: Callable[[np.ndarray], np.ndarray]
    period: float
    period_count: int = 2
    rate: float = float("nan")

    @classmethod
    def sin2(cls, delta: float, periods: int = 2) -> "Loading":
        """``ell(t) = sin(2 pi delta t)**2``; one cycle lasts ``1/(2 delta)``."""
        if not delta > 0:
            raise ValueError("loading rate delta must be > 0")
        w = 2.0 * math.pi * delta
        return cls(
            ell=lambda t: np.sin(w * np.asarray(t)) ** 2,
            ell_dot=lambda t: w * np.sin(2.0 * w * np.asarray(t)),
            period=0.5 / delta,
            period_count=periods,
            rate=delta,
        )

    @classmethod
    def constant(cls, value: float, period: float = 1.0, periods: int = 1) -> "Loading":
        return cls(lambda t: np.full_like(np.asarray(t, dtype=float), value),
                   lambda t: np.zeros_like(np.asarray(t, dtype=float)),
                   period, periods)

    @classmethod
    def ramp(cls, slope: float, period: float = 1.0, periods: int = 1) -> "Loading":
        return cls(lambda t: slope * np.asarray(t, dtype=float),
                   lambda t: np.full_like(np.asarray(t, dtype=float), slope),
                   period, periods)

    @property
    def duration(self) -> float:
        return self.period * self.period_count


@dataclass(frozen=True)
class StepReport:
    secant_iterations: int
    residual: float
    sigma_bar_new: float


@dataclass(frozen=True)
class SolverState:
    t: float
    S: np.ndarray
    Sigma: np.ndarray
    sigma_bar: float
    report: StepReport | None = None

    @classmethod
    def initial(cls, medium, loading: Loading, S0=None, t0: float = 0.0) -> "SolverState":
        """State at ``t0``; zero relative strain unless ``S0`` is given.

        The initial stress is the weighted mean elastic stress.
        """
        S = np.zeros(len(medium.weights)) if S0 is None else np.array(S0, dtype=float)
        ell0 = float(loading.ell(t0))
        Sigma = medium.A * (ell0 + S)
        return cls(t0, S, Sigma, float(np.dot(medium.weights, Sigma)))


def _validate_dt(dt):
    if not dt > 0:
        raise ValueError(f"time step must be > 0, got {dt}")


def rate_given_stress(medium, state: SolverState, sigma_bar_trial: float, dt: float,
                      d_ell: float) -> np.ndarray:
    """Per-cell relative strain rates ``dS`` for a trial total stress.

    The elastic stress at the start of the step, ``state.Sigma``, fixes the
    unique solution of each cell's implicit inclusion. Cells in the friction
    dead zone get ``dS = -d_ell`` exactly.
    """
    _validate_dt(dt)
    r = kernels.cell_rates(float(sigma_bar_trial), state.Sigma, medium.A, medium.mu,
                           medium.nu, dt)
    return r - d_ell


def constraint_residual(medium, state: SolverState, sigma_bar_trial: float, dt: float,
                        d_ell: float) -> float:
    _validate_dt(dt)
    return kernels.residual(float(sigma_bar_trial), medium.weights, state.Sigma, medium.A,
                            medium.mu, medium.nu, dt, d_ell)


def find_stress(medium, state: SolverState, dt: float, d_ell: float,
                tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER):
    """Total stress satisfying the constraint, warm-started at ``state.sigma_bar``.

    Returns ``(sigma_bar_new, StepReport)``; raises :class:`MaxIterExceeded`.
    """
    if not tol > 0:
        raise ValueError("tol must be > 0")
    _validate_dt(dt)
    sigma, it, res, status = kernels.find_stress(
        medium.weights, state.Sigma, medium.A, medium.mu, medium.nu,
        dt, d_ell, state.sigma_bar, tol, max_iter)
    if status != 0:
        raise MaxIterExceeded(
            f"stress iteration stalled at t={state.t:g}: residual {res:.3e} after {it} iterations")
    return sigma, StepReport(int(it), abs(res), sigma)


def step(medium, state: SolverState, loading: Loading, dt: float,
         tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> SolverState:
    """Advance one implicit step of length ``dt``."""
    t1 = state.t + dt
    ell1 = float(loading.ell(t1))
    d_ell = (ell1 - float(loading.ell(state.t))) / dt
    sigma, report = find_stress(medium, state, dt, d_ell, tol, max_iter)
    dS = rate_given_stress(medium, state, sigma, dt, d_ell)
    S = state.S + dt * dS
    return SolverState(t1, S, medium.A * (ell1 + S), sigma, report)


def dissipation_rate(medium, r) -> float:
    """``sum_i w_i (nu_i r_i**2 + mu_i |r_i|)`` for total strain rates ``r``."""
    return float(np.dot(medium.weights, medium.nu * r * r + medium.mu * np.abs(r)))


def elastic_energy(medium, ell: float, S) -> float:
    e = ell + np.asarray(S)
    return 0.5 * float(np.dot(medium.weights, medium.A * e * e))


@dataclass
class Trajectory:
    """Recorded time series; index 0 is the initial state."""

    t: np.ndarray
    ell: np.ndarray
    sigma_bar: np.ndarray
    elastic_energy: np.ndarray
    dissipated_energy: np.ndarray
    dt: float
    steps_per_period: int
    stride: int
    period: float
    final_state: SolverState
    iterations: np.ndarray
    residuals: np.ndarray
    strains: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def rows_per_period(self) -> int:
        return self.steps_per_period // self.stride

    @property
    def n_periods(self) -> int:
        return (len(self.t) - 1) // self.rows_per_period

    def period_slice(self, period: int) -> slice:
        """Row slice spanning ``period`` inclusive of both endpoints."""
        if period < 0:
            period += self.n_periods
        if not 0 <= period < self.n_periods:
            raise IndexError(f"period {period} outside recorded range 0..{self.n_periods - 1}")
        m = self.rows_per_period
        return slice(period * m, (period + 1) * m + 1)

    def to_csv(self, stream=None, header: list[str] | None = None,
               extra_columns: dict[str, str] | None = None) -> str:
        """Write one row per recorded step (the initial state is not a row).

        ``header`` lines are emitted first as ``# `` comments;
        ``extra_columns`` are appended with a constant value on every row.
        """
        extra = extra_columns or {}
        buf = io.StringIO()
        for line in header or []:
            buf.write(f"# {line}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS + tuple(extra))
        tail = list(extra.values())
        for k in range(1, len(self.t)):
            writer.writerow([repr(float(self.t[k])), repr(float(self.ell[k])),
                             repr(float(self.sigma_bar[k])), repr(float(self.elastic_energy[k])),
                             repr(float(self.dissipated_energy[k]))] + tail)
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text


def time_grid(loading: Loading, steps_per_period: int):
    if steps_per_period < 1:
        raise ValueError("steps_per_period must be >= 1")
    dt = loading.period / steps_per_period
    nsteps = steps_per_period * loading.period_count
    return dt, dt * np.arange(nsteps + 1)


def run_trajectory(medium, loading: Loading, steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
                   stride: int = 1, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER, S0=None,
                   record_strains: bool = False, backend=None) -> Trajectory:
    """Integrate ``loading.period_count`` cycles from ``S0`` (zero by default).

    With ``record_strains`` the per-cell relative strains at every recorded
    row are kept in ``Trajectory.strains``. ``backend`` overrides the kernel
    module (used by benchmarks and cross-checks).
    """
    if stride < 1 or steps_per_period % stride:
        raise ValueError("stride must divide steps_per_period")
    k = kernels if backend is None else backend
    dt, t = time_grid(loading, steps_per_period)
    ell = np.asarray(loading.ell(t), dtype=float)
    state0 = SolverState.initial(medium, loading, S0)
    S_rec = None
    if record_strains:
        S_rec = np.zeros((len(t[::stride]), len(medium.weights)))
    out = k.integrate(medium.weights, medium.A, medium.mu, medium.nu, state0.S, ell,
                      dt, state0.sigma_bar, tol, max_iter, stride, S_rec)
    if out["status"] != 0:
        nsteps = len(out["iterations"])
        raise MaxIterExceeded(
            f"stress iteration stalled at step {nsteps} (t={nsteps * dt:g}), "
            f"residual {out['residuals'][-1]:.3e}")
    rec = t[::stride]
    S = out["S"]
    final = SolverState(float(t[-1]), S, medium.A * (ell[-1] + S), float(out["sigma_last"]),
                        StepReport(int(out["iterations"][-1]), abs(float(out["residuals"][-1])),
                                   float(out["sigma_last"])) if len(out["iterations"]) else None)
    return Trajectory(rec, ell[::stride], out["sigma_bar"], out["elastic_energy"],
                      out["dissipated_energy"], dt, steps_per_period, stride, loading.period,
                      final, out["iterations"], out["residuals"], S_rec)
