"""Post-processing of trajectories and ensembles.

Loop areas use the trapezoid line integral of ``sigma_bar d ell``; dissipation
comes from the solver's cumulative per-step sum
``dt * sum_i w_i (nu_i r_i**2 + mu_i |r_i|)``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .solver import Trajectory


@dataclass(frozen=True)
class LoopReport:
    period_index: int
    area: float
    dissipated: float
    elastic_change: float
    periodic_gap: float
    stress_range: float

    @property
    def relative_gap(self) -> float:
        return abs(self.area - self.dissipated) / self.dissipated if self.dissipated > 0 else np.inf

    @property
    def on_limit_cycle(self) -> bool:
        """Gate for the area/dissipation identity.

        Consecutive periods must agree to 1% of the stress range and the
        elastic energy change over the period must be at most 1% of the
        dissipation.
        """
        if not np.isfinite(self.periodic_gap):
            return False
        return (self.periodic_gap <= 0.01 * self.stress_range
                and abs(self.elastic_change) <= 0.01 * self.dissipated)


@dataclass(frozen=True)
class EnsembleStats:
    times: np.ndarray
    mean_sigma: np.ndarray
    var_sigma: np.ndarray
    n_realizations: int

    def at_time(self, t: float) -> tuple[float, float]:
        """``(mean, variance)`` at the recorded time nearest ``t``."""
        k = int(np.argmin(np.abs(self.times - t)))
        return float(self.mean_sigma[k]), float(self.var_sigma[k])

    def to_csv(self, header: list[str] | None = None) -> str:
        buf = io.StringIO()
        for line in header or []:
            buf.write(f"# {line}\n")
        buf.write("time,mean,variance\n")
        for k in range(1, len(self.times)):
            buf.write(f"{float(self.times[k])!r},{float(self.mean_sigma[k])!r},"
                      f"{float(self.var_sigma[k])!r}\n")
        return buf.getvalue()


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r2: float

    def summary(self) -> str:
        return f"slope={self.slope!r} intercept={self.intercept!r} r2={self.r2!r}"


def _period_rows(traj: Trajectory, period: int) -> slice:
    try:
        return traj.period_slice(period)
    except IndexError as err:
        raise ValueError(str(err)) from None


def loop_area(traj: Trajectory, period: int = -1) -> float:
    """Trapezoid ``closed integral of sigma_bar d ell`` over one period."""
    sl = _period_rows(traj, period)
    s, ell = traj.sigma_bar[sl], traj.ell[sl]
    return float(np.sum(0.5 * (s[1:] + s[:-1]) * np.diff(ell)))


def dissipated_energy(traj: Trajectory, period: int = -1) -> float:
    sl = _period_rows(traj, period)
    d = traj.dissipated_energy[sl]
    return float(d[-1] - d[0])


def elastic_energy_change(traj: Trajectory, period: int = -1) -> float:
    sl = _period_rows(traj, period)
    e = traj.elastic_energy[sl]
    return float(e[-1] - e[0])


def external_work(traj: Trajectory, start: int = 0, stop: int | None = None) -> float:
    """``int sigma_bar d ell`` between two recorded rows (trapezoid)."""
    s = traj.sigma_bar[start:stop]
    ell = traj.ell[start:stop]
    return float(np.sum(0.5 * (s[1:] + s[:-1]) * np.diff(ell)))


def energy_balance_defect(traj: Trajectory, start: int = 1, stop: int | None = None) -> float:
    """``dE_elastic + dissipated - work`` over a window of recorded rows.

    Row 0 holds the initial stress guess rather than a solved stress, so
    windows start at row 1 by default.
    """
    stop = len(traj.t) if stop is None else stop
    dE = traj.elastic_energy[stop - 1] - traj.elastic_energy[start]
    dD = traj.dissipated_energy[stop - 1] - traj.dissipated_energy[start]
    return float(dE + dD - external_work(traj, start, stop))


def periodic_gap(traj: Trajectory, period: int = -1) -> float:
    """Sup-norm difference of ``sigma_bar`` between ``period`` and the one before."""
    if period < 0:
        period += traj.n_periods
    if period < 1:
        return float("inf")
    cur = traj.sigma_bar[_period_rows(traj, period)]
    prev = traj.sigma_bar[_period_rows(traj, period - 1)]
    return float(np.max(np.abs(cur[1:] - prev[1:])))


def loop_report(traj: Trajectory, period: int = -1) -> LoopReport:
    if period < 0:
        period += traj.n_periods
    s = traj.sigma_bar[_period_rows(traj, period)]
    return LoopReport(period, loop_area(traj, period), dissipated_energy(traj, period),
                      elastic_energy_change(traj, period), periodic_gap(traj, period),
                      float(s.max() - s.min()))


def loading_variation(traj: Trajectory, period: int = -1) -> float:
    """Total variation of ``ell`` over a period, the discrete ``int |ell_dot| dt``."""
    ell = traj.ell[_period_rows(traj, period)]
    return float(np.sum(np.abs(np.diff(ell))))


def dissipation_lower_bound(traj: Trajectory, mu_min: float, period: int = -1,
                            domain_length: float = 1.0) -> float:
    """``|D| * mu_min * int |ell_dot| dt`` over one period."""
    return domain_length * mu_min * loading_variation(traj, period)


def ensemble_stats(trajectories: Sequence[Trajectory]) -> EnsembleStats:
    if len(trajectories) < 1:
        raise ValueError("need at least one trajectory")
    t0 = trajectories[0].t
    for tr in trajectories[1:]:
        if tr.t.shape != t0.shape or not np.array_equal(tr.t, t0):
            raise ValueError("trajectories are recorded on different time grids")
    sig = np.array([tr.sigma_bar for tr in trajectories])
    n = len(trajectories)
    var = sig.var(axis=0, ddof=1) if n > 1 else np.full(len(t0), np.nan)
    return EnsembleStats(t0.copy(), sig.mean(axis=0), var, n)


def variance_slope(eps_list, variances) -> SlopeFit:
    """Least-squares fit of ``log(var)`` against ``log(eps)``."""
    eps = np.asarray(eps_list, dtype=float)
    var = np.asarray(variances, dtype=float)
    if len(eps) != len(var):
        raise ValueError("eps_list and variances differ in length")
    if len(eps) < 3:
        raise ValueError("need at least three epsilon values")
    if np.any(var <= 0) or np.any(eps <= 0):
        raise ValueError("variances and epsilons must be positive")
    x, y = np.log(eps), np.log(var)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), r2)


def plot_data(x, y) -> str:
    """Two-column whitespace-separated text for external plotting tools."""
    return "".join(f"{float(a)!r} {float(b)!r}\n" for a, b in zip(x, y))
