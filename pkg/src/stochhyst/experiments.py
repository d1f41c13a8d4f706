"""Experiment drivers behind the CLI subcommands.

Every driver takes an :class:`ExperimentConfig`, an output directory and a
worker count, writes its artifacts and returns an :class:`Outcome`.
Independent realizations and sweep points go to a process pool; results are
merged in task order, so outputs do not depend on ``jobs``.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__, analysis, checks
from ._backend import BACKEND
from .config import ExperimentConfig
from .environment import Seed, sample_environment
from .homogenized import OmegaSample, closed_form_viscous, run_homogenized
from .solver import Loading, run_trajectory

# member seeds for Monte-Carlo Omega samples live far from realization indices
OMEGA_SEED_INDEX = 10**6


@dataclass
class Outcome:
    files: list[Path] = field(default_factory=list)
    summary: list[str] = field(default_factory=list)
    failed: bool = False


def header(cfg: ExperimentConfig, command: str, *extra: str) -> list[str]:
    return [f"stochhyst {__version__} backend {BACKEND}", f"command {command}",
            f"config_sha256 {cfg.content_hash()}", f"base_seed {cfg.base_seed}", *extra]


def pool_map(fn: Callable, tasks: Sequence, jobs: int = 1) -> list:
    """``[fn(t) for t in tasks]``, optionally across ``jobs`` processes."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def _write(path: Path, text: str, out: Outcome):
    path.write_text(text, encoding="utf-8")
    out.files.append(path)


def _loading(cfg: ExperimentConfig, delta: float | None = None) -> Loading:
    return Loading.sin2(cfg.delta if delta is None else delta, periods=cfg.periods)


# worker tasks (module level so they pickle) ------------------------------

def _trajectory_task(args):
    cfg, eps, r, delta = args
    env = sample_environment(cfg.table(), eps, Seed(cfg.base_seed, r))
    return run_trajectory(env, _loading(cfg, delta), cfg.steps_per_period, cfg.stride,
                          cfg.tol, cfg.max_iter)


def _sigma_task(args):
    tr = _trajectory_task(args)
    return tr.t, tr.sigma_bar


def _ensemble(cfg: ExperimentConfig, eps_list, jobs: int):
    tasks = [(cfg, eps, r, None) for eps in eps_list for r in range(cfg.n_realizations)]
    res = pool_map(_sigma_task, tasks, jobs)
    n = cfg.n_realizations
    out = []
    for k in range(len(eps_list)):
        chunk = res[k * n:(k + 1) * n]
        t = chunk[0][0]
        sig = np.array([s for _, s in chunk])
        var = sig.var(axis=0, ddof=1) if n > 1 else np.full(len(t), np.nan)
        out.append(analysis.EnsembleStats(t, sig.mean(axis=0), var, n))
    return out


# subcommands -------------------------------------------------------------

def _loops_csv(traj) -> str:
    rows = ["period,area,dissipated,elastic_change,periodic_gap,limit_cycle"]
    for p in range(traj.n_periods):
        rep = analysis.loop_report(traj, p)
        rows.append(f"{p},{rep.area!r},{rep.dissipated!r},{rep.elastic_change!r},"
                    f"{rep.periodic_gap!r},{str(rep.on_limit_cycle).lower()}")
    return "\n".join(rows) + "\n"


def cmd_run(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> Outcome:
    out = Outcome()
    env = sample_environment(cfg.table(), cfg.epsilon, Seed(cfg.base_seed, 0))
    traj = run_trajectory(env, _loading(cfg), cfg.steps_per_period, cfg.stride, cfg.tol,
                          cfg.max_iter)
    hdr = header(cfg, "run", f"epsilon {cfg.epsilon!r}", f"delta {cfg.delta!r}")
    _write(out_dir / "trajectory.csv", traj.to_csv(header=hdr), out)
    _write(out_dir / "environment.txt", env.to_text(), out)
    _write(out_dir / "loops.csv", "".join(f"# {h}\n" for h in hdr) + _loops_csv(traj), out)
    _write(out_dir / "loop.dat", analysis.plot_data(traj.ell[1:], traj.sigma_bar[1:]), out)
    rep = analysis.loop_report(traj)
    out.summary.append(f"last period area={rep.area!r} dissipated={rep.dissipated!r} "
                       f"limit_cycle={rep.on_limit_cycle}")
    return out


def cmd_sweep_rates(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> Outcome:
    out = Outcome()
    tasks = [(cfg, cfg.epsilon, 0, d) for d in cfg.delta_list]
    trajs = pool_map(_trajectory_task, tasks, jobs)
    mu_min = min(cfg.mu_values)
    rows = ["delta,area,dissipated,relative_gap,dissipation_lower_bound,limit_cycle"]
    for i, (delta, tr) in enumerate(zip(cfg.delta_list, trajs)):
        hdr = header(cfg, "sweep-rates", f"epsilon {cfg.epsilon!r}", f"delta {delta!r}")
        _write(out_dir / f"trajectory_delta_{i}.csv", tr.to_csv(header=hdr), out)
        _write(out_dir / f"loop_delta_{i}.dat", analysis.plot_data(tr.ell[1:], tr.sigma_bar[1:]),
               out)
        rep = analysis.loop_report(tr)
        bound = analysis.dissipation_lower_bound(tr, mu_min)
        rows.append(f"{delta!r},{rep.area!r},{rep.dissipated!r},{rep.relative_gap!r},"
                    f"{bound!r},{str(rep.on_limit_cycle).lower()}")
        out.summary.append(f"delta={delta!r} area={rep.area!r}")
    hdr = "".join(f"# {h}\n" for h in header(cfg, "sweep-rates", f"epsilon {cfg.epsilon!r}"))
    _write(out_dir / "loop_areas.csv", hdr + "\n".join(rows) + "\n", out)
    return out


def cmd_ensemble(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> Outcome:
    out = Outcome()
    stats = _ensemble(cfg, cfg.eps_list, jobs)
    rows = ["epsilon,observe_time,mean,variance,std_error"]
    variances = []
    for i, (eps, st) in enumerate(zip(cfg.eps_list, stats)):
        hdr = header(cfg, "ensemble", f"epsilon {eps!r}", f"realizations {st.n_realizations}")
        _write(out_dir / f"stats_eps_{i}.csv", st.to_csv(hdr), out)
        mean, var = st.at_time(cfg.observe_time)
        variances.append(var)
        rows.append(f"{eps!r},{cfg.observe_time!r},{mean!r},{var!r},"
                    f"{float(np.sqrt(var / st.n_realizations))!r}")
    hdr = "".join(f"# {h}\n" for h in header(cfg, "ensemble"))
    _write(out_dir / "variance.csv", hdr + "\n".join(rows) + "\n", out)
    _write(out_dir / "variance.dat", analysis.plot_data(cfg.eps_list, variances), out)
    if len(cfg.eps_list) >= 3:
        fit = analysis.variance_slope(cfg.eps_list, variances)
        _write(out_dir / "slope.txt", fit.summary() + "\n", out)
        out.summary.append(fit.summary())
    else:
        out.summary.append(f"variance at t={cfg.observe_time!r}: "
                           + " ".join(repr(v) for v in variances))
    return out


def _initial_profile(cfg: ExperimentConfig, loading: Loading):
    K = cfg.macro_points
    if K == 1 and cfg.initial_amplitude == 0.0:
        return None
    x = (np.arange(K) + 0.5) / K
    dev = cfg.initial_amplitude * np.cos(2 * np.pi * x)
    return float(loading.ell(0.0)) + dev - dev.mean()


def cmd_homogenize(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> Outcome:
    out = Outcome()
    table = cfg.table()
    loading = _loading(cfg)
    sample = OmegaSample.from_table(table, cfg.omega_members,
                                    Seed(cfg.base_seed, OMEGA_SEED_INDEX))
    profile = _initial_profile(cfg, loading)
    hom = run_homogenized(sample, loading, cfg.steps_per_period, cfg.stride, profile,
                          tol=cfg.tol, max_iter=cfg.max_iter)
    tr = hom.trajectory
    noise = "0" if sample.exhaustive else "monte-carlo"
    hdr = header(cfg, "homogenize", f"omega_members {sample.size}",
                 f"exhaustive {str(sample.exhaustive).lower()}", f"sampling_noise {noise}")
    _write(out_dir / "homogenized.csv",
           tr.to_csv(header=hdr, extra_columns={"homogenized": "true"}), out)
    _write(out_dir / "corrector.csv", "".join(f"# {h}\n" for h in hdr) + hom.corrector_csv(), out)
    K = hom.macro_strain.shape[1]
    lines = ["t," + ",".join(f"macro_strain_{k}" for k in range(K))]
    for j in range(1, len(tr.t)):
        lines.append(f"{float(tr.t[j])!r}," + ",".join(repr(float(v)) for v in hom.macro_strain[j]))
    _write(out_dir / "macro_strain.csv", "".join(f"# {h}\n" for h in hdr) + "\n".join(lines)
           + "\n", out)
    out.summary.append(f"omega members={sample.size} exhaustive={sample.exhaustive} "
                       f"max|mean theta|={hom.max_abs_mean_theta!r}")
    if table.is_viscous:
        exact = closed_form_viscous(table, loading, tr.t, hom.macro_strain[0])
        err = float(np.max(np.abs(hom.macro_strain - exact)))
        _write(out_dir / "oracle.txt", f"sup_error {err!r}\ndt {tr.dt!r}\n", out)
        out.summary.append(f"closed-form sup error={err!r} ({err / tr.dt:.3g} dt)")
    return out


def cmd_compare(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1) -> Outcome:
    out = Outcome()
    loading = _loading(cfg)
    sample = OmegaSample.from_table(cfg.table(), cfg.omega_members,
                                    Seed(cfg.base_seed, OMEGA_SEED_INDEX))
    hom = run_homogenized(sample, loading, cfg.steps_per_period, cfg.stride, tol=cfg.tol,
                          max_iter=cfg.max_iter)
    Sigma = hom.trajectory.sigma_bar
    stats = _ensemble(cfg, cfg.eps_list, jobs)
    hdr = header(cfg, "compare", f"omega_members {sample.size}",
                 f"exhaustive {str(sample.exhaustive).lower()}")
    _write(out_dir / "homogenized.csv",
           hom.trajectory.to_csv(header=hdr, extra_columns={"homogenized": "true"}), out)
    rows = ["epsilon,sup_error,noise"]
    for eps, st in zip(cfg.eps_list, stats):
        # row 0 is the initial guess, not a solved stress
        gap = float(np.max(np.abs(st.mean_sigma - Sigma)[1:]))
        noise = float(np.max(np.sqrt(st.var_sigma[1:] / st.n_realizations)))
        rows.append(f"{eps!r},{gap!r},{noise!r}")
        out.summary.append(f"epsilon={eps!r} sup_error={gap!r} noise={noise!r}")
    _write(out_dir / "compare.csv", "".join(f"# {h}\n" for h in hdr) + "\n".join(rows) + "\n",
           out)
    return out


def cmd_check(cfg: ExperimentConfig, out_dir: Path, jobs: int = 1, fast: bool = False,
              overrides=None) -> Outcome:
    out = Outcome()
    results = checks.run_checks(cfg.base_seed, fast=fast, overrides=overrides)
    text = checks.report(results)
    hdr = "".join(f"# {h}\n" for h in header(cfg, "check"))
    _write(out_dir / "check_report.txt", hdr + text, out)
    out.summary.extend(text.rstrip("\n").splitlines())
    out.failed = not all(r.passed for r in results)
    return out


COMMANDS = {
    "run": cmd_run,
    "sweep-rates": cmd_sweep_rates,
    "ensemble": cmd_ensemble,
    "homogenize": cmd_homogenize,
    "compare": cmd_compare,
    "check": cmd_check,
}


def execute(cfg: ExperimentConfig, out_dir, jobs: int = 1, **kwargs) -> Outcome:
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    return COMMANDS[cfg.mode](cfg, out_dir, jobs, **kwargs)
