"""Randomized property suite behind ``stochhyst check``.

Each check returns a :class:`PropertyResult`; on failure it carries the
first counterexample found. The pointwise functions under test can be
swapped through keyword arguments, which is how the suite is shown to catch
a broken implementation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import constitutive as cst
from .environment import ParameterTable, Seed, sample_environment
from .solver import (DEFAULT_TOL, Loading, SolverState, constraint_residual, rate_given_stress,
                     run_trajectory)


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    n_checked: int
    detail: str = ""
    witness: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        out = f"{status} {self.name} n={self.n_checked}"
        if self.detail:
            out += f" {self.detail}"
        if not self.passed and self.witness:
            out += " witness=" + json.dumps(self.witness, sort_keys=True)
        return out


def _witness(**arrays_at) -> dict:
    return {k: float(v) for k, v in arrays_at.items()}


def _random_params(rng, n, table: ParameterTable):
    mu = rng.uniform(0.0, max(table.mu_values), n)
    mu[rng.random(n) < 0.2] = 0.0
    nu = rng.uniform(min(table.nu_values), max(table.nu_values), n)
    return cst.DissipationParams(mu, nu)


def check_fenchel_young(rng, n=100_000, table=None, psi=cst.psi, psi_star=cst.psi_star,
                        tol=1e-9) -> PropertyResult:
    """``psi(xi) + psi_star(sigma) >= sigma xi`` with equality iff ``sigma`` is a subgradient.

    Half the samples draw ``sigma`` from the subdifferential of ``xi`` (gap
    must vanish); the rest are arbitrary pairs (gap must be positive when
    ``sigma`` lies off the subdifferential).
    """
    table = table or ParameterTable.standard()
    p = _random_params(rng, n, table)
    xi = rng.uniform(-5, 5, n)
    xi[rng.random(n) < 0.2] = 0.0
    sub = cst.subdiff_psi(p, xi)
    on = np.arange(n) < n // 2
    sigma = np.where(on, sub.lo + rng.random(n) * (sub.hi - sub.lo), rng.uniform(-3, 3, n))
    gap = psi(p, xi) + psi_star(p, sigma) - sigma * xi
    scale = 1.0 + np.abs(sigma * xi)
    dist = cst.subdiff_psi(p, xi).distance(sigma)
    bad = gap < -tol * scale
    bad |= on & (np.abs(gap) > tol * scale)
    bad |= ~on & (dist > 1e-6) & (gap <= 0)
    if bad.any():
        k = int(np.argmax(bad))
        return PropertyResult("fenchel_young", False, n, witness=_witness(
            mu=p.mu[k], nu=p.nu[k], xi=xi[k], sigma=sigma[k], gap=gap[k]))
    return PropertyResult("fenchel_young", True, n)


def check_duality_inversion(rng, n=100_000, table=None, d_psi_star=cst.d_psi_star,
                            tol=1e-9) -> PropertyResult:
    """``sigma in subdiff psi(xi)`` exactly when ``xi = d_psi_star(sigma)``."""
    table = table or ParameterTable.standard()
    p = _random_params(rng, n, table)
    sigma = rng.uniform(-3, 3, n)
    xi = d_psi_star(p, sigma)
    dist = cst.subdiff_psi(p, xi).distance(sigma)
    bad = dist > tol * (1 + np.abs(sigma))
    # the converse: a rate other than d_psi_star(sigma) never has sigma as subgradient
    xi_off = xi + rng.choice([-1.0, 1.0], n) * rng.uniform(1e-3, 1.0, n)
    bad |= cst.subdiff_psi(p, xi_off).contains(sigma, 0.0)
    if bad.any():
        k = int(np.argmax(bad))
        return PropertyResult("duality_inversion", False, n, witness=_witness(
            mu=p.mu[k], nu=p.nu[k], sigma=sigma[k], xi=xi[k], xi_off=xi_off[k]))
    return PropertyResult("duality_inversion", True, n)


def check_moreau_sandwich(rng, n=10_000, etas=(1.0, 0.1, 0.01), table=None,
                          psi_eta=cst.psi_eta, tol=1e-12) -> PropertyResult:
    """``0 <= psi_eta <= psi <= psi_eta + 8 eta C**2 (1 + xi**2)``."""
    table = table or ParameterTable.standard()
    _, big_c = table.constants()
    total = 0
    for eta in etas:
        p = _random_params(rng, n, table)
        xi = rng.uniform(-10, 10, n)
        pe, ps = psi_eta(p, eta, xi), cst.psi(p, xi)
        slack = 8 * eta * big_c**2 * (1 + xi**2)
        bad = (pe < -tol) | (pe > ps + tol * (1 + ps)) | (ps > pe + slack + tol)
        total += n
        if bad.any():
            k = int(np.argmax(bad))
            return PropertyResult("moreau_sandwich", False, total, witness=_witness(
                eta=eta, mu=p.mu[k], nu=p.nu[k], xi=xi[k], psi_eta=pe[k], psi=ps[k]))
    return PropertyResult("moreau_sandwich", True, total, f"C={big_c!r}")


def check_gradient_bound(rng, n=10_000, etas=(1.0, 0.1, 0.01), table=None,
                         psi_eta=cst.psi_eta, h=1e-6) -> PropertyResult:
    """Central-difference slope of ``psi_eta`` below ``K (1 + |xi|)``."""
    table = table or ParameterTable.standard()
    c, big_c = table.constants()
    K = cst.envelope_gradient_constant(c, big_c)
    total = 0
    worst = 0.0
    for eta in etas:
        p = _random_params(rng, n, table)
        xi = rng.uniform(-10, 10, n)
        slope = (psi_eta(p, eta, xi + h) - psi_eta(p, eta, xi - h)) / (2 * h)
        ratio = np.abs(slope) / (K * (1 + np.abs(xi)))
        worst = max(worst, float(ratio.max()))
        total += n
        if (ratio > 1).any():
            k = int(np.argmax(ratio))
            return PropertyResult("gradient_bound", False, total, witness=_witness(
                eta=eta, mu=p.mu[k], nu=p.nu[k], xi=xi[k], slope=slope[k], bound=K * (1 + abs(xi[k]))))
    return PropertyResult("gradient_bound", True, total, f"K={K!r} max_ratio={worst!r}")


def check_conjugate_ordering(rng, n=10_000, table=None, psi_eta_star=cst.psi_eta_star,
                             psi_star=cst.psi_star, tol=1e-12) -> PropertyResult:
    """``psi_eta* >= psi* >= psi_eta*(m sigma)/m - 8 eta C**2 / m`` for admissible ``eta``."""
    table = table or ParameterTable.standard()
    c, big_c = table.constants()
    eta_max = c / (16 * big_c**2)
    total = 0
    for eta in (eta_max, eta_max / 10, eta_max / 100):
        m = cst.m_eta(eta, c, big_c)
        p = _random_params(rng, n, table)
        s = rng.uniform(-10, 10, n)
        upper, mid = psi_eta_star(p, eta, s), psi_star(p, s)
        lower = psi_eta_star(p, eta, m * s) / m - 8 * eta * big_c**2 / m
        bad = (upper < mid - tol) | (mid < lower - tol * (1 + np.abs(lower)))
        total += n
        if bad.any():
            k = int(np.argmax(bad))
            return PropertyResult("conjugate_ordering", False, total, witness=_witness(
                eta=eta, m=m, mu=p.mu[k], nu=p.nu[k], sigma=s[k]))
    return PropertyResult("conjugate_ordering", True, total, f"c={c!r} C={big_c!r}")


def check_d_psi_star_lipschitz(rng, n=10_000, table=None,
                               d_psi_star=cst.d_psi_star) -> PropertyResult:
    """``d_psi_star`` is nondecreasing and ``1/nu``-Lipschitz."""
    table = table or ParameterTable.standard()
    p = _random_params(rng, n, table)
    a, b = rng.uniform(-3, 3, n), rng.uniform(-3, 3, n)
    lo, hi = np.minimum(a, b), np.maximum(a, b)
    diff = d_psi_star(p, hi) - d_psi_star(p, lo)
    bad = (diff < -1e-12) | (diff > (hi - lo) / p.nu * (1 + 1e-12) + 1e-12)
    if bad.any():
        k = int(np.argmax(bad))
        return PropertyResult("d_psi_star_monotone_lipschitz", False, n, witness=_witness(
            mu=p.mu[k], nu=p.nu[k], lo=lo[k], hi=hi[k]))
    return PropertyResult("d_psi_star_monotone_lipschitz", True, n)


def check_rate_monotonicity(rng, n=1_000, table=None, dt=1e-3) -> PropertyResult:
    """Per-cell rates and the constraint residual are nondecreasing in the trial stress."""
    table = table or ParameterTable.standard()
    loading = Loading.constant(0.0)
    for k in range(n):
        env = sample_environment(table, float(rng.choice([1 / 10, 1 / 37, 1 / 100])),
                                 Seed(int(rng.integers(2**31)), k))
        S = rng.normal(0, 0.3, env.n_cells)
        S -= env.weights @ S
        state = SolverState.initial(env, loading, S)
        d_ell = float(rng.normal(0, 2))
        s1, s2 = np.sort(rng.uniform(-3, 3, 2))
        r1 = rate_given_stress(env, state, s1, dt, d_ell)
        r2 = rate_given_stress(env, state, s2, dt, d_ell)
        f1 = constraint_residual(env, state, s1, dt, d_ell)
        f2 = constraint_residual(env, state, s2, dt, d_ell)
        if np.any(r2 < r1 - 1e-12) or f2 < f1 - 1e-12:
            return PropertyResult("rate_monotonicity", False, k + 1, witness=_witness(
                s1=s1, s2=s2, d_ell=d_ell, f1=f1, f2=f2))
    return PropertyResult("rate_monotonicity", True, n)


def check_constraint_residual(seed=7, deltas=(1.0, 2.0**-2, 2.0**-4, 2.0**-6, 2.0**-8),
                              epsilon=1 / 200, steps_per_period=2000,
                              tol=DEFAULT_TOL) -> PropertyResult:
    """Every accepted step of the rate sweep satisfies ``|residual| <= tol``.

    Also checks that the weighted relative strain stays at zero to within
    the accumulated tolerance and that dissipation never decreases.
    """
    env = sample_environment(ParameterTable.standard(), epsilon, Seed(seed, 0))
    total = 0
    worst = 0.0
    for delta in deltas:
        tr = run_trajectory(env, Loading.sin2(delta), steps_per_period, tol=tol)
        nsteps = len(tr.residuals)
        total += nsteps
        worst = max(worst, float(np.max(np.abs(tr.residuals))))
        drift = abs(float(env.weights @ tr.final_state.S))
        if (np.max(np.abs(tr.residuals)) > tol or drift > tol * tr.dt * nsteps
                or np.any(np.diff(tr.dissipated_energy) < 0)):
            j = int(np.argmax(np.abs(tr.residuals)))
            return PropertyResult("constraint_residual", False, total, witness=_witness(
                delta=delta, step=j, residual=tr.residuals[j], drift=drift))
    return PropertyResult("constraint_residual", True, total, f"max_residual={worst!r}")


def dt_convergence_ratio(seed=3, epsilon=1 / 50, delta=0.1, steps_per_period=200,
                         refine=16) -> float:
    """``err(dt) / err(dt/2)`` for the sup-in-time stress error.

    The reference uses ``dt/refine``. For a first-order scheme the expected
    ratio is ``(refine - 1) / (refine/2 - 1)`` (15/7 for ``refine = 16``).
    """
    env = sample_environment(ParameterTable.standard(), epsilon, Seed(seed, 0))
    loading = Loading.sin2(delta, periods=1)
    ref = run_trajectory(env, loading, steps_per_period * refine)

    def err(n):
        tr = run_trajectory(env, loading, n)
        k = steps_per_period * refine // n
        return float(np.max(np.abs(tr.sigma_bar[1:] - ref.sigma_bar[k::k])))

    return err(steps_per_period) / err(2 * steps_per_period)


def check_dt_convergence(lo=1.7, hi=2.3) -> PropertyResult:
    ratio = dt_convergence_ratio()
    return PropertyResult("dt_convergence", lo <= ratio <= hi, 1, f"ratio={ratio!r}",
                          {"ratio": ratio})


def run_checks(seed: int = 0, fast: bool = False,
               overrides: dict[str, Callable] | None = None) -> list[PropertyResult]:
    """Run every property with a seeded generator.

    ``overrides`` maps a constitutive function name (``psi``, ``psi_star``,
    ``d_psi_star``, ``psi_eta``, ``psi_eta_star``) to a replacement.
    """
    ov = overrides or {}
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 0x5EED])))
    scale = 10 if fast else 1
    fns = {name: ov.get(name, getattr(cst, name))
           for name in ("psi", "psi_star", "d_psi_star", "psi_eta", "psi_eta_star")}
    out = [
        check_fenchel_young(rng, 100_000 // scale, psi=fns["psi"], psi_star=fns["psi_star"]),
        check_duality_inversion(rng, 100_000 // scale, d_psi_star=fns["d_psi_star"]),
        check_moreau_sandwich(rng, 10_000 // scale, psi_eta=fns["psi_eta"]),
        check_gradient_bound(rng, 10_000 // scale, psi_eta=fns["psi_eta"]),
        check_conjugate_ordering(rng, 10_000 // scale, psi_eta_star=fns["psi_eta_star"],
                                 psi_star=fns["psi_star"]),
        check_d_psi_star_lipschitz(rng, 10_000 // scale, d_psi_star=fns["d_psi_star"]),
        check_rate_monotonicity(rng, 1_000 // scale),
    ]
    if fast:
        out.append(check_constraint_residual(deltas=(2.0**-4,), steps_per_period=400))
    else:
        out.append(check_constraint_residual())
        out.append(check_dt_convergence())
    return out


def report(results: list[PropertyResult]) -> str:
    lines = [r.line() for r in results]
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail}/{len(results)} properties passed")
    return "\n".join(lines) + "\n"
