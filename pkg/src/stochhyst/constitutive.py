"""Pointwise constitutive laws: elastic energy, dissipation potential and duals.

The dissipation potential at one material point is

    psi(xi) = 0.5 * nu * xi**2 + mu * |xi|

with ``nu > 0`` (wet friction) and ``mu >= 0`` (dry friction threshold).
All functions broadcast over numpy arrays, so ``DissipationParams`` may hold
scalars or arrays of matching shape.

Moreau envelope
---------------
For ``eta > 0`` the proximal point of ``psi`` at ``xi`` is

    p* = sign(xi) * max(|xi| - eta*mu, 0) / (1 + nu*eta)

(soft-thresholding followed by the quadratic shrink). Substituting back, with
``r = |xi| - eta*mu``:

    psi_eta(xi) = xi**2 / (2 eta)                              if r <= 0
    psi_eta(xi) = nu r**2 / (2 (1 + nu eta)) + mu r + eta mu**2 / 2   if r > 0

Both branches agree at ``r = 0``. The conjugate of an envelope is the
conjugate plus ``eta/2 * sigma**2``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DissipationParams:
    """Dry-friction threshold ``mu`` and viscosity ``nu`` at a material point."""

    mu: float | np.ndarray
    nu: float | np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.nu) <= 0):
            raise ValueError("viscosity nu must be strictly positive")
        if np.any(np.asarray(self.mu) < 0):
            raise ValueError("friction threshold mu must be nonnegative")


@dataclass(frozen=True)
class ElasticParams:
    """Elastic modulus ``a`` (stress units)."""

    a: float | np.ndarray

    def __post_init__(self):
        if np.any(np.asarray(self.a) <= 0):
            raise ValueError("elastic modulus must be strictly positive")


@dataclass(frozen=True)
class Subdifferential:
    """Closed interval ``[lo, hi]`` of subgradients."""

    lo: float | np.ndarray
    hi: float | np.ndarray

    def contains(self, sigma, tol: float = 0.0):
        return (sigma >= self.lo - tol) & (sigma <= self.hi + tol)

    def distance(self, sigma):
        """Distance from ``sigma`` to the interval (zero inside)."""
        return np.maximum(np.maximum(self.lo - sigma, sigma - self.hi), 0.0)

    @property
    def is_singleton(self):
        return np.asarray(self.lo) == np.asarray(self.hi)


def elastic_energy(e: ElasticParams, xi):
    return 0.5 * e.a * np.square(xi)


def elastic_stress(e: ElasticParams, xi):
    return e.a * xi


def psi(p: DissipationParams, xi):
    return 0.5 * p.nu * np.square(xi) + p.mu * np.abs(xi)


def psi_star(p: DissipationParams, sigma):
    excess = np.maximum(np.abs(sigma) - p.mu, 0.0)
    return np.square(excess) / (2.0 * p.nu)


def d_psi_star(p: DissipationParams, sigma):
    """Derivative of ``psi_star``: the strain rate driven by stress ``sigma``.

    Zero on the dead zone ``|sigma| <= mu``; ``sign(sigma)(|sigma|-mu)/nu``
    outside it.
    """
    excess = np.maximum(np.abs(sigma) - p.mu, 0.0)
    return np.sign(sigma) * excess / p.nu


def subdiff_psi(p: DissipationParams, xi) -> Subdifferential:
    xi = np.asarray(xi, dtype=float)
    s = np.sign(xi)
    mu = np.asarray(p.mu, dtype=float)
    smooth = p.nu * xi + mu * s
    lo = np.where(s == 0, -mu, smooth)
    hi = np.where(s == 0, mu, smooth)
    if lo.ndim == 0:
        return Subdifferential(float(lo), float(hi))
    return Subdifferential(lo, hi)


def _check_eta(eta, allow_zero=False):
    if allow_zero:
        if eta < 0:
            raise ValueError(f"eta must be >= 0, got {eta}")
    elif not eta > 0:
        raise ValueError(f"eta must be > 0, got {eta}")


def prox_psi(p: DissipationParams, eta: float, xi):
    """Proximal point ``argmin_q psi(q) + |xi - q|**2 / (2 eta)``."""
    _check_eta(eta)
    shrunk = np.maximum(np.abs(xi) - eta * p.mu, 0.0)
    return np.sign(xi) * shrunk / (1.0 + p.nu * eta)


def psi_eta(p: DissipationParams, eta: float, xi):
    """Moreau envelope of ``psi`` with width ``eta`` (closed form)."""
    _check_eta(eta)
    xi = np.asarray(xi, dtype=float)
    r = np.abs(xi) - eta * p.mu
    rp = np.maximum(r, 0.0)
    sliding = p.nu * rp**2 / (2.0 * (1.0 + p.nu * eta)) + p.mu * rp + 0.5 * eta * np.square(p.mu)
    out = np.where(r > 0, sliding, np.square(xi) / (2.0 * eta))
    return out[()] if out.ndim == 0 else out


def d_psi_eta(p: DissipationParams, eta: float, xi):
    """Gradient of the envelope, ``(xi - prox(xi)) / eta``."""
    return (xi - prox_psi(p, eta, xi)) / eta


def psi_eta_star(p: DissipationParams, eta: float, sigma):
    """Conjugate of the envelope; ``eta = 0`` is accepted as the ``psi_star`` limit."""
    _check_eta(eta, allow_zero=True)
    return psi_star(p, sigma) + 0.5 * eta * np.square(sigma)


def growth_constants(mu_values, nu_values) -> tuple[float, float]:
    """Strong-convexity constant ``c`` and quadratic-growth constant ``C``.

    ``psi - c xi**2`` is convex for ``c <= nu/2``, so ``c = min(nu)/2``.
    ``psi(xi) <= (nu/2 + mu)(1 + xi**2)`` gives
    ``C = max(max(nu)/2 + max(mu), max(mu), 1)``.
    """
    mu_max = float(np.max(mu_values))
    nu = np.asarray(nu_values, dtype=float)
    c = 0.5 * float(nu.min())
    big_c = max(0.5 * float(nu.max()) + mu_max, mu_max, 1.0)
    return c, big_c


def envelope_gradient_constant(c: float, big_c: float) -> float:
    """Constant in ``|D psi_eta(xi)| <= K (1 + |xi|)``.

    From ``|D psi_eta| <= 4 C sqrt(1 + |p|**2)`` at the proximal point ``p`` and
    ``c |p|**2 <= C (1 + xi**2)`` it follows ``K = 4 C sqrt(1 + C/c)``.
    """
    return float(4.0 * big_c * np.sqrt(1.0 + big_c / c))


def m_eta(eta: float, c: float, big_c: float) -> float:
    """Scaling factor ``1 - 8 eta C**2 / c``; at least 1/2 for ``eta <= c/(16 C**2)``."""
    return 1.0 - 8.0 * eta * big_c**2 / c
