"""Pure numpy implementation of the time-stepping kernels.

Mirrors ``_ckernels.pyx`` operation for operation; results agree with the
compiled version up to summation-order roundoff.

Notation: ``sigma_old[i] = A[i] * (ell_j + S_j[i])`` is the elastic stress at
the start of the step. The implicit per-cell inclusion

    sigma_bar in sigma_old + A dt r + nu r + mu sign(r)

has total strain rate ``r = sign(g) max(|g| - mu, 0) / (nu + A dt)`` with
``g = sigma_bar - sigma_old``.
"""
from __future__ import annotations

import math

import numpy as np

STATUS_OK = 0
STATUS_MAXITER = 1


def cell_rates(sigma_bar, sigma_old, A, mu, nu, dt):
    g = sigma_bar - sigma_old
    excess = np.abs(g) - mu
    return np.where(excess > 0.0, np.sign(g) * excess / (nu + A * dt), 0.0)


def residual(sigma_bar, w, sigma_old, A, mu, nu, dt, d_ell):
    r = cell_rates(sigma_bar, sigma_old, A, mu, nu, dt)
    return float(np.dot(w, r - d_ell))


def stress_bracket(w, sigma_old, A, mu, nu, dt, d_ell):
    """Stresses at which the constraint residual is provably <= 0 and >= 0."""
    kmax = float(np.max(nu + A * dt))
    lo = float(np.min(sigma_old - mu)) - kmax * max(-d_ell, 0.0)
    hi = float(np.max(sigma_old + mu)) + kmax * max(d_ell, 0.0)
    return lo, hi


def find_stress(w, sigma_old, A, mu, nu, dt, d_ell, guess, tol, max_iter):
    """Safeguarded secant solve of ``residual(sigma) = 0``.

    Returns ``(sigma, iterations, residual, status)``.
    """
    lo, hi = stress_bracket(w, sigma_old, A, mu, nu, dt, d_ell)
    slope = float(np.sum(w / (nu + A * dt)))

    def f(x):
        return residual(x, w, sigma_old, A, mu, nu, dt, d_ell)

    x0 = min(max(guess, lo), hi)
    f0 = f(x0)
    it = 1
    if abs(f0) <= tol:
        return x0, it, f0, STATUS_OK
    if f0 < 0.0:
        lo = x0
    else:
        hi = x0
    # slope is an upper bound of dF/dsigma, so this step never overshoots the root
    x1 = x0 - f0 / slope
    if not (lo < x1 < hi):
        x1 = 0.5 * (lo + hi)
    stall = 0
    f1 = f0
    while it < max_iter:
        f1 = f(x1)
        it += 1
        if abs(f1) <= tol:
            return x1, it, f1, STATUS_OK
        if f1 < 0.0:
            lo = x1
        else:
            hi = x1
        if abs(f1) > 0.5 * abs(f0):
            stall += 1
        else:
            stall = 0
        if f1 != f0:
            x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        else:
            x2 = math.nan
        if stall >= 2 or not (lo < x2 < hi):
            x2 = 0.5 * (lo + hi)
            stall = 0
        x0, f0 = x1, f1
        x1 = x2
    return x1, it, f1, STATUS_MAXITER


def integrate(w, A, mu, nu, S0, ell, dt, sigma0, tol, max_iter, stride, S_rec=None):
    """Advance ``len(ell) - 1`` steps from strains ``S0``.

    ``ell[j]`` is the elongation at step ``j``. Records every ``stride`` steps,
    including step 0; when ``S_rec`` (shape ``(nrec, ncell)``) is given the
    relative strains are stored there too. Returns a dict of recorded arrays
    and diagnostics.
    """
    w = np.ascontiguousarray(w, dtype=float)
    A = np.ascontiguousarray(A, dtype=float)
    mu = np.ascontiguousarray(mu, dtype=float)
    nu = np.ascontiguousarray(nu, dtype=float)
    S = np.array(S0, dtype=float)
    nsteps = len(ell) - 1
    nrec = nsteps // stride + 1
    sig_rec = np.empty(nrec)
    elas_rec = np.empty(nrec)
    diss_rec = np.empty(nrec)
    iters = np.zeros(nsteps, dtype=np.int64)
    resid = np.zeros(nsteps)

    e = ell[0] + S
    sig_rec[0] = sigma0
    elas_rec[0] = 0.5 * float(np.dot(w, A * e * e))
    diss_rec[0] = 0.0
    if S_rec is not None:
        S_rec[0] = S
    sigma = sigma0
    diss = 0.0
    k = 1
    status = STATUS_OK
    for j in range(nsteps):
        d_ell = (ell[j + 1] - ell[j]) / dt
        sigma_old = A * (ell[j] + S)
        sigma, it, res, st = find_stress(w, sigma_old, A, mu, nu, dt, d_ell,
                                         sigma, tol, max_iter)
        iters[j] = it
        resid[j] = res
        if st != STATUS_OK:
            status = st
            nsteps = j + 1
            break
        r = cell_rates(sigma, sigma_old, A, mu, nu, dt)
        S += dt * (r - d_ell)
        diss += dt * float(np.dot(w, nu * r * r + mu * np.abs(r)))
        if (j + 1) % stride == 0:
            e = ell[j + 1] + S
            sig_rec[k] = sigma
            elas_rec[k] = 0.5 * float(np.dot(w, A * e * e))
            diss_rec[k] = diss
            if S_rec is not None:
                S_rec[k] = S
            k += 1
    return {
        "sigma_bar": sig_rec[:k],
        "elastic_energy": elas_rec[:k],
        "dissipated_energy": diss_rec[:k],
        "S": S,
        "sigma_last": sigma,
        "iterations": iters[:nsteps],
        "residuals": resid[:nsteps],
        "status": status,
    }
