# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping kernels; same contract as ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, fmax, fmin, NAN

cnp.import_array()

cdef enum:
    STATUS_OK = 0
    STATUS_MAXITER = 1


cdef inline double _rate(double sigma_bar, double sig_old, double a, double m,
                         double v, double dt) noexcept nogil:
    cdef double g = sigma_bar - sig_old
    cdef double ex = fabs(g) - m
    if ex <= 0.0:
        return 0.0
    if g > 0.0:
        return ex / (v + a * dt)
    return -ex / (v + a * dt)


cdef double _residual(double sigma_bar, const double[::1] w, const double[::1] sig_old,
                      const double[::1] A, const double[::1] mu, const double[::1] nu,
                      double dt, double d_ell) noexcept nogil:
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += w[i] * (_rate(sigma_bar, sig_old[i], A[i], mu[i], nu[i], dt) - d_ell)
    return acc


cdef int _find_stress(const double[::1] w, const double[::1] sig_old, const double[::1] A,
                      const double[::1] mu, const double[::1] nu, double dt, double d_ell,
                      double guess, double tol, int max_iter,
                      double* out_sigma, int* out_it, double* out_res) noexcept nogil:
    cdef Py_ssize_t i, n = w.shape[0]
    cdef double kmax = 0.0, k, lo = 1e300, hi = -1e300, slope = 0.0
    cdef double x0, f0, x1, f1, x2
    cdef int it, stall
    for i in range(n):
        k = nu[i] + A[i] * dt
        kmax = fmax(kmax, k)
        lo = fmin(lo, sig_old[i] - mu[i])
        hi = fmax(hi, sig_old[i] + mu[i])
        slope += w[i] / k
    lo -= kmax * fmax(-d_ell, 0.0)
    hi += kmax * fmax(d_ell, 0.0)

    x0 = fmin(fmax(guess, lo), hi)
    f0 = _residual(x0, w, sig_old, A, mu, nu, dt, d_ell)
    it = 1
    if fabs(f0) <= tol:
        out_sigma[0] = x0; out_it[0] = it; out_res[0] = f0
        return STATUS_OK
    if f0 < 0.0:
        lo = x0
    else:
        hi = x0
    x1 = x0 - f0 / slope
    if not (lo < x1 < hi):
        x1 = 0.5 * (lo + hi)
    stall = 0
    f1 = f0
    while it < max_iter:
        f1 = _residual(x1, w, sig_old, A, mu, nu, dt, d_ell)
        it += 1
        if fabs(f1) <= tol:
            out_sigma[0] = x1; out_it[0] = it; out_res[0] = f1
            return STATUS_OK
        if f1 < 0.0:
            lo = x1
        else:
            hi = x1
        if fabs(f1) > 0.5 * fabs(f0):
            stall += 1
        else:
            stall = 0
        if f1 != f0:
            x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        else:
            x2 = NAN
        if stall >= 2 or not (lo < x2 < hi):
            x2 = 0.5 * (lo + hi)
            stall = 0
        x0 = x1; f0 = f1
        x1 = x2
    out_sigma[0] = x1; out_it[0] = it; out_res[0] = f1
    return STATUS_MAXITER


def cell_rates(double sigma_bar, sigma_old, A, mu, nu, double dt):
    cdef const double[::1] so = np.ascontiguousarray(sigma_old, dtype=np.float64)
    cdef const double[::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef const double[::1] m = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] v = np.ascontiguousarray(nu, dtype=np.float64)
    cdef Py_ssize_t i, n = so.shape[0]
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _rate(sigma_bar, so[i], a[i], m[i], v[i], dt)
    return out


def residual(double sigma_bar, w, sigma_old, A, mu, nu, double dt, double d_ell):
    return _residual(sigma_bar, np.ascontiguousarray(w, dtype=np.float64),
                     np.ascontiguousarray(sigma_old, dtype=np.float64),
                     np.ascontiguousarray(A, dtype=np.float64),
                     np.ascontiguousarray(mu, dtype=np.float64),
                     np.ascontiguousarray(nu, dtype=np.float64), dt, d_ell)


def find_stress(w, sigma_old, A, mu, nu, double dt, double d_ell, double guess,
                double tol, int max_iter):
    cdef double sigma = 0.0, res = 0.0
    cdef int it = 0, status
    status = _find_stress(np.ascontiguousarray(w, dtype=np.float64),
                          np.ascontiguousarray(sigma_old, dtype=np.float64),
                          np.ascontiguousarray(A, dtype=np.float64),
                          np.ascontiguousarray(mu, dtype=np.float64),
                          np.ascontiguousarray(nu, dtype=np.float64),
                          dt, d_ell, guess, tol, max_iter, &sigma, &it, &res)
    return sigma, it, res, status


def integrate(w_in, A_in, mu_in, nu_in, S0, ell_in, double dt, double sigma0,
              double tol, int max_iter, int stride, S_rec_in=None):
    cdef const double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef const double[::1] A = np.ascontiguousarray(A_in, dtype=np.float64)
    cdef const double[::1] mu = np.ascontiguousarray(mu_in, dtype=np.float64)
    cdef const double[::1] nu = np.ascontiguousarray(nu_in, dtype=np.float64)
    cdef const double[::1] ell = np.ascontiguousarray(ell_in, dtype=np.float64)
    S_arr = np.array(S0, dtype=np.float64)
    cdef double[::1] S = S_arr
    cdef Py_ssize_t n = w.shape[0], i
    cdef Py_ssize_t nsteps = ell.shape[0] - 1, j, k
    cdef Py_ssize_t nrec = nsteps // stride + 1
    sig_arr = np.empty(nrec)
    elas_arr = np.empty(nrec)
    diss_arr = np.empty(nrec)
    iters_arr = np.zeros(nsteps, dtype=np.int64)
    resid_arr = np.zeros(nsteps)
    so_arr = np.empty(n)
    cdef double[::1] sig_rec = sig_arr, elas_rec = elas_arr, diss_rec = diss_arr
    cdef long long[::1] iters = iters_arr
    cdef double[::1] resid = resid_arr, so = so_arr
    cdef double sigma = sigma0, diss = 0.0, d_ell, r, e, acc, res
    cdef int it, status = STATUS_OK, st
    cdef double[:, ::1] S_rec
    cdef bint keep = S_rec_in is not None
    if keep:
        S_rec = S_rec_in

    with nogil:
        acc = 0.0
        for i in range(n):
            e = ell[0] + S[i]
            acc += w[i] * (A[i] * e * e)
        sig_rec[0] = sigma0
        elas_rec[0] = 0.5 * acc
        diss_rec[0] = 0.0
        if keep:
            for i in range(n):
                S_rec[0, i] = S[i]
        k = 1
        for j in range(nsteps):
            d_ell = (ell[j + 1] - ell[j]) / dt
            for i in range(n):
                so[i] = A[i] * (ell[j] + S[i])
            st = _find_stress(w, so, A, mu, nu, dt, d_ell, sigma, tol, max_iter,
                              &sigma, &it, &res)
            iters[j] = it
            resid[j] = res
            if st != STATUS_OK:
                status = st
                nsteps = j + 1
                break
            acc = 0.0
            for i in range(n):
                r = _rate(sigma, so[i], A[i], mu[i], nu[i], dt)
                S[i] += dt * (r - d_ell)
                acc += w[i] * (nu[i] * r * r + mu[i] * fabs(r))
            diss += dt * acc
            if (j + 1) % stride == 0:
                acc = 0.0
                for i in range(n):
                    e = ell[j + 1] + S[i]
                    acc += w[i] * (A[i] * e * e)
                sig_rec[k] = sigma
                elas_rec[k] = 0.5 * acc
                diss_rec[k] = diss
                if keep:
                    for i in range(n):
                        S_rec[k, i] = S[i]
                k += 1
    return {
        "sigma_bar": sig_arr[:k],
        "elastic_energy": elas_arr[:k],
        "dissipated_energy": diss_arr[:k],
        "S": S_arr,
        "sigma_last": sigma,
        "iterations": iters_arr[:nsteps],
        "residuals": resid_arr[:nsteps],
        "status": status,
    }
