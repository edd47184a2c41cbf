# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``_kernels_py`` for the reference numpy versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp, sin, cos, M_PI, rint, fmax

cnp.import_array()

DEF PMAX = 32


cdef inline double complex _conj(double complex z) noexcept nogil:
    return z.real - 1j * z.imag


cdef bint _predict_row(const double complex[::1] s, double complex[::1] pred,
                       double complex[::1] a_out, int p, double mu,
                       bint reverse) noexcept nogil:
    """Fit + predict one row; returns True when the normal matrix is singular.

    With ``reverse`` the row is read back to front and the prediction written
    back to front, which is the backward AR model.
    """
    cdef int N = s.shape[0]
    cdef double complex c[PMAX + 1]
    cdef double complex L[PMAX][PMAX]
    cdef double complex y[PMAX]
    cdef double complex a[PMAX]
    cdef double complex acc, g, xm, xl
    cdef double d, scale, ljj
    cdef int lag, m, i, j, k, n
    cdef bint singular = False

    for lag in range(p + 1):
        acc = 0
        for m in range(N - lag):
            if reverse:
                xm = s[N - 1 - m]
                xl = s[N - 1 - m - lag]
            else:
                xm = s[m]
                xl = s[m + lag]
            acc = acc + _conj(xm) * xl
        c[lag] = acc
    scale = c[0].real + mu

    for j in range(p):
        d = c[0].real + mu
        for k in range(j):
            d -= (L[j][k] * _conj(L[j][k])).real
        if not (d > 1e-13 * scale):
            singular = True
            d = 1.0
        ljj = sqrt(d)
        L[j][j] = ljj
        for i in range(j + 1, p):
            g = c[i - j]
            for k in range(j):
                g = g - L[i][k] * _conj(L[j][k])
            L[i][j] = g / ljj

    for i in range(p):
        acc = c[i + 1]
        for k in range(i):
            acc = acc - L[i][k] * y[k]
        y[i] = acc / L[i][i]
    for i in range(p - 1, -1, -1):
        acc = y[i]
        for k in range(i + 1, p):
            acc = acc - _conj(L[k][i]) * a[k]
        a[i] = acc / L[i][i]
    if singular:
        for i in range(p):
            a[i] = 0
    for i in range(p):
        a_out[i] = a[i]

    for n in range(N):
        if n == 0:
            acc = s[N - 1] if reverse else s[0]
        else:
            acc = 0
            for lag in range(p):
                m = n - 1 - lag
                if m < 0:
                    break
                acc = acc + a[lag] * (s[N - 1 - m] if reverse else s[m])
        if reverse:
            pred[N - 1 - n] = acc
        else:
            pred[n] = acc
    return singular


def ar_filter_rows(s, int p, double mu):
    """Forward-only filtering of each row; returns ``(filtered, coeffs, singular)``."""
    if p < 1 or p > PMAX:
        raise ValueError(f"order must be in [1, {PMAX}]")
    cdef double complex[:, ::1] sv = np.ascontiguousarray(s, dtype=np.complex128)
    cdef Py_ssize_t B = sv.shape[0], N = sv.shape[1], b
    out = np.empty((B, N), dtype=np.complex128)
    coeffs = np.empty((B, p), dtype=np.complex128)
    flags = np.zeros(B, dtype=bool)
    cdef double complex[:, ::1] ov = out
    cdef double complex[:, ::1] cv = coeffs
    cdef cnp.npy_bool[::1] fv = flags
    with nogil:
        for b in range(B):
            fv[b] = _predict_row(sv[b], ov[b], cv[b], p, mu, False)
    return out, coeffs, flags


def ar_filter_bidirectional(s, int p, double mu):
    """Average of forward and backward predictions; returns ``(filtered, singular)``."""
    if p < 1 or p > PMAX:
        raise ValueError(f"order must be in [1, {PMAX}]")
    cdef double complex[:, ::1] sv = np.ascontiguousarray(s, dtype=np.complex128)
    cdef Py_ssize_t B = sv.shape[0], N = sv.shape[1], b, n
    out = np.empty((B, N), dtype=np.complex128)
    flags = np.zeros(B, dtype=bool)
    cdef double complex[:, ::1] ov = out
    cdef cnp.npy_bool[::1] fv = flags
    cdef double complex[::1] fwd = np.empty(N, dtype=np.complex128)
    cdef double complex[::1] bwd = np.empty(N, dtype=np.complex128)
    cdef double complex[::1] a = np.empty(p, dtype=np.complex128)
    cdef bint sf, sb
    with nogil:
        for b in range(B):
            sf = _predict_row(sv[b], fwd, a, p, mu, False)
            sb = _predict_row(sv[b], bwd, a, p, mu, True)
            fv[b] = sf or sb
            for n in range(N):
                ov[b, n] = 0.5 * (fwd[n] + bwd[n])
            ov[b, 0] = bwd[0]
            ov[b, N - 1] = fwd[N - 1]
    return out, flags


def accumulate_scatterers(double[:, ::1] out, const double[::1] sc_x, const double[::1] sc_z,
                          const double[::1] sc_amp, const double[::1] tx_delay,
                          const double[::1] elem_x, const double[::1] elem_delay,
                          double c, double fs, double t0, double fc, double sigma_t,
                          double r_min, int half_width, double width_wl=0.0):
    """Add Gaussian-modulated pulses of every scatterer into ``out`` in place."""
    cdef Py_ssize_t M = out.shape[0], T = out.shape[1]
    cdef Py_ssize_t S = sc_x.shape[0], s, m, idx, centre
    cdef int o
    cdef double dx, r, arrival, gain, tau, u
    with nogil:
        for s in range(S):
            if sc_amp[s] == 0.0:
                continue
            for m in range(M):
                dx = sc_x[s] - elem_x[m]
                r = sqrt(dx * dx + sc_z[s] * sc_z[s])
                arrival = sc_z[s] / c + tx_delay[s] + r / c + elem_delay[m]
                gain = sc_amp[s] / sqrt(fmax(r, r_min))
                if width_wl > 0:
                    u = M_PI * width_wl * dx / r
                    if u != 0:
                        gain = gain * sin(u) / u
                    gain = gain * sc_z[s] / r
                centre = <Py_ssize_t> rint((arrival - t0) * fs)
                for o in range(-half_width, half_width + 1):
                    idx = centre + o
                    if idx < 0 or idx >= T:
                        continue
                    tau = (t0 + idx / fs) - arrival
                    out[m, idx] += gain * exp(-0.5 * (tau / sigma_t) * (tau / sigma_t)) * cos(2 * M_PI * fc * tau)
    return np.asarray(out)
