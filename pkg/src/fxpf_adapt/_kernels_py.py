"""Pure numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation and are used whenever the
compiled extension is unavailable (or ``FXPF_BACKEND=python`` is set).
"""

import numpy as np


def _forward_predict(s, p, mu):
    """One-directional AR fit + prediction for every row of ``s`` [B, N].

    The normal matrix of the zero-padded convolution system is Hermitian
    Toeplitz, built from lags ``c[l] = sum_m conj(s[m]) s[m + l]``; the
    right-hand side is ``c[1..p]``. Solved by an unpivoted Cholesky.
    """
    B, N = s.shape
    c = np.empty((B, p + 1), dtype=np.complex128)
    for lag in range(p + 1):
        c[:, lag] = np.sum(np.conj(s[:, : N - lag]) * s[:, lag:], axis=1)

    G = np.empty((B, p, p), dtype=np.complex128)
    for i in range(p):
        for j in range(p):
            G[:, i, j] = c[:, i - j] if i >= j else np.conj(c[:, j - i])
        G[:, i, i] = G[:, i, i].real + mu
    rhs = c[:, 1 : p + 1].copy()

    # Cholesky G = L L^H, column by column
    L = np.zeros_like(G)
    singular = np.zeros(B, dtype=bool)
    scale = c[:, 0].real + mu
    for j in range(p):
        d = G[:, j, j].real.copy()
        for k in range(j):
            d -= (L[:, j, k] * np.conj(L[:, j, k])).real
        bad = ~(d > 1e-13 * scale)
        singular |= bad
        d = np.where(bad, 1.0, d)
        ljj = np.sqrt(d)
        L[:, j, j] = ljj
        for i in range(j + 1, p):
            acc = G[:, i, j].copy()
            for k in range(j):
                acc -= L[:, i, k] * np.conj(L[:, j, k])
            L[:, i, j] = acc / ljj

    y = np.empty((B, p), dtype=np.complex128)
    for i in range(p):
        acc = rhs[:, i].copy()
        for k in range(i):
            acc -= L[:, i, k] * y[:, k]
        y[:, i] = acc / L[:, i, i]
    a = np.empty((B, p), dtype=np.complex128)
    for i in range(p - 1, -1, -1):
        acc = y[:, i].copy()
        for k in range(i + 1, p):
            acc -= np.conj(L[:, k, i]) * a[:, k]
        a[:, i] = acc / L[:, i, i]
    a[singular] = 0.0

    # channel j (j >= 1) <- sum_c a[c] s[j - 1 - c]
    pred = np.zeros_like(s)
    for lag in range(p):
        pred[:, 1 + lag :] += a[:, lag : lag + 1] * s[:, : N - 1 - lag]
    pred[:, 0] = s[:, 0]
    return pred, a, singular


def ar_filter_rows(s, p, mu):
    """Forward-only filtering of each row; returns ``(filtered, coeffs, singular)``."""
    s = np.ascontiguousarray(s, dtype=np.complex128)
    return _forward_predict(s, int(p), float(mu))


def ar_filter_bidirectional(s, p, mu):
    """Average of forward and backward AR predictions for each row of ``s``.

    Channel 0 only has a backward estimate and channel N-1 only a forward one.
    Returns ``(filtered, singular)``.
    """
    s = np.ascontiguousarray(s, dtype=np.complex128)
    fwd, _, sing_f = _forward_predict(s, int(p), float(mu))
    bwd, _, sing_b = _forward_predict(np.ascontiguousarray(s[:, ::-1]), int(p), float(mu))
    bwd = bwd[:, ::-1]
    out = 0.5 * (fwd + bwd)
    out[:, 0] = bwd[:, 0]
    out[:, -1] = fwd[:, -1]
    return out, sing_f | sing_b


def accumulate_scatterers(out, sc_x, sc_z, sc_amp, tx_delay, elem_x, elem_delay,
                          c, fs, t0, fc, sigma_t, r_min, half_width, width_wl=0.0):
    """Add Gaussian-modulated pulses of every scatterer into ``out`` [M, T] in place.

    Scatterers are accumulated in index order so the result is deterministic.
    ``width_wl`` > 0 applies the element directivity
    ``sinc(width_wl * sin(theta)) * cos(theta)`` of a soft-baffled strip element.
    """
    M, T = out.shape
    offsets = np.arange(-half_width, half_width + 1)
    rows = np.arange(M)[:, None]
    for s in range(sc_x.shape[0]):
        amp = sc_amp[s]
        if amp == 0.0:
            continue
        dx = sc_x[s] - elem_x
        r = np.sqrt(dx * dx + sc_z[s] * sc_z[s])
        arrival = sc_z[s] / c + tx_delay[s] + r / c + elem_delay
        gain = amp / np.sqrt(np.maximum(r, r_min))
        if width_wl > 0:
            gain = gain * np.sinc(width_wl * dx / r) * (sc_z[s] / r)
        centre = np.rint((arrival - t0) * fs).astype(np.int64)
        idx = centre[:, None] + offsets[None, :]
        tau = (t0 + idx / fs) - arrival[:, None]
        pulse = gain[:, None] * np.exp(-0.5 * (tau / sigma_t) ** 2) * np.cos(2 * np.pi * fc * tau)
        valid = (idx >= 0) & (idx < T)
        # column ordering within a row is fixed, rows never collide
        np.add.at(out, (np.broadcast_to(rows, idx.shape)[valid], idx[valid]), pulse[valid])
    return out
