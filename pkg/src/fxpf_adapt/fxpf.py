"""Frequency-space prediction filtering with a depth-adaptive AR order.

For every temporal frequency bin of a short axial kernel, the channel spectra
``s_1 .. s_N`` are modelled as an AR process across elements,
``s_{n+1} = a_1 s_n + ... + a_p s_{n+1-p}``. The coefficients come from the
ridge-regularised least-squares fit of the zero-padded convolution system and
the filtered channels are the model predictions.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import ChannelFrame, ValidationError


class SingularSystemError(ArithmeticError):
    """The regularised normal matrix could not be factored (only possible with mu = 0)."""


@dataclass(frozen=True, eq=False)
class PredictionFilter:
    coefficients: np.ndarray
    frequency_bin: int = -1

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=np.complex128).ravel()
        if not np.all(np.isfinite(coeffs)):
            raise ValidationError("filter coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self) -> int:
        return self.coefficients.size


@dataclass(frozen=True, eq=False)
class ConvolutionSystem:
    """``d = M a`` with ``M`` of shape ``(N + p - 1, p)``."""

    matrix: np.ndarray
    rhs: np.ndarray

    @property
    def order(self) -> int:
        return self.matrix.shape[1]

    @property
    def num_channels(self) -> int:
        return self.matrix.shape[0] - self.matrix.shape[1] + 1


@dataclass(frozen=True)
class AdaptiveOrderPolicy:
    """Depth -> AR order rule.

    ``mode="adaptive"`` evaluates ``min(p_max, ceil(p_max * (z / (f_number * L)) ** beta))``;
    ``mode="fixed"`` always returns ``p_max``.
    """

    p_max: int = 4
    beta: float = 1 / 3
    f_number: float = 1.75
    aperture_length: float = 128 * 0.30e-3
    mode: str = "adaptive"

    def __post_init__(self):
        if int(self.p_max) != self.p_max or self.p_max < 1:
            raise ValidationError("p_max must be an integer >= 1")
        if not self.beta > 0:
            raise ValidationError("beta must be positive")
        if not self.f_number > 0:
            raise ValidationError("f_number must be positive")
        if not self.aperture_length > 0:
            raise ValidationError("aperture_length must be positive")
        if self.mode not in ("fixed", "adaptive"):
            raise ValidationError(f"mode must be 'fixed' or 'adaptive', got {self.mode!r}")

    @classmethod
    def fixed(cls, order: int, **kwargs) -> "AdaptiveOrderPolicy":
        return cls(p_max=order, mode="fixed", **kwargs)

    @property
    def saturation_depth(self) -> float:
        return self.f_number * self.aperture_length


@dataclass(frozen=True)
class FxpfConfig:
    mu: float = 0.01
    kernel_length_samples: int = 8
    iterations: int = 2
    policy: AdaptiveOrderPolicy = AdaptiveOrderPolicy()

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValidationError("mu must be >= 0")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ValidationError("iterations must be an integer >= 1")
        if self.kernel_length_samples < 2 * self.policy.p_max:
            raise ValidationError(
                f"kernel_length_samples ({self.kernel_length_samples}) must be >= 2 * p_max "
                f"({2 * self.policy.p_max})"
            )


def kernel_length_one_wavelength(center_frequency: float, sampling_frequency: float) -> int:
    """Samples spanning one wavelength of depth in pulse-echo time (2 fs / fc)."""
    return max(2, int(round(2 * sampling_frequency / center_frequency)))


def build_system(channel_spectra, order: int) -> ConvolutionSystem:
    s = np.asarray(channel_spectra, dtype=np.complex128).ravel()
    N, p = s.size, int(order)
    if p < 1:
        raise ValidationError("order must be >= 1")
    if p >= N:
        raise ValidationError(f"order {p} needs at least {p + 1} channels, got {N}")
    M = np.zeros((N + p - 1, p), dtype=np.complex128)
    for col in range(p):
        M[col : col + N, col] = s
    d = np.zeros(N + p - 1, dtype=np.complex128)
    d[: N - 1] = s[1:]
    return ConvolutionSystem(M, d)


def estimate_filter(system: ConvolutionSystem, mu: float) -> PredictionFilter:
    """Solve ``(M^H M + mu I) a = M^H d``.

    Raises SingularSystemError instead of returning a meaningless solution.
    """
    if mu < 0:
        raise ValidationError("mu must be >= 0")
    M, d = system.matrix, system.rhs
    MH = M.conj().T
    G = MH @ M + mu * np.eye(M.shape[1])
    rhs = MH @ d
    scale = np.linalg.norm(G, 2)
    if scale == 0 or np.linalg.cond(G) > 1e12:
        raise SingularSystemError("normal matrix is singular; use mu > 0")
    a = np.linalg.solve(G, rhs)
    return PredictionFilter(a)


def apply_filter(system: ConvolutionSystem, prediction_filter: PredictionFilter) -> np.ndarray:
    """Predicted channels: ``out[j] = (M a)[j - 1]`` for j >= 1, channel 0 passes through."""
    if prediction_filter.order != system.order:
        raise ValidationError(
            f"filter order {prediction_filter.order} does not match system order {system.order}"
        )
    d_hat = system.matrix @ prediction_filter.coefficients
    N = system.num_channels
    out = np.empty(N, dtype=np.complex128)
    out[0] = system.matrix[0, 0]
    out[1:] = d_hat[: N - 1]
    return out


def filter_bin(channel_spectra, order: int, mu: float) -> np.ndarray:
    """Forward-model filtering of one frequency bin across channels."""
    system = build_system(channel_spectra, order)
    return apply_filter(system, estimate_filter(system, mu))


def filter_bin_bidirectional(channel_spectra, order: int, mu: float) -> np.ndarray:
    """Forward/backward averaged filtering of one bin, as used on whole frames."""
    s = np.asarray(channel_spectra, dtype=np.complex128).ravel()
    if order < 1 or order >= s.size:
        raise ValidationError(f"order {order} needs at least {order + 1} channels, got {s.size}")
    out, singular = kernels.ar_filter_bidirectional(s[np.newaxis, :], order, mu)
    if singular[0]:
        raise SingularSystemError("normal matrix is singular; use mu > 0")
    return out[0]


def adaptive_order(z: float, policy: AdaptiveOrderPolicy) -> int:
    if not z > 0:
        raise ValidationError(f"depth must be positive, got {z}")
    if policy.mode == "fixed":
        return policy.p_max
    ratio = z / (policy.f_number * policy.aperture_length)
    raw = policy.p_max * ratio**policy.beta
    # guard against ceil(2.0000000000000004) for exact rational depths
    nearest = round(raw)
    if abs(raw - nearest) <= 1e-12 * max(1.0, abs(raw)):
        raw = nearest
    return int(min(policy.p_max, max(1, math.ceil(raw))))


# -- frame orchestration ------------------------------------------------------


def _kernel_layout(num_samples, kernel_length):
    starts = list(range(0, num_samples, kernel_length))
    return [(k0, min(kernel_length, num_samples - k0)) for k0 in starts]


def _filter_pass(cube, active, depth_orders, layout, mu, kernel_length):
    """One FXPF pass over ``cube`` [L, N, T] (modified in place).

    ``active`` [L, N, n_kernels] flags the elements used for each kernel and
    ``depth_orders`` gives the AR order per kernel. Work items are batched by
    (kernel length, active count, order); each row is computed independently,
    so the batch composition never changes a result.
    """
    L, N, T = cube.shape
    by_length = {}
    for ki, (k0, klen) in enumerate(layout):
        by_length.setdefault(klen, []).append(ki)

    for klen, kidx in by_length.items():
        n_bins = klen // 2 + 1
        filt_bins = np.arange(1, n_bins - 1 if klen % 2 == 0 else n_bins)
        if filt_bins.size == 0:
            continue
        starts = np.array([layout[k][0] for k in kidx])
        # [L, N, nk, klen]
        idx = starts[:, None] + np.arange(klen)[None, :]
        block = cube[:, :, idx]
        spec = np.fft.rfft(block, axis=-1)
        orders = depth_orders[kidx]
        act = active[:, :, kidx]  # [L, N, nk]
        counts = act.sum(axis=1)  # [L, nk]
        touched = np.zeros(counts.shape, dtype=bool)

        groups = {}
        for li in range(L):
            for j, ki in enumerate(kidx):
                p = int(orders[j])
                na = int(counts[li, j])
                if na <= p + 1 or (klen < kernel_length and klen < 2 * (p + 1)):
                    continue
                groups.setdefault((na, p), []).append((li, j))

        for (na, p), items in sorted(groups.items()):
            items = np.array(items)
            li, kj = items[:, 0], items[:, 1]
            # element indices of each item's active set, in element order
            elems = np.nonzero(act[li, :, kj])[1].reshape(len(items), na)
            vecs = spec[li[:, None], elems, kj[:, None], :][:, :, filt_bins]  # [G, na, nb]
            rows = np.moveaxis(vecs, 1, 2).reshape(-1, na)
            out, singular = kernels.ar_filter_bidirectional(rows, p, mu)
            if np.any(singular):
                raise SingularSystemError("normal matrix is singular; use mu > 0")
            out = np.moveaxis(out.reshape(len(items), filt_bins.size, na), 1, 2)
            sub = spec[li[:, None], elems, kj[:, None], :]
            sub[:, :, filt_bins] = out
            spec[li[:, None], elems, kj[:, None], :] = sub
            touched[li, kj] = True

        if not touched.any():
            continue
        filtered = np.fft.irfft(spec, n=klen, axis=-1)
        li, kj = np.nonzero(touched)
        # inactive elements keep their samples because their bins were untouched
        for l_, j in zip(li, kj):
            k0 = starts[j]
            rows_ = act[l_, :, j]
            cube[l_, rows_, k0 : k0 + klen] = filtered[l_, rows_, j, :]
    return cube


def kernel_center_depths(num_samples, kernel_length, start_time, sampling_frequency, sound_speed):
    layout = _kernel_layout(num_samples, kernel_length)
    centres = np.array([k0 + (klen - 1) / 2 for k0, klen in layout])
    return sound_speed * (start_time + centres / sampling_frequency) / 2


def fxpf_filter_stack(stack, weights, start_time, sampling_frequency, sound_speed,
                      config: FxpfConfig, threads: int = 1) -> np.ndarray:
    """Filter a stack of delay-aligned frames ``[L, N, T]`` sharing one time axis.

    ``weights`` is the matching ``[L, N, T]`` apodization; elements with a
    positive weight at a kernel's centre sample take part in that kernel's fit.
    """
    stack = np.array(stack, dtype=np.float64, copy=True)
    weights = np.asarray(weights)
    if stack.ndim != 3 or weights.shape != stack.shape:
        raise ValidationError("stack and weights must both be [lines, elements, samples]")
    L, N, T = stack.shape
    klen = config.kernel_length_samples
    layout = _kernel_layout(T, klen)
    depths = kernel_center_depths(T, klen, start_time, sampling_frequency, sound_speed)
    orders = np.array([adaptive_order(z, config.policy) if z > 0 else 1 for z in depths])
    centre_idx = np.array([k0 + (kl - 1) // 2 for k0, kl in layout])
    active = weights[:, :, centre_idx] > 0

    def run(lo, hi):
        part = stack[lo:hi]
        for _ in range(config.iterations):
            _filter_pass(part, active[lo:hi], orders, layout, config.mu, klen)
        return part

    if threads <= 1 or L <= 1:
        return run(0, L)
    bounds = np.linspace(0, L, min(threads, L) + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(run, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
        for f in futures:
            f.result()
    return stack


def fxpf_filter_frame(aligned: ChannelFrame, active_mask, config: FxpfConfig) -> ChannelFrame:
    """Filter one beamline's delay-aligned channel frame.

    ``active_mask`` holds per-sample element weights ``[N, T]`` (apodization).
    """
    weights = np.asarray(active_mask, dtype=np.float64)
    if weights.shape != aligned.samples.shape:
        raise ValidationError("active_mask must match the frame shape")
    g = aligned.geometry
    out = fxpf_filter_stack(
        aligned.samples[np.newaxis], weights[np.newaxis], aligned.start_time,
        g.sampling_frequency, g.sound_speed, config,
    )
    return aligned.with_samples(out[0])
