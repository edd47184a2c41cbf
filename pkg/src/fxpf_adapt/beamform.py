"""0-degree plane-wave delay-and-sum with f-number limited, apodized receive aperture."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import hilbert

from .core import ChannelFrame, TransducerGeometry, ValidationError
from .fxpf import FxpfConfig, fxpf_filter_stack

log = logging.getLogger(__name__)

WINDOWS = ("rectangular", "raised-cosine")


@dataclass(frozen=True, eq=False)
class BeamGrid:
    lateral: np.ndarray
    z_start: float
    dz: float
    num_depths: int

    def __post_init__(self):
        lateral = np.asarray(self.lateral, dtype=np.float64).ravel()
        if lateral.size == 0 or np.any(np.diff(lateral) <= 0):
            raise ValidationError("lateral positions must be strictly increasing")
        if not self.dz > 0 or self.num_depths < 1 or not self.z_start >= 0:
            raise ValidationError("invalid axial sampling")
        object.__setattr__(self, "lateral", lateral)

    @classmethod
    def default(cls, geometry: TransducerGeometry, z_start: float, z_stop: float) -> "BeamGrid":
        """One line per element; axial spacing c / (2 fs) so depth samples map to time samples."""
        dz = geometry.sound_speed / (2 * geometry.sampling_frequency)
        k0 = int(np.floor(z_start / dz))
        k1 = int(np.ceil(z_stop / dz))
        return cls(geometry.element_x.copy(), k0 * dz, dz, k1 - k0 + 1)

    @property
    def depths(self) -> np.ndarray:
        return self.z_start + self.dz * np.arange(self.num_depths)

    def pixel_centers(self):
        """Meshgrid ``(x, z)`` of shape [depth x lateral]."""
        return np.meshgrid(self.lateral, self.depths)


@dataclass(frozen=True, eq=False)
class EnvelopeImage:
    magnitude: np.ndarray
    grid: BeamGrid

    def __post_init__(self):
        mag = np.asarray(self.magnitude, dtype=np.float64)
        if mag.shape != (self.grid.num_depths, self.grid.lateral.size):
            raise ValidationError("envelope shape does not match grid")
        if np.any(mag < 0) or not np.all(np.isfinite(mag)):
            raise ValidationError("envelope values must be finite and >= 0")
        object.__setattr__(self, "magnitude", mag)


def receive_delay(element_x, pixel_x, pixel_z, c):
    """Round-trip time for a 0-degree plane-wave transmit: ``(z + |pixel - element|) / c``."""
    pixel_z = np.asarray(pixel_z, dtype=np.float64)
    if np.any(pixel_z <= 0):
        raise ValidationError("pixel depth must be positive")
    return (pixel_z + np.hypot(np.asarray(pixel_x) - element_x, pixel_z)) / c


def _interp_rows(samples, sample_pos):
    """Linear interpolation of each row of ``samples`` [N, T] at ``sample_pos`` [..., N, K].

    Out-of-range reads give 0; returns ``(values, out_of_range_count)``.
    """
    N, T = samples.shape
    i0 = np.floor(sample_pos).astype(np.int64)
    frac = sample_pos - i0
    inside = (i0 >= 0) & (i0 + 1 < T)
    exact_last = i0 == T - 1
    frac = np.where(exact_last & (frac == 0), 0.0, frac)
    ok = inside | (exact_last & (frac == 0))
    i0c = np.clip(i0, 0, T - 1)
    i1c = np.clip(i0 + 1, 0, T - 1)
    rows = np.arange(N).reshape((1,) * (sample_pos.ndim - 2) + (N, 1))
    v = samples[rows, i0c] * (1 - frac) + samples[rows, i1c] * frac
    return np.where(ok, v, 0.0), int(np.count_nonzero(~ok))


def align_stack(raw: ChannelFrame, beamlines_x, grid: BeamGrid) -> np.ndarray:
    """Delay-aligned channels for several beamlines, ``[L, N, num_depths]``."""
    g = raw.geometry
    z = grid.depths
    if np.any(z <= 0):
        raise ValidationError("grid depths must be positive")
    x = np.asarray(beamlines_x, dtype=np.float64).reshape(-1, 1, 1)
    t = (z[None, None, :] + np.hypot(x - g.element_x[None, :, None], z[None, None, :])) / g.sound_speed
    pos = (t - raw.start_time) * g.sampling_frequency
    out, missing = _interp_rows(raw.samples, pos)
    if missing:
        log.debug("align: %d out-of-range reads set to zero", missing)
    return out


def align_channels(raw: ChannelFrame, beamline_x: float, grid: BeamGrid) -> ChannelFrame:
    """One beamline's aligned frame; its time axis is ``2 z / c`` on the grid depths."""
    aligned = align_stack(raw, [beamline_x], grid)[0]
    g = raw.geometry
    return ChannelFrame(g, aligned, start_time=2 * grid.z_start / g.sound_speed)


def apodization(beamline_x, z, geometry: TransducerGeometry, f_number: float,
                window: str = "raised-cosine") -> np.ndarray:
    """Receive weights [..., N] for beamline(s) at depth(s) ``z``.

    Elements with ``|x_n - x_b| <= z / (2 f_number)`` are active; the element(s)
    nearest the beamline are always active. The raised-cosine taper is stretched
    by one pitch so that edge elements keep a positive weight.
    """
    if window not in WINDOWS:
        raise ValidationError(f"unknown window {window!r}")
    z = np.asarray(z, dtype=np.float64)
    if np.any(z <= 0):
        raise ValidationError("depth must be positive")
    bx = np.asarray(beamline_x, dtype=np.float64)
    dx = np.abs(geometry.element_x - bx[..., None])
    nearest = dx.min(axis=-1, keepdims=True)
    half = np.maximum(z[..., None] / (2 * f_number), nearest)
    active = dx <= half
    if window == "rectangular":
        return active.astype(np.float64)
    taper = 0.5 * (1 + np.cos(np.pi * dx / (half + geometry.pitch)))
    return np.where(active, taper, 0.0)


def apodization_stack(beamlines_x, grid: BeamGrid, geometry, f_number, window):
    """Weights ``[L, N, num_depths]`` matching :func:`align_stack`."""
    x = np.asarray(beamlines_x, dtype=np.float64)[:, None]
    w = apodization(x, grid.depths[None, :], geometry, f_number, window)  # [L, D, N]
    return np.ascontiguousarray(np.moveaxis(w, -1, 1))


def das_sum(aligned, weights) -> np.ndarray:
    """Weighted channel sum ``sum_n w[n, k] x[n, k]`` in ascending element order.

    Accepts ``[N, K]`` or stacked ``[L, N, K]`` inputs.
    """
    x = np.asarray(aligned, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.shape != w.shape:
        raise ValidationError("aligned data and weights must have the same shape")
    acc = np.zeros(x.shape[:-2] + x.shape[-1:])
    for n in range(x.shape[-2]):
        acc += w[..., n, :] * x[..., n, :]
    return acc


def envelope(line) -> np.ndarray:
    """Modulus of the analytic signal along the last axis."""
    return np.abs(hilbert(np.asarray(line, dtype=np.float64), axis=-1))


def log_compress(env, dynamic_range_db: float = 60.0) -> np.ndarray:
    """8-bit display image: ``20 log10(env / max)`` clipped to ``[-dr, 0]`` mapped onto [0, 255]."""
    mag = env.magnitude if isinstance(env, EnvelopeImage) else np.asarray(env, dtype=np.float64)
    peak = mag.max() if mag.size else 0.0
    if peak <= 0:
        return np.zeros(mag.shape, dtype=np.uint8)
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(mag / peak)
    db = np.clip(db, -dynamic_range_db, 0.0)
    return np.rint(255 * (1 + db / dynamic_range_db)).astype(np.uint8)


def write_pgm(path, image) -> None:
    img = np.asarray(image, dtype=np.uint8)
    rows, cols = img.shape
    Path(path).write_bytes(f"P5\n{cols} {rows}\n255\n".encode("ascii") + img.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValidationError("not a binary PGM file")
    cols, rows = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4], dtype=np.uint8, count=rows * cols).reshape(rows, cols)


def beamform(raw: ChannelFrame, grid: BeamGrid, f_number: float = 1.75,
             window: str = "raised-cosine", fxpf: FxpfConfig | None = None,
             threads: int = 1, chunk: int = 16):
    """Align, optionally FXPF-filter, apodize and sum every beamline.

    Returns the RF image ``[num_depths, L]``.
    """
    g = raw.geometry
    lines = grid.lateral
    rf = np.empty((grid.num_depths, lines.size))
    t_start = 2 * grid.z_start / g.sound_speed
    for lo in range(0, lines.size, chunk):
        xs = lines[lo : lo + chunk]
        aligned = align_stack(raw, xs, grid)
        weights = apodization_stack(xs, grid, g, f_number, window)
        if fxpf is not None:
            aligned = fxpf_filter_stack(
                aligned, weights, t_start, g.sampling_frequency, g.sound_speed, fxpf, threads=threads
            )
        rf[:, lo : lo + xs.size] = das_sum(aligned, weights).T
    return rf


def envelope_image(rf_image, grid: BeamGrid) -> EnvelopeImage:
    """Envelope-detect each beamline (column) of an RF image."""
    return EnvelopeImage(envelope(np.asarray(rf_image).T).T, grid)
