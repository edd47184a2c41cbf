"""Shared types, axial-kernel spectra and the binary channel-data container.

Arrays are element-major: ``samples[n, k]`` is element ``n`` at time sample ``k``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class FormatError(ValidationError):
    """Raised when a binary file does not match the expected layout."""


@dataclass(frozen=True)
class TransducerGeometry:
    """Linear array description.

    Defaults are the L11-5v settings: 128 elements, 0.27 mm width + 0.03 mm
    kerf, 5.208 MHz centre frequency sampled at 20.832 MHz, c = 1540 m/s.
    """

    num_elements: int = 128
    pitch: float = 0.30e-3
    center_frequency: float = 5.208e6
    sampling_frequency: float = 20.832e6
    sound_speed: float = 1540.0

    def __post_init__(self):
        if int(self.num_elements) != self.num_elements or self.num_elements < 2:
            raise ValidationError(f"num_elements must be an integer >= 2, got {self.num_elements}")
        if not self.pitch > 0:
            raise ValidationError("pitch must be positive")
        if not 0 < self.center_frequency < self.sampling_frequency / 2:
            raise ValidationError("center_frequency must lie in (0, fs/2)")
        if not self.sound_speed > 0:
            raise ValidationError("sound_speed must be positive")

    @property
    def aperture_length(self) -> float:
        return self.num_elements * self.pitch

    @property
    def wavelength(self) -> float:
        return self.sound_speed / self.center_frequency

    @property
    def element_x(self) -> np.ndarray:
        """Lateral element positions, centred on the array midpoint."""
        n = np.arange(1, self.num_elements + 1)
        return (n - (self.num_elements + 1) / 2) * self.pitch


@dataclass(frozen=True, eq=False)
class ChannelFrame:
    geometry: TransducerGeometry
    samples: np.ndarray
    start_time: float = 0.0

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 2 or samples.shape[0] != self.geometry.num_elements:
            raise ValidationError(
                f"samples must be [{self.geometry.num_elements} x T], got shape {samples.shape}"
            )
        if not np.all(np.isfinite(samples)):
            raise ValidationError("channel samples must be finite")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def num_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        fs = self.geometry.sampling_frequency
        return self.start_time + np.arange(self.num_samples) / fs

    def with_samples(self, samples: np.ndarray) -> "ChannelFrame":
        return ChannelFrame(self.geometry, samples, self.start_time)


@dataclass(frozen=True, eq=False)
class SpectralKernel:
    """Non-negative frequency bins of one axial kernel (``K // 2 + 1`` bins)."""

    bins: np.ndarray
    bin_frequencies: np.ndarray
    kernel_start_sample: int
    kernel_length: int
    one_sided: bool = field(default=True)

    def __post_init__(self):
        expected = self.kernel_length // 2 + 1 if self.one_sided else self.kernel_length
        if self.bins.ndim != 2 or self.bins.shape[1] != expected:
            raise ValidationError(
                f"expected {expected} bins for kernel length {self.kernel_length}, "
                f"got {self.bins.shape}"
            )


def forward_spectrum(frame_slice, kernel_start: int = 0, sampling_frequency: float = 1.0) -> SpectralKernel:
    """DFT of each element's kernel samples along time, non-negative bins only."""
    x = np.asarray(frame_slice, dtype=np.float64)
    if x.ndim == 1:
        x = x[np.newaxis, :]
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValidationError("kernel must be a 2-D array with at least 2 time samples")
    if not np.all(np.isfinite(x)):
        raise ValidationError("kernel samples must be finite")
    K = x.shape[1]
    bins = np.fft.rfft(x, axis=1)
    freqs = np.arange(K // 2 + 1) * sampling_frequency / K
    return SpectralKernel(bins, freqs, int(kernel_start), K)


def inverse_spectrum(spec: SpectralKernel) -> np.ndarray:
    """Real time-domain kernel from its one-sided spectrum.

    ``irfft`` discards the imaginary parts of the DC and Nyquist bins, which is
    exactly the conjugate-symmetric completion of the spectrum.
    """
    if not spec.one_sided:
        return np.real(np.fft.ifft(spec.bins, axis=1))
    return np.fft.irfft(spec.bins, n=spec.kernel_length, axis=1)


# -- binary containers -------------------------------------------------------

_HEADER = struct.Struct("<4sIIIddddd")
FORMAT_VERSION = 1
CHANNEL_MAGIC = b"FXPF"
ENVELOPE_MAGIC = b"FENV"


def _pack(magic, geometry, data, start_time):
    data = np.ascontiguousarray(data, dtype="<f4")
    header = _HEADER.pack(
        magic,
        FORMAT_VERSION,
        data.shape[0],
        data.shape[1],
        geometry.sampling_frequency,
        geometry.center_frequency,
        geometry.sound_speed,
        geometry.pitch,
        start_time,
    )
    return header + data.tobytes()


def _unpack(raw: bytes, magic: bytes):
    if len(raw) < _HEADER.size:
        raise FormatError("file too short for header")
    got, version, rows, cols, fs, fc, c, pitch, t0 = _HEADER.unpack_from(raw)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    n_bytes = rows * cols * 4
    if len(raw) != _HEADER.size + n_bytes:
        raise FormatError("payload size does not match header")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    return (fs, fc, c, pitch, t0), data


def write_channel_file(path, frame: ChannelFrame) -> None:
    Path(path).write_bytes(_pack(CHANNEL_MAGIC, frame.geometry, frame.samples, frame.start_time))


def read_channel_file(path) -> ChannelFrame:
    (fs, fc, c, pitch, t0), data = _unpack(Path(path).read_bytes(), CHANNEL_MAGIC)
    geometry = TransducerGeometry(data.shape[0], pitch, fc, fs, c)
    return ChannelFrame(geometry, data.astype(np.float64), t0)


def write_envelope_file(path, magnitude: np.ndarray, geometry: TransducerGeometry, start_time: float) -> None:
    """Store a [depth x lateral] envelope image in the FENV container.

    The payload is line-major (one row per beamline), mirroring the element-major
    channel layout, so the header's row count is the number of beamlines.
    """
    Path(path).write_bytes(_pack(ENVELOPE_MAGIC, geometry, np.asarray(magnitude).T, start_time))


def read_envelope_file(path):
    """Return ``(magnitude [depth x lateral], (fs, fc, c, pitch, start_time))``."""
    header, data = _unpack(Path(path).read_bytes(), ENVELOPE_MAGIC)
    return data.T.astype(np.float64), header
