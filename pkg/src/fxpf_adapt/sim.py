"""Synthetic channel data: speckle phantoms with cysts and a near-field phase screen.

The aberration is injected quasi-physically: each receive element sees its own
delay error, and on transmit each scatterer is delayed by the error of the
element laterally nearest to it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d

from . import kernels
from .core import ChannelFrame, TransducerGeometry, ValidationError


@dataclass(frozen=True)
class Inclusion:
    x: float
    z: float
    radius: float
    echogenicity_db: float = -math.inf

    @property
    def anechoic(self) -> bool:
        return self.echogenicity_db == -math.inf


def default_inclusions():
    """Shallow anechoic, mid-depth -6 / -3 dB and deep anechoic cysts."""
    return (
        Inclusion(0.0, 9e-3, 2.5e-3),
        Inclusion(-9e-3, 24e-3, 3e-3, -6.0),
        Inclusion(9e-3, 24e-3, 3e-3, -3.0),
        Inclusion(0.0, 38e-3, 3e-3),
    )


@dataclass(frozen=True)
class PhantomSpec:
    x_range: tuple = (-19.2e-3, 19.2e-3)
    z_range: tuple = (2e-3, 46e-3)
    density_per_mm2: float = 20.0
    inclusions: tuple = field(default_factory=default_inclusions)
    seed: int = 0

    def __post_init__(self):
        if not self.density_per_mm2 >= 0:
            raise ValidationError("density must be >= 0")
        (x0, x1), (z0, z1) = self.x_range, self.z_range
        if not (x1 > x0 and z1 > z0 and z0 >= 0):
            raise ValidationError("invalid phantom extent")
        for inc in self.inclusions:
            if not (x0 <= inc.x - inc.radius and inc.x + inc.radius <= x1
                    and z0 <= inc.z - inc.radius and inc.z + inc.radius <= z1):
                raise ValidationError(f"inclusion {inc} lies outside the phantom")

    @property
    def area_mm2(self) -> float:
        (x0, x1), (z0, z1) = self.x_range, self.z_range
        return (x1 - x0) * (z1 - z0) * 1e6


@dataclass(frozen=True, eq=False)
class Scatterers:
    x: np.ndarray
    z: np.ndarray
    amplitude: np.ndarray

    def __len__(self):
        return self.x.size

    def __add__(self, other):
        return Scatterers(
            np.concatenate([self.x, other.x]),
            np.concatenate([self.z, other.z]),
            np.concatenate([self.amplitude, other.amplitude]),
        )


@dataclass(frozen=True, eq=False)
class AberrationProfile:
    delays: np.ndarray
    rms: float
    correlation_length: float
    seed: int

    @classmethod
    def none(cls, num_elements):
        return cls(np.zeros(num_elements), 0.0, 0.0, 0)


@dataclass(frozen=True)
class PulseModel:
    center_frequency: float = 5.208e6
    fractional_bandwidth: float = 0.6

    def __post_init__(self):
        if not 0 < self.fractional_bandwidth < 2:
            raise ValidationError("fractional bandwidth must be in (0, 2)")

    @property
    def sigma_t(self) -> float:
        """Gaussian envelope std. dev. giving the requested -6 dB bandwidth."""
        sigma_f = self.fractional_bandwidth * self.center_frequency / (2 * math.sqrt(2 * math.log(2)))
        return 1 / (2 * math.pi * sigma_f)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        return np.exp(-0.5 * (t / self.sigma_t) ** 2) * np.cos(2 * np.pi * self.center_frequency * t)


def generate_phantom(spec: PhantomSpec) -> Scatterers:
    """Uniformly placed scatterers with Poisson count and N(0, 1) amplitudes."""
    rng = np.random.default_rng(spec.seed)
    count = rng.poisson(spec.density_per_mm2 * spec.area_mm2)
    x = rng.uniform(*spec.x_range, size=count)
    z = rng.uniform(*spec.z_range, size=count)
    amp = rng.standard_normal(count)
    keep = np.ones(count, dtype=bool)
    for inc in spec.inclusions:
        inside = (x - inc.x) ** 2 + (z - inc.z) ** 2 <= inc.radius**2
        if inc.anechoic:
            keep &= ~inside
        else:
            amp[inside] *= 10 ** (inc.echogenicity_db / 20)
    return Scatterers(x[keep], z[keep], amp[keep])


def generate_aberration(num_elements: int, rms: float, correlation_length: float,
                        pitch: float, seed: int) -> AberrationProfile:
    """Smoothed white Gaussian delays, mean removed and rescaled to exactly ``rms`` seconds."""
    if rms < 0 or correlation_length < 0:
        raise ValidationError("rms and correlation length must be >= 0")
    if rms == 0:
        return AberrationProfile(np.zeros(num_elements), 0.0, correlation_length, seed)
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(num_elements)
    sigma = correlation_length / pitch
    profile = gaussian_filter1d(white, sigma, mode="reflect") if sigma > 0 else white
    profile = profile - profile.mean()
    profile *= rms / np.sqrt(np.mean(profile**2))
    return AberrationProfile(profile, rms, correlation_length, seed)


def transmit_delays(sc_x, geometry: TransducerGeometry, aberration: AberrationProfile):
    """Phase-screen delay of the element laterally nearest each scatterer."""
    ex = geometry.element_x
    idx = np.clip(np.rint((np.asarray(sc_x) - ex[0]) / geometry.pitch), 0, geometry.num_elements - 1)
    return aberration.delays[idx.astype(np.int64)]


def simulate_rx(scatterers: Scatterers, geometry: TransducerGeometry, pulse: PulseModel,
                aberration: AberrationProfile | None, duration: float,
                start_time: float = 0.0, element_width: float = 0.27e-3) -> ChannelFrame:
    """Point-scatterer channel data for one 0-degree plane-wave transmit.

    ``element_width`` sets the receive directivity of each element (evaluated at
    the centre frequency); pass 0 for omnidirectional elements.
    """
    if aberration is None:
        aberration = AberrationProfile.none(geometry.num_elements)
    if aberration.delays.size != geometry.num_elements:
        raise ValidationError("aberration profile length must equal num_elements")
    fs, c = geometry.sampling_frequency, geometry.sound_speed
    T = int(math.ceil(duration * fs))
    out = np.zeros((geometry.num_elements, T))
    if len(scatterers) == 0:
        return ChannelFrame(geometry, out, start_time)
    sc_x = np.ascontiguousarray(scatterers.x, dtype=np.float64)
    sc_z = np.ascontiguousarray(scatterers.z, dtype=np.float64)
    if 2 * sc_z.max() / c > start_time + duration:
        raise ValidationError("duration does not cover the deepest scatterer's round trip")
    half_width = int(math.ceil(4 * pulse.sigma_t * fs))
    kernels.accumulate_scatterers(
        out,
        sc_x,
        sc_z,
        np.ascontiguousarray(scatterers.amplitude, dtype=np.float64),
        np.ascontiguousarray(transmit_delays(sc_x, geometry, aberration), dtype=np.float64),
        np.ascontiguousarray(geometry.element_x, dtype=np.float64),
        np.ascontiguousarray(aberration.delays, dtype=np.float64),
        c, fs, start_time, pulse.center_frequency, pulse.sigma_t,
        geometry.wavelength, half_width, element_width / geometry.wavelength,
    )
    return ChannelFrame(geometry, out, start_time)
