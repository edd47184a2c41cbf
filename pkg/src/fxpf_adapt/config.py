"""Pipeline configuration: one JSON document, every section pre-filled with defaults."""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .beamform import WINDOWS, BeamGrid
from .core import TransducerGeometry, ValidationError
from .fxpf import AdaptiveOrderPolicy, FxpfConfig, kernel_length_one_wavelength
from .metrics import RegionSpec
from .sim import Inclusion, PhantomSpec, PulseModel, default_inclusions


@dataclass(frozen=True)
class AberrationSpec:
    rms: float = 30e-9
    correlation_length: float = 5e-3


@dataclass(frozen=True)
class ImagingSpec:
    z_start: float = 3e-3
    z_stop: float = 45e-3
    f_number: float = 1.75
    window: str = "raised-cosine"
    dynamic_range_db: float = 60.0
    element_width: float = 0.27e-3
    duration: float | None = None

    def __post_init__(self):
        if self.window not in WINDOWS:
            raise ValidationError(f"window must be one of {WINDOWS}")
        if not 0 < self.z_start < self.z_stop:
            raise ValidationError("need 0 < z_start < z_stop")


@dataclass(frozen=True)
class FxpfSpec:
    """Settings shared by every FXPF variant; the variant picks fixed/adaptive."""

    mu: float = 0.01
    kernel_length_samples: int | None = None  # None: one wavelength
    iterations: int = 2
    p_max: int = 4
    beta: float = 1 / 3


@dataclass(frozen=True)
class MetricsSpec:
    """``regions`` empty means: one region per anechoic inclusion."""

    regions: tuple = ()
    target_factor: float = 0.8
    inner_factor: float = 1.1
    outer_factor: float = 1.5
    num_bins: int = 256


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one pipeline run depends on.

    The phantom and aberration seeds are both derived from ``seed``, so the
    ``seed`` stored inside ``phantom`` is ignored by the pipeline.
    """

    geometry: TransducerGeometry = TransducerGeometry()
    phantom: PhantomSpec = PhantomSpec()
    aberration: AberrationSpec = AberrationSpec()
    pulse: PulseModel = PulseModel()
    imaging: ImagingSpec = ImagingSpec()
    fxpf: FxpfSpec = FxpfSpec()
    metrics: MetricsSpec = MetricsSpec()
    output_dir: str = "fxpf_out"
    seed: int = 0

    # -- derived objects ---------------------------------------------------

    def seeds(self):
        """``(phantom_seed, aberration_seed)`` derived from the global seed."""
        ss = np.random.SeedSequence(self.seed).spawn(2)
        return tuple(int(s.generate_state(1)[0]) for s in ss)

    def kernel_length(self) -> int:
        if self.fxpf.kernel_length_samples is not None:
            return int(self.fxpf.kernel_length_samples)
        g = self.geometry
        return kernel_length_one_wavelength(g.center_frequency, g.sampling_frequency)

    def grid(self) -> BeamGrid:
        return BeamGrid.default(self.geometry, self.imaging.z_start, self.imaging.z_stop)

    def duration(self) -> float:
        if self.imaging.duration is not None:
            return self.imaging.duration
        g = self.geometry
        deepest = max(self.phantom.z_range[1], self.imaging.z_stop)
        far = math.hypot(deepest, g.aperture_length)
        return (deepest + far) / g.sound_speed + 1e-6

    def fxpf_config(self, variant: str) -> FxpfConfig | None:
        """``off`` -> None, ``fixed:<p>`` or ``adaptive`` -> FxpfConfig."""
        f, g = self.fxpf, self.geometry
        common = dict(f_number=self.imaging.f_number, aperture_length=g.aperture_length)
        if variant == "off":
            return None
        if variant == "adaptive":
            policy = AdaptiveOrderPolicy(p_max=f.p_max, beta=f.beta, mode="adaptive", **common)
        elif variant.startswith("fixed:"):
            try:
                p = int(variant.split(":", 1)[1])
            except ValueError:
                raise ValidationError(f"bad fixed order in {variant!r}") from None
            policy = AdaptiveOrderPolicy.fixed(p, beta=f.beta, **common)
        else:
            raise ValidationError(f"unknown FXPF variant {variant!r}; use off, fixed:<p> or adaptive")
        return FxpfConfig(mu=f.mu, kernel_length_samples=self.kernel_length(),
                          iterations=f.iterations, policy=policy)

    def regions(self):
        m = self.metrics
        if m.regions:
            return list(m.regions)
        cysts = sorted((inc for inc in self.phantom.inclusions if inc.anechoic), key=lambda i: i.z)
        return [
            RegionSpec.around_cyst(f"cyst_z{inc.z * 1e3:g}mm", inc.x, inc.z, inc.radius,
                                   m.target_factor, m.inner_factor, m.outer_factor)
            for inc in cysts
        ]

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        d = dataclasses.asdict(self)
        for inc in d["phantom"]["inclusions"]:
            if inc["echogenicity_db"] == -math.inf:
                inc["echogenicity_db"] = None
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data) -> "PipelineConfig":
        unknown = set(data) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValidationError(f"unknown config sections: {sorted(unknown)}")
        kw = {}
        sections = {
            "geometry": TransducerGeometry,
            "aberration": AberrationSpec,
            "pulse": PulseModel,
            "imaging": ImagingSpec,
            "fxpf": FxpfSpec,
        }
        for name, typ in sections.items():
            if name in data:
                kw[name] = _build(typ, data[name])
        if "phantom" in data:
            ph = dict(data["phantom"])
            if "inclusions" in ph:
                ph["inclusions"] = tuple(_inclusion(i) for i in ph["inclusions"])
            for key in ("x_range", "z_range"):
                if key in ph:
                    ph[key] = tuple(ph[key])
            kw["phantom"] = _build(PhantomSpec, ph)
        if "metrics" in data:
            ms = dict(data["metrics"])
            if "regions" in ms:
                ms["regions"] = tuple(_build(RegionSpec, r) for r in ms["regions"])
            kw["metrics"] = _build(MetricsSpec, ms)
        for key in ("output_dir", "seed"):
            if key in data:
                kw[key] = data[key]
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str) -> "PipelineConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_json(Path(path).read_text())

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)


def _build(typ, values):
    names = {f.name for f in dataclasses.fields(typ)}
    unknown = set(values) - names
    if unknown:
        raise ValidationError(f"unknown keys for {typ.__name__}: {sorted(unknown)}")
    try:
        return typ(**values)
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


def _inclusion(d):
    d = dict(d)
    if d.get("echogenicity_db", None) is None:
        d["echogenicity_db"] = -math.inf
    return _build(Inclusion, d)


__all__ = [
    "AberrationSpec",
    "FxpfSpec",
    "ImagingSpec",
    "MetricsSpec",
    "PipelineConfig",
    "default_inclusions",
]
