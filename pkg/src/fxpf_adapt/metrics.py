"""Contrast and gCNR over circular target / annular background regions."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ValidationError


@dataclass(frozen=True)
class RegionSpec:
    name: str
    x: float
    z: float
    target_radius: float
    inner_radius: float
    outer_radius: float

    def __post_init__(self):
        if self.inner_radius < self.target_radius:
            raise ValidationError("background inner radius must be >= target radius")
        if self.outer_radius < self.inner_radius:
            raise ValidationError("background outer radius must be >= inner radius")

    @classmethod
    def around_cyst(cls, name, x, z, cyst_radius, target=0.8, inner=1.1, outer=1.5):
        return cls(name, x, z, target * cyst_radius, inner * cyst_radius, outer * cyst_radius)


@dataclass
class RegionMetrics:
    name: str
    contrast_db: float
    gcnr: float
    target_pixels: int
    background_pixels: int
    flags: list = field(default_factory=list)


@dataclass
class MetricsReport:
    regions: list

    @property
    def mean_contrast_db(self) -> float:
        return float(np.mean([r.contrast_db for r in self.regions]))

    @property
    def mean_gcnr(self) -> float:
        return float(np.mean([r.gcnr for r in self.regions]))

    def to_dict(self):
        regions = []
        for r in self.regions:
            d = asdict(r)
            if not d["flags"]:
                d.pop("flags")
            d["contrast_db"] = _json_float(d["contrast_db"])
            regions.append(d)
        return {
            "regions": regions,
            "mean_contrast_db": _json_float(self.mean_contrast_db),
            "mean_gcnr": self.mean_gcnr,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=False)


def _json_float(v):
    # +inf contrast (empty target) is reported as the string "inf"
    return "inf" if v == math.inf else v


def region_mask(region: RegionSpec, x, z):
    """Target / background masks for pixel centres ``x``, ``z`` (same shape)."""
    r2 = (np.asarray(x) - region.x) ** 2 + (np.asarray(z) - region.z) ** 2
    target = r2 <= region.target_radius**2
    background = (r2 > region.inner_radius**2) & (r2 <= region.outer_radius**2)
    return target, background


def _check(values, what):
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValidationError(f"{what} region is empty")
    return v


def contrast(target_values, background_values):
    """``-20 log10(mean_t / mean_b)`` in dB; ``+inf`` when the target mean is 0."""
    t = _check(target_values, "target")
    b = _check(background_values, "background")
    mu_t, mu_b = t.mean(), b.mean()
    if mu_b <= 0:
        raise ValidationError("background mean must be positive")
    if mu_t == 0:
        return math.inf
    return float(-20 * np.log10(mu_t / mu_b))


def gcnr(target_values, background_values, num_bins: int = 256, return_flag: bool = False):
    """1 minus the overlap of the target and background histograms.

    Both histograms share ``num_bins`` edges over the pooled ``[min, max]``,
    which makes the estimate exactly invariant to positive affine rescaling.
    When every pixel has the same value the result is 0 and the flag is set.
    """
    if num_bins < 16:
        raise ValidationError("num_bins must be >= 16")
    t = _check(target_values, "target")
    b = _check(background_values, "background")
    pooled = np.concatenate([t, b])
    degenerate = pooled.min() == pooled.max()
    if degenerate:
        value = 0.0
    else:
        edges = np.linspace(pooled.min(), pooled.max(), num_bins + 1)
        ht, _ = np.histogram(t, bins=edges)
        hb, _ = np.histogram(b, bins=edges)
        overlap = np.minimum(ht / t.size, hb / b.size).sum()
        value = float(np.clip(1.0 - overlap, 0.0, 1.0))
    return (value, degenerate) if return_flag else value


def evaluate_regions(magnitude, x, z, regions, num_bins: int = 256) -> MetricsReport:
    """Score ``magnitude`` (linear envelope) on every region."""
    out = []
    for region in regions:
        tm, bm = region_mask(region, x, z)
        if not tm.any() or not bm.any():
            raise ValidationError(f"region {region.name!r} has an empty target or background")
        t, b = magnitude[tm], magnitude[bm]
        flags = []
        c = contrast(t, b)
        if c == math.inf:
            flags.append("target_mean_zero")
        g, degenerate = gcnr(t, b, num_bins, return_flag=True)
        if degenerate:
            flags.append("degenerate_histogram")
        out.append(RegionMetrics(region.name, c, g, int(tm.sum()), int(bm.sum()), flags))
    return MetricsReport(out)
