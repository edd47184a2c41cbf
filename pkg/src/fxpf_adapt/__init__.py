"""Adaptive-order frequency-space prediction filtering for plane-wave ultrasound."""

from .beamform import BeamGrid, EnvelopeImage, beamform, envelope_image
from .config import PipelineConfig
from .core import ChannelFrame, FormatError, TransducerGeometry, ValidationError
from .fxpf import AdaptiveOrderPolicy, FxpfConfig, adaptive_order, fxpf_filter_frame
from .kernels import BACKEND
from .metrics import MetricsReport, RegionSpec, contrast, gcnr

__version__ = "0.1.0"

__all__ = [
    "AdaptiveOrderPolicy",
    "BACKEND",
    "BeamGrid",
    "ChannelFrame",
    "EnvelopeImage",
    "FormatError",
    "FxpfConfig",
    "MetricsReport",
    "PipelineConfig",
    "RegionSpec",
    "TransducerGeometry",
    "ValidationError",
    "adaptive_order",
    "beamform",
    "contrast",
    "envelope_image",
    "fxpf_filter_frame",
    "gcnr",
]
