"""Command-line pipeline: simulate, beamform, evaluate and compare FXPF variants.

Exit codes: 0 success, 1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from .beamform import BeamGrid, EnvelopeImage, beamform, envelope_image, log_compress, write_pgm
from .config import PipelineConfig
from .core import (
    ChannelFrame,
    FormatError,
    TransducerGeometry,
    ValidationError,
    read_channel_file,
    read_envelope_file,
    write_channel_file,
    write_envelope_file,
)
from .metrics import MetricsReport, evaluate_regions
from .sim import generate_aberration, generate_phantom, simulate_rx

log = logging.getLogger("fxpf_adapt")

VARIANTS = ("off", "fixed:1", "fixed:4", "adaptive")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


@contextlib.contextmanager
def stage(name):
    t0 = time.perf_counter()
    yield
    log.info("%-10s %.3f s", name, time.perf_counter() - t0)


def frame_checksum(frame: ChannelFrame) -> str:
    return hashlib.sha256(np.ascontiguousarray(frame.samples).tobytes()).hexdigest()


def variant_dirname(variant: str) -> str:
    return variant.replace(":", "")


# -- library-level steps -----------------------------------------------------


def simulate(config: PipelineConfig) -> ChannelFrame:
    phantom_seed, aberration_seed = config.seeds()
    g = config.geometry
    scatterers = generate_phantom(dataclasses.replace(config.phantom, seed=phantom_seed))
    aberration = generate_aberration(
        g.num_elements, config.aberration.rms, config.aberration.correlation_length, g.pitch, aberration_seed
    )
    return simulate_rx(scatterers, g, config.pulse, aberration, config.duration(),
                       element_width=config.imaging.element_width)


def beamform_variant(frame: ChannelFrame, config: PipelineConfig, variant: str,
                     threads: int = 1, grid: BeamGrid | None = None) -> EnvelopeImage:
    grid = grid or config.grid()
    rf = beamform(frame, grid, config.imaging.f_number, config.imaging.window,
                  fxpf=config.fxpf_config(variant), threads=threads)
    return envelope_image(rf, grid)


def evaluate(image: EnvelopeImage, config: PipelineConfig) -> MetricsReport:
    x, z = image.grid.pixel_centers()
    return evaluate_regions(image.magnitude, x, z, config.regions(), config.metrics.num_bins)


def grid_from_envelope(magnitude, header, geometry: TransducerGeometry) -> BeamGrid:
    """Rebuild the beam grid of a stored envelope (lines centred on the array)."""
    fs, _, c, pitch, t0 = header
    depths, lines = magnitude.shape
    lateral = (np.arange(lines) - (lines - 1) / 2) * pitch
    return BeamGrid(lateral, c * t0 / 2, c / (2 * fs), depths)


def save_image(out_dir: Path, image: EnvelopeImage, config: PipelineConfig) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_envelope_file(out_dir / "envelope.fenv", image.magnitude, config.geometry,
                        2 * image.grid.z_start / config.geometry.sound_speed)
    write_pgm(out_dir / "image.pgm", log_compress(image.magnitude, config.imaging.dynamic_range_db))


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n")


# -- subcommands ---------------------------------------------------------------


def cmd_simulate(config: PipelineConfig, out: Path) -> Path:
    with stage("simulate"):
        frame = simulate(config)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "channels.fxpf"
    with stage("write"):
        write_channel_file(path, frame)
    rms = float(np.sqrt(np.mean(frame.samples**2)))
    print(f"wrote {path}: {frame.samples.shape[0]} channels x {frame.num_samples} samples, "
          f"duration {frame.num_samples / config.geometry.sampling_frequency * 1e6:.2f} us, rms {rms:.4g}")
    return path


def cmd_beamform(input_path: Path, config: PipelineConfig, variant: str, out: Path,
                 threads: int = 1) -> Path:
    config.fxpf_config(variant)  # validate before doing any work
    with stage("read"):
        frame = read_channel_file(input_path)
    with stage("beamform"):
        image = beamform_variant(frame, config, variant, threads)
    target = out / variant_dirname(variant)
    with stage("write"):
        save_image(target, image, config)
    print(f"wrote {target}/envelope.fenv and image.pgm")
    return target


def cmd_evaluate(envelope_path: Path, config: PipelineConfig, out: Path | None = None) -> MetricsReport:
    with stage("read"):
        magnitude, header = read_envelope_file(envelope_path)
    grid = grid_from_envelope(magnitude, header, config.geometry)
    with stage("evaluate"):
        report = evaluate(EnvelopeImage(magnitude, grid), config)
    text = report.to_json()
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(text + "\n")
    print(text)
    return report


def cmd_compare(config: PipelineConfig, out: Path, threads: int = 1, variants=VARIANTS) -> dict:
    """Run every variant on one simulated frame; write images, metrics and compare.json."""
    for v in variants:
        config.fxpf_config(v)
    with stage("simulate"):
        frame = simulate(config)
    checksum = frame_checksum(frame)
    grid = config.grid()
    rows = []
    for v in variants:
        with stage(v):
            image = beamform_variant(frame, config, v, threads, grid)
            report = evaluate(image, config)
        if frame_checksum(frame) != checksum:
            raise RuntimeError("input frame changed between variants")
        target = out / variant_dirname(v)
        save_image(target, image, config)
        (target / "metrics.json").write_text(report.to_json() + "\n")
        rows.append({"variant": v, **report.to_dict()})
    summary = {"seed": config.seed, "frame_sha256": checksum, "variants": rows}
    write_json(out / "compare.json", summary)
    print(format_table(rows))
    return summary


def format_table(rows) -> str:
    names = [r["name"] for r in rows[0]["regions"]]
    head = f"{'variant':<10} {'mean C [dB]':>11} {'mean gCNR':>9}" + "".join(
        f" {n + ' C':>16} {n + ' g':>16}" for n in names)
    lines = [head]
    for r in rows:
        line = f"{r['variant']:<10} {_fmt(r['mean_contrast_db']):>11} {r['mean_gcnr']:>9.3f}"
        for reg in r["regions"]:
            line += f" {_fmt(reg['contrast_db']):>16} {reg['gcnr']:>16.3f}"
        lines.append(line)
    return "\n".join(lines)


def _fmt(v):
    return v if isinstance(v, str) else f"{v:.2f}"


# -- argument parsing -----------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _threads(text):
    if text == "auto":
        return os.cpu_count() or 1
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1 or 'auto'")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline config (JSON); defaults used when omitted")
    common.add_argument("--seed", type=_seed, help="global seed (overrides the config)")
    common.add_argument("--out", type=Path, help="output directory (overrides the config)")
    common.add_argument("--threads", type=_threads, default=1, help="worker threads, n or auto")
    common.add_argument("-q", "--quiet", action="store_true", help="suppress per-stage timing lines")

    p = _Parser(prog="fxpf", description="Adaptive-order FXPF plane-wave pipeline")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("simulate", parents=[common], help="simulate an aberrated channel frame")
    b = sub.add_parser("beamform", parents=[common], help="beamform a channel file")
    b.add_argument("input", type=Path)
    b.add_argument("--fxpf", default="off", help="off | fixed:<p> | adaptive")
    e = sub.add_parser("evaluate", parents=[common], help="contrast and gCNR of an envelope file")
    e.add_argument("envelope", type=Path)
    sub.add_parser("compare", parents=[common], help="off / fixed:1 / fixed:4 / adaptive on one frame")
    c = sub.add_parser("config", parents=[common], help="print the effective config as JSON")
    c.add_argument("--write", type=Path, help="write the config here instead of printing it")
    return p


def load_config(args) -> PipelineConfig:
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if args.out is not None:
        config = config.replace(output_dir=str(args.out))
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    try:
        config = load_config(args)
        out = Path(config.output_dir)
        if args.command == "simulate":
            cmd_simulate(config, out)
        elif args.command == "beamform":
            cmd_beamform(args.input, config, args.fxpf, out, args.threads)
        elif args.command == "evaluate":
            cmd_evaluate(args.envelope, config, out)
        elif args.command == "compare":
            cmd_compare(config, out, args.threads)
        elif args.command == "config":
            if args.write:
                args.write.write_text(config.to_json() + "\n")
            else:
                print(config.to_json())
    except FormatError as exc:
        print(f"fxpf: bad file: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, json.JSONDecodeError) as exc:
        print(f"fxpf: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"fxpf: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
