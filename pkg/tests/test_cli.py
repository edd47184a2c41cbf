import dataclasses
import json
import subprocess
import sys

import numpy as np
import pytest

from fxpf_adapt import cli
from fxpf_adapt.beamform import read_pgm
from fxpf_adapt.config import AberrationSpec, FxpfSpec, ImagingSpec, MetricsSpec, PipelineConfig
from fxpf_adapt.core import TransducerGeometry, ValidationError, read_channel_file, read_envelope_file
from fxpf_adapt.metrics import RegionSpec
from fxpf_adapt.sim import Inclusion, PhantomSpec


def small_config(**kw):
    cfg = PipelineConfig(
        geometry=TransducerGeometry(num_elements=32),
        phantom=PhantomSpec(
            x_range=(-4.8e-3, 4.8e-3),
            z_range=(2e-3, 16e-3),
            density_per_mm2=8.0,
            inclusions=(Inclusion(0.0, 6e-3, 1.5e-3), Inclusion(0.0, 12e-3, 1.5e-3),
                        Inclusion(-3e-3, 9e-3, 1e-3, -6.0)),
        ),
        imaging=ImagingSpec(z_start=3e-3, z_stop=15e-3),
        seed=11,
    )
    return cfg.replace(**kw)


def write_config(tmp_path, cfg):
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    return path


def test_default_settings():
    cfg = PipelineConfig()
    assert cfg.imaging.f_number == 1.75
    assert cfg.fxpf.mu == 0.01 and cfg.fxpf.p_max == 4 and cfg.fxpf.iterations == 2
    assert cfg.fxpf.beta == pytest.approx(1 / 3)
    assert cfg.kernel_length() == 8
    assert cfg.geometry.num_elements == 128
    fx = cfg.fxpf_config("adaptive")
    assert fx.policy.saturation_depth == pytest.approx(1.75 * 128 * 0.3e-3)
    assert cfg.fxpf_config("off") is None
    assert cfg.fxpf_config("fixed:1").policy.p_max == 1


@pytest.mark.parametrize("bad", ["fixed", "fixed:x", "auto", "fixed:0", "fixed:5"])
def test_bad_variants(bad):
    with pytest.raises(ValidationError):
        PipelineConfig().fxpf_config(bad)


def test_config_round_trip():
    cfgs = [
        PipelineConfig(),
        small_config(),
        small_config(
            aberration=AberrationSpec(45e-9, 2e-3),
            fxpf=FxpfSpec(mu=0.1, kernel_length_samples=12, iterations=1, p_max=3, beta=0.5),
            metrics=MetricsSpec(regions=(RegionSpec("r", 0.0, 6e-3, 1e-3, 1.2e-3, 2e-3),), num_bins=64),
            output_dir="elsewhere",
        ),
    ]
    for cfg in cfgs:
        assert PipelineConfig.from_json(cfg.to_json()) == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(ValidationError):
        PipelineConfig.from_dict({"bogus": {}})
    with pytest.raises(ValidationError):
        PipelineConfig.from_dict({"fxpf": {"order": 3}})


def test_partial_config_fills_defaults():
    cfg = PipelineConfig.from_dict({"seed": 5, "fxpf": {"mu": 0.1}})
    assert cfg.seed == 5 and cfg.fxpf.mu == 0.1 and cfg.fxpf.p_max == 4


def test_simulate_header_and_determinism(tmp_path, capsys):
    cfg_path = write_config(tmp_path, small_config())
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "a"), "-q"]) == 0
    assert cli.main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path / "b"), "-q"]) == 0
    a = (tmp_path / "a" / "channels.fxpf").read_bytes()
    assert a == (tmp_path / "b" / "channels.fxpf").read_bytes()
    frame = read_channel_file(tmp_path / "a" / "channels.fxpf")
    assert frame.geometry.num_elements == 32
    assert frame.geometry.sampling_frequency == 20.832e6
    assert "rms" in capsys.readouterr().out


def test_default_simulation_header(tmp_path):
    cfg = PipelineConfig(phantom=dataclasses.replace(PipelineConfig().phantom, density_per_mm2=0.0))
    path = cli.cmd_simulate(cfg, tmp_path)
    frame = read_channel_file(path)
    assert frame.geometry.num_elements == 128
    assert frame.geometry.sampling_frequency == 20.832e6
    assert not frame.samples.any()  # zero-density phantom


def test_seed_changes_frame(tmp_path):
    cfg = small_config()
    a = cli.simulate(cfg).samples
    b = cli.simulate(cfg.replace(seed=12)).samples
    assert not np.array_equal(a, b)


def test_beamform_and_evaluate(tmp_path):
    cfg = small_config()
    cfg_path = write_config(tmp_path, cfg)
    cli.main(["simulate", "--config", str(cfg_path), "--out", str(tmp_path), "-q"])
    channels = str(tmp_path / "channels.fxpf")
    for variant in ("off", "fixed:1", "adaptive"):
        assert cli.main(["beamform", channels, "--config", str(cfg_path), "--fxpf", variant,
                         "--out", str(tmp_path), "-q"]) == 0
    fixed1 = read_envelope_file(tmp_path / "fixed1" / "envelope.fenv")[0]
    off = read_envelope_file(tmp_path / "off" / "envelope.fenv")[0]
    assert fixed1.shape == off.shape and not np.array_equal(fixed1, off)
    img = read_pgm(tmp_path / "off" / "image.pgm")
    assert img.shape == off.shape and img.max() == 255
    out = tmp_path / "eval"
    assert cli.main(["evaluate", str(tmp_path / "off" / "envelope.fenv"), "--config", str(cfg_path),
                     "--out", str(out), "-q"]) == 0
    report = json.loads((out / "metrics.json").read_text())
    names = [r["name"] for r in report["regions"]]
    assert names == ["cyst_z6mm", "cyst_z12mm"]
    mean = np.mean([r["contrast_db"] for r in report["regions"]])
    assert report["mean_contrast_db"] == pytest.approx(mean)


def test_evaluate_matches_in_memory_metrics(tmp_path):
    cfg = small_config()
    frame = cli.simulate(cfg)
    image = cli.beamform_variant(frame, cfg, "off")
    direct = cli.evaluate(image, cfg)
    cli.save_image(tmp_path, image, cfg)
    stored = cli.cmd_evaluate(tmp_path / "envelope.fenv", cfg)
    # the envelope file stores float32, so metrics agree to single precision
    for a, b in zip(direct.regions, stored.regions):
        assert a.contrast_db == pytest.approx(b.contrast_db, abs=1e-4)
        assert a.gcnr == pytest.approx(b.gcnr, abs=0.02)


def test_fixed1_equals_adaptive_with_pmax_one():
    cfg = small_config()
    frame = cli.simulate(cfg)
    a = cli.beamform_variant(frame, cfg, "fixed:1").magnitude
    one = cfg.replace(fxpf=dataclasses.replace(cfg.fxpf, p_max=1))
    b = cli.beamform_variant(frame, one, "adaptive").magnitude
    assert np.array_equal(a, b)


def test_zero_input_gives_zero_image(tmp_path):
    cfg = small_config(phantom=dataclasses.replace(small_config().phantom, density_per_mm2=0.0))
    frame = cli.simulate(cfg)
    for v in ("off", "adaptive"):
        assert not cli.beamform_variant(frame, cfg, v).magnitude.any()


def test_compare_outputs_and_determinism(tmp_path):
    cfg_path = write_config(tmp_path, small_config())
    runs = []
    for name, threads in (("r1", "1"), ("r2", "1"), ("r3", "3")):
        out = tmp_path / name
        assert cli.main(["compare", "--config", str(cfg_path), "--out", str(out),
                         "--threads", threads, "-q"]) == 0
        runs.append((out / "compare.json").read_bytes())
    assert runs[0] == runs[1] == runs[2]
    summary = json.loads(runs[0])
    assert [r["variant"] for r in summary["variants"]] == ["off", "fixed:1", "fixed:4", "adaptive"]
    for d in ("off", "fixed1", "fixed4", "adaptive"):
        for f in ("image.pgm", "envelope.fenv", "metrics.json"):
            assert (tmp_path / "r1" / d / f).exists()
        assert (tmp_path / "r1" / d / "envelope.fenv").read_bytes() == (tmp_path / "r3" / d / "envelope.fenv").read_bytes()


def test_compare_logs_one_line_per_stage(tmp_path, caplog):
    caplog.set_level("INFO", logger="fxpf_adapt")
    cli.cmd_compare(small_config(), tmp_path, variants=("off", "adaptive"))
    stages = [r.getMessage().split()[0] for r in caplog.records if r.name == "fxpf_adapt"]
    assert stages == ["simulate", "off", "adaptive"]


def test_exit_codes(tmp_path):
    assert cli.main(["beamform", str(tmp_path / "missing.fxpf"), "-q"]) == cli.EXIT_IO
    bad = tmp_path / "bad.fxpf"
    bad.write_bytes(b"nonsense")
    assert cli.main(["beamform", str(bad), "-q"]) == cli.EXIT_IO
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text("{not json")
    assert cli.main(["compare", "--config", str(cfg_path), "-q"]) == cli.EXIT_VALIDATION
    cfg_path.write_text(json.dumps({"fxpf": {"mu": -1}}))
    assert cli.main(["compare", "--config", str(cfg_path), "-q"]) == cli.EXIT_VALIDATION
    assert cli.main(["beamform", str(bad), "--fxpf", "fixed:x", "-q"]) == cli.EXIT_VALIDATION
    assert cli.main(["config", "--config", str(tmp_path / "nope.json")]) == cli.EXIT_IO


def test_usage_errors_exit_with_validation_code(tmp_path):
    for argv in (["simulate", "--seed", "-1"], ["simulate", "--threads", "0"], ["frobnicate"]):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert exc.value.code == cli.EXIT_VALIDATION


def test_config_subcommand(tmp_path):
    path = tmp_path / "written.json"
    assert cli.main(["config", "--seed", "7", "--write", str(path)]) == 0
    cfg = PipelineConfig.load(path)
    assert cfg.seed == 7 and cfg == PipelineConfig().replace(seed=7)


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fxpf_adapt.cli", "beamform", str(tmp_path / "none")],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert "I/O error" in proc.stderr
