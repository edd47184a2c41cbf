import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fxpf_adapt.core import (
    ChannelFrame,
    FormatError,
    SpectralKernel,
    TransducerGeometry,
    ValidationError,
    forward_spectrum,
    inverse_spectrum,
    read_channel_file,
    read_envelope_file,
    write_channel_file,
    write_envelope_file,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
kernels = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(2, 16)), elements=finite)


def brute_dft(x):
    K = x.shape[-1]
    n = np.arange(K)
    return np.array([[np.sum(row * np.exp(-2j * np.pi * k * n / K)) for k in range(K // 2 + 1)] for row in x])


def one_sided_energy(spec):
    K = spec.kernel_length
    w = np.full(spec.bins.shape[1], 2.0)
    w[0] = 1.0
    if K % 2 == 0:
        w[-1] = 1.0
    return np.sum(w * np.abs(spec.bins) ** 2) / K


def test_geometry_defaults():
    g = TransducerGeometry()
    assert g.num_elements == 128
    assert g.sampling_frequency == 20.832e6
    assert g.aperture_length == pytest.approx(128 * 0.3e-3)
    x = g.element_x
    assert x.size == 128 and x.mean() == pytest.approx(0, abs=1e-15)
    assert np.allclose(np.diff(x), g.pitch)


@pytest.mark.parametrize(
    "kw",
    [
        dict(num_elements=1),
        dict(pitch=0.0),
        dict(center_frequency=11e6),
        dict(sound_speed=-1.0),
    ],
)
def test_geometry_rejects(kw):
    with pytest.raises(ValidationError):
        TransducerGeometry(**kw)


def test_frame_validation():
    g = TransducerGeometry(num_elements=4)
    with pytest.raises(ValidationError):
        ChannelFrame(g, np.zeros((3, 10)))
    bad = np.zeros((4, 10))
    bad[1, 2] = np.nan
    with pytest.raises(ValidationError):
        ChannelFrame(g, bad)
    f = ChannelFrame(g, np.ones((4, 10)), start_time=1e-6)
    assert f.num_samples == 10
    assert f.times[1] - f.times[0] == pytest.approx(1 / g.sampling_frequency)
    with pytest.raises(ValueError):
        f.samples[0, 0] = 2.0


def test_dc_only():
    spec = forward_spectrum(np.ones((1, 4)))
    assert spec.bins[0, 0] == pytest.approx(4)
    assert np.allclose(spec.bins[0, 1:], 0)


def test_nyquist_only():
    spec = forward_spectrum(np.array([[1.0, -1.0, 1.0, -1.0]]))
    assert np.allclose(spec.bins[0, :-1], 0)
    assert spec.bins[0, -1] == pytest.approx(4)


def test_cosine_bin_one_matches_brute_force():
    k = np.arange(8)
    x = np.vstack([np.cos(2 * np.pi * k / 8), np.zeros(8)])
    spec = forward_spectrum(x, sampling_frequency=8.0)
    assert np.allclose(spec.bins, brute_dft(x), atol=1e-12)
    assert abs(spec.bins[0, 1]) == pytest.approx(4)
    assert np.allclose(np.delete(spec.bins[0], 1), 0, atol=1e-12)
    assert np.allclose(spec.bin_frequencies, np.arange(5))


def test_inverse_examples():
    zero = SpectralKernel(np.zeros((2, 5), complex), np.arange(5.0), 0, 8)
    assert np.array_equal(inverse_spectrum(zero), np.zeros((2, 8)))
    bins = np.zeros((1, 5), complex)
    bins[0, 0] = 8
    assert np.allclose(inverse_spectrum(SpectralKernel(bins, np.arange(5.0), 0, 8)), 1.0)


def test_rejects_short_or_nonfinite():
    with pytest.raises(ValidationError):
        forward_spectrum(np.ones((2, 1)))
    with pytest.raises(ValidationError):
        forward_spectrum(np.array([[1.0, np.inf]]))


@settings(max_examples=60, deadline=None)
@given(kernels)
def test_round_trip(x):
    back = inverse_spectrum(forward_spectrum(x))
    assert np.linalg.norm(back - x) <= 1e-10 * max(np.linalg.norm(x), 1e-300)


@settings(max_examples=60, deadline=None)
@given(kernels)
def test_parseval(x):
    e_time = np.sum(x**2)
    e_spec = one_sided_energy(forward_spectrum(x))
    assert e_spec == pytest.approx(e_time, rel=1e-9, abs=1e-300)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), finite, finite)
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal((2, 3, 8))
    lhs = forward_spectrum(a * x + b * y).bins
    rhs = a * forward_spectrum(x).bins + b * forward_spectrum(y).bins
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * (abs(a) + abs(b) + 1))


def test_deterministic():
    x = np.random.default_rng(3).standard_normal((4, 16))
    assert np.array_equal(forward_spectrum(x).bins, forward_spectrum(x).bins)


def test_channel_file_round_trip(tmp_path):
    g = TransducerGeometry(num_elements=5)
    data = np.random.default_rng(0).standard_normal((5, 33)).astype(np.float32).astype(np.float64)
    frame = ChannelFrame(g, data, start_time=2.5e-6)
    path = tmp_path / "f.fxpf"
    write_channel_file(path, frame)
    back = read_channel_file(path)
    assert np.array_equal(back.samples, frame.samples)
    assert back.geometry == g
    assert back.start_time == frame.start_time
    # re-writing the decoded frame is byte-identical
    path2 = tmp_path / "g.fxpf"
    write_channel_file(path2, back)
    assert path.read_bytes() == path2.read_bytes()


def test_envelope_file_round_trip(tmp_path):
    g = TransducerGeometry()
    mag = np.abs(np.random.default_rng(1).standard_normal((40, 7))).astype(np.float32).astype(np.float64)
    path = tmp_path / "e.fenv"
    write_envelope_file(path, mag, g, 3e-6)
    back, (fs, fc, c, pitch, t0) = read_envelope_file(path)
    assert np.array_equal(back, mag)
    assert (fs, fc, c, pitch, t0) == (g.sampling_frequency, g.center_frequency, g.sound_speed, g.pitch, 3e-6)


def test_bad_files(tmp_path):
    g = TransducerGeometry(num_elements=2)
    path = tmp_path / "x.fxpf"
    write_channel_file(path, ChannelFrame(g, np.zeros((2, 4))))
    raw = path.read_bytes()
    with pytest.raises(FormatError):
        read_envelope_file(path)  # wrong magic
    path.write_bytes(raw[:-1])
    with pytest.raises(FormatError):
        read_channel_file(path)
    path.write_bytes(raw[:10])
    with pytest.raises(FormatError):
        read_channel_file(path)
