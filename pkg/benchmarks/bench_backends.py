"""Time the compiled kernels against the numpy fallback.

Run from the repository root after an editable install::

    python benchmarks/bench_backends.py --repeat 5
"""

import argparse
import time

import numpy as np

from fxpf_adapt.core import TransducerGeometry
from fxpf_adapt.kernels import available_backends
from fxpf_adapt.sim import AberrationProfile, PhantomSpec, PulseModel, generate_phantom, transmit_delays


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def ar_case(rows, channels, p, seed=0):
    rng = np.random.default_rng(seed)
    s = rng.standard_normal((rows, channels)) + 1j * rng.standard_normal((rows, channels))
    return lambda mod: mod.ar_filter_bidirectional(s, p, 0.01)


def scatter_case(density):
    g = TransducerGeometry()
    spec = PhantomSpec(x_range=(-5e-3, 5e-3), z_range=(5e-3, 25e-3), density_per_mm2=density,
                       inclusions=(), seed=1)
    sc = generate_phantom(spec)
    pulse = PulseModel()
    fs, c = g.sampling_frequency, g.sound_speed
    T = int(np.ceil(40e-6 * fs))
    half = int(np.ceil(4 * pulse.sigma_t * fs))
    tx = transmit_delays(sc.x, g, AberrationProfile.none(g.num_elements))
    zeros = np.zeros(g.num_elements)

    def run(mod):
        out = np.zeros((g.num_elements, T))
        mod.accumulate_scatterers(out, sc.x, sc.z, sc.amplitude, tx, g.element_x, zeros,
                                  c, fs, 0.0, pulse.center_frequency, pulse.sigma_t,
                                  g.wavelength, half, 0.27e-3 / g.wavelength)
        return out

    return run, len(sc)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not importable; only the numpy fallback is timed")

    cases = []
    for p in (1, 4):
        cases.append((f"ar_filter_bidirectional 4096x128 p={p}", ar_case(4096, 128, p)))
    run, n = scatter_case(10.0)
    cases.append((f"accumulate_scatterers {n} scatterers", run))

    names = list(backends)
    print(f"{'case':44s}" + "".join(f"{b:>12s}" for b in names) + f"{'speedup':>10s}")
    for label, fn in cases:
        t = {b: best_of(lambda: fn(backends[b]), args.repeat) for b in names}
        speed = t["python"] / t["cython"] if "cython" in t else float("nan")
        print(f"{label:44s}" + "".join(f"{t[b]:11.4f}s" for b in names) + f"{speed:9.1f}x")

    # both backends must agree before their timings mean anything
    if "cython" in backends:
        for label, fn in cases:
            a = fn(backends["python"])
            b = fn(backends["cython"])
            a = a[0] if isinstance(a, tuple) else a
            b = b[0] if isinstance(b, tuple) else b
            err = np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300)
            print(f"max relative difference, {label}: {err:.2e}")


if __name__ == "__main__":
    main()
