"""Compare the compiled kernels with the pure-Python fallback.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is timed on
both backends (best of several repeats) and the outputs are checked for
agreement before the timings are reported.
"""

import argparse
import time

import numpy as np

from neuralfx import kernels


def best_time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(T, H, dtype):
    rng = np.random.default_rng(0)
    out = []
    for kind in ("rnn", "lstm", "gru"):
        G = kernels.GATES[kind]
        P = (0.5 * rng.standard_normal((T, G * H))).astype(dtype)
        U = (0.3 * rng.standard_normal((G * H, H))).astype(dtype)
        b = (0.1 * rng.standard_normal(G * H)).astype(dtype)
        h0, c0 = np.zeros(H, dtype), np.zeros(H, dtype)
        dhs = rng.standard_normal((T, H)).astype(dtype)

        def fwd(mod, kind=kind, P=P, h0=h0, c0=c0, U=U, b=b):
            return mod.seq_forward(kind, P, h0, c0, U, b)

        def bwd(mod, kind=kind, P=P, h0=h0, c0=c0, U=U, b=b, dhs=dhs):
            hs, cs, gates, uh = mod.seq_forward(kind, P, h0, c0, U, b)
            return mod.seq_backward(kind, dhs, h0, c0, hs, cs, gates, uh, U)

        out.append((f"{kind}{H} forward", fwd))
        out.append((f"{kind}{H} forward+backward", bwd))
    x = rng.uniform(-1, 1, 20 * T).astype(np.float64)
    out.append(("one_pole_lowpass", lambda mod: mod.one_pole_lowpass(x, 0.9)))
    out.append(("peak_envelope", lambda mod: mod.peak_envelope(np.abs(x), 0.99, 0.999)))
    out.append(("biquad", lambda mod: mod.biquad(x, 0.2, 0.4, 0.2, -0.5, 0.3)))
    return out


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    return float(np.max(np.abs(a - b), initial=0.0)) <= 1e-4 * scale


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--samples", type=int, default=4096, help="sequence length per call")
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--repeats", type=int, default=3)
    args = p.parse_args(argv)
    if kernels.compiled_backend is None:
        print("compiled kernels are not available (not built, or NFX_PURE_PYTHON is set)")
        return 1
    print(f"{'kernel':<26}{'cython ms':>12}{'python ms':>12}{'speedup':>10}")
    for name, fn in cases(args.samples, args.hidden, np.float32):
        c, py = kernels.compiled_backend, kernels.python_backend
        if not agree(fn(c), fn(py)):
            print(f"{name:<26} backends disagree")
            return 1
        tc = best_time(lambda: fn(c), args.repeats)
        tp = best_time(lambda: fn(py), args.repeats)
        print(f"{name:<26}{1e3 * tc:>12.2f}{1e3 * tp:>12.2f}{tp / tc:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
