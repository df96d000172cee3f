"""Compare the numba and numpy simulation backends.

Run:  python3 benchmarks/bench_kernels.py [--batch 64] [--repeat 5]

Times one full forward pass (encoding plus layered entangling template)
over a feature batch at several qubit counts, for each backend that is
importable, and prints the per-call timings side by side.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from stiq import _kernels
from stiq.simulator import _resolve_angles
from stiq.templates import EncoderSpec, PqcSpec, expand_template


def bench_backend(backend, template, params, features, repeat: int) -> float:
    compiled = template.compiled()
    codes, targets, controls = compiled[0], compiled[1], compiled[2]
    batch = features.shape[0]
    angles = _resolve_angles(compiled, params, features, batch)
    # warm fill (also triggers jit compilation for numba)
    amps = np.zeros((batch, 2**template.n_qubits), dtype=np.complex128)
    amps[:, 0] = 1.0
    backend.run_ops(amps, codes, targets, controls, angles)
    best = float("inf")
    for _ in range(repeat):
        amps = np.zeros((batch, 2**template.n_qubits), dtype=np.complex128)
        amps[:, 0] = 1.0
        t0 = time.perf_counter()
        backend.run_ops(amps, codes, targets, controls, angles)
        backend.z_expectations(amps, template.n_qubits)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=64)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--layers", type=int, default=2)
    parser.add_argument("--qubits", type=int, nargs="+", default=[4, 8, 12, 14])
    args = parser.parse_args()

    backends = [_kernels.get_backend("numpy")]
    try:
        backends.append(_kernels.get_backend("numba"))
    except ImportError:
        print("numba not importable, timing numpy only")

    rng = np.random.default_rng(0)
    header = f"{'qubits':>6} {'gates':>6}" + "".join(
        f" {b.NAME + ' (ms)':>12}" for b in backends
    )
    print(header)
    for n in args.qubits:
        template = expand_template(
            n,
            EncoderSpec(),
            PqcSpec(template_id="circuit4", n_layers=args.layers),
            n_features=n,
        )
        params = rng.uniform(0.0, 2.0 * np.pi, size=template.n_params)
        features = rng.uniform(0.0, 2.0 * np.pi, size=(args.batch, n))
        cells = []
        for backend in backends:
            dt = bench_backend(backend, template, params, features, args.repeat)
            cells.append(f" {1e3 * dt:>12.3f}")
        print(f"{n:>6} {len(template.ops):>6}" + "".join(cells))


if __name__ == "__main__":
    main()
