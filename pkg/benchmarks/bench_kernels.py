"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--size-mb 8] [--repeat 5]
"""

import argparse
import random
import sys
import timeit

from capinfer import kernels


def sample_binary(size: int, seed: int = 0) -> bytes:
    rng = random.Random(seed)
    words = ["".join(rng.choice("abcdefghijklmnopqrstuvwxyz_0123456789") for _ in range(rng.randint(3, 14)))
             for _ in range(5000)]
    out = bytearray()
    while len(out) < size:
        out += rng.choice(words).encode()
        out += bytes(rng.choice((0, 0, 1, 0x90, 0xFF)) for _ in range(rng.randint(1, 6)))
    return bytes(out[:size])


def best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size-mb", type=float, default=8.0)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if kernels.compiled is None:
        print("compiled kernels are not built; only the fallback can be timed", file=sys.stderr)
    data = sample_binary(int(args.size_mb * 1024 * 1024))
    text = data.decode("latin-1")[: 2 * 1024 * 1024]
    probs = [random.Random(1).uniform(0.01, 0.5) for _ in range(200_000)]
    mb = len(data) / 2**20

    cases = [
        ("printable_runs", f"{mb:.1f} MiB", lambda k: k.printable_runs(data, 5), mb),
        ("terms_from_bytes", f"{mb:.1f} MiB", lambda k: k.terms_from_bytes(data, 5), mb),
        ("tokenize", f"{len(text) / 2**20:.1f} Mi chars", lambda k: k.tokenize(text), len(text) / 2**20),
        ("noisy_or", f"{len(probs)} probs", lambda k: k.noisy_or(probs), None),
    ]
    impls = [("python", kernels.pure)] + ([("cython", kernels.compiled)] if kernels.compiled else [])

    header = f"{'kernel':<18}{'input':<16}" + "".join(f"{name + ' ms':>12}" for name, _ in impls)
    if len(impls) == 2:
        header += f"{'speedup':>10}{'MB/s (cy)':>11}"
    print(header)
    print("-" * len(header))
    for name, size, fn, megabytes in cases:
        times = [best(lambda: fn(impl), args.repeat) for _, impl in impls]
        row = f"{name:<18}{size:<16}" + "".join(f"{t * 1000:>12.1f}" for t in times)
        if len(times) == 2:
            row += f"{times[0] / times[1]:>9.1f}x"
            row += f"{megabytes / times[1]:>11.0f}" if megabytes else f"{'':>11}"
        print(row)
    return 0


if __name__ == "__main__":
    sys.exit(main())
