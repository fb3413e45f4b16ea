"""Compare the compiled consensus kernel against the pure-Python reference.

Runs the same batch of random instances through both backends, verifies the
outputs match bit-for-bit (results, round counts, transmission counts, final
RNG state), and reports wall-clock times.

Usage: python3 benchmarks/bench_consensus.py [--sizes 20,100,400] [--seeds 8]
"""

import argparse
import time
from fractions import Fraction as F

from zoomgrad.consensus import active_backend, run_consensus
from zoomgrad.graph import generate_random_digraph
from zoomgrad.quantizer import QuantizerState
from zoomgrad.rng import PCG32, STREAM_PROTOCOL


def make_instance(seed, n):
    g = generate_random_digraph(n, F(1, 2), seed)
    rng = PCG32(seed, STREAM_PROTOCOL)
    x = [F(rng.randbelow(65) - 32, 4) for _ in range(n)]
    return g, x


def run_batch(instances, q, backend):
    t0 = time.perf_counter()
    outputs = []
    for seed, (g, x) in instances:
        rng = PCG32(seed, STREAM_PROTOCOL)
        results, stats = run_consensus(x, q, g, rng, force_backend=backend)
        outputs.append(
            (results[0], stats.rounds, stats.mass_transmissions, rng.getstate())
        )
    return time.perf_counter() - t0, outputs


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="20,100,400")
    parser.add_argument("--seeds", type=int, default=8, help="instances per size")
    args = parser.parse_args()

    if active_backend() != "compiled":
        print("compiled kernel not available; nothing to compare")
        return

    q = QuantizerState(b_q=F(0), delta=F(1, 2), c_in=F(4, 3), c_out=F(2))
    print("%6s %8s %12s %12s %9s" % ("n", "runs", "pure (s)", "compiled (s)", "speedup"))
    for n in [int(s) for s in args.sizes.split(",")]:
        instances = [(seed, make_instance(seed, n)) for seed in range(args.seeds)]
        t_pure, out_pure = run_batch(instances, q, "pure")
        t_comp, out_comp = run_batch(instances, q, "compiled")
        if out_pure != out_comp:
            raise SystemExit("backend outputs diverged at n=%d" % n)
        print(
            "%6d %8d %12.4f %12.4f %8.1fx"
            % (n, args.seeds, t_pure, t_comp, t_pure / t_comp)
        )
    print("outputs identical across backends for every instance")


if __name__ == "__main__":
    main()
