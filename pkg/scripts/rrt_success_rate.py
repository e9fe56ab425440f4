"""Measure RRT success rate and timing over many seeds on a shipped scenario.

    python scripts/rrt_success_rate.py --seeds 100 --alpha 0.9
"""
import argparse
import statistics
import time

from reachcert.bounds import PUBLISHED_GAINS, BoundConfig, PhysicalParams, compute_bounds
from reachcert.cli import load_scenario
from reachcert.geometry import inflate_scenario
from reachcert.tube import RrtParams, plan_tube


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="reference")
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--alpha", type=float, default=0.9)
    ap.add_argument("--n-vertices", type=int, default=400)
    ap.add_argument("--c-sample", type=float, default=0.9)
    args = ap.parse_args()
    sc = load_scenario(args.scenario)
    B = compute_bounds(PUBLISHED_GAINS, PhysicalParams(), BoundConfig())
    inf = inflate_scenario(sc, B.Lp)
    wins, times, lengths = 0, [], []
    for seed in range(args.seeds):
        start = time.perf_counter()
        res = plan_tube(inf, RrtParams(args.n_vertices, args.c_sample, args.alpha, seed), sc.p0)
        times.append(time.perf_counter() - start)
        if res.success:
            assert not res.tube.violations(sc.p0, inf)
            wins += 1
            lengths.append(res.tube.n_segments)
    print(f"{wins}/{args.seeds} seeds reached the target")
    print(f"plan time: median {statistics.median(times):.3f} s, max {max(times):.3f} s")
    if lengths:
        print(f"tube segments: median {statistics.median(lengths)}, range {min(lengths)}-{max(lengths)}")


if __name__ == "__main__":
    main()
