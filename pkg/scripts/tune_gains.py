"""Anneal controller gains from several seeds and compare with the published set.

    python scripts/tune_gains.py --seeds 3 --epochs 100
"""
import argparse
import time

from reachcert.bounds import PUBLISHED_GAINS, BoundConfig, PhysicalParams, compute_bounds
from reachcert.gain_tuner import Schedule, TuneSpec, objective, tune


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--epochs", type=int, default=100)
    args = ap.parse_args()
    params, cfg = PhysicalParams(), BoundConfig()
    weights = (15.0, 1.0, 1.0)
    published = objective(PUBLISHED_GAINS, weights, params, cfg)
    print(f"published gains: objective {published:.4f}")
    for seed in range(args.seeds):
        start = time.perf_counter()
        res = tune(TuneSpec(weights=weights, schedule=Schedule(epochs=args.epochs), seed=seed), params, cfg)
        B = compute_bounds(res.gains, params, cfg)
        g = res.gains
        print(f"seed {seed}: objective {res.objective:.4f} ({res.objective / published:.3f}x published), "
              f"Lp {B.Lp:.4f} Lv {B.Lv:.4f} Lf {B.Lf:.4f}, "
              f"gains {g.kp:.3f} {g.kv:.3f} {g.kR:.3f} {g.kw:.3f} {g.gamma1:.3f} {g.gamma2:.3f}, "
              f"{time.perf_counter() - start:.1f} s")


if __name__ == "__main__":
    main()
