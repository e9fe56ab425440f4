"""Run the full pipeline on a shipped scenario and summarise every check.

    python scripts/reproduce_certification.py --samples 20 --out-dir out
"""
import argparse
import json
from pathlib import Path

from reachcert.cli import PipelineConfig, run_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scenario", default="reference")
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out-dir", default="out")
    args = ap.parse_args()

    cfg = PipelineConfig(scenario=args.scenario, out_dir=args.out_dir, n_samples=args.samples).with_seed(args.seed)
    code = run_pipeline(cfg)
    out = Path(args.out_dir)
    if not (out / "certification.json").exists():
        print((out / "error.json").read_text())
        return code
    bounds = json.loads((out / "bounds.json").read_text())
    traj = json.loads((out / "trajectory.json").read_text())
    cert = json.loads((out / "certification.json").read_text())
    print(f"Lp {bounds['Lp']:.4f}  Lv {bounds['Lv']:.4f}  Lf {bounds['Lf']:.4f}  Fbar {bounds['Fbar']:.4f}")
    print(f"trajectory horizon T = {traj['T']:.4f} s over {len(traj['segments'])} segments")
    names = list(cert["runs"][0]["checks"])
    print(f"{'check':<18}{'runs failing':>14}{'worst excess':>16}")
    for name in names:
        failing = sum(not r["checks"][name]["passed"] for r in cert["runs"])
        worst = max(r["checks"][name]["worst_excess"] for r in cert["runs"])
        print(f"{name:<18}{failing:>14}{worst:>16.3e}")
    print("certified" if cert["passed"] else "not certified", f"(exit code {code})")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
