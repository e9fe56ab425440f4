"""Command-line front end and the end-to-end pipeline."""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .bezier import PiecewiseBezier
from .bounds import (
    PUBLISHED_GAINS,
    BoundConfig,
    BoundSet,
    Gains,
    PhysicalParams,
    build_matrices,
    compute_bounds,
    thrust_compatible,
)
from .gain_tuner import Schedule, TuneSpec, tune_best_of
from .geometry import GeometryError, Scenario, inflate_scenario
from .initial_set import RECIPES, sample_error_perturbations, sample_simulation_states
from .sim import QuadState, ReferenceSignal, SimOptions, SimulationTrace, certify_trace, integrate
from .synth import SynthParams, synthesize, verify_curve
from .tube import RrtParams, SafeTube, plan_tube

log = logging.getLogger("reachcert")

EXIT_OK, EXIT_CERT_FAILED, EXIT_STAGE_FAILED = 0, 1, 2


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str, payload=None):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.payload = payload or {}


def shipped_scenario(name: str) -> Path:
    return Path(str(resources.files("reachcert") / "data" / f"{name}.json"))


def dump_json(obj, path: Path | None = None) -> str:
    text = json.dumps(obj, indent=2) + "\n"
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
    return text


def env_seed(default: int) -> int:
    raw = os.environ.get("REACHCERT_SEED")
    return int(raw) if raw not in (None, "") else default


def load_gains(path) -> Gains:
    if path is None:
        return PUBLISHED_GAINS
    d = json.loads(Path(path).read_text())
    d = d.get("gains", d)
    return Gains(**{k: float(d[k]) for k in Gains.__dataclass_fields__})


def load_scenario(path) -> Scenario:
    p = Path(path)
    if not p.exists() and shipped_scenario(str(path)).exists():
        p = shipped_scenario(str(path))
    return Scenario.load(p)


@dataclass
class PipelineConfig:
    scenario: str = "reference"
    out_dir: str = "out"
    bound_config: BoundConfig = field(default_factory=BoundConfig)
    gains: Gains | None = PUBLISHED_GAINS  # None means tune
    tune: TuneSpec = field(default_factory=TuneSpec)
    chains: int = 1
    rrt: RrtParams = field(default_factory=RrtParams)
    synth: SynthParams = field(default_factory=SynthParams)
    sim: SimOptions = field(default_factory=SimOptions)
    n_samples: int = 20
    include_nominal: bool = True
    sample_seed: int = 0

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        cfg = cls()
        if "scenario" in d:
            cfg.scenario = d["scenario"]
        if "out_dir" in d:
            cfg.out_dir = d["out_dir"]
        if "bound_config" in d:
            cfg.bound_config = BoundConfig(**d["bound_config"])
        if "gains" in d:
            cfg.gains = None if d["gains"] in (None, "tune") else Gains(**d["gains"])
        if "tune" in d:
            cfg.tune = TuneSpec.from_dict(d["tune"])
        cfg.chains = int(d.get("chains", cfg.chains))
        if "rrt" in d:
            cfg.rrt = RrtParams(**d["rrt"])
        if "synth" in d:
            cfg.synth = SynthParams(**d["synth"])
        if "sim" in d:
            cfg.sim = SimOptions(**d["sim"])
        cfg.n_samples = int(d.get("n_samples", cfg.n_samples))
        cfg.include_nominal = bool(d.get("include_nominal", cfg.include_nominal))
        cfg.sample_seed = int(d.get("sample_seed", cfg.sample_seed))
        return cfg

    def with_seed(self, seed: int) -> "PipelineConfig":
        rrt = RrtParams(self.rrt.n_vertices, self.rrt.c_sample, self.rrt.alpha, seed)
        t = self.tune
        tune = TuneSpec(t.weights, t.k_lo, t.k_hi, t.initial, t.schedule, seed)
        out = PipelineConfig(**{**self.__dict__})
        out.rrt, out.tune, out.sample_seed = rrt, tune, seed
        return out


# stage functions -----------------------------------------------------------

def stage_gains(cfg: PipelineConfig, params: PhysicalParams):
    if cfg.gains is not None:
        return cfg.gains, {"gains": asdict(cfg.gains), "source": "fixed"}
    res = tune_best_of(cfg.tune, params, cfg.bound_config, cfg.chains)
    return res.gains, {
        "gains": asdict(res.gains),
        "source": "tuned",
        "objective": res.objective,
        "initial_objective": res.initial_objective,
        "seed": cfg.tune.seed,
        "chains": cfg.chains,
    }


def stage_plan(sc, B, cfg: PipelineConfig):
    inf = inflate_scenario(sc, B.Lp)
    res = plan_tube(inf, cfg.rrt, sc.p0)
    if not res.success:
        raise StageError("plan-tube", "RRT did not reach the target", {"vertices": len(res.tree.vertices)})
    return inf, res.tube


def stage_synth(sc, B, inf, tube, cfg, params):
    res = synthesize(tube, B, sc, inf, cfg.synth, params.m, params.g)
    attempts = [{"T": a.T, "status": a.status} for a in res.attempts]
    if not res.success:
        raise StageError("synth-traj", res.message, {"attempts": attempts})
    chk = verify_curve(res.curve, res.tube, B, sc, inf, params.m, params.g, cfg.synth.eps)
    if not chk.ok:
        raise StageError("synth-traj", "dense verification failed", {"worst": chk.worst})
    return res, attempts, chk


def stage_simulate(sc, curve, gains, params, cfg: PipelineConfig):
    L = build_matrices(gains, params, cfg.bound_config)
    ref = ReferenceSignal(curve)
    starts = []
    if cfg.include_nominal:
        d0 = ref(0.0)
        starts.append(QuadState(d0[0].copy(), d0[1].copy(), np.eye(3), np.zeros(3)))
    if cfg.n_samples > 0:
        st = sample_simulation_states(
            ref, cfg.n_samples, np.random.default_rng(cfg.sample_seed), gains, params, L, cfg.bound_config
        )
        starts += [QuadState(st.p[k], st.v[k], st.R[k], st.w[k]) for k in range(len(st.p))]
    return starts, integrate(starts, curve, gains, params, L, cfg.sim, cfg=cfg.bound_config)


def certification_summary(reports) -> dict:
    return {
        "passed": all(r.passed for r in reports),
        "runs": [r.to_dict() for r in reports],
    }


def run_pipeline(cfg: PipelineConfig, params: PhysicalParams = PhysicalParams()) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stage = "load"
    try:
        sc = load_scenario(cfg.scenario)
        stage = "tune-gains"
        gains, gains_doc = stage_gains(cfg, params)
        dump_json(gains_doc, out / "gains.json")
        stage = "bounds"
        B = compute_bounds(gains, params, cfg.bound_config)
        dump_json({**B.to_dict(), "thrust_compatible": thrust_compatible(B, sc.f_max)}, out / "bounds.json")
        stage = "plan-tube"
        inf, tube = stage_plan(sc, B, cfg)
        dump_json(tube.to_list(), out / "tube.json")
        stage = "synth-traj"
        res, attempts, chk = stage_synth(sc, B, inf, tube, cfg, params)
        dump_json({**res.curve.to_dict(), "T": res.T, "attempts": attempts, "verification": chk.worst},
                  out / "trajectory.json")
        stage = "simulate"
        starts, traces = stage_simulate(sc, res.curve, gains, params, cfg)
        (out / "traces").mkdir(exist_ok=True)
        for k, tr in enumerate(traces):
            (out / "traces" / f"trace_{k:02d}.csv").write_text(tr.to_csv())
        stage = "certify"
        reports = [certify_trace(tr, B, sc) for tr in traces]
        summary = certification_summary(reports)
        dump_json(summary, out / "certification.json")
    except StageError as exc:
        return _fail(out, exc.stage, str(exc), exc.payload)
    except (GeometryError, ValueError, RuntimeError, OSError, KeyError) as exc:
        return _fail(out, stage, f"{type(exc).__name__}: {exc}", {})
    for k, r in enumerate(reports):
        if not r.passed:
            log.warning("run %d violated: %s", k, ", ".join(r.violated))
    return EXIT_OK if summary["passed"] else EXIT_CERT_FAILED


def _fail(out: Path, stage: str, message: str, payload) -> int:
    print(f"stage {stage} failed: {message}", file=sys.stderr)
    dump_json({"stage": stage, "message": message, "payload": payload}, out / "error.json")
    return EXIT_STAGE_FAILED


# argument parsing -----------------------------------------------------------

def _bound_config(args) -> BoundConfig:
    if getattr(args, "bound_config", None):
        return BoundConfig(**json.loads(Path(args.bound_config).read_text()))
    return BoundConfig()


def cmd_tune(args) -> int:
    spec = TuneSpec.from_dict(json.loads(Path(args.config).read_text())) if args.config else TuneSpec()
    if args.epochs is not None:
        s = spec.schedule
        spec = TuneSpec(spec.weights, spec.k_lo, spec.k_hi, spec.initial,
                        Schedule(s.T0, s.cooling, s.iters_per_epoch, args.epochs), spec.seed)
    seed = env_seed(args.seed if args.seed is not None else spec.seed)
    spec = TuneSpec(spec.weights, spec.k_lo, spec.k_hi, spec.initial, spec.schedule, seed)
    res = tune_best_of(spec, PhysicalParams(), _bound_config(args), args.chains)
    doc = {"gains": asdict(res.gains), "source": "tuned", "objective": res.objective,
           "initial_objective": res.initial_objective, "seed": seed, "chains": args.chains}
    print(dump_json(doc, args.out), end="")
    return EXIT_OK


def cmd_bounds(args) -> int:
    B = compute_bounds(load_gains(args.gains), PhysicalParams(), _bound_config(args))
    doc = B.to_dict()
    if args.scenario:
        doc["thrust_compatible"] = thrust_compatible(B, load_scenario(args.scenario).f_max)
    print(dump_json(doc, args.out), end="")
    return EXIT_OK


def _load_bounds(path, args) -> BoundSet:
    if path:
        return BoundSet.from_dict(json.loads(Path(path).read_text()))
    return compute_bounds(load_gains(getattr(args, "gains", None)), PhysicalParams(), _bound_config(args))


def cmd_plan(args) -> int:
    sc = load_scenario(args.scenario)
    B = _load_bounds(args.bounds, args)
    cfg = PipelineConfig(rrt=RrtParams(args.n_vertices, args.c_sample, args.alpha, env_seed(args.seed)))
    try:
        _, tube = stage_plan(sc, B, cfg)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_STAGE_FAILED
    print(dump_json(tube.to_list(), args.out), end="")
    return EXIT_OK


def cmd_synth(args) -> int:
    sc = load_scenario(args.scenario)
    B = _load_bounds(args.bounds, args)
    params = PhysicalParams()
    tube = SafeTube.from_list(json.loads(Path(args.tube).read_text()))
    inf = inflate_scenario(sc, B.Lp)
    cfg = PipelineConfig(synth=SynthParams(args.T0, args.alpha_T, args.max_outer_iters, args.eps, args.degree,
                                           args.terminal_rest))
    try:
        res, attempts, chk = stage_synth(sc, B, inf, tube, cfg, params)
    except StageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_STAGE_FAILED
    doc = {**res.curve.to_dict(), "T": res.T, "attempts": attempts, "verification": chk.worst}
    print(dump_json(doc, args.out), end="")
    return EXIT_OK


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    curve = PiecewiseBezier.from_dict(json.loads(Path(args.trajectory).read_text()))
    gains = load_gains(args.gains)
    cfg = PipelineConfig(n_samples=args.samples, include_nominal=not args.no_nominal,
                         sample_seed=env_seed(args.seed), bound_config=_bound_config(args),
                         sim=SimOptions(atol=args.atol, rtol=args.rtol, sample_rate=args.rate, force=args.force))
    _, traces = stage_simulate(sc, curve, gains, PhysicalParams(), cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for k, tr in enumerate(traces):
        (out / f"trace_{k:02d}.csv").write_text(tr.to_csv())
    print(f"wrote {len(traces)} traces to {out}")
    return EXIT_OK


def cmd_sample_init(args) -> int:
    params, cfg = PhysicalParams(), _bound_config(args)
    gains = load_gains(args.gains)
    L = build_matrices(gains, params, cfg)
    recs = sample_error_perturbations(args.recipe, args.n, np.random.default_rng(env_seed(args.seed)),
                                      gains, params, L, cfg)
    frac = sum(r["member"] for r in recs) / len(recs)
    doc = {"recipe": args.recipe, "n": args.n, "member_fraction": frac, "samples": recs}
    text = dump_json(doc, args.out)
    if args.out is None:
        print(text, end="")
    else:
        print(f"member fraction {frac:.4f}")
    return EXIT_OK


def cmd_certify(args) -> int:
    sc = load_scenario(args.scenario)
    B = _load_bounds(args.bounds, args)
    reports = [certify_trace(SimulationTrace.from_csv(Path(p).read_text()), B, sc) for p in args.traces]
    summary = certification_summary(reports)
    print(dump_json(summary, args.out), end="")
    return EXIT_OK if summary["passed"] else EXIT_CERT_FAILED


def cmd_run_all(args) -> int:
    cfg = PipelineConfig.from_dict(json.loads(Path(args.config).read_text())) if args.config else PipelineConfig()
    if args.scenario:
        cfg.scenario = args.scenario
    if args.out_dir:
        cfg.out_dir = args.out_dir
    if args.tune:
        cfg.gains = None
    if args.samples is not None:
        cfg.n_samples = args.samples
    if args.chains is not None:
        cfg.chains = args.chains
    seed = args.seed if args.seed is not None else cfg.rrt.seed
    cfg = cfg.with_seed(env_seed(seed))
    code = run_pipeline(cfg)
    print({EXIT_OK: "certified", EXIT_CERT_FAILED: "certification failed"}.get(code, "stage failure"))
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="reachcert", description="Certified reach-avoid pipeline for a quadrotor.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, gains=True, out=True):
        if gains:
            p.add_argument("--gains", help="gains JSON (default: the published reference gains)")
        p.add_argument("--bound-config", help="JSON with psi_bar, alpha_psi, V1_bar, a_max, eps")
        if out:
            p.add_argument("--out", help="write the JSON here as well as to stdout")

    p = sub.add_parser("tune-gains", help="anneal gains on the weighted bound objective")
    p.add_argument("--config", help="TuneSpec JSON (weights, k_lo, k_hi, initial, schedule, seed)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: from config, else 0)")
    p.add_argument("--chains", type=int, default=1, help="independent chains; best wins (default 1)")
    p.add_argument("--epochs", type=int, default=None, help="override the number of epochs")
    common(p, gains=False)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("bounds", help="compute the uniform tracking bounds")
    p.add_argument("--scenario", help="also report thrust compatibility for this scenario")
    common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("plan-tube", help="RRT over safe boxes")
    p.add_argument("--scenario", default="reference", help="scenario JSON or shipped name (default reference)")
    p.add_argument("--bounds", help="bounds JSON (default: computed from --gains)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    p.add_argument("--alpha", type=float, default=0.9, help="strip shrink factor (default 0.9)")
    p.add_argument("--n-vertices", type=int, default=400, help="vertex budget (default 400)")
    p.add_argument("--c-sample", type=float, default=0.9, help="exploration fraction (default 0.9)")
    common(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("synth-traj", help="fit a piecewise Bezier curve inside a tube")
    p.add_argument("--scenario", default="reference", help="scenario JSON or shipped name (default reference)")
    p.add_argument("--bounds", help="bounds JSON (default: computed from --gains)")
    p.add_argument("--tube", required=True, help="tube JSON from plan-tube")
    p.add_argument("--t0", "--T0", dest="T0", type=float, default=10.0, help="initial horizon in s (default 10)")
    p.add_argument("--alpha-t", "--alpha-T", dest="alpha_T", type=float, default=1.1, help="horizon growth factor (default 1.1)")
    p.add_argument("--max-outer-iters", type=int, default=60, help="horizon attempts (default 60)")
    p.add_argument("--eps", type=float, default=1e-6, help="thrust-floor margin (default 1e-6)")
    p.add_argument("--np", "--degree", dest="degree", type=int, default=14, help="Bezier degree per segment (default 14)")
    p.add_argument("--terminal-rest", action="store_true", help="require zero velocity and acceleration at T")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="closed-loop simulation from sampled initial states")
    p.add_argument("--scenario", default="reference", help="scenario JSON or shipped name (default reference)")
    p.add_argument("--trajectory", required=True, help="trajectory JSON from synth-traj")
    p.add_argument("--samples", type=int, default=20, help="sampled initial states (default 20)")
    p.add_argument("--no-nominal", action="store_true", help="skip the zero-error start")
    p.add_argument("--seed", type=int, default=0, help="sampling seed (default 0)")
    p.add_argument("--atol", type=float, default=1e-9, help="absolute tolerance (default 1e-9)")
    p.add_argument("--rtol", type=float, default=1e-8, help="relative tolerance (default 1e-8)")
    p.add_argument("--rate", type=float, default=100.0, help="output rate in Hz (default 100)")
    p.add_argument("--force", action="store_true", help="allow starts outside the initial set")
    p.add_argument("--out-dir", default="traces", help="directory for trace CSVs (default traces)")
    common(p, out=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sample-init", help="Monte-Carlo membership of error perturbations")
    p.add_argument("--recipe", choices=RECIPES, default="position", help="perturbation family (default position)")
    p.add_argument("--n", type=int, default=10_000, help="number of samples (default 10000)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    common(p)
    p.set_defaults(func=cmd_sample_init)

    p = sub.add_parser("certify", help="check trace CSVs against the bounds")
    p.add_argument("--scenario", default="reference", help="scenario JSON or shipped name (default reference)")
    p.add_argument("--bounds", help="bounds JSON (default: computed from --gains)")
    p.add_argument("traces", nargs="+", help="trace CSV files")
    common(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("run-all", help="tune/bounds/tube/trajectory/simulate/certify in one go")
    p.add_argument("--config", help="pipeline JSON (see README)")
    p.add_argument("--scenario", help="scenario JSON or shipped name (default reference)")
    p.add_argument("--out-dir", help="artifact directory (default out)")
    p.add_argument("--seed", type=int, default=None, help="seed for tuning, RRT and sampling (default 0)")
    p.add_argument("--tune", action="store_true", help="tune gains instead of using the reference gains")
    p.add_argument("--chains", type=int, default=None, help="annealing chains when tuning (default 1)")
    p.add_argument("--samples", type=int, default=None, help="sampled initial states (default 20)")
    p.set_defaults(func=cmd_run_all)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (GeometryError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_STAGE_FAILED


if __name__ == "__main__":
    sys.exit(main())
