"""Command-line front end.

Subcommands cover the full workflow: train one policy, meta-train,
fine-tune at a new preference weight, evaluate a snapshot, build all
four Pareto fronts, recompute hypervolumes from front CSVs, run the
random/exhaustive baselines, reproduce the experiment sweeps, and
benchmark the numba kernels against the numpy fallback.
"""

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from . import backend, harness
from .agents import HybridPolicy
from .config import ExperimentConfig, load_config, seed_streams
from .meta import fine_tune
from .pareto import HypervolumeResult, dominance_filter, hypervolume_mc


def _resolve_config(spec):
    if spec in (None, "default"):
        return ExperimentConfig()
    if spec == "desk":
        return harness.desk_config()
    return load_config(spec)


def _add_common(sub):
    sub.add_argument("--config", default="default",
                     help="config JSON path, or 'default' / 'desk'")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out", default="runs/out")


def _bench(args):
    rng = np.random.default_rng(0)
    gains = rng.uniform(1e-8, 1e-5, size=10)
    powers = rng.uniform(0.0, 0.3, size=4)
    pts = rng.random((16, 2))
    samples = rng.random((200_000, 2))
    orders = np.array([[0, 1, 2, 3], [3, 2, 1, 0], [1, 0, 3, 2]], dtype=np.int64)
    from .pareto import feasible_power_grid
    alphas = feasible_power_grid(4, 6)
    ages = rng.uniform(1e-3, 5e-3, size=(10, 4))
    demand = (rng.random((10, 4)) < 0.5).astype(np.float64)

    cases = {
        "sic_chain": {
            "numpy": lambda: backend.sic_chain_numpy(gains, powers, 1e-6, 9000.0, 0.0789, 1e-6),
        },
        "hv_mc_count": {
            "numpy": lambda: backend.hv_mc_count_numpy(pts, samples),
        },
        "exhaustive_scan": {
            "numpy": lambda: backend.exhaustive_scan_numpy(
                gains, orders, alphas, 1.0, 1e-6, 9000.0, 0.0789, 1e-6,
                ages, demand, 1e-3, 1e-3, 1.0, 1.0),
        },
    }
    try:
        kernels = backend._build_numba()
        cases["sic_chain"]["numba"] = lambda: kernels["sic_chain"](
            gains, powers, 1e-6, 9000.0, 0.0789, 1e-6)
        cases["hv_mc_count"]["numba"] = lambda: kernels["hv_mc_count"](pts, samples)
        cases["exhaustive_scan"]["numba"] = lambda: kernels["exhaustive_scan"](
            gains, orders, alphas, 1.0, 1e-6, 9000.0, 0.0789, 1e-6,
            ages, demand, 1e-3, 1e-3, 1.0, 1.0)
    except ImportError:
        print("numba unavailable; timing the numpy path only")

    repeats = {"sic_chain": 2000, "hv_mc_count": 20, "exhaustive_scan": 20}
    rows = []
    for name, impls in cases.items():
        for impl_name, fn in impls.items():
            fn()  # warm up / JIT
            t0 = time.perf_counter()
            for _ in range(repeats[name]):
                fn()
            dt = (time.perf_counter() - t0) / repeats[name]
            rows.append((name, impl_name, dt * 1e6))
            print(f"{name:18s} {impl_name:6s} {dt * 1e6:12.1f} us/call")
    out = Path(args.out)
    harness.write_csv(out / "bench.csv", ["kernel", "backend", "us_per_call"], rows)
    print(f"active backend: {backend.active_backend()}  (AOINOMA_BACKEND to override)")
    return 0


def _hypervolume_cmd(args):
    cfg = _resolve_config(args.config)
    rows = []
    with open(args.front) as fh:
        for rec in csv.DictReader(fh):
            rows.append((float(rec["avg_aoi"]), float(rec["avg_power"])))
    from .env import DisseminationEnv
    env = DisseminationEnv(cfg, seed=0)
    env.reset()
    reference = (env.bounds[1], cfg.p_max)
    pts = np.asarray(rows)
    keep = dominance_filter(pts)
    in_box = [i for i in keep if (pts[i] <= np.asarray(reference)).all()]
    rng = seed_streams(cfg.seed if args.seed is None else args.seed)["hv"]
    hv = hypervolume_mc(pts[in_box], reference, cfg.hv_samples, rng) if in_box \
        else HypervolumeResult(0.0, reference, 0, 0.0)
    harness.write_hypervolumes(Path(args.out) / "hypervolume.csv",
                               [(Path(args.front).stem, hv)])
    print(f"hypervolume {hv.value:.6g} +- {hv.std_error:.2g} "
          f"(ref {reference[0]:.6g}, {reference[1]:.6g})")
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="aoinoma", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("train", help="train one hybrid policy")
    _add_common(p)
    p.add_argument("--zeta", type=float, default=None)

    p = subs.add_parser("meta-train", help="meta-train the shared initialization")
    _add_common(p)

    p = subs.add_parser("fine-tune", help="adapt a meta snapshot to one weight")
    _add_common(p)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--zeta", type=float, required=True)
    p.add_argument("--steps", type=int, default=None)

    p = subs.add_parser("eval", help="evaluate a policy snapshot")
    _add_common(p)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--zeta", type=float, default=None)

    p = subs.add_parser("pareto", help="fronts + hypervolumes for all sources")
    _add_common(p)
    p.add_argument("--sources", default="random,hybrid,meta,meta_ft")

    p = subs.add_parser("hypervolume", help="hypervolume of an existing front CSV")
    _add_common(p)
    p.add_argument("--front", required=True)

    p = subs.add_parser("baseline", help="random or exhaustive baseline")
    _add_common(p)
    p.add_argument("kind", choices=["random", "exhaustive"])
    p.add_argument("--power-levels", type=int, default=10)

    p = subs.add_parser("sweep", help="reproduce one experiment axis")
    _add_common(p)
    p.add_argument("kind", choices=sorted(harness.SWEEPS))

    p = subs.add_parser("bench", help="numba vs numpy kernel timings")
    p.add_argument("--out", default="runs/bench")

    args = parser.parse_args(argv)
    try:
        if args.command == "bench":
            return _bench(args)
        if args.command == "hypervolume":
            return _hypervolume_cmd(args)
        cfg = _resolve_config(args.config)
        seed = cfg.seed if args.seed is None else args.seed
        if args.command == "train":
            harness.run_train(cfg, args.out, seed=seed, zeta=args.zeta)
        elif args.command == "meta-train":
            harness.run_meta_train(cfg, args.out, seed=seed)
        elif args.command == "fine-tune":
            meta_policy = HybridPolicy.load(args.snapshot)
            tuned = fine_tune(cfg, meta_policy, args.zeta, steps=args.steps,
                              seed=seed)
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            tuned.save(out / "policy.bin",
                       manifest={"seed": seed, "zeta": args.zeta,
                                 "steps": args.steps if args.steps is not None
                                 else cfg.meta.finetune_steps})
            harness.write_manifest(out, cfg, seed, [out / "policy.bin"])
        elif args.command == "eval":
            policy = HybridPolicy.load(args.snapshot)
            harness.run_eval(cfg, policy, args.out, seed=seed, zeta=args.zeta)
        elif args.command == "pareto":
            sources = tuple(s.strip() for s in args.sources.split(",") if s.strip())
            harness.run_pareto(cfg, args.out, seed=seed, sources=sources)
        elif args.command == "baseline":
            harness.run_baseline(cfg, args.kind, args.out, seed=seed,
                                 power_levels=args.power_levels)
        elif args.command == "sweep":
            harness.run_sweep(cfg, args.kind, args.out, seed=seed)
        return 0
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
