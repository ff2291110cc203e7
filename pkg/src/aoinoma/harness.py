"""Experiment orchestration, presets, persistence, and CSV emission.

Each run lands in one output directory holding a manifest (config hash,
code version, seeds, timestamps, artifact paths) plus deterministic CSV
files: learning curves, fronts, hypervolumes, sweep tables, and episode
traces. Re-running with the same config and seed reproduces the CSVs
byte for byte; only the manifest timestamp differs.

Named experiment presets mirror the headline studies: objective and
trade-off versus the preference weight, front quality for all four
policy sources, scaling in vehicles / processes / per-vehicle demand,
speed and environment generalization, and fine-tuning depth.
"""

import csv
import dataclasses
import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .agents import evaluate_policy, train_hybrid
from .aoi import scalarize
from .config import ExperimentConfig, seed_streams
from .env import DisseminationEnv
from .geometry import RoadConfig
from .meta import fine_tune, meta_train
from .pareto import build_front, exhaustive_search, random_policy_eval


def desk_config(**overrides):
    """A compact, runnable configuration.

    The full-scale defaults keep the published parameter table, whose
    noise floor leaves every link undecodable at these distances; this
    preset shrinks the road and noise so the power/age trade-off is live
    at desk scale.
    """
    base = dict(
        vehicles=6, processes=2, demand_per_vehicle=1,
        antennas=16, noise_power=1e-6,
        road=RoadConfig(segment_length=600.0, rsu_position=(300.0, 10.0),
                        horizon=40),
        train=None, meta=None,
    )
    base.pop("train"), base.pop("meta")
    cfg = ExperimentConfig(**base)
    cfg.train.episodes = 150
    cfg.train.hidden = (64, 64)
    cfg.train.replay_capacity = 20_000
    cfg.meta.iterations = 40
    cfg.meta.inner_steps = 4
    cfg.meta.tasks_per_iter = 3
    cfg.meta.inner_lr_dqn = 0.01
    cfg.hv_samples = 200_000
    d = cfg.to_dict()
    for key, val in overrides.items():
        if isinstance(val, dict) and key in d and isinstance(d[key], dict):
            d[key].update(val)
        else:
            d[key] = val
    return ExperimentConfig.from_dict(d)


# -- manifests and CSV writers -------------------------------------------------


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])
    return path


def write_manifest(out_dir, cfg, seed, artifacts, extra=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "config_hash": cfg.config_hash(),
        "code_version": __version__,
        "seed": seed,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "artifacts": [str(Path(a).name) for a in artifacts],
    }
    manifest.update(extra or {})
    path = out_dir / "manifest.json"
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    with open(out_dir / "config.json", "w") as fh:
        fh.write(cfg.to_json() + "\n")
    return path


def write_learning_curve(path, rewards, running):
    rows = [(i + 1, r, m) for i, (r, m) in enumerate(zip(rewards, running))]
    return write_csv(path, ["episode", "reward", "running_mean"], rows)


def write_front(path, points):
    rows = [(p.zeta, p.avg_aoi, p.avg_power, p.dominated, p.tag, p.seed)
            for p in points]
    return write_csv(path, ["zeta", "avg_aoi", "avg_power", "dominated", "tag", "seed"],
                     rows)


def write_hypervolumes(path, entries):
    rows = [(tag, hv.value, hv.std_error, hv.reference[0], hv.reference[1],
             hv.n_samples) for tag, hv in entries]
    return write_csv(path, ["tag", "hypervolume", "std_error", "ref_aoi",
                            "ref_power", "n_samples"], rows)


def write_trace(path, env):
    rows = []
    for (t, order_idx, alphas, reward, agg_age, slot_power) in env.trace:
        rows.append((t, order_idx,
                     "|".join(repr(float(a)) for a in alphas), reward,
                     "|".join(repr(float(a)) for a in agg_age), slot_power))
    return write_csv(path, ["t", "order", "alphas", "reward", "agg_aoi",
                            "slot_power"], rows)


def training_cost(n_points, cfg):
    """Episode bookkeeping for an n-point front: retrain-per-point vs meta."""
    meta_total = cfg.meta.iterations + cfg.meta.finetune_steps * n_points
    hybrid_total = cfg.train.episodes * n_points
    return {"points": n_points, "meta_total": meta_total,
            "hybrid_total": hybrid_total,
            "ratio": meta_total / hybrid_total if hybrid_total else float("inf")}


# -- run commands ---------------------------------------------------------------


def run_train(cfg, out_dir, seed=None, zeta=None):
    seed = cfg.seed if seed is None else seed
    policy, rewards, running = train_hybrid(cfg, zeta=zeta, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    curve = write_learning_curve(out / "learning_curve.csv", rewards, running)
    snap = out / "policy.bin"
    policy.save(snap, manifest={"seed": seed, "episodes": cfg.train.episodes,
                                "zeta": policy.zeta})
    write_manifest(out, cfg, seed, [curve, snap])
    return policy


def run_meta_train(cfg, out_dir, seed=None):
    seed = cfg.seed if seed is None else seed
    policy, info = meta_train(cfg, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    snap = out / "meta_policy.bin"
    policy.save(snap, manifest={"seed": seed, **info,
                                "inner_steps": cfg.meta.inner_steps,
                                "tasks_per_iter": cfg.meta.tasks_per_iter,
                                "mode": cfg.meta.mode})
    write_manifest(out, cfg, seed, [snap], extra={"meta": info})
    return policy


def run_eval(cfg, policy, out_dir, seed=None, zeta=None):
    seed = cfg.seed if seed is None else seed
    zeta = policy.zeta if zeta is None else zeta
    env_seed = int(seed_streams(seed)["eval"].integers(2 ** 63))
    aoi_m, pow_m, pairs = evaluate_policy(cfg, policy, cfg.eval_episodes,
                                          env_seed, zeta=zeta)
    env = DisseminationEnv(cfg, seed=env_seed, zeta=zeta)
    s = env.normalizer(env.reset())
    done = False
    while not done:
        o = policy.act_discrete(s, 0.0, None)
        a = policy.act_continuous(s, 0.0, None)
        raw, _, done = env.step(o, a)
        s = env.normalizer(raw)
    out = Path(out_dir)
    trace = write_trace(out / "episode_trace.csv", env)
    summary = write_csv(out / "eval_summary.csv",
                        ["zeta", "avg_aoi", "avg_power", "episodes"],
                        [(zeta, aoi_m, pow_m, cfg.eval_episodes)])
    write_manifest(out, cfg, seed, [trace, summary])
    return aoi_m, pow_m, pairs


def _reference_point(cfg):
    env = DisseminationEnv(cfg, seed=0)
    env.reset()
    return (env.bounds[1], cfg.p_max)


def pareto_sources(cfg, seed, sources=("random", "hybrid", "meta", "meta_ft")):
    """Providers mapping zeta -> (avg aoi, avg power) for each policy family."""
    streams = seed_streams(seed)
    eval_seed = int(streams["eval"].integers(2 ** 63))
    providers = {}
    if "random" in sources:
        def random_provider(z):
            a, p, _, _ = random_policy_eval(cfg, cfg.eval_episodes, seed, zeta=z)
            return a, p
        providers["random"] = random_provider
    if "hybrid" in sources:
        def hybrid_provider(z):
            policy, _, _ = train_hybrid(cfg, zeta=z, seed=seed)
            a, p, _ = evaluate_policy(cfg, policy, cfg.eval_episodes, eval_seed,
                                      zeta=z)
            return a, p
        providers["hybrid"] = hybrid_provider
    if "meta" in sources or "meta_ft" in sources:
        meta_policy, _ = meta_train(cfg, seed=seed)
        if "meta" in sources:
            def meta_provider(z, _mp=meta_policy):
                a, p, _ = evaluate_policy(cfg, _mp, cfg.eval_episodes, eval_seed,
                                          zeta=z)
                return a, p
            providers["meta"] = meta_provider
        if "meta_ft" in sources:
            def meta_ft_provider(z, _mp=meta_policy):
                tuned = fine_tune(cfg, _mp, z, seed=seed)
                a, p, _ = evaluate_policy(cfg, tuned, cfg.eval_episodes, eval_seed,
                                          zeta=z)
                return a, p
            providers["meta_ft"] = meta_ft_provider
    return providers


def run_pareto(cfg, out_dir, seed=None, sources=("random", "hybrid", "meta", "meta_ft")):
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reference = _reference_point(cfg)
    providers = pareto_sources(cfg, seed, sources)
    hv_rng_master = seed_streams(seed)["hv"]
    artifacts, hv_entries, fronts = [], [], {}
    for tag in sources:
        rng = np.random.default_rng(hv_rng_master.integers(2 ** 63))
        points, hv = build_front(providers[tag], cfg.zeta_grid, reference,
                                 cfg.hv_samples, rng, tag, seed=seed)
        artifacts.append(write_front(out / f"front_{tag}.csv", points))
        hv_entries.append((tag, hv))
        fronts[tag] = (points, hv)
    artifacts.append(write_hypervolumes(out / "hypervolume.csv", hv_entries))
    cost_rows = []
    for n in range(1, len(cfg.zeta_grid) + 1):
        c = training_cost(n, cfg)
        cost_rows.append((n, c["meta_total"], c["hybrid_total"], c["ratio"]))
    artifacts.append(write_csv(out / "training_cost.csv",
                               ["points", "meta_episodes", "hybrid_episodes",
                                "ratio"], cost_rows))
    write_manifest(out, cfg, seed, artifacts)
    return fronts


def run_baseline(cfg, kind, out_dir, seed=None, power_levels=10):
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "random":
        aoi_m, pow_m, obj, pairs = random_policy_eval(cfg, cfg.eval_episodes, seed)
    elif kind == "exhaustive":
        _, (aoi_m, pow_m, obj, pairs) = exhaustive_search(
            cfg, power_levels=power_levels, seed=seed, episodes=cfg.eval_episodes)
    else:
        raise ValueError(f"unknown baseline {kind!r}")
    path = write_csv(out / f"baseline_{kind}.csv",
                     ["zeta", "avg_aoi", "avg_power", "objective", "episodes"],
                     [(cfg.zeta, aoi_m, pow_m, obj, cfg.eval_episodes)])
    write_manifest(out, cfg, seed, [path])
    return aoi_m, pow_m, obj


SWEEPS = {
    "zeta": "objective and trade-off versus the preference weight",
    "vehicles": "objective versus vehicle count at zeta=0.5",
    "processes": "objective versus process count, demand ceil(F/2)",
    "demand": "objective versus per-vehicle demand size",
    "speed": "fine-tuning at higher deployment speeds",
    "finetune-steps": "objective versus fine-tuning depth",
}


def _sweep_cells(cfg, kind):
    if kind == "zeta":
        return [("zeta", z, cfg) for z in cfg.zeta_grid]
    if kind == "vehicles":
        cells = []
        for v in range(4, 17, 2):
            d = cfg.to_dict()
            d["vehicles"] = v
            d["zeta"] = 0.5
            cells.append(("vehicles", v, ExperimentConfig.from_dict(d)))
        return cells
    if kind == "processes":
        cells = []
        for f in (2, 3, 4):
            d = cfg.to_dict()
            d["processes"] = f
            d["demand_per_vehicle"] = (f + 1) // 2
            d["zeta"] = 0.5
            cells.append(("processes", f, ExperimentConfig.from_dict(d)))
        return cells
    if kind == "demand":
        cells = []
        for r in range(1, cfg.processes + 1):
            d = cfg.to_dict()
            d["demand_per_vehicle"] = r
            d["zeta"] = 0.5
            cells.append(("demand", r, ExperimentConfig.from_dict(d)))
        return cells
    if kind == "speed":
        cells = []
        for s in (20.0, 25.0, 30.0):
            d = cfg.to_dict()
            d["speed_range"] = [s, s]
            d["zeta"] = 0.5
            cells.append(("speed", s, ExperimentConfig.from_dict(d)))
        return cells
    if kind == "finetune-steps":
        return [("finetune_steps", k, cfg)
                for k in range(0, cfg.meta.finetune_steps + 1,
                               max(1, cfg.meta.finetune_steps // 5))]
    raise ValueError(f"unknown sweep {kind!r}: choose from {sorted(SWEEPS)}")


def run_sweep(cfg, kind, out_dir, seed=None):
    """Train and evaluate across one experiment axis; emit a summary CSV."""
    seed = cfg.seed if seed is None else seed
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    if kind in ("speed", "finetune-steps"):
        meta_policy, _ = meta_train(cfg, seed=seed)
    for axis, value, cell_cfg in _sweep_cells(cfg, kind):
        z = cell_cfg.zeta
        eval_seed = int(seed_streams(seed)["eval"].integers(2 ** 63))
        if kind == "finetune-steps":
            tuned = fine_tune(cell_cfg, meta_policy, z, steps=int(value), seed=seed)
            a, p, _ = evaluate_policy(cell_cfg, tuned, cell_cfg.eval_episodes,
                                      eval_seed, zeta=z)
        elif kind == "speed":
            tuned = fine_tune(cell_cfg, meta_policy, z, seed=seed)
            a, p, _ = evaluate_policy(cell_cfg, tuned, cell_cfg.eval_episodes,
                                      eval_seed, zeta=z)
        else:
            policy, _, _ = train_hybrid(cell_cfg, zeta=z, seed=seed)
            a, p, _ = evaluate_policy(cell_cfg, policy, cell_cfg.eval_episodes,
                                      eval_seed, zeta=z)
        env = DisseminationEnv(cell_cfg, seed=0, zeta=z)
        env.reset()
        obj = scalarize(a, p, z, env.bounds, cell_cfg.p_max)
        rows.append((axis, value, z, a, p, obj))
    path = write_csv(out / f"sweep_{kind.replace('-', '_')}.csv",
                     ["axis", "value", "zeta", "avg_aoi", "avg_power", "objective"],
                     rows)
    write_manifest(out, cfg, seed, [path])
    return rows
