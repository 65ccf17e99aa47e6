"""Command-line front door: dataset generation, surrogate training,
latency benchmarking, task simulation, file-based inference, and the
streaming session service.

Options resolve as CLI flag > config file > built-in default. The
config file is one flat JSON object whose keys are the flag names with
dashes replaced by underscores, shared across subcommands, e.g.
{"count": 20000, "epochs": 800, "port": 9000}.

Exit codes: 0 ok, 2 usage error, 3 data or filesystem error,
4 runtime error.
"""

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import config, priors, trajio
from .errors import DataFormatError, ReachIntentError, StaleCacheError
from .generator import (ControllerGains, Trajectory, empty_scene,
                        rest_posture)
from .inference import (InferenceConfig, InferenceGrid, SimulatorGenerator,
                        SurrogateGenerator, build_cache, decision_summary,
                        default_grid, grid_posterior, write_ipos)
from .kinematics import default_arm_model
from .service import build_runtime, run_service, scene_from_json
from .surrogate import (TrainConfig, batch_forward_array, build_dataset,
                        forward, load_weights, save_weights, train,
                        weights_hash)
from .tasksim import (POLICIES, EngineHandles, aggregate_metrics,
                      compute_metrics, default_task_scene,
                      export_task_diagram, run_policy, select_safe_object,
                      write_task_log)

DEFAULTS = {
    "count": 10000,
    "seed": 0,
    "epochs": 500,
    "repeats": 200,
    "policy": "all",
    "seeds": 10,
    "index": 0,
    "fraction": 1.0,
    "host": "127.0.0.1",
    "port": 8734,
    "p_safe": 0.05,
    "conflict_radius": 0.15,
}


class UsageError(Exception):
    """Bad flag/config combination; maps to exit code 2."""


def _opt(args, key):
    v = getattr(args, key, None)
    if v is not None:
        return v
    if key in args.config_values:
        return args.config_values[key]
    return DEFAULTS.get(key)


def _req(args, key):
    v = _opt(args, key)
    if v is None:
        flag = "--" + key.replace("_", "-")
        raise UsageError(f"{flag} is required (flag or config file)")
    return v


def _int(args, key):
    try:
        return int(_req(args, key))
    except (TypeError, ValueError):
        raise UsageError(f"{key} must be an integer") from None


def _float(args, key):
    try:
        return float(_req(args, key))
    except (TypeError, ValueError):
        raise UsageError(f"{key} must be a number") from None


def _load_scene_file(path):
    with open(path) as fh:
        return scene_from_json(json.load(fh))


def _scene_or_empty(args):
    path = _opt(args, "scene")
    return _load_scene_file(path) if path else empty_scene()


def cmd_gen_dataset(args):
    count = _int(args, "count")
    seed = _int(args, "seed")
    out = Path(_req(args, "out"))
    scene = _scene_or_empty(args)
    model = default_arm_model()
    started = time.perf_counter()
    ds = build_dataset(model, ControllerGains(), scene,
                       rest_posture(model), n=count, seed=seed)
    elapsed = time.perf_counter() - started
    trajio.write_dataset(out, ds)
    rate = count / elapsed if elapsed > 0 else float("inf")
    print(f"wrote {count} trajectories to {out} in {elapsed:.1f} s "
          f"({rate:.0f} trajectories/s)")
    return 0


def cmd_train(args):
    ds = trajio.read_dataset(_req(args, "dataset"))
    out = Path(_req(args, "out"))
    net, report = train(ds, TrainConfig(epochs=_int(args, "epochs"),
                                        seed=_int(args, "seed")))
    save_weights(net, out)
    print(json.dumps({
        "epochs": report.epochs,
        "train_loss": report.train_loss,
        "test_loss": report.test_loss,
        "test_mean_point_error_m": report.test_mean_point_error,
        "weights": str(out),
        "weights_hash": weights_hash(net),
    }, indent=2))
    return 0


def _parse_grid(spec):
    if spec is None:
        return default_grid()
    try:
        nx, ny = (int(v) for v in str(spec).split(","))
    except ValueError:
        raise UsageError("grid must be 'NX,NY'") from None
    return InferenceGrid(nx=nx, ny=ny)


def cmd_bench(args):
    net = load_weights(_req(args, "surrogate"))
    repeats = _int(args, "repeats")
    started = time.perf_counter()
    grid = build_cache(_parse_grid(_opt(args, "grid")),
                       SurrogateGenerator(net))
    cache_s = time.perf_counter() - started

    target = np.array([0.15, 0.40, 0.0])
    observed = forward(net, target)
    prior = priors.default_intent_prior(empty_scene())
    cfg = InferenceConfig()
    t_index = min(45, grid.cell_trajectories.shape[1] - 1)

    started = time.perf_counter()
    grid_posterior(grid, prior, cfg, observed, t_index)
    cold_ms = (time.perf_counter() - started) * 1e3

    warm = np.empty(repeats)
    for k in range(repeats):
        started = time.perf_counter()
        grid_posterior(grid, prior, cfg, observed, t_index)
        warm[k] = (time.perf_counter() - started) * 1e3

    # generation ratio: per-trajectory cost of the physical simulator
    # against the surrogate, simulator side sampled small and scaled
    centers = grid.cell_centers()
    sur_batch = centers[:: max(1, len(centers) // 256)][:256]
    started = time.perf_counter()
    batch_forward_array(net, sur_batch)
    sur_per = (time.perf_counter() - started) / len(sur_batch)
    model = default_arm_model()
    sim = SimulatorGenerator(model, ControllerGains(), empty_scene(),
                             rest_posture(model))
    sim_sample = centers[:: max(1, len(centers) // 8)][:8]
    started = time.perf_counter()
    sim.batch_points(sim_sample)
    sim_per = (time.perf_counter() - started) / len(sim_sample)

    print(json.dumps({
        "grid": {"nx": grid.nx, "ny": grid.ny,
                 "cells": grid.n_cells},
        "cache_build_s": cache_s,
        "cold_ms": cold_ms,
        "warm_ms": {
            "mean": float(warm.mean()),
            "p50": float(np.percentile(warm, 50)),
            "p99": float(np.percentile(warm, 99)),
        },
        "repeats": repeats,
        "generation": {
            "surrogate_per_traj_ms": sur_per * 1e3,
            "simulator_per_traj_ms": sim_per * 1e3,
            "ratio": sim_per / sur_per,
            "surrogate_batch": len(sur_batch),
            "simulator_sampled": len(sim_sample),
        },
    }, indent=2))
    return 0


def _fmt(v):
    return "-" if v is None else f"{v:.2f}"


def cmd_simulate(args):
    policy = str(_req(args, "policy"))
    if policy != "all" and policy not in POLICIES:
        raise UsageError(f"policy must be one of {', '.join(POLICIES)}, "
                         f"or all")
    policies = POLICIES if policy == "all" else (policy,)
    n_seeds = _int(args, "seeds")
    out_dir = Path(_req(args, "out"))
    fixed_scene = None
    if _opt(args, "scene"):
        fixed_scene = _load_scene_file(_opt(args, "scene"))

    handles = None
    if "intent_prediction" in policies:
        weights = _opt(args, "surrogate")
        if weights is None:
            raise UsageError(
                "--surrogate is required for the intent_prediction policy")
        net = load_weights(weights)
        grid = build_cache(default_grid(), SurrogateGenerator(net))
        handles = EngineHandles(model=default_arm_model(),
                                gains=ControllerGains(), grid=grid,
                                inference_config=InferenceConfig())

    out_dir.mkdir(parents=True, exist_ok=True)
    runs = []
    aggregate = {}
    for pol in policies:
        logs = []
        for seed in range(n_seeds):
            scene = fixed_scene or default_task_scene(seed)
            log = run_policy(pol, scene, handles, seed=seed)
            stem = f"{pol}_seed{seed}"
            write_task_log(out_dir / f"{stem}.jsonl", log)
            export_task_diagram(log, out_dir / f"{stem}.svg")
            m = compute_metrics(log)
            runs.append({"policy": pol, "seed": seed,
                         **dataclasses.asdict(m),
                         "log": f"{stem}.jsonl",
                         "diagram": f"{stem}.svg"})
            print(f"{pol} seed {seed}: T={m.T:.2f} FD={_fmt(m.FD)} "
                  f"RI={_fmt(m.RI)} HI={_fmt(m.HI)}")
            logs.append(log)
        aggregate[pol] = aggregate_metrics(logs)
    (out_dir / "metrics.json").write_text(json.dumps(
        {"aggregate": aggregate, "runs": runs}, indent=2) + "\n")
    print(f"wrote {len(runs)} task logs to {out_dir}")
    return 0


def cmd_infer_file(args):
    net = load_weights(_req(args, "surrogate"))
    grid = build_cache(default_grid(), SurrogateGenerator(net))
    traj_path = str(_req(args, "trajectory"))
    index = _int(args, "index")
    fraction = _float(args, "fraction")
    if not 0.0 < fraction <= 1.0:
        raise UsageError("fraction must be in (0, 1]")

    if traj_path.endswith(".jsonl"):
        ds = trajio.read_jsonl(traj_path)
    else:
        ds = trajio.read_dataset(traj_path)
    if not 0 <= index < len(ds):
        raise UsageError(f"index {index} outside dataset of {len(ds)}")
    points = np.asarray(ds.points[index], dtype=float)
    target = np.asarray(ds.targets[index], dtype=float)
    n_use = max(1, int(round(fraction * len(points))))
    observed = Trajectory(points=points[:n_use], dt=ds.dt)

    scene = _scene_or_empty(args)
    prior = priors.default_intent_prior(scene)
    posterior = grid_posterior(grid, prior, InferenceConfig(), observed,
                               n_use - 1)
    emit = _opt(args, "emit_posterior")
    if emit:
        write_ipos(emit, posterior)

    map_point = posterior.map_point
    doc = {
        "trajectory": traj_path,
        "index": index,
        "n_points_used": n_use,
        "map_cell": posterior.map_cell,
        "map_point": [float(map_point[0]), float(map_point[1])],
        "target": [float(target[0]), float(target[1])],
        "target_error_m": float(np.linalg.norm(map_point[:2]
                                               - target[:2])),
        "degenerate": posterior.degenerate,
    }
    if scene.objects:
        probs = decision_summary(posterior, scene,
                                 _float(args, "conflict_radius"))
        pick = select_safe_object(scene.objects, probs,
                                  _float(args, "p_safe"))
        doc["decision"] = {
            "object_probs": {str(i): probs[i] for i in sorted(probs)},
            "safe_object": None if pick is None else pick.id,
        }
    if emit:
        doc["posterior"] = str(emit)
    print(json.dumps(doc, indent=2))
    return 0


def cmd_serve(args):
    scene = None
    if _opt(args, "scene"):
        scene = _load_scene_file(_opt(args, "scene"))
    else:
        scene = default_task_scene(0)
    runtime = build_runtime(_req(args, "surrogate"), scene=scene,
                            p_safe=_float(args, "p_safe"),
                            conflict_radius=_float(args,
                                                   "conflict_radius"))
    ws_port = _opt(args, "ws_port")
    return run_service(runtime, host=str(_req(args, "host")),
                       port=_int(args, "port"),
                       ws_port=None if ws_port is None else int(ws_port))


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE",
                        help="flat JSON config; flags win over it")

    parser = argparse.ArgumentParser(
        prog="reachintent",
        description="Reach-intent inference toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-dataset", parents=[common],
                       help="generate a reach trajectory dataset")
    p.add_argument("--count", type=int)
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    p.add_argument("--scene", help="scene JSON file")
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("train", parents=[common],
                       help="train the trajectory surrogate")
    p.add_argument("--dataset")
    p.add_argument("--out")
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench", parents=[common],
                       help="measure inference latency and generation "
                            "speedup")
    p.add_argument("--surrogate")
    p.add_argument("--repeats", type=int)
    p.add_argument("--grid", help="NX,NY cell counts")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("simulate", parents=[common],
                       help="run collaborative task policies")
    p.add_argument("--policy",
                   help="one policy name, or all")
    p.add_argument("--seeds", type=int, help="number of seeds, 0..N-1")
    p.add_argument("--out", help="output directory")
    p.add_argument("--surrogate")
    p.add_argument("--scene", help="fixed scene JSON for every seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer-file", parents=[common],
                       help="posterior for a stored trajectory")
    p.add_argument("--surrogate")
    p.add_argument("--trajectory", help=".jsonl or binary dataset file")
    p.add_argument("--index", type=int)
    p.add_argument("--fraction", type=float,
                   help="leading fraction of points to observe")
    p.add_argument("--scene", help="scene JSON file")
    p.add_argument("--emit-posterior", help="binary posterior out path")
    p.add_argument("--p-safe", type=float)
    p.add_argument("--conflict-radius", type=float)
    p.set_defaults(func=cmd_infer_file)

    p = sub.add_parser("serve", parents=[common],
                       help="streaming inference service")
    p.add_argument("--surrogate")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--ws-port", type=int,
                   help="also serve WebSocket on this port")
    p.add_argument("--scene", help="default scene JSON file")
    p.add_argument("--p-safe", type=float)
    p.add_argument("--conflict-radius", type=float)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.config_values = {}
        if getattr(args, "config", None):
            with open(args.config) as fh:
                loaded = json.load(fh)
            if not isinstance(loaded, dict):
                raise UsageError("config file must hold one JSON object")
            args.config_values = loaded
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (DataFormatError, StaleCacheError, OSError,
            json.JSONDecodeError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except ReachIntentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
