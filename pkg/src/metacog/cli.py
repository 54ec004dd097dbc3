"""Command line: dataset generation, experiments, ingestion of external detections, evaluation.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import io
from .core import DEFAULT_CATEGORIES, CategoryTable, Detection2D, FrameObservation, SceneData, Theta
from .evaluation import (
    GroundTruthBox,
    accuracy_3d,
    detection_points_2d,
    paired_bootstrap_ci,
    regress,
    rolling_accuracy_curve,
    truth_boxes,
    video_accuracy_2d,
    world_points_2d,
)
from .experiments import (
    _map,
    counterbalanced_orders,
    run_closed_loop,
    run_lw_experiment,
    worker_count,
)
from .generative import NoiseModel
from .geometry import CameraIntrinsics
from .inference import FilterConfig
from .lightweight import LwConfig
from .simulator import THETA_TRUE, LwDatasetParams, item_rng, synthesize_3d_dataset, synthesize_lw_detector

EXIT_CONFIG = 2
EXIT_DATA = 3
FULL_SCALE_DETECTORS = 40_000


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    particles: int = 100
    sweeps: int | None = None  # 20 for the lightweight model, 200 for the full model
    detectors: int = 1000
    worlds: int = 75
    scenes: int = 100
    orders: int = 4
    train_fraction: float = 0.5
    pixel_noise: float = 20.0
    half_width: float = 100.0
    width: int = 800
    height: int = 800
    vertical_fov: float = 60.0
    sigma_xy: float = 200.0
    radius: float = 200.0
    proposal: str = "prior"

    def __post_init__(self):
        for name in ("particles", "detectors", "worlds", "scenes", "orders", "width", "height"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name} must be a positive integer, got {v!r}")
        if self.sweeps is not None and (not isinstance(self.sweeps, int) or self.sweeps < 0):
            raise ConfigError(f"sweeps must be a non-negative integer, got {self.sweeps!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed must be a non-negative integer")
        for name in ("pixel_noise", "half_width", "sigma_xy", "radius"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.vertical_fov < 180:
            raise ConfigError("vertical_fov must lie in (0, 180)")
        if not 0 < self.train_fraction <= 1:
            raise ConfigError("train_fraction must lie in (0, 1]")
        if self.proposal not in ("prior", "enumerate"):
            raise ConfigError("proposal must be 'prior' or 'enumerate'")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        return cls(**d)

    @property
    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.width, self.height, self.vertical_fov)

    @property
    def noise(self) -> NoiseModel:
        return NoiseModel(self.sigma_xy, self.radius)


_FLAG_KEYS = {
    "seed": int,
    "particles": int,
    "sweeps": int,
    "detectors": int,
    "worlds": int,
    "scenes": int,
    "orders": int,
    "pixel_noise": float,
    "half_width": float,
    "proposal": str,
}


def _config(args) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"{args.config}: cannot read config ({exc.strerror})") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc.msg})") from exc
        if not isinstance(base, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
    # only the flags each verb registers as config keys; --scenes/--worlds of eval are paths
    for key in getattr(args, "config_keys", ()):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    if getattr(args, "scale", None) == "full":
        base["detectors"] = FULL_SCALE_DETECTORS
    return RunConfig.from_dict(base)


def _workers() -> int:
    try:
        return worker_count()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _provenance(cfg: RunConfig, kind: str) -> dict:
    d = asdict(cfg)
    return {"format": kind, "version": io.FORMAT_VERSION, "seed": cfg.seed, "config": d, "config_hash": io.config_hash(d)}


# -- gen-lw / run-lw ----------------------------------------------------------------


def _gen_lw_job(args):
    seed, i, worlds = args
    return synthesize_lw_detector(item_rng(seed, i), LwDatasetParams(n_worlds=worlds), detector_id=i)


def cmd_gen_lw(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    h = io.config_hash(asdict(cfg))
    data = _map(_gen_lw_job, [(cfg.seed, i, cfg.worlds) for i in range(cfg.detectors)], _workers())
    files = []
    for d in data:
        name = f"detectors/detector_{d.detector_id:05d}.jsonl"
        io.write_jsonl(out / name, io.lw_detector_records(d, DEFAULT_CATEGORIES, cfg.seed, h))
        files.append(name)
    io.write_manifest(out / "manifest.json", {**_provenance(cfg, "metacog-lw-dataset"), "files": files,
                                              "categories": list(DEFAULT_CATEGORIES.names)})
    print(f"wrote {len(files)} detectors to {out}")
    return 0


def _dataset_files(data_dir: Path, pattern: str) -> list[Path]:
    manifest = data_dir / "manifest.json"
    if manifest.exists():
        m = io.read_manifest(manifest)
        if "files" not in m:
            raise io.DataError("manifest lacks a 'files' list", manifest)
        return [data_dir / f for f in m["files"]]
    files = sorted(data_dir.glob(pattern))
    if not files:
        raise io.DataError(f"no files matching {pattern}", data_dir)
    return files


def cmd_run_lw(args) -> int:
    cfg = _config(args)
    data_dir, out = Path(args.data), Path(args.out)
    dataset = []
    for path in _dataset_files(data_dir, "detectors/*.jsonl"):
        d, _, _ = io.read_lw_detector(path)
        if d.worlds is None or d.theta is None:
            raise io.DataError("run-lw needs ground truth (presence and theta) for evaluation", path)
        dataset.append(d)
    lw_cfg = LwConfig(num_particles=cfg.particles, sweeps=20 if cfg.sweeps is None else cfg.sweeps,
                      world_proposal=cfg.proposal, seed=cfg.seed)
    results = run_lw_experiment(dataset, lw_cfg, cfg.seed, _workers())
    summary = lw_summary(results, lw_cfg)
    write_lw_outputs(out, results, summary, cfg)
    print(json.dumps({k: summary[k] for k in ("final_mse", "acc_learning_first", "acc_learning_final",
                                                "acc_metacog", "acc_lesioned")}, sort_keys=True))
    return 0


def lw_summary(results, lw_cfg: LwConfig) -> dict:
    mse = np.array([r.mse for r in results])
    acc_l = np.array([r.acc_learning for r in results])
    acc_m = np.array([r.acc_metacog for r in results])
    acc_z = np.array([r.acc_lesioned for r in results])
    zeta_w = np.concatenate([r.world_faultiness for r in results])
    mean = lw_cfg.prior_a / (lw_cfg.prior_a + lw_cfg.prior_b)
    lesioned_mse = np.array([np.mean((r.theta_true.as_array() - mean) ** 2) for r in results])
    curve_m = rolling_accuracy_curve(zeta_w, acc_m.ravel())
    curve_z = rolling_accuracy_curve(zeta_w, acc_z.ravel())
    fz = np.array([r.faultiness for r in results])
    reg = regress(fz, mse[:, -1]) if len(results) > 2 else None
    return {
        "n_detectors": len(results),
        "final_mse": float(mse[:, -1].mean()),
        "lesioned_mse": float(lesioned_mse.mean()),
        "mse_curve": mse.mean(0),
        "acc_learning_curve": acc_l.mean(0),
        "acc_metacog_curve": acc_m.mean(0),
        "acc_lesioned_curve": acc_z.mean(0),
        "acc_learning_first": float(acc_l[:, 0].mean()),
        "acc_learning_final": float(acc_l[:, -1].mean()),
        "acc_metacog": float(acc_m.mean()),
        "acc_lesioned": float(acc_z.mean()),
        "faultiness_curve": (curve_m, curve_z),
        "regression": None if reg is None else {"slope": float(reg.slope), "intercept": float(reg.intercept),
                                                "p_value": float(reg.pvalue)},
    }


def write_lw_outputs(out: Path, results, summary: dict, cfg: RunConfig) -> None:
    T = len(summary["mse_curve"])
    io.write_csv(
        out / "learning_curve.csv",
        ["world_index", "mse_learning", "mse_lesioned", "acc_learning", "acc_metacog", "acc_lesioned"],
        [
            (t + 1, summary["mse_curve"][t], summary["lesioned_mse"], summary["acc_learning_curve"][t],
             summary["acc_metacog_curve"][t], summary["acc_lesioned_curve"][t])
            for t in range(T)
        ],
    )
    cm, cz = summary["faultiness_curve"]
    common = np.intersect1d(np.round(cm.x, 10), np.round(cz.x, 10))
    ym = dict(zip(np.round(cm.x, 10), cm.y))
    yz = dict(zip(np.round(cz.x, 10), cz.y))
    nm = dict(zip(np.round(cm.x, 10), cm.n))
    io.write_csv(
        out / "faultiness_curve.csv",
        ["faultiness", "acc_metacog", "acc_lesioned", "acc_difference", "n_worlds"],
        [(float(z), ym[z], yz[z], ym[z] - yz[z], int(nm[z])) for z in common],
    )
    C = results[0].theta_true.n_categories if results else 0
    head = ["detector_id", "faultiness", "final_mse", "acc_learning", "acc_metacog", "acc_lesioned"]
    head += [f"{p}_{c}" for p in ("H_true", "M_true", "H_hat", "M_hat") for c in range(C)]
    io.write_csv(
        out / "detectors.csv",
        head,
        [
            [r.detector_id, r.faultiness, float(r.mse[-1]), float(r.acc_learning.mean()), float(r.acc_metacog.mean()),
             float(r.acc_lesioned.mean())]
            + r.theta_true.hallucination.tolist() + r.theta_true.miss.tolist()
            + r.theta_hats[-1, 0].tolist() + r.theta_hats[-1, 1].tolist()
            for r in results
        ],
    )
    io.write_jsonl(
        out / "theta_trajectories.jsonl",
        [{"detector_id": r.detector_id, "hallucination": r.theta_hats[:, 0].tolist(), "miss": r.theta_hats[:, 1].tolist()}
         for r in results],
    )
    bundle = {**_provenance(cfg, "metacog-lw-results")}
    bundle["summary"] = {k: v for k, v in summary.items() if not isinstance(v, (np.ndarray, tuple))}
    io.write_manifest(out / "results.json", bundle)


# -- gen-3d / run-3d ----------------------------------------------------------------


def cmd_gen_3d(args) -> int:
    cfg = _config(args)
    out = Path(args.out)
    intr = cfg.intrinsics
    h = io.config_hash(asdict(cfg))
    scenes = synthesize_3d_dataset(cfg.scenes, THETA_TRUE, cfg.seed, intr=intr, pixel_noise=cfg.pixel_noise)
    files = []
    for i, s in enumerate(scenes):
        name = f"scenes/scene_{i:05d}.jsonl"
        boxes = truth_boxes(s, intr, cfg.half_width)
        io.write_jsonl(out / name, io.scene_records(s, DEFAULT_CATEGORIES, intr, i, cfg.seed, h, boxes))
        files.append(name)
    manifest = {**_provenance(cfg, "metacog-3d-dataset"), "files": files, "categories": list(DEFAULT_CATEGORIES.names),
                "theta_true": {"hallucination": THETA_TRUE.hallucination.tolist(),
                               "detection": THETA_TRUE.detection.tolist()}}
    io.write_manifest(out / "manifest.json", manifest)
    print(f"wrote {len(files)} scenes to {out}")
    return 0


def _read_scenes(data_dir: Path):
    scenes, boxes, cats, intr = [], [], None, None
    for path in _dataset_files(data_dir, "scenes/*.jsonl"):
        s, c, it, _, b = io.read_scene(path)
        if cats is None:
            cats, intr = c, it
        elif c != cats or it != intr:
            raise io.DataError("category table or intrinsics differ from the first scene", path)
        scenes.append(s)
        boxes.append(b)
    return scenes, boxes, cats, intr


def _order_job(args):
    scenes, order, n_train, theta_true, fcfg, intr, noise, C, half_width, k = args
    ordered = [scenes[i] for i in order]
    fcfg = replace(fcfg, seed=int(np.random.SeedSequence(fcfg.seed, spawn_key=(k,)).generate_state(1)[0]))
    res = run_closed_loop(ordered[:n_train], ordered[n_train:], theta_true, fcfg, intr, noise, C, half_width)
    return order, res


def cmd_run_3d(args) -> int:
    cfg = _config(args)
    data_dir, out = Path(args.data), Path(args.out)
    scenes, _, cats, intr = _read_scenes(data_dir)
    if any(s.ground_truth is None for s in scenes):
        raise io.DataError("run-3d needs ground truth in every scene for evaluation", data_dir)
    theta_true = None
    manifest = data_dir / "manifest.json"
    if manifest.exists():
        tt = io.read_manifest(manifest).get("theta_true")
        if tt is not None:
            theta_true = Theta(tt["hallucination"], tt["detection"])
    C = len(cats)
    sweeps = 200 if cfg.sweeps is None else cfg.sweeps
    fcfg = FilterConfig(num_particles=cfg.particles, sweeps=sweeps, seed=cfg.seed)
    n_train = max(1, int(round(cfg.train_fraction * len(scenes))))
    orders = counterbalanced_orders(len(scenes), cfg.seed, cfg.orders)
    jobs = [(scenes, o, n_train, theta_true, fcfg, intr, cfg.noise, C, cfg.half_width, k) for k, o in enumerate(orders)]
    runs = _map(_order_job, jobs, _workers())
    write_3d_outputs(out, runs, n_train, cats, cfg, degenerate=sweeps == 0)
    return 0


def write_3d_outputs(out: Path, runs, n_train: int, cats: CategoryTable, cfg: RunConfig, degenerate: bool) -> None:
    if runs and len(runs[0][1].mse):
        mse = np.array([r.mse for _, r in runs])
        io.write_csv(
            out / "mse_curve.csv",
            ["scene_index", "mse", "prior_mse"] + [f"mse_order_{k}" for k in range(len(runs))],
            [[t + 1, float(mse[:, t].mean()), runs[0][1].prior_mse] + mse[:, t].tolist() for t in range(mse.shape[1])],
        )
    rows = []
    summary = {}
    for model in ("metacog", "lesioned", "detections", "learning"):
        for split, sl in (("train", slice(0, n_train)), ("test", slice(n_train, None))):
            acc = [r.acc2d[model][sl] for _, r in runs]
            if sum(len(a) for a in acc) == 0:
                continue
            jac = [r.jaccard[model][sl] for _, r in runs] if model in runs[0][1].jaccard else None
            dist = [d for _, r in runs if model in r.distance for d in r.distance[model][sl] if d is not None]
            row = [model, split, float(np.mean([a.mean() for a in acc if len(a)])),
                   None if jac is None else float(np.mean([j.mean() for j in jac if len(j)])),
                   float(np.mean(dist)) if dist else None, degenerate]
            rows.append(row)
            summary[f"{model}_{split}_acc2d"] = row[2]
    io.write_csv(out / "accuracy.csv", ["model", "split", "acc2d", "jaccard", "distance_3d", "degenerate"], rows)
    recs = []
    for k, (order, r) in enumerate(runs):
        for model, worlds in r.worlds.items():
            for pos, w in enumerate(worlds):
                recs.append({"order": k, "model": model, "scene_id": int(order[pos]),
                             "split": "train" if pos < n_train else "test",
                             "world": io.world_record(w, cats)})
    io.write_jsonl(out / "worlds.jsonl", recs)
    for k, (_, r) in enumerate(runs):
        if len(r.acc2d["metacog"]):
            for other in ("detections", "lesioned"):
                summary[f"order{k}_metacog_minus_{other}"] = paired_bootstrap_ci(r.acc2d["metacog"], r.acc2d[other])
    bundle = {**_provenance(cfg, "metacog-3d-results"), "summary": summary, "degenerate": degenerate,
              "theta_hat": [{"hallucination": r.theta_hats[-1].hallucination.tolist(),
                             "detection": r.theta_hats[-1].detection.tolist()} for _, r in runs],
              "diagnostics": [[asdict(d) for d in r.diagnostics] for _, r in runs]}
    io.write_manifest(out / "results.json", _clean(bundle))


def _clean(obj):
    """Replace NaN with None so that results stay strict JSON."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


# -- ingest / eval ------------------------------------------------------------------


def _centre(rec, path, line):
    if "box" in rec:
        box = io._floats(rec["box"], 4, "box", path, line)
        return (box[0] + box[2]) / 2.0, (box[1] + box[3]) / 2.0, box
    x, y = io._floats([rec.get("x"), rec.get("y")], 2, "x/y", path, line)
    return x, y, None


def _frame_of(rec, path, line) -> int:
    t = rec.get("frame")
    if isinstance(t, bool) or not isinstance(t, int) or t < 0:
        raise io.DataError("field 'frame' must be a non-negative integer", path, line)
    return t


def cmd_ingest(args) -> int:
    cfg = _config(args)
    cats = CategoryTable(args.categories.split(",")) if args.categories else DEFAULT_CATEGORIES
    poses = {}
    for line, rec in io.read_jsonl(args.trajectories):
        t = _frame_of(rec, args.trajectories, line)
        if t in poses:
            raise io.DataError(f"duplicate pose for frame {t}", args.trajectories, line)
        poses[t] = io.parse_pose(rec, args.trajectories, line)
    dets: dict[int, list] = {}
    for line, rec in io.read_jsonl(args.detections):
        t = _frame_of(rec, args.detections, line)
        x, y, _ = _centre(rec, args.detections, line)
        dets.setdefault(t, []).append(Detection2D(x, y, io._category(rec.get("category"), cats, args.detections, line)))
    boxes: dict[int, list] = {}
    if args.truth:
        for line, rec in io.read_jsonl(args.truth):
            t = _frame_of(rec, args.truth, line)
            x, y, box = _centre(rec, args.truth, line)
            if box is None:
                raise io.DataError("truth records need a 'box'", args.truth, line)
            try:
                b = GroundTruthBox(x, y, (box[2] - box[0]) / 2.0, (box[3] - box[1]) / 2.0,
                                   io._category(rec.get("category"), cats, args.truth, line))
            except ValueError as exc:
                if isinstance(exc, io.DataError):
                    raise
                raise io.DataError(str(exc), args.truth, line) from exc
            boxes.setdefault(t, []).append(b)
    n = max([*poses, *dets, *boxes], default=-1) + 1
    for t in range(n):
        if t not in poses:
            raise io.DataError(f"missing pose for frame {t}", args.trajectories)
    if n == 0:
        raise io.DataError("no frames", args.trajectories)
    frames = tuple(FrameObservation(poses[t], tuple(dets.get(t, ()))) for t in range(n))
    scene = SceneData(frames)
    box_list = [boxes.get(t, []) for t in range(n)] if args.truth else None
    recs = io.scene_records(scene, cats, cfg.intrinsics, 0, None, io.config_hash(asdict(cfg)), box_list)
    io.write_jsonl(args.out, recs)
    print(f"wrote {n} frames with {scene.n_detections()} detections to {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    data = Path(args.scenes)
    if data.is_file():
        s, cats, intr, head, b = io.read_scene(data)
        scenes, boxes, ids = [s], [b], [head.get("scene_id", 0)]
    else:
        scenes, boxes, cats, intr = _read_scenes(data)
        ids = list(range(len(scenes)))
    inferred = {}
    if args.worlds:
        for line, rec in io.read_jsonl(args.worlds):
            if args.model and rec.get("model") != args.model:
                continue
            if args.order is not None and rec.get("order") != args.order:
                continue
            sid = rec.get("scene_id")
            if sid in inferred:
                raise io.DataError(f"several worlds for scene {sid}; filter with --model/--order", args.worlds, line)
            inferred[sid] = io.parse_world(rec.get("world"), cats, args.worlds, line)
    rows = []
    for sid, s, b in zip(ids, scenes, boxes):
        if b is None:
            if s.ground_truth is None:
                raise io.DataError(f"scene {sid} has neither truth boxes nor ground truth")
            b = truth_boxes(s, intr, cfg.half_width)
        if args.worlds:
            if sid not in inferred:
                continue
            w = inferred[sid]
            acc = video_accuracy_2d(world_points_2d(w, s.frames, intr), b)
            jac, dist = accuracy_3d(w, s.ground_truth) if s.ground_truth is not None else (None, None)
        else:
            acc = video_accuracy_2d(detection_points_2d(s.frames), b)
            jac = dist = None
        rows.append([sid, acc, jac, dist])
    if not rows:
        raise io.DataError("no scene matched the inferred worlds", args.worlds)
    io.write_csv(args.out, ["scene_id", "acc2d", "jaccard", "distance_3d"], rows)
    print(f"mean acc2d {np.mean([r[1] for r in rows]):.4f} over {len(rows)} scenes")
    return 0


# -- parser ---------------------------------------------------------------------------


def _common(p, *keys):
    p.add_argument("--config", help="JSON file with RunConfig keys; flags override it")
    p.add_argument("--seed", type=int)
    for key in keys:
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=_FLAG_KEYS[key])
    p.set_defaults(config_keys=("seed", *keys))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metacog", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-lw", help="synthesise presence-vector detectors")
    _common(p, "detectors", "worlds")
    p.add_argument("--scale", choices=("desk", "full"), default="desk")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_lw)

    p = sub.add_parser("run-lw", help="learning, re-inference and lesioned runs on a detector dataset")
    _common(p, "particles", "sweeps", "proposal")
    p.add_argument("--scale", choices=("desk", "full"), default="desk")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run_lw)

    p = sub.add_parser("gen-3d", help="synthesise closed-loop 3-d scenes")
    _common(p, "scenes", "pixel_noise", "half_width")
    p.add_argument("--scale", choices=("desk", "full"), default="desk")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_3d)

    p = sub.add_parser("run-3d", help="full-model closed loop with lesioned and detection baselines")
    _common(p, "particles", "sweeps", "orders", "half_width")
    p.add_argument("--scale", choices=("desk", "full"), default="desk")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run_3d)

    p = sub.add_parser("ingest", help="convert external detections and camera poses to a scene file")
    _common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--trajectories", required=True)
    p.add_argument("--truth")
    p.add_argument("--categories", help="comma-separated labels (default: the five built-in categories)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("eval", help="2-d and 3-d accuracy of inferred worlds (or raw detections)")
    _common(p, "half_width")
    p.add_argument("--scenes", required=True, help="scene file or dataset directory")
    p.add_argument("--worlds", help="worlds.jsonl from run-3d; omit to score the raw detections")
    p.add_argument("--model")
    p.add_argument("--order", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"metacog: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except io.DataError as exc:
        print(f"metacog: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
