"""Line-delimited JSON files for detectors, scenes and results.

Each file starts with a header record carrying the format name and version,
the category table, the seed and a hash of the generating configuration.
Floats are written with ``repr`` precision, so values round-trip exactly.
See FORMATS.md for the record layouts.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Any, Iterable

import numpy as np

from .core import CategoryTable, Detection2D, FrameObservation, Object3D, SceneData, WorldState
from .geometry import CameraIntrinsics, CameraPose
from .lightweight import LwDetectorData, LwTheta, LwWorldState

FORMAT_VERSION = 1


class DataError(ValueError):
    """Malformed or inconsistent input data; carries the path and line when known."""

    def __init__(self, message: str, path=None, line: int | None = None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def dumps(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_jsonl(path, records: Iterable[dict]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(dumps(rec) + "\n")
    except OSError as exc:
        raise DataError(f"cannot write: {exc.strerror}", path) from exc


def read_jsonl(path) -> list[tuple[int, dict]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read: {exc.strerror}", path) from exc
    out = []
    for no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON ({exc.msg})", path, no) from exc
        if not isinstance(rec, dict):
            raise DataError("each line must be a JSON object", path, no)
        out.append((no, rec))
    if not out:
        raise DataError("empty file", path)
    return out


def _field(rec: dict, key: str, path, line, kind=None):
    if key not in rec:
        raise DataError(f"missing field {key!r}", path, line)
    val = rec[key]
    if kind is not None and not isinstance(val, kind):
        raise DataError(f"field {key!r} has the wrong type ({type(val).__name__})", path, line)
    return val


def _header(records, expected: str, path) -> dict:
    line, head = records[0]
    fmt = _field(head, "format", path, line, str)
    if fmt != expected:
        raise DataError(f"expected format {expected!r}, found {fmt!r}", path, line)
    version = _field(head, "version", path, line, int)
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported format version {version}", path, line)
    return head


def _categories(head, path, line) -> CategoryTable:
    names = _field(head, "categories", path, line, list)
    try:
        return CategoryTable(names)
    except ValueError as exc:
        raise DataError(str(exc), path, line) from exc


def _floats(values, n, key, path, line):
    if not isinstance(values, list) or len(values) != n:
        raise DataError(f"field {key!r} must be a list of {n} numbers", path, line)
    try:
        out = [float(v) for v in values]
    except (TypeError, ValueError):
        raise DataError(f"field {key!r} must contain numbers", path, line) from None
    if not all(np.isfinite(out)):
        raise DataError(f"field {key!r} must be finite", path, line)
    return out


def _bits(values, n, key, path, line):
    if not isinstance(values, list) or len(values) != n or any(v not in (0, 1) for v in values):
        raise DataError(f"field {key!r} must be a list of {n} zeros/ones", path, line)
    return values


# -- lightweight detectors ----------------------------------------------------------


def lw_detector_records(data: LwDetectorData, categories: CategoryTable, seed: int, cfg_hash: str) -> list[dict]:
    head = {
        "format": "metacog-lw-detector",
        "version": FORMAT_VERSION,
        "categories": list(categories.names),
        "detector_id": int(data.detector_id),
        "seed": seed,
        "config_hash": cfg_hash,
        "n_worlds": len(data.frames),
    }
    if data.theta is not None:
        head["theta"] = {"hallucination": data.theta.hallucination.tolist(), "miss": data.theta.miss.tolist()}
    recs = [head]
    for i, block in enumerate(data.frames):
        rec = {"world": i, "frames": block.astype(int).tolist()}
        if data.worlds is not None:
            rec["presence"] = data.worlds[i].presence.astype(int).tolist()
        recs.append(rec)
    return recs


def read_lw_detector(path) -> tuple[LwDetectorData, CategoryTable, dict]:
    records = read_jsonl(path)
    head = _header(records, "metacog-lw-detector", path)
    cats = _categories(head, path, records[0][0])
    C = len(cats)
    theta = None
    if "theta" in head:
        t = _field(head, "theta", path, records[0][0], dict)
        try:
            theta = LwTheta(
                _floats(t.get("hallucination"), C, "theta.hallucination", path, records[0][0]),
                _floats(t.get("miss"), C, "theta.miss", path, records[0][0]),
            )
        except ValueError as exc:
            raise DataError(str(exc), path, records[0][0]) from exc
    blocks, worlds = [], []
    for expected, (line, rec) in enumerate(records[1:]):
        idx = _field(rec, "world", path, line, int)
        if idx != expected:
            raise DataError(f"world index {idx} out of order (expected {expected})", path, line)
        frames = _field(rec, "frames", path, line, list)
        if not frames:
            raise DataError("a world needs at least one frame", path, line)
        blocks.append(np.array([_bits(f, C, "frames", path, line) for f in frames], dtype=bool))
        if "presence" in rec:
            worlds.append(LwWorldState(_bits(rec["presence"], C, "presence", path, line)))
    n_worlds = head.get("n_worlds")
    if n_worlds is not None and n_worlds != len(blocks):
        raise DataError(f"header announces {n_worlds} worlds, file has {len(blocks)}", path)
    if worlds and len(worlds) != len(blocks):
        raise DataError("ground truth present for some worlds only", path)
    data = LwDetectorData(tuple(blocks), tuple(worlds) if worlds else None, theta, int(head.get("detector_id", 0)))
    return data, cats, head


# -- 3-d scenes ---------------------------------------------------------------------


def _pose_rec(pose: CameraPose) -> dict:
    return {"position": list(pose.position), "focal_point": list(pose.focal_point)}


def scene_records(
    scene: SceneData,
    categories: CategoryTable,
    intr: CameraIntrinsics,
    scene_id: int,
    seed,
    cfg_hash: str,
    boxes=None,
) -> list[dict]:
    head = {
        "format": "metacog-scene",
        "version": FORMAT_VERSION,
        "categories": list(categories.names),
        "scene_id": scene_id,
        "seed": seed,
        "config_hash": cfg_hash,
        "intrinsics": {"width": intr.width, "height": intr.height, "vertical_fov": intr.vertical_fov},
        "n_frames": scene.n_frames,
    }
    if scene.ground_truth is not None:
        head["ground_truth"] = world_record(scene.ground_truth, categories)
    recs = [head]
    for t, frame in enumerate(scene.frames):
        rec = {
            "frame": t,
            "camera": _pose_rec(frame.camera),
            "detections": [{"x": d.x, "y": d.y, "category": categories.name(d.category)} for d in frame.detections],
        }
        if boxes is not None:
            rec["truth_boxes"] = [
                {"x": b.x, "y": b.y, "half_width": b.half_width, "half_height": b.half_height,
                 "category": categories.name(b.category)}
                for b in boxes[t]
            ]
        recs.append(rec)
    return recs


def world_record(world: WorldState, categories: CategoryTable) -> list[dict]:
    return [
        {"x": o.position[0], "y": o.position[1], "z": o.position[2], "category": categories.name(o.category)}
        for o in world.objects
    ]


def parse_world(objs, categories: CategoryTable, path=None, line=None) -> WorldState:
    if not isinstance(objs, list):
        raise DataError("a world must be a list of objects", path, line)
    out = []
    for o in objs:
        if not isinstance(o, dict):
            raise DataError("world objects must be JSON objects", path, line)
        pos = _floats([o.get("x"), o.get("y"), o.get("z")], 3, "x/y/z", path, line)
        out.append(Object3D(tuple(pos), _category(o.get("category"), categories, path, line)))
    return WorldState(tuple(out))


def _category(label, categories: CategoryTable, path, line) -> int:
    try:
        return categories.index(label)
    except KeyError:
        raise DataError(f"unknown category label {label!r}", path, line) from None


def parse_pose(rec, path, line) -> CameraPose:
    if not isinstance(rec, dict):
        raise DataError("camera must be an object with position and focal_point", path, line)
    try:
        return CameraPose(
            tuple(_floats(rec.get("position"), 3, "position", path, line)),
            tuple(_floats(rec.get("focal_point"), 3, "focal_point", path, line)),
        )
    except ValueError as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(str(exc), path, line) from exc


def read_scene(path):
    """Returns ``(scene, categories, intrinsics, header, boxes_or_None)``."""
    from .evaluation import GroundTruthBox

    records = read_jsonl(path)
    head = _header(records, "metacog-scene", path)
    hline = records[0][0]
    cats = _categories(head, path, hline)
    intr_rec = _field(head, "intrinsics", path, hline, dict)
    try:
        intr = CameraIntrinsics(int(intr_rec["width"]), int(intr_rec["height"]), float(intr_rec["vertical_fov"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"bad intrinsics: {exc}", path, hline) from exc
    truth = parse_world(head["ground_truth"], cats, path, hline) if head.get("ground_truth") is not None else None
    frames, boxes = [], []
    has_boxes = False
    for expected, (line, rec) in enumerate(records[1:]):
        t = _field(rec, "frame", path, line, int)
        if t != expected:
            raise DataError(f"frame index {t} out of order (expected {expected})", path, line)
        pose = parse_pose(_field(rec, "camera", path, line), path, line)
        dets = []
        for d in _field(rec, "detections", path, line, list):
            if not isinstance(d, dict):
                raise DataError("detections must be objects", path, line)
            x, y = _floats([d.get("x"), d.get("y")], 2, "detection x/y", path, line)
            dets.append(Detection2D(x, y, _category(d.get("category"), cats, path, line)))
        frames.append(FrameObservation(pose, tuple(dets)))
        if "truth_boxes" in rec:
            has_boxes = True
            fb = []
            for b in rec["truth_boxes"]:
                x, y, hw, hh = _floats([b.get("x"), b.get("y"), b.get("half_width"), b.get("half_height")], 4,
                                       "truth box", path, line)
                try:
                    fb.append(GroundTruthBox(x, y, hw, hh, _category(b.get("category"), cats, path, line)))
                except ValueError as exc:
                    if isinstance(exc, DataError):
                        raise
                    raise DataError(str(exc), path, line) from exc
            boxes.append(fb)
        else:
            boxes.append([])
    if not frames:
        raise DataError("a scene needs at least one frame", path)
    if head.get("n_frames") is not None and head["n_frames"] != len(frames):
        raise DataError(f"header announces {head['n_frames']} frames, file has {len(frames)}", path)
    return SceneData(tuple(frames), truth), cats, intr, head, (boxes if has_boxes else None)


def write_manifest(path, manifest: dict[str, Any]) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write: {exc.strerror}", path) from exc


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read: {exc.strerror}", path) from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"invalid JSON ({exc.msg})", path, exc.lineno) from exc


def write_csv(path, header: list[str], rows: Iterable[Iterable]) -> None:
    """Deterministic CSV: floats via ``repr``, NaN and None as empty cells."""
    path = Path(path)

    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, (bool, np.bool_)):
            return "true" if v else "false"
        if isinstance(v, (float, np.floating)):
            return "" if not np.isfinite(v) else repr(float(v))
        return str(v)

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows([fmt(v) for v in row] for row in rows)
    except OSError as exc:
        raise DataError(f"cannot write: {exc.strerror}", path) from exc
