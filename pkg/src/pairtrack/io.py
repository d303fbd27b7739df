"""JSONL readers and writers for frames, track logs and point clouds."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .detection import ClassLabel, box_from_dict, frame_from_dict, frame_to_dict
from .sweep import SweepPointCloud


class InputError(ValueError):
    """Malformed or unreadable input file."""


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _lines(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError as e:
            raise InputError(f"{path}:{n}: invalid JSON ({e.msg})") from e


def write_jsonl(path, records) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(_dump(r) + "\n")


def write_frames(path, frames) -> None:
    write_jsonl(path, (frame_to_dict(f) for f in frames))


def read_frames(path) -> list:
    out = []
    for n, d in enumerate(_lines(path), start=1):
        try:
            out.append(frame_from_dict(d))
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{path}: record {n}: {e}") from e
    return out


def write_track_log(path, log: dict) -> None:
    write_jsonl(path, (s.to_dict() for f in sorted(log) for s in log[f]))


def read_track_log(path) -> dict:
    """Track log JSONL as frame index -> list of snapshot dicts.

    A file whose records look like frames (they carry ``detections``) is read
    as ground truth and converted, which allows self-evaluation.
    """
    records = list(_lines(path))
    if records and "detections" in records[0]:
        from .evaluation import ground_truth_log

        return ground_truth_log(read_frames(path))
    log = {}
    for n, d in enumerate(records, start=1):
        try:
            ClassLabel(d["class_label"])
            box_from_dict(d["box_end"])
            box_from_dict(d["box_begin"])
            log.setdefault(int(d["frame_index"]), []).append(d)
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{path}: record {n}: {e}") from e
    return log


def cloud_to_dict(frame_index: int, cloud: SweepPointCloud) -> dict:
    return {
        "frame_index": frame_index,
        "points": cloud.points.tolist(),
        "owners": cloud.owners,
    }


def write_point_clouds(path, clouds: dict) -> None:
    write_jsonl(path, (cloud_to_dict(f, clouds[f]) for f in sorted(clouds)))


def read_point_clouds(path) -> dict:
    out = {}
    for n, d in enumerate(_lines(path), start=1):
        try:
            pts = np.asarray(d.get("points", []), dtype=float).reshape(-1, 5)
            out[int(d["frame_index"])] = SweepPointCloud(pts, d.get("owners"))
        except (KeyError, TypeError, ValueError) as e:
            raise InputError(f"{path}: record {n}: {e}") from e
    return out


def load_mapping(path) -> dict:
    """YAML or JSON config file as a dict (empty file -> {})."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from e
    try:
        if path.suffix in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text) if text.strip() else None
    except Exception as e:  # yaml and json raise unrelated types
        raise InputError(f"{path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise InputError(f"{path}: expected a mapping at top level")
    return data
