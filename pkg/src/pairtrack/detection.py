"""Paired detections, ground-truth track slices and frames.

A paired detection carries two boxes for one object: ``box_end`` at the last
sweep where the object is seen in the buffer and ``box_begin`` at the first.
Sweep indices are buffer relative, -5 (oldest) to 0 (current).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .geometry import OrientedBox2D

BUFFER_BEGIN = -5
BUFFER_END = 0
BUFFER = (BUFFER_BEGIN, BUFFER_END)


class NotInBuffer(ValueError):
    pass


class ClassLabel(str, enum.Enum):
    VEHICLE = "Vehicle"
    PEDESTRIAN = "Pedestrian"
    CYCLIST = "Cyclist"


def _check_sweep(t: int, buffer=BUFFER):
    if not (buffer[0] <= t <= buffer[1]):
        raise ValueError(f"sweep index {t} outside buffer {buffer}")


@dataclass(frozen=True)
class TimeTargets:
    t_b: int
    t_e: int
    birth_flag: bool
    death_flag: bool

    def __post_init__(self):
        _check_sweep(self.t_b)
        _check_sweep(self.t_e)
        if self.t_b > self.t_e:
            raise ValueError("t_b > t_e")
        if self.birth_flag and self.t_b <= BUFFER_BEGIN:
            raise ValueError("birth_flag requires t_b inside the buffer")
        if self.death_flag and self.t_e >= BUFFER_END:
            raise ValueError("death_flag requires t_e inside the buffer")

    @property
    def singleton(self) -> bool:
        return self.t_b == self.t_e


@dataclass(frozen=True)
class PairedDetection:
    id: str
    class_label: ClassLabel
    box_end: OrientedBox2D
    box_begin: OrientedBox2D
    shared_height: float = 1.5
    shared_z: float = 0.0
    t_b: int = BUFFER_BEGIN
    t_e: int = BUFFER_END
    birth_flag: bool = False
    death_flag: bool = False
    confidence: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "class_label", ClassLabel(self.class_label))
        # validates the time fields and flag consistency
        self.time_targets
        if (self.box_begin.length, self.box_begin.width) != (self.box_end.length, self.box_end.width):
            raise ValueError(f"detection {self.id}: begin and end boxes must share extent")
        if self.t_b == self.t_e and self.box_begin != self.box_end:
            raise ValueError(f"detection {self.id}: singleton must have box_begin == box_end")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")
        if not self.shared_height > 0:
            raise ValueError("shared_height must be positive")

    @property
    def time_targets(self) -> TimeTargets:
        return TimeTargets(self.t_b, self.t_e, self.birth_flag, self.death_flag)

    @property
    def singleton(self) -> bool:
        return self.t_b == self.t_e


@dataclass(frozen=True)
class SweepBox:
    """Ground-truth box at one sweep, with the height information BEV drops."""

    box: OrientedBox2D
    z: float = 0.0
    height: float = 1.5


@dataclass(frozen=True)
class GroundTruthTrack:
    track_id: str
    class_label: ClassLabel
    presence: Mapping[int, SweepBox]

    def __post_init__(self):
        object.__setattr__(self, "class_label", ClassLabel(self.class_label))
        object.__setattr__(self, "presence", dict(sorted(self.presence.items())))
        if not self.presence:
            raise ValueError(f"track {self.track_id} has no present sweep")

    def present_sweeps(self, buffer=BUFFER) -> list[int]:
        return [s for s in self.presence if buffer[0] <= s <= buffer[1]]


@dataclass(frozen=True)
class Frame:
    frame_index: int
    timestamp: float
    detections: tuple[PairedDetection, ...] = ()
    ground_truth: Optional[tuple[GroundTruthTrack, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        if self.ground_truth is not None:
            object.__setattr__(self, "ground_truth", tuple(self.ground_truth))
        ids = [d.id for d in self.detections]
        if len(set(ids)) != len(ids):
            raise ValueError(f"frame {self.frame_index}: duplicate detection ids")


def derive_time_targets(track: GroundTruthTrack, buffer=BUFFER) -> TimeTargets:
    """Begin/end sweep of a ground-truth track in the buffer, plus birth/death markers.

    Gaps between the first and last present sweep are ignored.
    """
    present = track.present_sweeps(buffer)
    if not present:
        raise NotInBuffer(f"track {track.track_id} is not present in buffer {buffer}")
    t_b, t_e = min(present), max(present)
    return TimeTargets(t_b, t_e, birth_flag=t_b > buffer[0], death_flag=t_e < buffer[1])


def time_target_case(track: GroundTruthTrack, buffer=BUFFER) -> str:
    """Label the begin/end configuration of a track in the buffer.

    ``a`` full coverage, ``b`` both ends present with interior gaps, ``c`` begins
    inside the buffer, ``d`` ends inside the buffer, ``e`` singleton strictly
    inside. A non-singleton span strictly inside the buffer is ``interior``.
    """
    present = track.present_sweeps(buffer)
    tt = derive_time_targets(track, buffer)
    if not tt.birth_flag and not tt.death_flag:
        return "a" if len(present) == buffer[1] - buffer[0] + 1 else "b"
    if tt.birth_flag and tt.death_flag:
        return "e" if tt.singleton else "interior"
    return "c" if tt.birth_flag else "d"


def pair_midpoint(d: PairedDetection) -> np.ndarray:
    return 0.5 * (d.box_begin.center + d.box_end.center)


# -- serialization -----------------------------------------------------------


def box_to_dict(b: OrientedBox2D) -> dict:
    return {"cx": b.cx, "cy": b.cy, "length": b.length, "width": b.width, "heading": b.heading}


def box_from_dict(d: Mapping) -> OrientedBox2D:
    return OrientedBox2D(d["cx"], d["cy"], d["length"], d["width"], d["heading"])


def detection_to_dict(d: PairedDetection) -> dict:
    return {
        "id": d.id,
        "class_label": d.class_label.value,
        "box_end": box_to_dict(d.box_end),
        "box_begin": box_to_dict(d.box_begin),
        "shared_height": d.shared_height,
        "shared_z": d.shared_z,
        "t_b": d.t_b,
        "t_e": d.t_e,
        "birth_flag": d.birth_flag,
        "death_flag": d.death_flag,
        "confidence": d.confidence,
    }


def detection_from_dict(d: Mapping) -> PairedDetection:
    return PairedDetection(
        id=str(d["id"]),
        class_label=ClassLabel(d["class_label"]),
        box_end=box_from_dict(d["box_end"]),
        box_begin=box_from_dict(d["box_begin"]),
        shared_height=d["shared_height"],
        shared_z=d["shared_z"],
        t_b=int(d["t_b"]),
        t_e=int(d["t_e"]),
        birth_flag=bool(d["birth_flag"]),
        death_flag=bool(d["death_flag"]),
        confidence=d["confidence"],
    )


def gt_track_to_dict(t: GroundTruthTrack) -> dict:
    return {
        "track_id": t.track_id,
        "class_label": t.class_label.value,
        # JSON object keys must be strings; sweep indices are kept as a list instead
        "presence": [
            {"sweep": s, "box": box_to_dict(sb.box), "z": sb.z, "height": sb.height}
            for s, sb in t.presence.items()
        ],
    }


def gt_track_from_dict(d: Mapping) -> GroundTruthTrack:
    presence = {
        int(p["sweep"]): SweepBox(box_from_dict(p["box"]), p["z"], p["height"]) for p in d["presence"]
    }
    return GroundTruthTrack(str(d["track_id"]), ClassLabel(d["class_label"]), presence)


def frame_to_dict(f: Frame) -> dict:
    out = {
        "frame_index": f.frame_index,
        "timestamp": f.timestamp,
        "detections": [detection_to_dict(d) for d in f.detections],
    }
    if f.ground_truth is not None:
        out["ground_truth"] = [gt_track_to_dict(t) for t in f.ground_truth]
    return out


def frame_from_dict(d: Mapping) -> Frame:
    gt = d.get("ground_truth")
    return Frame(
        frame_index=int(d["frame_index"]),
        timestamp=d["timestamp"],
        detections=tuple(detection_from_dict(x) for x in d.get("detections", ())),
        ground_truth=None if gt is None else tuple(gt_track_from_dict(x) for x in gt),
    )


def check_sequence(frames: Iterable[Frame]) -> None:
    """Raise if frame indices or timestamps are not strictly increasing."""
    prev = None
    for f in frames:
        if prev is not None and (f.frame_index <= prev.frame_index or not f.timestamp > prev.timestamp):
            raise ValueError(f"frame {f.frame_index} does not follow frame {prev.frame_index}")
        prev = f


def isclose_box(a: OrientedBox2D, b: OrientedBox2D, tol: float = 1e-9) -> bool:
    return (
        math.isclose(a.cx, b.cx, abs_tol=tol)
        and math.isclose(a.cy, b.cy, abs_tol=tol)
        and math.isclose(a.length, b.length, abs_tol=tol)
        and math.isclose(a.width, b.width, abs_tol=tol)
        and abs(math.remainder(a.heading - b.heading, 2 * math.pi)) <= tol
    )
