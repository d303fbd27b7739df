"""CLEAR-MOT scoring of a track log against simulator ground truth.

Matching uses the current-time boxes only: ground truth at sweep 0 against
each track's ``box_end``, gated by 2D IOU.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .assignment import CostMatrix, solve_optimal
from .detection import ClassLabel, Frame, box_from_dict, derive_time_targets
from .geometry import iou2d


class ClockMismatch(ValueError):
    pass


@dataclass
class MotReport:
    mota: Optional[float]
    motp: float
    fp: int
    fn: int
    id_switches: int
    gt_count: int
    matches: int
    begin_error: Optional[float] = None  # mean begin-box center error over matches, meters
    per_class: dict = field(default_factory=dict)
    near: Optional["MotReport"] = None
    far: Optional["MotReport"] = None

    def to_dict(self) -> dict:
        d = {
            "mota": self.mota,
            "motp": self.motp,
            "fp": self.fp,
            "fn": self.fn,
            "id_switches": self.id_switches,
            "gt_count": self.gt_count,
            "matches": self.matches,
            "begin_error": self.begin_error,
        }
        if self.per_class:
            d["per_class"] = {k: v.to_dict() for k, v in self.per_class.items()}
        if self.near is not None:
            d["near"] = self.near.to_dict()
            d["far"] = self.far.to_dict()
        return d

    def table(self) -> str:
        rows = [("all", self)]
        rows += [(k, v) for k, v in self.per_class.items()]
        if self.near is not None:
            rows += [("near", self.near), ("far", self.far)]
        head = f"{'subset':<12}{'MOTA':>8}{'MOTP':>8}{'FP':>6}{'FN':>6}{'IDSW':>6}{'GT':>7}"
        lines = [head, "-" * len(head)]
        for name, r in rows:
            mota = "n/a" if r.mota is None else f"{r.mota:.4f}"
            lines.append(f"{name:<12}{mota:>8}{r.motp:>8.3f}{r.fp:>6}{r.fn:>6}{r.id_switches:>6}{r.gt_count:>7}")
        return "\n".join(lines)


@dataclass(frozen=True)
class _Obj:
    oid: object
    cls: ClassLabel
    box: object
    begin: object = None


def _gt_by_frame(ground_truth) -> dict:
    out = {}
    for fr in ground_truth:
        objs = []
        for t in fr.ground_truth or ():
            if 0 in t.presence:
                tt = derive_time_targets(t)
                objs.append(_Obj(t.track_id, t.class_label, t.presence[0].box, t.presence[tt.t_b].box))
        out[fr.frame_index] = objs
    return out


def _tracks_by_frame(track_log) -> dict:
    out = {}
    for f, snaps in track_log.items():
        objs = []
        for s in snaps:
            if isinstance(s, dict):
                objs.append(_Obj(s["track_id"], ClassLabel(s["class_label"]), box_from_dict(s["box_end"]),
                                 box_from_dict(s["box_begin"])))
            else:
                objs.append(_Obj(s.track_id, s.class_label, s.box_end, s.box_begin))
        out[int(f)] = objs
    return out


def _score(gt: dict, hyp: dict, thr: float) -> MotReport:
    last = {}
    fp = fn = idsw = matches = 0
    dist = []
    begin = []
    gt_count = 0
    for f in sorted(gt):
        gts = gt[f]
        hs = hyp.get(f, [])
        gt_count += len(gts)
        matched = {}
        used = set()
        hidx = {h.oid: k for k, h in enumerate(hs)}
        # keep last frame's correspondence while it still clears the gate
        for g, o in enumerate(gts):
            tid = last.get(o.oid)
            if tid in hidx and hidx[tid] not in used and iou2d(o.box, hs[hidx[tid]].box) >= thr:
                matched[g] = hidx[tid]
                used.add(hidx[tid])
        rest_g = [g for g in range(len(gts)) if g not in matched]
        rest_h = [k for k in range(len(hs)) if k not in used]
        if rest_g and rest_h:
            n, m = len(rest_g), len(rest_h)
            costs = np.full((n, m + n), np.inf)
            for a, g in enumerate(rest_g):
                costs[a, m + a] = 1.0
                for b, k in enumerate(rest_h):
                    iou = iou2d(gts[g].box, hs[k].box)
                    if iou >= thr:
                        costs[a, b] = 1.0 - iou
            sol = solve_optimal(CostMatrix(costs))
            for a, col in enumerate(sol.assignment):
                if col < m:
                    matched[rest_g[a]] = rest_h[col]
        for g, k in matched.items():
            o, h = gts[g], hs[k]
            if o.oid in last and last[o.oid] != h.oid:
                idsw += 1
            last[o.oid] = h.oid
            dist.append(math.hypot(o.box.cx - h.box.cx, o.box.cy - h.box.cy))
            if o.begin is not None and h.begin is not None:
                begin.append(math.hypot(o.begin.cx - h.begin.cx, o.begin.cy - h.begin.cy))
        matches += len(matched)
        fn += len(gts) - len(matched)
        fp += len(hs) - len(matched)
    mota = 1.0 - (fp + fn + idsw) / gt_count if gt_count else None
    return MotReport(
        mota=mota,
        motp=math.fsum(dist) / len(dist) if dist else 0.0,
        fp=fp,
        fn=fn,
        id_switches=idsw,
        gt_count=gt_count,
        matches=matches,
        begin_error=math.fsum(begin) / len(begin) if begin else None,
    )


def _filter(by_frame: dict, pred) -> dict:
    return {f: [o for o in objs if pred(o)] for f, objs in by_frame.items()}


def evaluate(track_log, ground_truth, iou_threshold: float = 0.5, near_radius: float = 30.0) -> MotReport:
    """Score ``track_log`` (frame index -> snapshots) against ground-truth frames."""
    gt = _gt_by_frame(ground_truth)
    hyp = _tracks_by_frame(track_log)
    extra = sorted(set(hyp) - set(gt))
    if extra:
        raise ClockMismatch(f"track log has frames {extra[:5]} absent from ground truth")
    report = _score(gt, hyp, iou_threshold)
    classes = sorted({o.cls for objs in gt.values() for o in objs} | {o.cls for objs in hyp.values() for o in objs},
                     key=lambda c: c.value)
    for c in classes:
        report.per_class[c.value] = _score(_filter(gt, lambda o: o.cls == c), _filter(hyp, lambda o: o.cls == c),
                                           iou_threshold)

    def near(o):
        return math.hypot(o.box.cx, o.box.cy) <= near_radius

    report.near = _score(_filter(gt, near), _filter(hyp, near), iou_threshold)
    report.far = _score(_filter(gt, lambda o: not near(o)), _filter(hyp, lambda o: not near(o)), iou_threshold)
    return report


def ground_truth_log(frames) -> dict:
    """Ground truth rendered as a track log (objects present at the current sweep)."""
    from .tracker import TrackSnapshot, TrackStatus

    log = {}
    for fr in frames:
        snaps = []
        for t in fr.ground_truth or ():
            if 0 in t.presence:
                tt = derive_time_targets(t)
                snaps.append(TrackSnapshot(fr.frame_index, t.track_id, t.class_label, t.presence[0].box,
                                           t.presence[tt.t_b].box, TrackStatus.CONFIRMED))
        log[fr.frame_index] = snaps
    return log
