"""Single-hypothesis greedy tracker, written independently of ``tracker``.

Each frame it solves one optimal association with scipy's
``linear_sum_assignment`` and commits to it. Among equal-cost associations it
picks the lexicographically smallest (row by row, smallest column index).
Lifecycle rules match the multi-hypothesis tracker's, so with
``hypothesis_budget=1`` both must emit identical logs.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from .detection import BUFFER_BEGIN
from .likelihood import score_pair
from .tracker import OutOfOrderFrame, Track, TrackerConfig, TrackSnapshot, TrackStatus


def _opt(costs: np.ndarray) -> float:
    if costs.shape[0] == 0:
        return 0.0
    finite = np.where(np.isinf(costs), 1e15, costs)
    rows, cols = linear_sum_assignment(finite)
    total = math.fsum(costs[rows, cols])
    return total


def lexicographic_assignment(costs: np.ndarray) -> list:
    """Optimal assignment of rows to columns; ties broken lexicographically."""
    n, m = costs.shape
    best = _opt(costs)
    if not math.isfinite(best):
        raise ValueError("infeasible association")
    scale = max(1.0, float(np.max(np.abs(costs[np.isfinite(costs)]), initial=0.0)))
    tol = 1e-9 * scale
    chosen = []
    fixed = 0.0
    free_cols = list(range(m))
    for r in range(n):
        for c in free_cols:
            if not math.isfinite(costs[r, c]):
                continue
            rest_cols = [x for x in free_cols if x != c]
            rest = _opt(costs[np.ix_(range(r + 1, n), rest_cols)]) if r + 1 < n else 0.0
            if fixed + costs[r, c] + rest <= best + tol:
                chosen.append(c)
                fixed += costs[r, c]
                free_cols = rest_cols
                break
        else:
            raise AssertionError("lost the optimum while fixing rows")
    return chosen


class GreedyTracker:
    def __init__(self, config: TrackerConfig):
        self.config = config
        self.tracks: list[Track] = []
        self.next_id = 0
        self.frame_index = None
        self.cumulative_log_weight = 0.0

    def process(self, frame) -> list:
        cfg = self.config
        p = cfg.likelihood
        f = frame.frame_index
        if self.frame_index is not None and f <= self.frame_index:
            raise OutOfOrderFrame(f"frame {f} after frame {self.frame_index}")
        self.frame_index = f
        dets = list(frame.detections)
        nt, nd = len(self.tracks), len(dets)

        birth_ll = []
        for det in dets:
            lb = p.log_birth + math.log(max(det.confidence, 1e-300))
            if det.birth_flag:
                lb += math.log(p.birth_flag_multiplier)
            birth_ll.append(lb)
        unassigned_cost = [-max(lb, p.log_false) for lb in birth_ll]

        costs = np.full((nt, nd + nt), np.inf)
        for i, trk in enumerate(self.tracks):
            costs[i, nd + i] = -p.log_miss
            for j, det in enumerate(dets):
                s = score_pair(trk, det, p, f)
                if s.compatible:
                    costs[i, j] = -s.log_likelihood - unassigned_cost[j]
        cols = lexicographic_assignment(costs)
        self.cumulative_log_weight -= math.fsum([costs[i, c] for i, c in enumerate(cols)] + unassigned_cost)

        kept = []
        used = set()
        for trk, c in zip(self.tracks, cols):
            if c < nd:
                used.add(c)
                hist = (trk.history + ((f, dets[c]),))[-cfg.history_capacity:]
                hits = trk.hit_count + 1
                status = TrackStatus.CONFIRMED if hits >= cfg.confirm_hits else trk.status
                kept.append(Track(trk.track_id, trk.class_label, hist, hits, 0, status))
                continue
            misses = trk.miss_streak + 1
            allowed = 1 if trk.history[-1][1].death_flag else cfg.max_miss
            if misses < allowed:
                kept.append(Track(trk.track_id, trk.class_label, trk.history, trk.hit_count, misses, trk.status))
        for j, det in enumerate(dets):
            if j in used or not birth_ll[j] > p.log_false:
                continue
            status = TrackStatus.TENTATIVE if cfg.confirm_hits > 1 else TrackStatus.CONFIRMED
            kept.append(Track(self.next_id, det.class_label, ((f, det),), 1, 0, status))
            self.next_id += 1
        self.tracks = kept

        out = []
        for trk in kept:
            fi, d = trk.history[-1]
            if trk.status is TrackStatus.CONFIRMED and fi == f and d.t_e == 0:
                out.append(TrackSnapshot(f, trk.track_id, trk.class_label, d.box_end, d.box_begin, trk.status))
        return out

    def run(self, frames) -> dict:
        return {fr.frame_index: self.process(fr) for fr in frames}
