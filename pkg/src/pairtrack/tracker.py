"""Multi-hypothesis tracker over paired detections.

Every frame each live hypothesis is expanded into its k best children (one
child per global association), all children are ranked by weight and the best
``hypothesis_budget`` survive. With a budget of 1 this is a greedy tracker
that commits to the single best association every frame.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional

import numpy as np

from .assignment import AssignmentSolution, CostMatrix, build_cost_matrix, murty_kbest
from .detection import BUFFER_BEGIN, ClassLabel, Frame, PairedDetection, box_to_dict
from .likelihood import LikelihoodParams


class OutOfOrderFrame(ValueError):
    pass


class TrackStatus(str, enum.Enum):
    TENTATIVE = "Tentative"
    CONFIRMED = "Confirmed"
    DEAD = "Dead"


@dataclass(frozen=True)
class Track:
    track_id: int
    class_label: ClassLabel
    history: tuple  # ((frame_index, PairedDetection), ...), oldest first
    hit_count: int = 1
    miss_streak: int = 0
    status: TrackStatus = TrackStatus.TENTATIVE

    @property
    def last(self) -> PairedDetection:
        return self.history[-1][1]

    @property
    def last_frame(self) -> int:
        return self.history[-1][0]


@dataclass(frozen=True)
class TrackerConfig:
    hypothesis_budget: int = 4
    kbest_per_parent: int = 4
    confirm_hits: int = 2
    max_miss: int = 3
    history_capacity: int = 6
    likelihood: LikelihoodParams = field(default_factory=LikelihoodParams)
    record_pedigree: bool = False

    def __post_init__(self):
        for name in ("hypothesis_budget", "kbest_per_parent", "confirm_hits", "max_miss"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.history_capacity < 2:
            raise ValueError("history_capacity must be >= 2")

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerConfig":
        d = dict(d)
        lk = LikelihoodParams(**d.pop("likelihood", {}))
        return cls(likelihood=lk, **d)


@dataclass(frozen=True)
class Hypothesis:
    id: int
    parent_id: Optional[int]
    tracks: tuple
    log_weight: float
    assignment_record: Optional[AssignmentSolution] = None
    generation: int = 0


@dataclass(frozen=True)
class TrackSnapshot:
    frame_index: int
    track_id: int
    class_label: ClassLabel
    box_end: object
    box_begin: object
    status: TrackStatus

    def to_dict(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "track_id": self.track_id,
            "class_label": self.class_label.value,
            "box_end": box_to_dict(self.box_end),
            "box_begin": box_to_dict(self.box_begin),
            "status": self.status.value,
        }


@dataclass
class PedigreeNode:
    id: int
    parent_id: Optional[int]
    generation: int
    frame_index: int
    log_weight: float
    cost: float


@dataclass
class TrackerState:
    hypotheses: list = field(default_factory=list)
    frame_index: Optional[int] = None
    generation: int = 0
    next_track_id: int = 0
    next_hypothesis_id: int = 0
    # sum of per-generation normalizers; best cumulative log weight = log_norm
    log_norm: float = 0.0
    pedigree: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    @property
    def best(self) -> Optional[Hypothesis]:
        return self.hypotheses[0] if self.hypotheses else None


def _update_tracks(parent: Hypothesis, sol: AssignmentSolution, cm: CostMatrix, dets, frame: Frame,
                   config: TrackerConfig, state: TrackerState):
    f = frame.frame_index
    n_dets = len(dets)
    new_tracks = []
    taken = set()
    for trk, col in zip(parent.tracks, sol.assignment):
        if col < n_dets:
            if col in taken:
                raise AssertionError(f"detection {col} assigned twice in one hypothesis")
            taken.add(col)
            hits = trk.hit_count + 1
            status = TrackStatus.CONFIRMED if hits >= config.confirm_hits else trk.status
            history = (trk.history + ((f, dets[col]),))[-config.history_capacity:]
            new_tracks.append(replace(trk, history=history, hit_count=hits, miss_streak=0, status=status))
        else:
            streak = trk.miss_streak + 1
            limit = 1 if trk.last.death_flag else config.max_miss
            if streak < limit:
                new_tracks.append(replace(trk, miss_streak=streak))
    for j, det in enumerate(dets):
        if j in taken or not cm.spawn[j]:
            continue
        status = TrackStatus.CONFIRMED if config.confirm_hits <= 1 else TrackStatus.TENTATIVE
        tid = state.next_track_id
        state.next_track_id += 1
        new_tracks.append(Track(tid, det.class_label, ((f, det),), 1, 0, status))
        if not det.birth_flag and det.t_b == BUFFER_BEGIN:
            state.diagnostics.append(
                {"frame_index": f, "track_id": tid, "detection": det.id, "note": "likely occlusion emergence"}
            )
    return tuple(new_tracks)


class _ScoreCache:
    """Cost rows keyed by track identity; tracks are shared between hypotheses."""

    def __init__(self, dets, params, frame_index):
        self.dets = dets
        self.params = params
        self.frame_index = frame_index
        self.rows = {}

    def matrix(self, tracks) -> CostMatrix:
        # build per-track rows once, then assemble
        rows = []
        for trk in tracks:
            key = id(trk)
            if key not in self.rows:
                self.rows[key] = (trk, build_cost_matrix([trk], self.dets, self.params, self.frame_index))
            rows.append(self.rows[key][1])
        if not rows:
            return build_cost_matrix([], self.dets, self.params, self.frame_index)
        n, d = len(tracks), len(self.dets)
        base = rows[0]
        costs = np.full((n, d + n), np.inf)
        for i, r in enumerate(rows):
            costs[i, :d] = r.costs[0, :d]
            costs[i, d + i] = r.costs[0, d]
        return CostMatrix(costs, base.offset, n, d, base.spawn)


def step(state: TrackerState, frame: Frame, config: TrackerConfig):
    """Advance the tracker by one frame; returns (state, snapshots)."""
    if state.frame_index is not None and frame.frame_index <= state.frame_index:
        raise OutOfOrderFrame(f"frame {frame.frame_index} after frame {state.frame_index}")
    dets = list(frame.detections)
    parents = state.hypotheses or [Hypothesis(state.next_hypothesis_id, None, (), 0.0)]
    if not state.hypotheses:
        state.next_hypothesis_id += 1
        if config.record_pedigree:
            state.pedigree.append(PedigreeNode(parents[0].id, None, 0, frame.frame_index, 0.0, 0.0))
    k = min(config.kbest_per_parent, config.hypothesis_budget)
    cache = _ScoreCache(dets, config.likelihood, frame.frame_index)

    children = []
    for pidx, parent in enumerate(parents):
        cm = cache.matrix(parent.tracks)
        for sol in murty_kbest(cm, k):
            children.append((parent.log_weight - sol.total_cost, pidx, sol.assignment, parent, sol, cm))
    children.sort(key=lambda c: (-c[0], c[1], c[2]))
    survivors = children[: config.hypothesis_budget]

    top = survivors[0][0]
    generation = state.generation + 1
    hyps = []
    for w, _, _, parent, sol, cm in survivors:
        tracks = _update_tracks(parent, sol, cm, dets, frame, config, state)
        hyp = Hypothesis(state.next_hypothesis_id, parent.id, tracks, w - top, sol, generation)
        state.next_hypothesis_id += 1
        hyps.append(hyp)
        if config.record_pedigree:
            state.pedigree.append(
                PedigreeNode(hyp.id, parent.id, generation, frame.frame_index, hyp.log_weight, sol.total_cost)
            )
    state.hypotheses = hyps
    state.log_norm += top
    state.generation = generation
    state.frame_index = frame.frame_index
    return state, emit(hyps[0], frame.frame_index)


def emit(hyp: Hypothesis, frame_index: int) -> list:
    """Confirmed tracks updated this frame whose latest box is at the current sweep."""
    out = []
    for trk in hyp.tracks:
        if trk.status is not TrackStatus.CONFIRMED or trk.last_frame != frame_index or trk.last.t_e != 0:
            continue
        d = trk.last
        out.append(TrackSnapshot(frame_index, trk.track_id, trk.class_label, d.box_end, d.box_begin, trk.status))
    return out


def run_sequence(frames: Iterable[Frame], config: TrackerConfig, state: Optional[TrackerState] = None):
    """Fold ``step`` over frames. Returns (log, state); log maps frame index to snapshots."""
    state = state or TrackerState()
    log = {}
    for frame in frames:
        state, snaps = step(state, frame, config)
        log[frame.frame_index] = snaps
    return log, state


def track_log_lines(log: dict) -> list[str]:
    return [json.dumps(s.to_dict()) for f in sorted(log) for s in log[f]]


def pedigree_dot(state: TrackerState) -> str:
    lines = ["digraph pedigree {", "  rankdir=LR;", '  node [shape=box, fontsize=9];']
    for n in state.pedigree:
        lines.append(f'  h{n.id} [label="h{n.id}\\nf={n.frame_index}\\nw={n.log_weight:.3f}"];')
        if n.parent_id is not None:
            lines.append(f'  h{n.parent_id} -> h{n.id} [label="{n.cost:.3f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def pedigree_leaves(state: TrackerState) -> int:
    return len(state.hypotheses)
