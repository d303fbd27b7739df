"""Sparse multi-sweep grid pipeline with fixed (non-learned) aggregation.

Points from six sweeps are voxelized into per-sweep means, then pushed through
strided sparse stages. Each output cell sums the features of the input cells
that feed it and records which raw points can reach it (its provenance, i.e.
the inverse neighborhood). Stages 4-7 are collected at stage-4 resolution,
pooled to bird's eye view, and ground-truth objects are anchored to the
nearest active BEV cell.

Provenance sets are stored as Python int bitmasks over point indices.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse

from .detection import BUFFER, ClassLabel, GroundTruthTrack, TimeTargets, box_to_dict, derive_time_targets
from .geometry import OrientedBox2D

N_SWEEPS = BUFFER[1] - BUFFER[0] + 1
POINT_DIM = 5  # x, y, z, relative time (sweep index), intensity

_KEY_BITS = 20
_KEY_BIAS = 1 << (_KEY_BITS - 1)


class EmptyGrid(ValueError):
    pass


class InactiveCell(KeyError):
    pass


class IncompatibleStrides(ValueError):
    pass


@dataclass
class SweepPointCloud:
    points: np.ndarray  # (N, 5): x, y, z, sweep_index, intensity
    owners: Optional[list] = None  # object id per point, None for background

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, POINT_DIM)
        if not np.isfinite(self.points).all():
            raise ValueError("point coordinates must be finite")
        s = self.points[:, 3]
        if len(s) and (s.min() < BUFFER[0] or s.max() > BUFFER[1] or not np.all(s == np.round(s))):
            raise ValueError("sweep indices must be integers inside the buffer")
        if self.owners is not None and len(self.owners) != len(self.points):
            raise ValueError("owners must have one entry per point")

    def __len__(self):
        return len(self.points)

    def object_points(self, obj_id) -> set:
        if self.owners is None:
            return set()
        return {i for i, o in enumerate(self.owners) if o == obj_id}


def _encode(coords: np.ndarray) -> np.ndarray:
    c = coords.astype(np.int64) + _KEY_BIAS
    if c.size and (c.min() < 0 or c.max() >= (1 << _KEY_BITS)):
        raise ValueError("grid index out of encodable range")
    key = np.zeros(len(coords), dtype=np.int64)
    for d in range(coords.shape[1]):
        key = (key << _KEY_BITS) | c[:, d]
    return key


def _bits_to_set(mask: int) -> frozenset:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return frozenset(out)


class SparseFeatureGrid:
    """Active integer cells with feature vectors and provenance.

    ``coords`` rows are kept in lexicographic order.
    """

    def __init__(self, stage: int, cell_size, coords, features, prov: Sequence[int]):
        coords = np.asarray(coords, dtype=np.int64)
        features = np.asarray(features, dtype=float)
        dim = len(cell_size)
        coords = coords.reshape(-1, dim)
        if features.ndim != 2:
            features = features.reshape(len(coords), -1)
        if len(features) != len(coords):
            raise ValueError("one feature row per cell required")
        order = np.lexsort(coords.T[::-1]) if len(coords) else np.arange(0)
        self.stage = stage
        self.cell_size = tuple(float(c) for c in cell_size)
        self.coords = coords[order]
        self.features = features[order]
        self.prov = [prov[i] for i in order]
        self.keys = _encode(self.coords)
        if len(self.keys) > 1 and np.any(np.diff(self.keys) <= 0):
            raise ValueError("duplicate cells in grid")
        if any(p == 0 for p in self.prov):
            raise ValueError("every active cell needs a non-empty provenance")

    @property
    def ndim(self) -> int:
        return len(self.cell_size)

    @property
    def dim(self) -> int:
        return self.features.shape[1] if self.features.ndim == 2 else 0

    def __len__(self):
        return len(self.coords)

    def active_set(self) -> set:
        return {tuple(int(v) for v in c) for c in self.coords}

    def index_of(self, cell) -> int:
        key = _encode(np.asarray([cell], dtype=np.int64))[0]
        i = int(np.searchsorted(self.keys, key))
        if i >= len(self.keys) or self.keys[i] != key:
            raise InactiveCell(tuple(cell))
        return i

    def feature(self, cell) -> np.ndarray:
        return self.features[self.index_of(cell)]

    def provenance(self, cell) -> frozenset:
        return _bits_to_set(self.prov[self.index_of(cell)])

    @property
    def cells(self) -> dict:
        return {tuple(int(v) for v in c): f for c, f in zip(self.coords, self.features)}

    def centers(self) -> np.ndarray:
        return (self.coords + 0.5) * np.asarray(self.cell_size)


def _lift(features: np.ndarray, dim: Optional[int]) -> np.ndarray:
    if dim is None or features.shape[1] == dim:
        return features
    if features.shape[1] > dim:
        return features[:, :dim]
    out = np.zeros((features.shape[0], dim))
    out[:, : features.shape[1]] = features
    return out


def _aggregate(features, src, out_coords, in_idx, stage, cell_size, dim):
    """Build an output grid from (output coord, input index) contribution pairs.

    ``features`` and ``src`` (provenance masks) describe the inputs.
    """
    if len(in_idx) == 0:
        d = dim if dim is not None else features.shape[1]
        return SparseFeatureGrid(stage, cell_size, np.zeros((0, len(cell_size)), np.int64), np.zeros((0, d)), [])
    uniq, out_idx = np.unique(out_coords, axis=0, return_inverse=True)
    out_idx = out_idx.reshape(-1)
    m = sparse.csr_matrix((np.ones(len(in_idx)), (out_idx, in_idx)), shape=(len(uniq), len(features)))
    feats = _lift(np.asarray(m @ features), dim)
    prov = [0] * len(uniq)
    for o, i in zip(out_idx.tolist(), in_idx.tolist()):
        prov[o] |= src[i]
    return SparseFeatureGrid(stage, cell_size, uniq, feats, prov)


def _footprint(ndim: int, kernel_extent: int) -> np.ndarray:
    r = kernel_extent // 2
    return np.array(list(itertools.product(range(-r, r + 1), repeat=ndim)), dtype=np.int64)


def voxelize(cloud: SweepPointCloud, voxel_size=(0.1, 0.1, 0.15), max_points: int = 30,
             seed: int = 0) -> SparseFeatureGrid:
    """Stage-1 grid: per voxel, the mean point vector of each sweep, stacked oldest first.

    Voxels holding more than ``max_points`` points keep a seeded random subset.
    """
    vs = np.broadcast_to(np.asarray(voxel_size, dtype=float), (3,))
    if np.any(vs <= 0):
        raise ValueError("voxel_size must be positive")
    if max_points < 1:
        raise ValueError("max_points must be >= 1")
    dim = N_SWEEPS * POINT_DIM
    pts = cloud.points
    if len(pts) == 0:
        return SparseFeatureGrid(1, tuple(vs), np.zeros((0, 3), np.int64), np.zeros((0, dim)), [])
    idx = np.floor(pts[:, :3] / vs).astype(np.int64)
    uniq, inv = np.unique(idx, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    order = np.argsort(inv, kind="stable")
    bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
    rng = np.random.default_rng(seed)
    feats = np.zeros((len(uniq), dim))
    prov = []
    sweep_slot = (pts[:, 3] - BUFFER[0]).astype(np.int64)
    for v in range(len(uniq)):
        members = order[bounds[v]: bounds[v + 1]]
        if len(members) > max_points:
            members = np.sort(rng.permutation(members)[:max_points])
        mask = 0
        for i in members.tolist():
            mask |= 1 << i
        prov.append(mask)
        slots = sweep_slot[members]
        for s in np.unique(slots):
            sel = members[slots == s]
            feats[v, s * POINT_DIM:(s + 1) * POINT_DIM] = pts[sel].mean(axis=0)
    return SparseFeatureGrid(1, tuple(vs), uniq, feats, prov)


def propagate_stage(grid: SparseFeatureGrid, mode: str = "dilating", kernel_extent: int = 3, stride: int = 2,
                    out_dim: Optional[int] = None, stage: Optional[int] = None) -> SparseFeatureGrid:
    """One sparse stage on a grid.

    Output cell ``o`` sits over input site ``stride * o`` and sums the active
    inputs inside the kernel footprint around that site. ``dilating`` keeps
    every output with at least one such input. ``submanifold`` keeps an output
    only when its own site ``stride * o`` is active, so with stride 1 the
    active set is unchanged.
    """
    if kernel_extent < 1 or kernel_extent % 2 == 0:
        raise ValueError("kernel_extent must be a positive odd integer")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if mode not in ("dilating", "submanifold"):
        raise ValueError(f"unknown mode {mode!r}")
    stage = grid.stage + 1 if stage is None else stage
    cell_size = tuple(c * stride for c in grid.cell_size)
    P = grid.coords
    outs, ins = [], []
    for k in _footprint(grid.ndim, kernel_extent):
        q = P + k
        ok = np.all(q % stride == 0, axis=1)
        outs.append(q[ok] // stride)
        ins.append(np.nonzero(ok)[0])
    out_coords = np.vstack(outs)
    in_idx = np.concatenate(ins)
    if mode == "submanifold" and len(in_idx):
        keys = _encode(out_coords * stride)
        pos = np.clip(np.searchsorted(grid.keys, keys), 0, len(grid.keys) - 1)
        keep = grid.keys[pos] == keys
        out_coords, in_idx = out_coords[keep], in_idx[keep]
    return _aggregate(grid.features, grid.prov, out_coords, in_idx, stage, cell_size, out_dim)


def collect_union(stages: Sequence[SparseFeatureGrid]) -> SparseFeatureGrid:
    """Union of stage grids re-indexed onto the first (finest) grid's resolution.

    A coarse cell ``k`` lands on fine index ``k * ratio``; coincident cells
    sum features and merge provenance.
    """
    base = stages[0]
    coords, feats, prov = [], [], []
    for g in stages:
        ratio = np.asarray(g.cell_size) / np.asarray(base.cell_size)
        scale = np.round(ratio)
        if g.ndim != base.ndim or np.any(np.abs(ratio - scale) > 1e-9) or np.any(scale < 1):
            raise IncompatibleStrides(f"stage {g.stage} cell size {g.cell_size} vs {base.cell_size}")
        coords.append(g.coords * scale.astype(np.int64))
        feats.append(_lift(g.features, base.dim))
        prov.extend(g.prov)
    all_coords = np.vstack(coords)
    return _aggregate(np.vstack(feats), prov, all_coords, np.arange(len(all_coords)), base.stage, base.cell_size,
                      base.dim)


def bev_pool(grid: SparseFeatureGrid) -> SparseFeatureGrid:
    """Collapse the z index: each (x, y) column gets concat(sum, elementwise max)."""
    d = grid.dim
    if len(grid) == 0:
        return SparseFeatureGrid(grid.stage, grid.cell_size[:2], np.zeros((0, 2), np.int64), np.zeros((0, 2 * d)), [])
    uniq, inv = np.unique(grid.coords[:, :2], axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    s = np.zeros((len(uniq), d))
    mx = np.full((len(uniq), d), -np.inf)
    np.add.at(s, inv, grid.features)
    np.maximum.at(mx, inv, grid.features)
    prov = [0] * len(uniq)
    for o, p in zip(inv.tolist(), grid.prov):
        prov[o] |= p
    return SparseFeatureGrid(grid.stage, grid.cell_size[:2], uniq, np.hstack([s, mx]), prov)


def assign_anchor(bev: SparseFeatureGrid, y) -> tuple:
    """Active BEV cell whose center is nearest to ``y``; ties go to the smaller index."""
    if len(bev) == 0:
        raise EmptyGrid("no active cells")
    d2 = np.sum((bev.centers() - np.asarray(y, dtype=float)[:2]) ** 2, axis=1)
    # coords are lexicographically sorted, so argmin picks the smallest index among ties
    i = int(np.argmin(d2))
    return tuple(int(v) for v in bev.coords[i])


def inverse_neighborhood(bev: SparseFeatureGrid, cell) -> frozenset:
    """Indices of all input points with a path to ``cell``."""
    return bev.provenance(cell)


# -- pipeline configuration ------------------------------------------------------------


@dataclass(frozen=True)
class StageConfig:
    dim: int
    mode: str = "dilating"
    kernel_extent: int = 3
    stride: int = 2
    refine: int = 1  # stride-1 submanifold passes after the strided step


@dataclass(frozen=True)
class PipelineConfig:
    voxel_size: tuple = (0.1, 0.1, 0.15)
    max_points: int = 30
    seed: int = 0
    stages: tuple = (
        StageConfig(32),
        StageConfig(64),
        StageConfig(128),
        StageConfig(128),
        StageConfig(128),
        StageConfig(128),
    )
    collect_from: int = 4  # stages collect_from..last are unioned
    bev_refine: int = 2  # stride-1 submanifold passes on the BEV grid
    representative: str = "midpoint"  # or "corner"

    def with_mode(self, mode: str) -> "PipelineConfig":
        from dataclasses import replace

        return replace(self, stages=tuple(replace(s, mode=mode) for s in self.stages))


@dataclass
class PipelineResult:
    stages: dict
    union: SparseFeatureGrid
    bev: SparseFeatureGrid


def run_pipeline(cloud: SweepPointCloud, config: PipelineConfig = PipelineConfig()) -> PipelineResult:
    grids = {1: voxelize(cloud, config.voxel_size, config.max_points, config.seed)}
    g = grids[1]
    for t, sc in enumerate(config.stages, start=2):
        g = propagate_stage(g, sc.mode, sc.kernel_extent, sc.stride, sc.dim, stage=t)
        for _ in range(sc.refine):
            g = propagate_stage(g, "submanifold", sc.kernel_extent, 1, sc.dim, stage=t)
        grids[t] = g
    collected = [grids[t] for t in sorted(grids) if t >= config.collect_from]
    union = collect_union(collected)
    bev = bev_pool(union)
    for _ in range(config.bev_refine):
        bev = propagate_stage(bev, "submanifold", 3, 1, bev.dim, stage=bev.stage)
    return PipelineResult(grids, union, bev)


# -- label assignment ------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectTarget:
    object_id: str
    class_label: ClassLabel
    box_begin: OrientedBox2D
    box_end: OrientedBox2D
    time_targets: TimeTargets
    z: float = 0.0
    height: float = 1.5

    def representative(self, strategy: str = "midpoint") -> np.ndarray:
        if strategy == "midpoint":
            return 0.5 * (self.box_begin.center + self.box_end.center)
        if strategy == "corner":
            corners = self.box_end.corners()
            return corners[int(np.argmin(np.hypot(corners[:, 0], corners[:, 1])))]
        raise ValueError(f"unknown representative strategy {strategy!r}")

    def to_dict(self) -> dict:
        tt = self.time_targets
        return {
            "object_id": self.object_id,
            "class_label": self.class_label.value,
            "box_begin": box_to_dict(self.box_begin),
            "box_end": box_to_dict(self.box_end),
            "z": self.z,
            "height": self.height,
            "t_b": tt.t_b,
            "t_e": tt.t_e,
            "birth_flag": tt.birth_flag,
            "death_flag": tt.death_flag,
        }


def targets_from_ground_truth(tracks: Sequence[GroundTruthTrack]) -> list:
    out = []
    for t in tracks:
        tt = derive_time_targets(t)
        end = t.presence[tt.t_e]
        out.append(ObjectTarget(t.track_id, t.class_label, t.presence[tt.t_b].box, end.box, tt, end.z, end.height))
    return out


@dataclass
class LabelAssignment:
    representatives: list  # one 2D point per object
    positive_cells: list  # BEV cell index per assigned object
    targets: list  # ObjectTarget per positive cell
    anchors: dict = field(default_factory=dict)  # object id -> cell, assigned or not
    unassigned: list = field(default_factory=list)  # object ids that lost a collision

    def heatmap(self, bev: SparseFeatureGrid) -> dict:
        pos = set(self.positive_cells)
        return {tuple(int(v) for v in c): (1.0 if tuple(int(v) for v in c) in pos else 0.0) for c in bev.coords}

    def negative_cells(self, bev: SparseFeatureGrid) -> list:
        pos = set(self.positive_cells)
        return [c for c in (tuple(int(v) for v in r) for r in bev.coords) if c not in pos]


def build_label_assignment(bev: SparseFeatureGrid, objects: Sequence[ObjectTarget],
                           representative: str = "midpoint") -> LabelAssignment:
    """Map each object's representative point to its anchor cell.

    When several objects land on one cell the one whose representative is
    nearest to the cell center keeps it; earlier objects win exact ties.
    """
    reps = [o.representative(representative) for o in objects]
    if not objects:
        return LabelAssignment([], [], [])
    if len(bev) == 0:
        # nothing survived the pipeline, so no object can own a cell
        return LabelAssignment([tuple(map(float, y)) for y in reps], [], [], {}, [o.object_id for o in objects])
    owner = {}
    anchors = {}
    for k, (o, y) in enumerate(zip(objects, reps)):
        cell = assign_anchor(bev, y)
        anchors[o.object_id] = cell
        center = (np.asarray(cell) + 0.5) * np.asarray(bev.cell_size)
        dist = float(np.hypot(*(center - y)))
        if cell not in owner or dist < owner[cell][0]:
            owner[cell] = (dist, k)
    winners = sorted((k, cell) for cell, (_, k) in owner.items())
    won = {k for k, _ in winners}
    return LabelAssignment(
        representatives=[tuple(map(float, y)) for y in reps],
        positive_cells=[cell for _, cell in winners],
        targets=[objects[k] for k, _ in winners],
        anchors=anchors,
        unassigned=[o.object_id for k, o in enumerate(objects) if k not in won],
    )


@dataclass
class ErfReport:
    object_id: str
    anchor: tuple
    n_points: int
    n_covered: int

    @property
    def contained(self) -> bool:
        return self.n_covered == self.n_points

    def to_dict(self) -> dict:
        return {
            "object_id": self.object_id,
            "anchor": list(self.anchor),
            "n_points": self.n_points,
            "n_covered": self.n_covered,
            "contained": self.contained,
        }


def erf_coverage(cloud: SweepPointCloud, bev: SparseFeatureGrid, assignment: LabelAssignment) -> list:
    """Check that each object's own points reach its anchor cell."""
    out = []
    for obj_id, cell in assignment.anchors.items():
        own = cloud.object_points(obj_id)
        reach = bev.prov[bev.index_of(cell)]
        covered = sum(1 for i in own if (reach >> i) & 1)
        out.append(ErfReport(obj_id, cell, len(own), covered))
    return out
