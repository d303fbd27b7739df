"""Scenario engine standing in for a trained multi-sweep detector.

Objects follow simple motion models on a frame clock (one lidar sweep per
frame). At frame ``f`` the buffer holds sweeps ``f-5 .. f``; every object seen
in the buffer yields a paired detection with boxes at its first and last
present sweep, subject to missed detections, center/heading noise and clutter.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .detection import (
    BUFFER,
    ClassLabel,
    Frame,
    GroundTruthTrack,
    PairedDetection,
    SweepBox,
    derive_time_targets,
)
from .geometry import OrientedBox2D
from .sweep import SweepPointCloud

DEFAULT_EXTENT = {
    ClassLabel.VEHICLE: (4.5, 1.9, 1.6),
    ClassLabel.PEDESTRIAN: (0.8, 0.8, 1.75),
    ClassLabel.CYCLIST: (1.8, 0.7, 1.7),
}


class InvalidSpec(ValueError):
    pass


@dataclass
class Motion:
    kind: str = "static"  # static | const_velocity | const_turn
    speed: float = 0.0  # m/s along the heading
    yaw_rate: float = 0.0  # rad/s

    def __post_init__(self):
        if self.kind not in ("static", "const_velocity", "const_turn"):
            raise InvalidSpec(f"unknown motion kind {self.kind!r}")


@dataclass
class ObjectSpec:
    class_label: ClassLabel
    x: float
    y: float
    heading: float = 0.0
    length: Optional[float] = None
    width: Optional[float] = None
    height: Optional[float] = None
    z: float = 0.0
    motion: Motion = field(default_factory=Motion)
    # None: exists before the sequence starts. The pose above is at frame max(birth_frame, 0).
    birth_frame: Optional[int] = None
    death_frame: Optional[int] = None
    occlusions: list = field(default_factory=list)  # [start, end) frame intervals
    id: Optional[str] = None

    def __post_init__(self):
        self.class_label = ClassLabel(self.class_label)
        if isinstance(self.motion, dict):
            self.motion = Motion(**self.motion)
        dl, dw, dh = DEFAULT_EXTENT[self.class_label]
        self.length = dl if self.length is None else self.length
        self.width = dw if self.width is None else self.width
        self.height = dh if self.height is None else self.height
        if min(self.length, self.width, self.height) <= 0:
            raise InvalidSpec("object extent must be positive")
        self.occlusions = [tuple(o) for o in self.occlusions]

    @property
    def anchor_frame(self) -> int:
        return max(self.birth_frame, 0) if self.birth_frame is not None else 0

    def alive(self, g: int) -> bool:
        if self.birth_frame is not None and g < self.birth_frame:
            return False
        if self.death_frame is not None and g >= self.death_frame:
            return False
        return True

    def visible(self, g: int) -> bool:
        return self.alive(g) and not any(a <= g < b for a, b in self.occlusions)

    def pose(self, g: int, frame_rate: float) -> tuple[float, float, float]:
        tau = (g - self.anchor_frame) / frame_rate
        m = self.motion
        h0 = self.heading
        if m.kind == "static":
            return self.x, self.y, h0
        if m.kind == "const_velocity" or abs(m.yaw_rate) < 1e-12:
            return self.x + m.speed * tau * math.cos(h0), self.y + m.speed * tau * math.sin(h0), h0
        w = m.yaw_rate
        h = h0 + w * tau
        r = m.speed / w
        return self.x + r * (math.sin(h) - math.sin(h0)), self.y - r * (math.cos(h) - math.cos(h0)), h

    def box(self, g: int, frame_rate: float) -> OrientedBox2D:
        x, y, h = self.pose(g, frame_rate)
        return OrientedBox2D(x, y, self.length, self.width, h)


@dataclass
class SensorSpec:
    p_detect: float = 1.0
    center_sigma: float = 0.0
    heading_sigma: float = 0.0
    clutter_rate: float = 0.0  # mean clutter detections per frame
    clutter_region: tuple = (-50.0, 50.0, -50.0, 50.0)
    points_per_object: int = 100
    background_points: int = 50
    point_region: tuple = (-40.0, 40.0, -40.0, 40.0)

    def __post_init__(self):
        if not (0.0 <= self.p_detect <= 1.0):
            raise InvalidSpec("p_detect must lie in [0, 1]")
        if min(self.center_sigma, self.heading_sigma, self.clutter_rate) < 0:
            raise InvalidSpec("noise sigmas and clutter rate must be non-negative")
        self.clutter_region = tuple(self.clutter_region)
        self.point_region = tuple(self.point_region)


@dataclass
class ScenarioSpec:
    duration_frames: int
    objects: list = field(default_factory=list)
    sensor: SensorSpec = field(default_factory=SensorSpec)
    frame_rate: float = 10.0
    seed: int = 0
    name: str = "scenario"

    def __post_init__(self):
        self.objects = [o if isinstance(o, ObjectSpec) else ObjectSpec(**o) for o in self.objects]
        if isinstance(self.sensor, dict):
            self.sensor = SensorSpec(**self.sensor)
        self.validate()

    def validate(self):
        if self.duration_frames < 1:
            raise InvalidSpec("duration_frames must be >= 1")
        if not self.frame_rate > 0:
            raise InvalidSpec("frame_rate must be positive")
        for k, o in enumerate(self.objects):
            death = self.duration_frames if o.death_frame is None else o.death_frame
            birth = -1 if o.birth_frame is None else o.birth_frame
            if not birth < death <= self.duration_frames:
                raise InvalidSpec(f"object {k}: need birth_frame < death_frame <= duration_frames")
            if o.id is None:
                o.id = f"obj{k}"
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise InvalidSpec("object ids must be unique")


@dataclass
class SimOutput:
    frames: list
    point_clouds: Optional[dict] = None


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    d = asdict(spec)
    for o in d["objects"]:
        o["class_label"] = ClassLabel(o["class_label"]).value
        o["occlusions"] = [list(x) for x in o["occlusions"]]
    d["sensor"]["clutter_region"] = list(d["sensor"]["clutter_region"])
    d["sensor"]["point_region"] = list(d["sensor"]["point_region"])
    return d


def scenario_from_dict(d: dict) -> ScenarioSpec:
    try:
        return ScenarioSpec(**d)
    except InvalidSpec:
        raise
    except (TypeError, ValueError, KeyError) as e:
        raise InvalidSpec(str(e)) from e


def load_scenario(path) -> ScenarioSpec:
    path = Path(path)
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise InvalidSpec(f"{path}: expected a mapping at top level")
    return scenario_from_dict(data)


def _confidence(noise_mag: float, sigma: float) -> float:
    if sigma <= 0:
        return 0.99
    return min(0.99, max(0.05, 1.0 - noise_mag / (3.0 * sigma)))


def ground_truth_slice(obj: ObjectSpec, f: int, frame_rate: float) -> Optional[GroundTruthTrack]:
    presence = {}
    for s in range(BUFFER[0], BUFFER[1] + 1):
        g = f + s
        if obj.visible(g):
            presence[s] = SweepBox(obj.box(g, frame_rate), obj.z, obj.height)
    if not presence:
        return None
    return GroundTruthTrack(obj.id, obj.class_label, presence)


def simulate(spec: ScenarioSpec) -> SimOutput:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    sen = spec.sensor
    frames = []
    for f in range(spec.duration_frames):
        dets = []
        gts = []
        for obj in spec.objects:
            gt = ground_truth_slice(obj, f, spec.frame_rate)
            # draws happen for every object every frame so streams never shift
            detected = rng.random() < sen.p_detect
            noise = rng.standard_normal(6)
            if gt is None:
                continue
            gts.append(gt)
            if not detected:
                continue
            tt = derive_time_targets(gt)
            ex, ey, eh = noise[0] * sen.center_sigma, noise[1] * sen.center_sigma, noise[2] * sen.heading_sigma
            true_end = gt.presence[tt.t_e].box
            box_end = true_end.moved(ex, ey, eh)
            if tt.singleton:
                box_begin = box_end
            else:
                bx, by, bh = noise[3] * sen.center_sigma, noise[4] * sen.center_sigma, noise[5] * sen.heading_sigma
                box_begin = gt.presence[tt.t_b].box.moved(bx, by, bh)
            dets.append(
                PairedDetection(
                    id=f"{f}-{len(dets)}",
                    class_label=obj.class_label,
                    box_end=box_end,
                    box_begin=box_begin,
                    shared_height=obj.height,
                    shared_z=obj.z,
                    t_b=tt.t_b,
                    t_e=tt.t_e,
                    birth_flag=tt.birth_flag,
                    death_flag=tt.death_flag,
                    confidence=_confidence(math.hypot(ex, ey), sen.center_sigma),
                )
            )
        n_clutter = rng.poisson(sen.clutter_rate) if sen.clutter_rate > 0 else 0
        labels = list(ClassLabel)
        x0, x1, y0, y1 = sen.clutter_region
        for _ in range(n_clutter):
            cls = labels[rng.integers(len(labels))]
            l, w, h = DEFAULT_EXTENT[cls]
            box = OrientedBox2D(rng.uniform(x0, x1), rng.uniform(y0, y1), l, w, rng.uniform(-math.pi, math.pi))
            t = int(rng.integers(BUFFER[0] + 1, BUFFER[1]))
            dets.append(
                PairedDetection(
                    id=f"{f}-{len(dets)}",
                    class_label=cls,
                    box_end=box,
                    box_begin=box,
                    shared_height=h,
                    t_b=t,
                    t_e=t,
                    birth_flag=True,
                    death_flag=True,
                    confidence=float(rng.uniform(0.05, 0.5)),
                )
            )
        frames.append(Frame(f, f / spec.frame_rate, tuple(dets), tuple(gts)))
    return SimOutput(frames)


def _perimeter_points(box: OrientedBox2D, n: int, rng) -> np.ndarray:
    l, w = box.length, box.width
    u = rng.uniform(0.0, 2.0 * (l + w), n)
    local = np.empty((n, 2))
    for k, s in enumerate(u):
        if s < l:
            local[k] = (s - l / 2, -w / 2)
        elif s < l + w:
            local[k] = (l / 2, s - l - w / 2)
        elif s < 2 * l + w:
            local[k] = (l / 2 - (s - l - w), w / 2)
        else:
            local[k] = (-l / 2, w / 2 - (s - 2 * l - w))
    c, sn = math.cos(box.heading), math.sin(box.heading)
    return local @ np.array([[c, sn], [-sn, c]]) + box.center


def synthesize_points(spec: ScenarioSpec, frame: int) -> SweepPointCloud:
    """Multi-sweep point cloud for the buffer ending at ``frame``.

    Object points lie on the box outline at the object's pose at each sweep;
    background points are uniform on the ground plane. Returned in the
    buffer-end frame, which here is the world frame.
    """
    rng = np.random.default_rng([spec.seed, frame, 7])
    sen = spec.sensor
    chunks = []
    owners = []
    for s in range(BUFFER[0], BUFFER[1] + 1):
        g = frame + s
        for obj in spec.objects:
            if not obj.visible(g):
                continue
            xy = _perimeter_points(obj.box(g, spec.frame_rate), sen.points_per_object, rng)
            z = rng.uniform(obj.z, obj.z + obj.height, len(xy))
            inten = rng.uniform(0.2, 1.0, len(xy))
            chunks.append(np.column_stack([xy, z, np.full(len(xy), s), inten]))
            owners.extend([obj.id] * len(xy))
        nb = sen.background_points
        if nb:
            x0, x1, y0, y1 = sen.point_region
            xy = np.column_stack([rng.uniform(x0, x1, nb), rng.uniform(y0, y1, nb)])
            chunks.append(np.column_stack([xy, np.zeros(nb), np.full(nb, s), rng.uniform(0.0, 0.3, nb)]))
            owners.extend([None] * nb)
    pts = np.vstack(chunks) if chunks else np.zeros((0, 5))
    return SweepPointCloud(pts, owners)


# -- bundled scenarios -----------------------------------------------------------


def parked_car(seed: int = 0, duration: int = 100, sigma: float = 0.1, p_detect: float = 0.95,
               clutter: float = 2.0) -> ScenarioSpec:
    return ScenarioSpec(
        duration_frames=duration,
        objects=[ObjectSpec(ClassLabel.VEHICLE, 12.0, 4.0, 0.3, id="parked")],
        sensor=SensorSpec(p_detect=p_detect, center_sigma=sigma, heading_sigma=0.01 if sigma else 0.0,
                          clutter_rate=clutter),
        seed=seed,
        name="parked_car",
    )


def moving_car(seed: int = 0, duration: int = 60, speed: float = 10.0, sigma: float = 0.0) -> ScenarioSpec:
    return ScenarioSpec(
        duration_frames=duration,
        objects=[ObjectSpec(ClassLabel.VEHICLE, -25.0, -3.0, 0.0, motion=Motion("const_velocity", speed), id="car")],
        sensor=SensorSpec(center_sigma=sigma, heading_sigma=0.01 if sigma else 0.0),
        seed=seed,
        name="moving_car",
    )


def crossing_pedestrians(seed: int = 0, duration: int = 60, sigma: float = 0.0) -> ScenarioSpec:
    """Two pedestrians walking toward each other on lanes 1 m apart; they pass at frame 30."""
    walk = Motion("const_velocity", 1.4)
    return ScenarioSpec(
        duration_frames=duration,
        objects=[
            ObjectSpec(ClassLabel.PEDESTRIAN, -4.2, 0.5, 0.0, motion=walk, id="ped_east"),
            ObjectSpec(ClassLabel.PEDESTRIAN, 4.2, -0.5, math.pi, motion=Motion("const_velocity", 1.4), id="ped_west"),
        ],
        sensor=SensorSpec(center_sigma=sigma, heading_sigma=0.02 if sigma else 0.0),
        seed=seed,
        name="crossing_pedestrians",
    )


def mixed_traffic(seed: int = 0, duration: int = 100) -> ScenarioSpec:
    """Ten objects of all classes and motion types, with births, deaths and an occlusion."""
    V, P, C = ClassLabel.VEHICLE, ClassLabel.PEDESTRIAN, ClassLabel.CYCLIST
    objs = [
        ObjectSpec(V, 10.0, 10.0, 0.0, id="parked_a"),
        ObjectSpec(V, 10.0, 14.0, math.pi, id="parked_b"),
        ObjectSpec(V, -40.0, -4.0, 0.0, motion=Motion("const_velocity", 8.0), id="car_east"),
        ObjectSpec(V, 40.0, 4.0, math.pi, motion=Motion("const_velocity", 6.0), id="car_west"),
        ObjectSpec(V, -5.0, -20.0, math.pi / 2, motion=Motion("const_turn", 5.0, 0.15), id="car_turn",
                   birth_frame=20),
        ObjectSpec(P, -6.0, 6.0, 0.0, motion=Motion("const_velocity", 1.3), id="ped_a"),
        ObjectSpec(P, 6.0, 7.0, math.pi, motion=Motion("const_velocity", 1.2), id="ped_b", death_frame=80),
        ObjectSpec(P, 0.0, -8.0, math.pi / 2, motion=Motion("const_velocity", 1.0), id="ped_c",
                   occlusions=[(40, 44)]),
        ObjectSpec(C, -20.0, 20.0, -0.3, motion=Motion("const_velocity", 4.0), id="bike_a"),
        ObjectSpec(C, 20.0, -15.0, 2.5, motion=Motion("const_turn", 4.0, -0.1), id="bike_b", birth_frame=10,
                   death_frame=90),
    ]
    return ScenarioSpec(
        duration_frames=duration,
        objects=objs,
        sensor=SensorSpec(p_detect=0.98, center_sigma=0.05, heading_sigma=0.02, clutter_rate=2.0),
        seed=seed,
        name="mixed_traffic",
    )


def time_target_cases(seed: int = 0) -> ScenarioSpec:
    """Objects whose begin/end times cover all five buffer configurations at frame 10.

    a: present throughout; b: occluded mid-buffer only; c: born at frame 8;
    d: dies at frame 8; e: visible at frame 7 only.
    """
    V = ClassLabel.VEHICLE
    return ScenarioSpec(
        duration_frames=20,
        objects=[
            ObjectSpec(V, 0.0, 0.0, id="case_a"),
            ObjectSpec(V, 0.0, 10.0, occlusions=[(7, 9)], id="case_b"),
            ObjectSpec(V, 0.0, 20.0, birth_frame=8, id="case_c"),
            ObjectSpec(V, 0.0, 30.0, death_frame=9, id="case_d"),
            ObjectSpec(V, 0.0, 40.0, birth_frame=7, death_frame=8, id="case_e"),
        ],
        seed=seed,
        name="time_target_cases",
    )


PRESETS = {
    "parked_car": parked_car,
    "moving_car": moving_car,
    "crossing_pedestrians": crossing_pedestrians,
    "mixed_traffic": mixed_traffic,
    "time_target_cases": time_target_cases,
}
