"""Association likelihoods between a track and a new paired detection.

Two models, neither of which predicts motion:

* static/slow objects: the IOU of the track box and detection box that are
  closest in time; ``1 - iou`` is scored under a zero-mean Gaussian once the
  IOU clears ``lambda0``.
* moving objects: boxes A, B (track) and C, D (detection) are ordered in time.
  Centers of B and C are projected onto the A->D axis. The along-axis ratio
  ``|C'B'| / |AD|`` (signed by time order) should match the temporal overlap ratio
  ``|t_B - t_C| / |t_D - t_A|``, and the larger lateral offset of B or C from
  the axis should be near zero.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

from .detection import PairedDetection
from .geometry import DegenerateAxis, OrientedBox2D, iou2d, project_onto_axis

_LOG_2PI = math.log(2.0 * math.pi)


def log_normal(x: float, sigma: float) -> float:
    """Log density of N(0, sigma^2) at x."""
    z = x / sigma
    return -0.5 * (_LOG_2PI + 2.0 * math.log(sigma) + z * z)


class ModelUsed(str, enum.Enum):
    STATIC_IOU = "StaticIOU"
    MOVING_PROJECTION = "MovingProjection"
    INCOMPATIBLE = "Incompatible"


@dataclass(frozen=True)
class LikelihoodParams:
    lambda0: float = 0.3
    sigma_lambda: float = 0.25
    sigma_t: float = 0.15
    sigma_l: float = 0.5
    # additive log terms that put association, miss, birth and false alarm on one scale
    log_detect: float = math.log(0.9)
    log_miss: float = math.log(0.1)
    log_birth: float = math.log(0.05)
    log_false: float = math.log(0.025)
    birth_flag_multiplier: float = 1.0
    min_axis_length: float = 0.2

    def __post_init__(self):
        if not (0.0 < self.lambda0 < 1.0):
            raise ValueError("lambda0 must lie in (0, 1)")
        if min(self.sigma_lambda, self.sigma_t, self.sigma_l) <= 0:
            raise ValueError("likelihood sigmas must be positive")
        if self.birth_flag_multiplier <= 0:
            raise ValueError("birth_flag_multiplier must be positive")
        if self.min_axis_length < 0:
            raise ValueError("min_axis_length must be non-negative")


@dataclass(frozen=True)
class AssociationScore:
    log_likelihood: float
    model_used: ModelUsed
    # (lambda, lambda_t, lateral_max) for the moving model, (iou, None, None) for static
    diagnostics: Optional[tuple] = None

    @property
    def compatible(self) -> bool:
        return self.model_used is not ModelUsed.INCOMPATIBLE


INCOMPATIBLE = AssociationScore(-math.inf, ModelUsed.INCOMPATIBLE)


def score_static(
    track_box: OrientedBox2D,
    det_box: OrientedBox2D,
    params: LikelihoodParams,
    waive_threshold: bool = False,
) -> Optional[AssociationScore]:
    """Static/slow model. Returns None when the IOU falls below ``lambda0``."""
    lam = iou2d(track_box, det_box)
    if lam < params.lambda0 and not waive_threshold:
        return None
    ll = log_normal(1.0 - lam, params.sigma_lambda) + params.log_detect
    return AssociationScore(ll, ModelUsed.STATIC_IOU, (lam, None, None))


def moving_residuals(track_pair, det_pair, min_axis_length: float = 0.0):
    """Return ``(lambda, lambda_t, lateral_max)`` for boxes A, B, C, D.

    ``track_pair`` is ``((box_A, t_A), (box_B, t_B))`` and ``det_pair`` is
    ``((box_C, t_C), (box_D, t_D))``.
    """
    (box_a, t_a), (box_b, t_b) = track_pair
    (box_c, t_c), (box_d, t_d) = det_pair
    if not t_d > t_a:
        raise DegenerateAxis(f"axis needs t_A < t_D, got {t_a} and {t_d}")
    axis_len = math.hypot(box_d.cx - box_a.cx, box_d.cy - box_a.cy)
    if axis_len < max(min_axis_length, 1e-9):
        raise DegenerateAxis(f"|AD| = {axis_len:g} m below {min_axis_length:g} m")
    proj = project_onto_axis(
        [(box_b.cx, box_b.cy, "B"), (box_c.cx, box_c.cy, "C")],
        (box_a.cx, box_a.cy),
        (box_d.cx, box_d.cy),
    )
    b, c = proj["B"], proj["C"]
    # |C'B'| / |AD|, signed by time order so B' behind C' (or the reverse for a
    # gap) counts against the pair instead of collapsing to zero overlap
    sign = -1.0 if t_c > t_b else 1.0
    lam = sign * (b.along - c.along) / axis_len
    lam_t = abs(t_b - t_c) / abs(t_d - t_a)
    return lam, lam_t, max(b.lateral, c.lateral)


def score_moving(track_pair, det_pair, params: LikelihoodParams) -> AssociationScore:
    """Moving-object model. Raises DegenerateAxis when |AD| is too short."""
    lam, lam_t, lateral = moving_residuals(track_pair, det_pair, params.min_axis_length)
    ll = log_normal(lam - lam_t, params.sigma_t) + log_normal(lateral, params.sigma_l) + params.log_detect
    return AssociationScore(ll, ModelUsed.MOVING_PROJECTION, (lam, lam_t, lateral))


def _track_boxes(track):
    """Stored boxes of a track with their global sweep times, most recent first."""
    for frame_index, d in reversed(track.history):
        yield d.box_end, frame_index + d.t_e
        yield d.box_begin, frame_index + d.t_b


def closest_in_time(track, det: PairedDetection, frame_index: int):
    """Track box and detection box whose sweep times are closest.

    Ties go to the most recent track box, then to the detection's begin box.
    """
    det_boxes = [(det.box_begin, frame_index + det.t_b), (det.box_end, frame_index + det.t_e)]
    best = None
    for tbox, tt in _track_boxes(track):
        for dbox, dt in det_boxes:
            gap = abs(dt - tt)
            if best is None or gap < best[0]:
                best = (gap, tbox, dbox)
    return best[1], best[2]


def score_pair(track, det: PairedDetection, params: LikelihoodParams, frame_index: int) -> AssociationScore:
    """Score associating ``det`` (arriving at ``frame_index``) with ``track``.

    ``track`` needs ``class_label`` and ``history``, a sequence of
    ``(frame_index, PairedDetection)`` in arrival order.
    """
    if track.class_label != det.class_label:
        return INCOMPATIBLE
    tbox, dbox = closest_in_time(track, det, frame_index)
    static = score_static(tbox, dbox, params)
    if static is not None:
        return static
    g, last = track.history[-1]
    track_pair = ((last.box_begin, g + last.t_b), (last.box_end, g + last.t_e))
    det_pair = ((det.box_begin, frame_index + det.t_b), (det.box_end, frame_index + det.t_e))
    try:
        return score_moving(track_pair, det_pair, params)
    except DegenerateAxis:
        return score_static(tbox, dbox, params, waive_threshold=True)
