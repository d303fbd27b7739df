import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pairtrack import simulator as sim
from pairtrack.detection import ClassLabel, Frame, GroundTruthTrack, SweepBox
from pairtrack.evaluation import ClockMismatch, evaluate, ground_truth_log
from pairtrack.geometry import OrientedBox2D
from pairtrack.tracker import TrackerConfig, TrackSnapshot, TrackStatus, run_sequence

A = OrientedBox2D(0, 0, 4, 2)
B = OrientedBox2D(10, 0, 4, 2)


def gt_frame(f, objs):
    return Frame(f, f / 10, (), tuple(GroundTruthTrack(oid, ClassLabel.VEHICLE, {0: SweepBox(b)}) for oid, b in objs))


def snap(f, tid, box):
    return TrackSnapshot(f, tid, ClassLabel.VEHICLE, box, box, TrackStatus.CONFIRMED)


def relabel(log, mapping):
    return {f: [TrackSnapshot(s.frame_index, mapping[s.track_id], s.class_label, s.box_end, s.box_begin, s.status)
                for s in snaps] for f, snaps in log.items()}


class TestWorkedExample:
    """Two objects, two frames.

    frame 0: track 1 sits 0.1 m off A, track 2 exactly on B.
    frame 1: A is picked up by a new track 3 (0.2 m off), B is missed and
    track 4 is a false alarm far away.
    gt = 4, fp = 1, fn = 1, id switches = 1  ->  mota = 1 - 3/4 = 0.25
    matched center errors 0.1, 0, 0.2       ->  motp = 0.1
    """

    gt = [gt_frame(0, [("A", A), ("B", B)]), gt_frame(1, [("A", A), ("B", B)])]
    log = {
        0: [snap(0, 1, A.moved(0.1, 0)), snap(0, 2, B)],
        1: [snap(1, 3, A.moved(0.2, 0)), snap(1, 4, OrientedBox2D(40, 40, 4, 2))],
    }

    def test_counts(self):
        r = evaluate(self.log, self.gt)
        assert (r.gt_count, r.fp, r.fn, r.id_switches, r.matches) == (4, 1, 1, 1, 3)
        assert r.mota == pytest.approx(0.25)
        assert r.motp == pytest.approx(0.1)

    def test_mota_identity(self):
        r = evaluate(self.log, self.gt)
        assert r.mota == pytest.approx(1 - (r.fp + r.fn + r.id_switches) / r.gt_count)

    def test_gate(self):
        # iou of A against A shifted by 3 m along its length is 1/7, below the gate
        log = {0: [snap(0, 1, A.moved(3, 0))], 1: []}
        r = evaluate(log, self.gt)
        assert (r.fp, r.fn, r.matches) == (1, 4, 0)

    def test_carry_over_beats_better_iou(self):
        gt = [gt_frame(0, [("A", A)]), gt_frame(1, [("A", A)])]
        log = {0: [snap(0, 1, A.moved(0.3, 0))], 1: [snap(1, 1, A.moved(0.3, 0)), snap(1, 2, A)]}
        r = evaluate(log, gt)
        assert r.id_switches == 0 and r.fp == 1

    def test_serialization(self):
        r = evaluate(self.log, self.gt)
        d = json.loads(json.dumps(r.to_dict()))
        assert d["mota"] == pytest.approx(0.25) and "per_class" in d and "near" in d
        assert "MOTA" in r.table()


class TestScenarioProperties:
    frames = sim.simulate(sim.mixed_traffic()).frames

    def test_self_evaluation_is_perfect(self):
        r = evaluate(ground_truth_log(self.frames), self.frames)
        assert r.mota == 1.0 and r.motp == 0.0 and r.begin_error == 0.0

    def test_empty_output(self):
        r = evaluate({}, self.frames)
        assert r.mota == 0.0 and r.fn == r.gt_count and r.fp == r.id_switches == 0

    def test_no_ground_truth(self):
        r = evaluate({}, [Frame(0, 0.0, (), ())])
        assert r.mota is None and r.gt_count == 0

    def test_clock_mismatch(self):
        with pytest.raises(ClockMismatch):
            evaluate({999: []}, self.frames)

    def test_breakdowns_add_up(self):
        log, _ = run_sequence(self.frames, TrackerConfig())
        r = evaluate(log, self.frames)
        assert r.near.gt_count + r.far.gt_count == r.gt_count
        assert sum(c.gt_count for c in r.per_class.values()) == r.gt_count
        assert set(r.per_class) == {"Vehicle", "Pedestrian", "Cyclist"}

    @settings(max_examples=20)
    @given(st.randoms(use_true_random=False))
    def test_relabel_invariance(self, rnd):
        log, _ = run_sequence(self.frames, TrackerConfig(hypothesis_budget=1))
        ids = sorted({s.track_id for snaps in log.values() for s in snaps})
        perm = ids[:]
        rnd.shuffle(perm)
        mapping = {a: b + 1000 for a, b in zip(ids, perm)}
        base, other = evaluate(log, self.frames), evaluate(relabel(log, mapping), self.frames)
        assert other.to_dict() == base.to_dict()


@pytest.mark.parametrize("k", [0, 7, 23, 41])
def test_removing_one_true_positive_adds_one_miss(k):
    frames = sim.simulate(sim.crossing_pedestrians()).frames
    log, _ = run_sequence(frames, TrackerConfig())
    base = evaluate(log, frames)
    f = sorted(f for f in log if log[f])[k]
    cut = dict(log)
    cut[f] = log[f][1:]
    r = evaluate(cut, frames)
    assert r.fn == base.fn + 1 and r.fp == base.fp and r.id_switches == base.id_switches
