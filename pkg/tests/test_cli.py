import hashlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from pairtrack import io as pio
from pairtrack import simulator as sim
from pairtrack.cli import main
from pairtrack.detection import ClassLabel, Frame, GroundTruthTrack, SweepBox
from pairtrack.geometry import OrientedBox2D
from pairtrack.greedy import GreedyTracker
from pairtrack.tracker import TrackerConfig, TrackSnapshot, TrackStatus, track_log_lines

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = json.loads((ROOT / "tests" / "golden" / "simulate_sha256.json").read_text())


def sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def frames_file(tmp_path):
    out = tmp_path / "frames.jsonl"
    assert run("simulate", ROOT / "scenarios" / "mixed_traffic.yaml", out) == 0
    return out


class TestSimulate:
    def test_golden_hash(self, tmp_path, capsys):
        out = tmp_path / "f.jsonl"
        assert run("simulate", ROOT / "scenarios" / "parked_car.yaml", out) == 0
        assert sha(out) == GOLDEN["parked_car.yaml"]
        assert "objects=1 frames=100" in capsys.readouterr().out

    def test_preset_and_seed(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert run("simulate", "preset:parked_car", a) == 0
        assert run("simulate", "preset:parked_car", b, "--seed", 5) == 0
        assert sha(a) == GOLDEN["parked_car.yaml"] and sha(b) != sha(a)

    def test_missing_file(self, tmp_path, capsys):
        assert run("simulate", tmp_path / "nope.yaml", tmp_path / "o.jsonl") == 2
        assert "not found" in capsys.readouterr().err

    def test_invalid_spec(self, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("duration_frames: 5\nobjects:\n  - {class_label: Vehicle, x: 0, y: 0, death_frame: 9}\n")
        assert run("simulate", bad, tmp_path / "o.jsonl") == 2
        bad.write_text("duration_frames: [unclosed\n")
        assert run("simulate", bad, tmp_path / "o.jsonl") == 2

    def test_unknown_preset(self, tmp_path):
        assert run("simulate", "preset:nothing", tmp_path / "o.jsonl") == 2

    def test_points(self, tmp_path):
        f, p = tmp_path / "f.jsonl", tmp_path / "p.jsonl"
        assert run("simulate", "preset:moving_car", f, "--points", p, "--point-frames", "10,11") == 0
        assert sorted(pio.read_point_clouds(p)) == [10, 11]
        assert run("simulate", "preset:moving_car", f, "--points", p, "--point-frames", "500") == 2


class TestTrack:
    def test_budget_one_matches_greedy(self, frames_file, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert run("track", frames_file, a, "--budget", 1) == 0
        assert run("track", frames_file, b, "--greedy", "--budget", 1) == 0
        assert a.read_bytes() == b.read_bytes()
        greedy = GreedyTracker(TrackerConfig(hypothesis_budget=1)).run(pio.read_frames(frames_file))
        assert len(a.read_text().splitlines()) == len(track_log_lines(greedy))

    def test_pedigree_branches(self, frames_file, tmp_path, capsys):
        dot = tmp_path / "p.dot"
        assert run("track", frames_file, tmp_path / "t.jsonl", "--budget", 8, "--pedigree", dot) == 0
        out = capsys.readouterr().out
        leaves = int(out.split("leaves=")[1].split()[0])
        assert leaves > 1 and dot.read_text().startswith("digraph")

    def test_config_file(self, frames_file, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        assert run("track", frames_file, a, "--config", ROOT / "configs" / "tracker.yaml") == 0
        assert run("track", frames_file, b) == 0
        assert a.read_bytes() == b.read_bytes()
        bad = tmp_path / "bad.yaml"
        bad.write_text("tracker: {hypothesis_budget: 0}\n")
        assert run("track", frames_file, a, "--config", bad) == 2

    def test_empty_file(self, tmp_path):
        empty, out = tmp_path / "e.jsonl", tmp_path / "o.jsonl"
        empty.write_text("")
        assert run("track", empty, out) == 0 and out.read_text() == ""

    def test_out_of_order(self, frames_file, tmp_path, capsys):
        rev = tmp_path / "rev.jsonl"
        rev.write_text("".join(reversed(frames_file.read_text().splitlines(keepends=True))))
        assert run("track", rev, tmp_path / "o.jsonl") == 3
        assert "error" in capsys.readouterr().err

    def test_malformed(self, tmp_path):
        bad = tmp_path / "bad.jsonl"
        bad.write_text("{not json\n")
        assert run("track", bad, tmp_path / "o.jsonl") == 2
        bad.write_text('{"frame_index": 0}\n')
        assert run("track", bad, tmp_path / "o.jsonl") == 2

    def test_svg(self, tmp_path):
        f = tmp_path / "f.jsonl"
        run("simulate", "preset:crossing_pedestrians", f)
        assert run("track", f, tmp_path / "t.jsonl", "--svg", tmp_path / "svg") == 0
        assert len(list((tmp_path / "svg").glob("*.svg"))) == 60


class TestEvaluate:
    def test_self_evaluation(self, frames_file, tmp_path):
        rep = tmp_path / "r.json"
        assert run("evaluate", frames_file, frames_file, rep) == 0
        assert json.loads(rep.read_text())["mota"] == 1.0

    def test_worked_example(self, tmp_path, capsys):
        a, b = OrientedBox2D(0, 0, 4, 2), OrientedBox2D(10, 0, 4, 2)
        gt = [Frame(f, f / 10, (), tuple(GroundTruthTrack(o, ClassLabel.VEHICLE, {0: SweepBox(x)})
                                         for o, x in (("A", a), ("B", b)))) for f in (0, 1)]
        snaps = {0: [(1, a.moved(0.1, 0)), (2, b)], 1: [(3, a.moved(0.2, 0)), (4, OrientedBox2D(40, 40, 4, 2))]}
        log = {f: [TrackSnapshot(f, t, ClassLabel.VEHICLE, x, x, TrackStatus.CONFIRMED) for t, x in s]
               for f, s in snaps.items()}
        pio.write_frames(tmp_path / "gt.jsonl", gt)
        pio.write_track_log(tmp_path / "t.jsonl", log)
        assert run("evaluate", tmp_path / "gt.jsonl", tmp_path / "t.jsonl", tmp_path / "r.json") == 0
        r = json.loads((tmp_path / "r.json").read_text())
        assert (r["fp"], r["fn"], r["id_switches"]) == (1, 1, 1)
        assert r["mota"] == pytest.approx(0.25) and r["motp"] == pytest.approx(0.1)
        assert "MOTA" in capsys.readouterr().out

    def test_clock_mismatch(self, frames_file, tmp_path):
        tracks = tmp_path / "t.jsonl"
        box = {"cx": 0, "cy": 0, "length": 4, "width": 2, "heading": 0}
        rec = {"frame_index": 5000, "track_id": 0, "class_label": "Vehicle", "box_end": box, "box_begin": box,
               "status": "Confirmed"}
        tracks.write_text(json.dumps(rec) + "\n")
        assert run("evaluate", frames_file, tracks, tmp_path / "r.json") == 3

    def test_missing_inputs(self, frames_file, tmp_path):
        assert run("evaluate", tmp_path / "x.jsonl", frames_file, tmp_path / "r.json") == 2
        assert run("evaluate", frames_file, tmp_path / "x.jsonl", tmp_path / "r.json") == 2


class TestTargets:
    def test_single_object_scene(self, tmp_path, capsys):
        spec = sim.ScenarioSpec(duration_frames=12,
                                objects=[sim.ObjectSpec(ClassLabel.VEHICLE, 3.0, 1.0, 0.2, id="car")],
                                sensor=sim.SensorSpec(background_points=0), seed=0)
        frames = sim.simulate(spec).frames
        pio.write_frames(tmp_path / "f.jsonl", frames)
        pio.write_point_clouds(tmp_path / "p.jsonl", {10: sim.synthesize_points(spec, 10)})
        assert run("targets", tmp_path / "p.jsonl", tmp_path / "f.jsonl", tmp_path / "o.jsonl",
                   "--report", tmp_path / "r.json") == 0
        (rec,) = [json.loads(line) for line in (tmp_path / "o.jsonl").read_text().splitlines()]
        assert len(rec["positive_cells"]) == 1 and rec["erf"][0]["contained"]
        assert json.loads((tmp_path / "r.json").read_text())["coverage"] == 1.0

    def test_empty_cloud(self, tmp_path):
        pio.write_frames(tmp_path / "f.jsonl", [Frame(0, 0.0, (), ())])
        (tmp_path / "p.jsonl").write_text('{"frame_index": 0, "points": [], "owners": []}\n')
        assert run("targets", tmp_path / "p.jsonl", tmp_path / "f.jsonl", tmp_path / "o.jsonl") == 0
        rec = json.loads((tmp_path / "o.jsonl").read_text())
        assert rec["positive_cells"] == [] and rec["active_bev_cells"] == 0

    def test_malformed(self, tmp_path):
        pio.write_frames(tmp_path / "f.jsonl", [Frame(0, 0.0, (), ())])
        (tmp_path / "p.jsonl").write_text('{"frame_index": 0, "points": [[1, 2]]}\n')
        assert run("targets", tmp_path / "p.jsonl", tmp_path / "f.jsonl", tmp_path / "o.jsonl") == 2
        (tmp_path / "p.jsonl").write_text('{"frame_index": 3, "points": []}\n')
        assert run("targets", tmp_path / "p.jsonl", tmp_path / "f.jsonl", tmp_path / "o.jsonl") == 2


class TestAssocBench:
    def test_three_by_three_k6(self, tmp_path):
        out = tmp_path / "b.json"
        assert run("assoc-bench", "--sizes", "1,3", "--trials", 10, "--k", 6, "--json", out) == 0
        rows = json.loads(out.read_text())
        assert [r["agreement"] for r in rows] == [1.0, 1.0]

    def test_large_sizes_complete(self, tmp_path):
        out = tmp_path / "b.json"
        assert run("assoc-bench", "--sizes", "8,32,64", "--trials", 2, "--k", 3, "--json", out) == 0
        assert all(r["agreement"] == 1.0 for r in json.loads(out.read_text()))

    def test_bad_args(self):
        assert run("assoc-bench", "--sizes", "0") == 2


def _pipeline(workdir: Path):
    f, p = workdir / "frames.jsonl", workdir / "points.jsonl"
    steps = [
        ("simulate", "preset:mixed_traffic", f, "--points", p, "--point-frames", "20,40"),
        ("track", f, workdir / "tracks.jsonl", "--budget", 4, "--pedigree", workdir / "ped.dot",
         "--svg", workdir / "svg"),
        ("track", f, workdir / "greedy.jsonl", "--greedy"),
        ("evaluate", f, workdir / "tracks.jsonl", workdir / "report.json"),
        ("targets", p, f, workdir / "targets.jsonl", "--report", workdir / "erf.json", "--jobs", 2),
        ("demo", "--out", workdir / "demo", "--jobs", 2),
    ]
    for argv in steps:
        assert run(*argv) == 0, argv
    return {str(q.relative_to(workdir)): sha(q) for q in sorted(workdir.rglob("*")) if q.is_file()}


def test_pipeline_rerun_is_byte_identical(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    first, second = _pipeline(tmp_path / "a"), _pipeline(tmp_path / "b")
    assert len(first) > 60 and first == second


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "pairtrack.cli", "simulate", "preset:moving_car",
                          str(tmp_path / "f.jsonl")], capture_output=True, text=True)
    assert res.returncode == 0 and "moving_car" in res.stdout
    res = subprocess.run([sys.executable, "-m", "pairtrack.cli", "track", str(tmp_path / "missing"),
                          str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 2 and res.stderr.startswith("error:")
