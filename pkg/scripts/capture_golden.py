"""Capture the versioned golden files under tests/golden.

    python3 scripts/capture_golden.py [--check]

simulate_sha256.json   SHA-256 of the frame JSONL written for every bundled
                       scenario file (seed as stored in the file).
erf_scenes.json        the golden scene set for the receptive-field check:
                       scenario files and frame indices, plus the coverage
                       measured with the default pipeline in both modes.

With --check nothing is written; the script exits 1 if a stored file differs.
"""
import argparse
import hashlib
import json
import sys
import tempfile
from pathlib import Path

from pairtrack import io as pio
from pairtrack import simulator as sim
from pairtrack.cli import coverage_summary, target_records
from pairtrack.sweep import PipelineConfig

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = ROOT / "tests" / "golden"
SCENARIOS = ROOT / "scenarios"
ERF_SCENES = ["parked_car", "moving_car", "crossing_pedestrians", "mixed_traffic"]
ERF_FRAMES = [10, 25, 40, 55]


def simulate_hashes() -> dict:
    out = {}
    with tempfile.TemporaryDirectory() as tmp:
        for path in sorted(SCENARIOS.glob("*.yaml")):
            target = Path(tmp) / f"{path.stem}.jsonl"
            pio.write_frames(target, sim.simulate(sim.load_scenario(path)).frames)
            out[path.name] = hashlib.sha256(target.read_bytes()).hexdigest()
    return out


def erf_items(scenes):
    items = []
    for entry in scenes:
        spec = sim.load_scenario(ROOT / entry["scenario"])
        frames = sim.simulate(spec).frames
        for f in entry["frames"]:
            items.append((f, sim.synthesize_points(spec, f), frames[f].ground_truth))
    return items


def erf_golden(jobs: int) -> dict:
    scenes = [{"scenario": f"scenarios/{n}.yaml", "frames": ERF_FRAMES} for n in ERF_SCENES]
    items = erf_items(scenes)
    cfg = PipelineConfig()
    measured = {mode: coverage_summary(target_records(items, cfg.with_mode(mode), jobs))
                for mode in ("dilating", "submanifold")}
    return {"scenes": scenes, "measured": measured}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--check", action="store_true")
    ap.add_argument("--jobs", type=int, default=4)
    args = ap.parse_args()
    files = {
        "simulate_sha256.json": simulate_hashes(),
        "erf_scenes.json": erf_golden(args.jobs),
    }
    stale = 0
    for name, data in files.items():
        text = json.dumps(data, indent=2, sort_keys=True) + "\n"
        path = GOLDEN / name
        if args.check:
            same = path.is_file() and path.read_text() == text
            stale += not same
            print(f"{'ok   ' if same else 'STALE'} {path.relative_to(ROOT)}")
        else:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text)
            print(f"wrote {path.relative_to(ROOT)}")
    sys.exit(1 if stale else 0)


if __name__ == "__main__":
    main()
