"""Receptive-field coverage on the golden scene set for several pipeline variants.

    python3 scripts/erf_ablation.py [--jobs 4]

Varies the number of stride-1 refinement passes per stage and on the BEV grid,
in both propagation modes.
"""
import argparse
import json
from dataclasses import replace
from pathlib import Path

from pairtrack import simulator as sim
from pairtrack.cli import coverage_summary, target_records
from pairtrack.sweep import PipelineConfig

ROOT = Path(__file__).resolve().parents[1]


def scene_items():
    golden = json.loads((ROOT / "tests" / "golden" / "erf_scenes.json").read_text())
    items = []
    for entry in golden["scenes"]:
        spec = sim.load_scenario(ROOT / entry["scenario"])
        frames = sim.simulate(spec).frames
        items += [(f, sim.synthesize_points(spec, f), frames[f].ground_truth) for f in entry["frames"]]
    return items


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--jobs", type=int, default=4)
    args = ap.parse_args()
    items = scene_items()
    base = PipelineConfig()
    print(f"{'refine':>7}{'bev_refine':>11}{'dilating':>12}{'submanifold':>13}{'unassigned(sub)':>17}")
    for refine, bev in [(0, 0), (1, 0), (0, 2), (1, 2), (2, 2)]:
        cfg = replace(base, stages=tuple(replace(s, refine=refine) for s in base.stages), bev_refine=bev)
        dil = coverage_summary(target_records(items, cfg, args.jobs))
        sub = coverage_summary(target_records(items, cfg.with_mode("submanifold"), args.jobs))
        print(f"{refine:>7}{bev:>11}{dil['coverage']:>12.3f}{sub['coverage']:>13.3f}{sub['unassigned']:>17}")


if __name__ == "__main__":
    main()
