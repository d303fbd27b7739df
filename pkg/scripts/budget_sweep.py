"""Tracker quality and best cumulative log-weight as the hypothesis budget grows.

    python3 scripts/budget_sweep.py [--seeds 20] [--budgets 1,2,4,8] [--json out.json]

Scenarios cycle through the presets with seed = index. A row is marked
``non-monotone`` when a larger budget ends with a lower best log-weight.
"""
import argparse
import json
import time

from pairtrack import simulator as sim
from pairtrack.evaluation import evaluate
from pairtrack.tracker import TrackerConfig, run_sequence

PRESETS = [sim.mixed_traffic, sim.parked_car, sim.crossing_pedestrians, sim.moving_car]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--budgets", default="1,2,4,8")
    ap.add_argument("--json")
    args = ap.parse_args()
    budgets = [int(b) for b in args.budgets.split(",")]
    rows = []
    print(f"{'scenario':<28}" + "".join(f"{'B=' + str(b):>24}" for b in budgets))
    for i in range(args.seeds):
        fn = PRESETS[i % len(PRESETS)]
        frames = sim.simulate(fn(seed=i)).frames
        cells = []
        for b in budgets:
            t0 = time.perf_counter()
            log, state = run_sequence(frames, TrackerConfig(hypothesis_budget=b))
            r = evaluate(log, frames)
            cells.append({"budget": b, "log_weight": state.log_norm, "mota": r.mota, "id_switches": r.id_switches,
                          "seconds": time.perf_counter() - t0})
        ws = [c["log_weight"] for c in cells]
        mono = all(hi >= lo - 1e-9 for lo, hi in zip(ws, ws[1:]))
        rows.append({"scenario": fn.__name__, "seed": i, "cells": cells, "monotone": mono})
        line = f"{fn.__name__ + '@' + str(i):<28}"
        line += "".join(f"{c['log_weight']:>12.3f} {c['mota']:.3f}/{c['id_switches']:<3}" for c in cells)
        print(line + ("" if mono else "  non-monotone"))
    bad = sum(not r["monotone"] for r in rows)
    print(f"{len(rows) - bad}/{len(rows)} scenarios monotone in budget")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
