"""Freeze Monte-Carlo IOU estimates for seeded random oriented-box pairs.

Independent of the package: points are drawn uniformly inside box A (whose
area is known exactly) and tested against box B in B's local frame, so
IOU = f*aA / (aA + aB - f*aA) with f the inside fraction.

    python3 scripts/make_iou_oracle.py [--pairs 100] [--samples 10000000]
"""
import argparse
import json
import time
from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "iou_monte_carlo.json"


def random_pair(rng):
    a = [0.0, 0.0, rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0), rng.uniform(-np.pi, np.pi)]
    # mostly overlapping, a few disjoint or barely touching
    r = rng.uniform(0.0, 1.2) * (a[2] + a[3]) / 2
    phi = rng.uniform(-np.pi, np.pi)
    b = [r * np.cos(phi), r * np.sin(phi), rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0), rng.uniform(-np.pi, np.pi)]
    return a, b


def inside_fraction(a, b, n, rng, chunk=2_000_000):
    hits = 0
    done = 0
    ca, sa = np.cos(a[4]), np.sin(a[4])
    cb, sb = np.cos(b[4]), np.sin(b[4])
    while done < n:
        m = min(chunk, n - done)
        u = rng.uniform(-0.5, 0.5, m) * a[2]
        v = rng.uniform(-0.5, 0.5, m) * a[3]
        x = a[0] + ca * u - sa * v - b[0]
        y = a[1] + sa * u + ca * v - b[1]
        lu = cb * x + sb * y
        lv = -sb * x + cb * y
        hits += int(np.count_nonzero((np.abs(lu) <= b[2] / 2) & (np.abs(lv) <= b[3] / 2)))
        done += m
    return hits / n


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--pairs", type=int, default=100)
    ap.add_argument("--samples", type=int, default=10_000_000)
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    records = []
    t0 = time.time()
    for k in range(args.pairs):
        a, b = random_pair(rng)
        f = inside_fraction(a, b, args.samples, rng)
        area_a, area_b = a[2] * a[3], b[2] * b[3]
        inter = f * area_a
        iou = inter / (area_a + area_b - inter)
        se = np.sqrt(f * (1 - f) / args.samples) * area_a * (area_a + area_b) / (area_a + area_b - inter) ** 2
        records.append({"a": a, "b": b, "iou": iou, "stderr": float(se)})
        print(f"{k:3d} iou={iou:.5f} se={se:.1e} ({time.time() - t0:.0f}s)", flush=True)
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps({"seed": args.seed, "samples": args.samples, "pairs": records}, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
