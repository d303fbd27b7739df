"""Command line entry point: ``pairtrack <command> ...``.

Exit codes: 0 success, 2 input error, 3 clock or frame-order error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io as pio
from . import simulator as sim
from .assignment import CostMatrix, brute_force_kbest, murty_kbest, solve_optimal
from .evaluation import ClockMismatch, evaluate
from .greedy import GreedyTracker
from .io import InputError
from .sweep import (
    PipelineConfig,
    StageConfig,
    build_label_assignment,
    erf_coverage,
    run_pipeline,
    targets_from_ground_truth,
)
from .tracker import OutOfOrderFrame, TrackerConfig, pedigree_dot, pedigree_leaves, run_sequence

EXIT_OK, EXIT_INPUT, EXIT_CLOCK = 0, 2, 3

DEMO_SCENARIOS = ("moving_car", "parked_car", "crossing_pedestrians")


class ClockError(RuntimeError):
    pass


# -- helpers -------------------------------------------------------------------


def _scenario(arg: str, seed=None) -> sim.ScenarioSpec:
    if arg.startswith("preset:"):
        name = arg.split(":", 1)[1]
        if name not in sim.PRESETS:
            raise InputError(f"unknown preset {name!r}; choose from {sorted(sim.PRESETS)}")
        spec = sim.PRESETS[name]()
    else:
        if not Path(arg).is_file():
            raise InputError(f"scenario file not found: {arg}")
        try:
            spec = sim.load_scenario(arg)
        except sim.InvalidSpec as e:
            raise InputError(f"invalid scenario {arg}: {e}") from e
        except Exception as e:
            raise InputError(f"cannot parse scenario {arg}: {e}") from e
    return spec if seed is None else replace(spec, seed=seed)


def tracker_config(path=None, budget=None) -> TrackerConfig:
    data = pio.load_mapping(path) if path else {}
    data = data.get("tracker", data)
    try:
        cfg = TrackerConfig.from_dict(data)
    except (TypeError, ValueError) as e:
        raise InputError(f"invalid tracker config: {e}") from e
    if budget is not None:
        cfg = replace(cfg, hypothesis_budget=budget)
    return cfg


def pipeline_config(path=None, mode=None) -> PipelineConfig:
    data = dict(pio.load_mapping(path)) if path else {}
    data = dict(data.get("pipeline", data))
    try:
        if "stages" in data:
            data["stages"] = tuple(StageConfig(**s) for s in data["stages"])
        for key in ("voxel_size",):
            if key in data:
                data[key] = tuple(data[key])
        cfg = PipelineConfig(**data)
    except (TypeError, ValueError) as e:
        raise InputError(f"invalid pipeline config: {e}") from e
    return cfg.with_mode(mode) if mode else cfg


def _box_svg(box, color: str, scale: float, ox: float, oy: float) -> str:
    pts = " ".join(f"{(x - ox) * scale:.2f},{(oy - y) * scale:.2f}" for x, y in box.corners())
    return f'<polygon points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>'


def write_svgs(directory, frames, track_log, extent: float = 50.0, scale: float = 5.0) -> None:
    """One static top-down picture per frame: detections grey, tracks colored by id."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    size = 2 * extent * scale
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"]
    for fr in frames:
        parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size:.0f}" height="{size:.0f}">']
        for d in fr.detections:
            parts.append(_box_svg(d.box_end, "#aaaaaa", scale, -extent, extent))
        for s in track_log.get(fr.frame_index, []):
            color = palette[zlib.crc32(str(s.track_id).encode()) % len(palette)]
            parts.append(_box_svg(s.box_end, color, scale, -extent, extent))
            parts.append(_box_svg(s.box_begin, color, scale, -extent, extent).replace('stroke-width="1"',
                                                                                      'stroke-dasharray="2,2"'))
        parts.append("</svg>")
        (out / f"frame_{fr.frame_index:05d}.svg").write_text("\n".join(parts) + "\n")


# -- commands ------------------------------------------------------------------


def cmd_simulate(args) -> int:
    spec = _scenario(args.spec, args.seed)
    out = sim.simulate(spec)
    pio.write_frames(args.out, out.frames)
    if args.points:
        frames = args.point_frames or list(range(spec.duration_frames))
        bad = [f for f in frames if not 0 <= f < spec.duration_frames]
        if bad:
            raise InputError(f"point frames {bad} outside the scenario")
        pio.write_point_clouds(args.points, {f: sim.synthesize_points(spec, f) for f in frames})
    n_det = sum(len(f.detections) for f in out.frames)
    print(f"simulated {spec.name}: objects={len(spec.objects)} frames={len(out.frames)} detections={n_det}")
    return EXIT_OK


def _track_frames(frames, cfg: TrackerConfig, greedy: bool):
    if greedy:
        return GreedyTracker(cfg).run(frames), None
    return run_sequence(frames, cfg)


def cmd_track(args) -> int:
    frames = pio.read_frames(args.input)
    cfg = tracker_config(args.config, args.budget)
    if args.pedigree:
        cfg = replace(cfg, record_pedigree=True)
    try:
        track_log, state = _track_frames(frames, cfg, args.greedy)
    except OutOfOrderFrame as e:
        raise ClockError(str(e)) from e
    pio.write_track_log(args.out, track_log)
    if args.pedigree:
        if state is None:
            raise InputError("--pedigree needs the multi-hypothesis tracker (drop --greedy)")
        Path(args.pedigree).write_text(pedigree_dot(state))
    if args.svg:
        write_svgs(args.svg, frames, track_log)
    ids = {s.track_id for snaps in track_log.values() for s in snaps}
    msg = f"tracked {len(frames)} frames: tracks={len(ids)} snapshots={sum(map(len, track_log.values()))}"
    if state is not None:
        msg += f" leaves={pedigree_leaves(state)} best_log_weight={state.log_norm:.6f}"
    print(msg)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    gt = pio.read_frames(args.gt)
    if any(f.ground_truth is None for f in gt):
        raise InputError(f"{args.gt}: frames carry no ground truth")
    track_log = pio.read_track_log(args.tracks)
    try:
        report = evaluate(track_log, gt, args.iou_threshold, args.near_radius)
    except ClockMismatch as e:
        raise ClockError(str(e)) from e
    Path(args.report).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    print(report.table())
    return EXIT_OK


def _targets_for_frame(item):
    f, cloud, gt, cfg = item
    res = run_pipeline(cloud, cfg)
    objects = targets_from_ground_truth(gt)
    la = build_label_assignment(res.bev, objects, cfg.representative)
    erf = erf_coverage(cloud, res.bev, la)
    return {
        "frame_index": f,
        "representatives": [list(r) for r in la.representatives],
        "positive_cells": [list(c) for c in la.positive_cells],
        "targets": [t.to_dict() for t in la.targets],
        "unassigned": la.unassigned,
        "active_bev_cells": len(res.bev),
        "erf": [r.to_dict() for r in erf],
    }


def _pool_map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, items))  # map keeps input order


def target_records(items, cfg: PipelineConfig, jobs: int = 1) -> list:
    """Label assignment and ERF records for (frame_index, cloud, ground_truth) items."""
    return _pool_map(_targets_for_frame, [(f, cloud, gt, cfg) for f, cloud, gt in items], jobs)


def coverage_summary(records) -> dict:
    n = sum(len(r["erf"]) for r in records)
    ok = sum(e["contained"] for r in records for e in r["erf"])
    return {"frames": len(records), "objects": n, "contained": ok, "coverage": (ok / n) if n else None,
            "unassigned": sum(len(r["unassigned"]) for r in records)}


def cmd_targets(args) -> int:
    clouds = pio.read_point_clouds(args.points)
    labels = {f.frame_index: f for f in pio.read_frames(args.labels)}
    cfg = pipeline_config(args.config, args.mode)
    missing = sorted(set(clouds) - set(labels))
    if missing:
        raise InputError(f"no labels for point-cloud frames {missing[:5]}")
    items = [(f, clouds[f], labels[f].ground_truth or ()) for f in sorted(clouds)]
    records = target_records(items, cfg, args.jobs)
    pio.write_jsonl(args.out, records)
    summary = coverage_summary(records)
    if args.report:
        Path(args.report).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    n, ok = summary["objects"], summary["contained"]
    cov = "n/a" if not n else f"{100.0 * ok / n:.1f}%"
    print(f"targets: frames={len(records)} objects={n} erf_contained={ok} coverage={cov} "
          f"unassigned={summary['unassigned']}")
    return EXIT_OK


def assoc_bench(sizes, trials: int, seed: int, k: int, oracle_max: int = 6) -> list:
    """Timing and oracle agreement of the assignment solvers on random square matrices."""
    from scipy.optimize import linear_sum_assignment

    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        t_opt = t_kb = 0.0
        agree = 0
        for _ in range(trials):
            a = rng.uniform(0.0, 10.0, (n, n))
            cm = CostMatrix(a)
            t0 = time.perf_counter()
            sol = solve_optimal(cm)
            t1 = time.perf_counter()
            kb = murty_kbest(cm, k)
            t2 = time.perf_counter()
            t_opt += t1 - t0
            t_kb += t2 - t1
            if n <= oracle_max:
                ref = brute_force_kbest(cm, k)
                ok = [s.assignment for s in kb] == [s.assignment for s in ref] and all(
                    abs(s.total_cost - r.total_cost) <= 1e-9 for s, r in zip(kb, ref))
            else:
                r_, c_ = linear_sum_assignment(a)
                ok = abs(sol.total_cost - math.fsum(a[r_, c_])) <= 1e-9 * max(1.0, abs(sol.total_cost))
            agree += ok
        rows.append({"n": n, "trials": trials, "k": k, "oracle": "brute force" if n <= oracle_max else "scipy",
                     "solve_ms": 1e3 * t_opt / trials, "kbest_ms": 1e3 * t_kb / trials,
                     "agreement": agree / trials})
    return rows


def cmd_assoc_bench(args) -> int:
    if any(n < 1 for n in args.sizes) or args.trials < 1 or args.k < 1:
        raise InputError("sizes, trials and k must be positive")
    rows = assoc_bench(args.sizes, args.trials, args.seed, args.k)
    print(f"{'n':>4}{'k':>5}{'trials':>8}{'solve ms':>11}{'k-best ms':>11}{'agree':>8}  oracle")
    for r in rows:
        print(f"{r['n']:>4}{r['k']:>5}{r['trials']:>8}{r['solve_ms']:>11.3f}{r['kbest_ms']:>11.3f}"
              f"{100 * r['agreement']:>7.1f}%  {r['oracle']}")
    if args.json:
        Path(args.json).write_text(json.dumps(rows, indent=2) + "\n")
    return EXIT_OK


def _demo_one(item):
    name, outdir, cfg = item
    spec = sim.PRESETS[name]()
    frames = sim.simulate(spec).frames
    out = Path(outdir)
    pio.write_frames(out / f"{name}.frames.jsonl", frames)
    track_log, state = run_sequence(frames, cfg)
    pio.write_track_log(out / f"{name}.tracks.jsonl", track_log)
    report = evaluate(track_log, frames)
    (out / f"{name}.report.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    ids = {s.track_id for snaps in track_log.values() for s in snaps}
    return name, report, len(ids)


def cmd_demo(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = tracker_config(args.config, args.budget)
    names = args.scenarios or list(DEMO_SCENARIOS)
    unknown = [n for n in names if n not in sim.PRESETS]
    if unknown:
        raise InputError(f"unknown scenarios {unknown}; choose from {sorted(sim.PRESETS)}")
    results = _pool_map(_demo_one, [(n, str(out), cfg) for n in names], args.jobs)
    print(f"{'scenario':<24}{'tracks':>7}{'MOTA':>8}{'MOTP':>8}{'FP':>5}{'FN':>5}{'IDSW':>6}")
    for name, r, n_ids in results:
        mota = "n/a" if r.mota is None else f"{r.mota:.4f}"
        print(f"{name:<24}{n_ids:>7}{mota:>8}{r.motp:>8.3f}{r.fp:>5}{r.fn:>5}{r.id_switches:>6}")
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pairtrack", description="Paired-detection tracking toolkit.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate a synthetic scenario as frame JSONL")
    s.add_argument("spec", help="scenario YAML/JSON file or preset:NAME")
    s.add_argument("out")
    s.add_argument("--points", help="also write multi-sweep point clouds (JSONL) here")
    s.add_argument("--point-frames", type=_int_list, help="frames to synthesize points for (default: all)")
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_simulate)

    t = sub.add_parser("track", help="run the tracker over frame JSONL")
    t.add_argument("input")
    t.add_argument("out")
    t.add_argument("--config", help="tracker config (YAML or JSON)")
    t.add_argument("--budget", type=int, help="override hypothesis_budget")
    t.add_argument("--greedy", action="store_true", help="use the single-hypothesis reference tracker")
    t.add_argument("--pedigree", help="write the hypothesis pedigree as a DOT graph")
    t.add_argument("--svg", help="write one SVG picture per frame into this directory")
    t.set_defaults(func=cmd_track)

    e = sub.add_parser("evaluate", help="CLEAR-MOT scores of a track log")
    e.add_argument("gt", help="frame JSONL with ground truth")
    e.add_argument("tracks", help="track-log JSONL (or frame JSONL for self-evaluation)")
    e.add_argument("report", help="JSON report path")
    e.add_argument("--iou-threshold", type=float, default=0.5)
    e.add_argument("--near-radius", type=float, default=30.0)
    e.set_defaults(func=cmd_evaluate)

    g = sub.add_parser("targets", help="anchor assignment and receptive-field report for point clouds")
    g.add_argument("points", help="point-cloud JSONL")
    g.add_argument("labels", help="frame JSONL with ground truth")
    g.add_argument("out", help="label-assignment JSONL")
    g.add_argument("--config", help="pipeline config (YAML or JSON)")
    g.add_argument("--mode", choices=("dilating", "submanifold"))
    g.add_argument("--report", help="write the coverage summary as JSON here")
    g.add_argument("--jobs", type=int, default=1)
    g.set_defaults(func=cmd_targets)

    b = sub.add_parser("assoc-bench", help="time assignment solvers and check them against oracles")
    b.add_argument("--sizes", type=_int_list, default=[1, 2, 3, 4, 5, 8, 16, 32, 64])
    b.add_argument("--trials", type=int, default=20)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--k", type=int, default=6)
    b.add_argument("--json", help="write the table as JSON here")
    b.set_defaults(func=cmd_assoc_bench)

    d = sub.add_parser("demo", help="simulate, track and evaluate the bundled scenarios")
    d.add_argument("--out", default="demo_out")
    d.add_argument("--scenarios", nargs="*")
    d.add_argument("--config")
    d.add_argument("--budget", type=int)
    d.add_argument("--jobs", type=int, default=1)
    d.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except ClockError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CLOCK


if __name__ == "__main__":
    sys.exit(main())
