"""Command-line front end.

Subcommands mirror the pipeline stages: ``simulate`` writes detection
sequences, ``plan`` emits a viewpoint ordering, ``track`` turns a sequence
file into track outputs, ``evaluate`` scores tracks against the sequence's
ground truth, and ``experiment`` runs the full protocol. Exit code is 0 on
success, 2 on any error (with a diagnostic on stderr).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .experiment import (
    ExperimentConfig,
    SequenceType,
    build_pool,
    emit_results,
    load_config,
    plan_sequence,
    read_sequence,
    read_tracks,
    run_experiment,
    simulate_sequence,
    write_sequence,
    write_tracks,
)
from .metrics import evaluate_all, gt_frames_from_viewpoints, pred_frames_from_outputs
from .simulation import generate_scene
from .tracking import TrackerVariant, tracker_run

_STRATEGIES = {s.value: s for s in SequenceType}


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, base_seed=args.seed)
    if getattr(args, "repeats", None) is not None:
        cfg = replace(cfg, repeats=args.repeats)
    return cfg


def _scene_and_pool(cfg: ExperimentConfig):
    scene = generate_scene(replace(cfg.scene, seed=cfg.base_seed))
    return scene, build_pool(cfg, scene)


def cmd_simulate(args) -> int:
    cfg = _load(args)
    scene, pool = _scene_and_pool(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    strategies = list(_STRATEGIES.values()) if args.strategy == "all" else [_STRATEGIES[args.strategy]]
    for seq_type in strategies:
        order = plan_sequence(cfg, scene, pool, seq_type, cfg.base_seed + 1000)
        viewpoints = simulate_sequence(cfg, scene, pool, order, 0, seq_type)
        path = out_dir / f"sequence_{seq_type.value}.jsonl"
        write_sequence(path, viewpoints)
        print(path)
    return 0


def cmd_plan(args) -> int:
    cfg = _load(args)
    scene, pool = _scene_and_pool(cfg)
    order = plan_sequence(cfg, scene, pool, _STRATEGIES[args.strategy], cfg.base_seed + 1000)
    text = json.dumps(order)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_track(args) -> int:
    cfg = _load(args)
    variant = TrackerVariant.POSITION_ONLY if args.variant == "position" else TrackerVariant.FEATURE_BASED
    viewpoints = read_sequence(args.sequence)
    outputs = tracker_run(cfg.tracker_for(variant), viewpoints)
    write_tracks(args.out, outputs)
    print(args.out)
    return 0


def cmd_evaluate(args) -> int:
    cfg = _load(args)
    viewpoints = read_sequence(args.sequence)
    outputs = read_tracks(args.tracks)
    report = evaluate_all(
        gt_frames_from_viewpoints(viewpoints),
        pred_frames_from_outputs(outputs),
        cfg.similarity,
        cfg.clear_threshold,
    )
    payload = {
        "HOTA": report.hota,
        "DetA": report.det_a,
        "AssA": report.ass_a,
        "LocA": report.loc_a,
        "MOTA": report.mota,
        "IDSW": report.idsw,
        "note": report.note,
    }
    text = json.dumps(payload, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def cmd_experiment(args) -> int:
    cfg = _load(args)
    table = run_experiment(cfg)
    paths = emit_results(table, args.out_dir)
    for entry in table.aggregate():
        print(entry)
    print(paths["summary"])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvtrack3d", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_dir=False):
        p.add_argument("--config", help="YAML experiment config; defaults apply when omitted")
        p.add_argument("--seed", type=int, help="override base seed")
        p.add_argument("--repeats", type=int, help="override repeat count")
        if out_dir:
            p.add_argument("--out-dir", required=True, help="output directory")

    p = sub.add_parser("simulate", help="scene + pool -> detection sequence files")
    common(p, out_dir=True)
    p.add_argument("--strategy", choices=[*_STRATEGIES, "all"], default="all")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("plan", help="pool -> viewpoint ordering")
    common(p)
    p.add_argument("--strategy", choices=list(_STRATEGIES), required=True)
    p.add_argument("--out", help="optional file for the JSON index list")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("track", help="sequence file -> track outputs file")
    common(p)
    p.add_argument("--variant", choices=["position", "feature"], required=True)
    p.add_argument("--sequence", required=True, help="input sequence .jsonl")
    p.add_argument("--out", required=True, help="output tracks .csv")
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("evaluate", help="sequence ground truth + tracks -> metrics")
    common(p)
    p.add_argument("--sequence", required=True, help="sequence .jsonl with ground truth")
    p.add_argument("--tracks", required=True, help="tracks .csv from the track command")
    p.add_argument("--out", help="optional metrics .json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="full protocol -> results tables")
    common(p, out_dir=True)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
