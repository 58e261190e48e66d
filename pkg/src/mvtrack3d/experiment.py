"""Experiment orchestration: 3 sequence protocols x 2 trackers x N repeats.

Each repeat draws a fresh scene, builds the viewpoint pool, produces the
three orderings, simulates detections along them, runs both trackers on the
same simulated sequences and scores both metric families. Randomness is
compartmentalized so ablations change one stream at a time:

* scene for repeat r:        base_seed + r
* viewpoint sampling:        base_seed + 1000 + r
* detector noise:            one stream per (repeat, sequence, frame)

Everything is deterministic for a fixed config and base seed, including the
emitted CSV bytes.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import yaml

from .core import AABox, BBox2D, CameraPose, Detection, GroundTruth, TrackOutput, Vec3, Viewpoint
from .estimation import NoiseParams
from .metrics import (
    MetricsReport,
    SimilarityConfig,
    evaluate_all,
    gt_frames_from_viewpoints,
    pred_frames_from_outputs,
)
from .planning import PlanRequest, plan_active, plan_random, plan_sort
from .simulation import (
    CameraModel,
    NoiseModel,
    Scene,
    SceneSpec,
    build_viewpoint_grid,
    generate_scene,
    simulate_detections,
)
from .tracking import TrackerConfig, TrackerVariant, tracker_run

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or unknown keys in a configuration file."""


class ParseError(ValueError):
    """Malformed sequence file content; the message names the line."""


class SchemaError(ParseError):
    """Sequence file whose header contradicts its records."""


class SequenceType(enum.Enum):
    SORT = "sort"
    RANDOM = "random"
    ACTIVE = "ap"


@dataclass(frozen=True)
class PlannerParams:
    n_select: int = 100
    grid_rows: int = 10
    grid_cols: int = 10
    extent: float = 0.6
    distances: tuple[float, ...] = (0.4, 0.6)
    roi_resolution: float = 0.02

    def __post_init__(self):
        if self.n_select <= 0 or self.grid_rows <= 0 or self.grid_cols <= 0:
            raise ConfigError("planner counts must be positive")
        if self.extent <= 0 or self.roi_resolution <= 0 or any(d <= 0 for d in self.distances):
            raise ConfigError("planner geometry must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    scene: SceneSpec = field(default_factory=SceneSpec)
    noise: NoiseModel = field(default_factory=NoiseModel)
    camera: CameraModel = field(default_factory=CameraModel)
    position_tracker: TrackerConfig = field(
        default_factory=lambda: TrackerConfig(variant=TrackerVariant.POSITION_ONLY)
    )
    feature_tracker: TrackerConfig = field(
        default_factory=lambda: TrackerConfig(variant=TrackerVariant.FEATURE_BASED)
    )
    planner: PlannerParams = field(default_factory=PlannerParams)
    d_max: float = 0.10
    clear_threshold: float = 0.5
    repeats: int = 5
    base_seed: int = 7

    def __post_init__(self):
        if self.repeats < 1:
            raise ConfigError(f"repeats must be >= 1, got {self.repeats}")
        if self.d_max <= 0 or not 0 < self.clear_threshold <= 1:
            raise ConfigError("invalid metric thresholds")

    @property
    def similarity(self) -> SimilarityConfig:
        return SimilarityConfig(d_max=self.d_max)

    def tracker_for(self, variant: TrackerVariant) -> TrackerConfig:
        return self.position_tracker if variant is TrackerVariant.POSITION_ONLY else self.feature_tracker


@dataclass(frozen=True)
class ResultRow:
    sequence: SequenceType
    tracker: TrackerVariant
    repeat: int
    seed: int
    report: MetricsReport | None = None
    error: str = ""


@dataclass(frozen=True)
class ResultsTable:
    rows: tuple[ResultRow, ...]

    def cell(self, sequence: SequenceType, tracker: TrackerVariant) -> list[ResultRow]:
        return [r for r in self.rows if r.sequence is sequence and r.tracker is tracker]

    def aggregate(self) -> list[dict]:
        """Mean metrics per (sequence, tracker) cell over successful repeats."""
        out = []
        for seq in SequenceType:
            for tracker in TrackerVariant:
                rows = [r for r in self.cell(seq, tracker) if r.report is not None]
                entry: dict = {"sequence": seq.value, "tracker": tracker.value}
                if not rows:
                    entry["failed"] = True
                else:
                    n = len(rows)
                    entry.update(
                        {
                            "HOTA": sum(r.report.hota for r in rows) / n,
                            "DetA": sum(r.report.det_a for r in rows) / n,
                            "AssA": sum(r.report.ass_a for r in rows) / n,
                            "LocA": sum(r.report.loc_a for r in rows) / n,
                            "MOTA": sum(r.report.mota for r in rows) / n,
                            "IDSW": sum(r.report.idsw for r in rows) / n,
                        }
                    )
                out.append(entry)
        return out


def _noise_rng(base_seed: int, repeat: int, seq_idx: int, frame: int) -> np.random.Generator:
    return np.random.default_rng((base_seed, 9001, repeat, seq_idx, frame))


def build_pool(cfg: ExperimentConfig, scene: Scene) -> list[CameraPose]:
    return build_viewpoint_grid(
        scene.roi.center,
        cfg.planner.distances,
        (cfg.planner.grid_rows, cfg.planner.grid_cols),
        cfg.planner.extent,
    )


def plan_sequence(
    cfg: ExperimentConfig,
    scene: Scene,
    pool: Sequence[CameraPose],
    sequence: SequenceType,
    sample_seed: int,
) -> list[int]:
    req = PlanRequest(tuple(pool), cfg.planner.n_select, seed=sample_seed)
    if sequence is SequenceType.SORT:
        return plan_sort(req)
    if sequence is SequenceType.RANDOM:
        return plan_random(req)
    return plan_active(scene, req, scene.roi, cfg.camera, cfg.planner.roi_resolution)


def simulate_sequence(
    cfg: ExperimentConfig,
    scene: Scene,
    pool: Sequence[CameraPose],
    order: Sequence[int],
    repeat: int,
    sequence: SequenceType,
) -> list[Viewpoint]:
    seq_idx = list(SequenceType).index(sequence)
    return [
        simulate_detections(
            scene,
            pool[pool_idx],
            cfg.camera,
            cfg.noise,
            _noise_rng(cfg.base_seed, repeat, seq_idx, frame),
            index=frame,
        )
        for frame, pool_idx in enumerate(order)
    ]


def run_experiment(cfg: ExperimentConfig) -> ResultsTable:
    """Full protocol; failures abort only their own (repeat, sequence) cell."""
    rows: list[ResultRow] = []
    for repeat in range(cfg.repeats):
        scene_seed = cfg.base_seed + repeat
        sample_seed = cfg.base_seed + 1000 + repeat
        try:
            scene = generate_scene(replace(cfg.scene, seed=scene_seed))
            pool = build_pool(cfg, scene)
        except Exception as exc:  # noqa: BLE001 - recorded, run continues
            for seq in SequenceType:
                for tracker in TrackerVariant:
                    rows.append(ResultRow(seq, tracker, repeat, scene_seed, error=str(exc)))
            continue

        for seq in SequenceType:
            try:
                order = plan_sequence(cfg, scene, pool, seq, sample_seed)
                viewpoints = simulate_sequence(cfg, scene, pool, order, repeat, seq)
                gt_frames = gt_frames_from_viewpoints(viewpoints)
            except Exception as exc:  # noqa: BLE001
                for tracker in TrackerVariant:
                    rows.append(ResultRow(seq, tracker, repeat, scene_seed, error=str(exc)))
                continue
            for tracker in TrackerVariant:
                try:
                    outputs = tracker_run(cfg.tracker_for(tracker), viewpoints)
                    report = evaluate_all(
                        gt_frames,
                        pred_frames_from_outputs(outputs),
                        cfg.similarity,
                        cfg.clear_threshold,
                    )
                    rows.append(ResultRow(seq, tracker, repeat, scene_seed, report=report))
                except Exception as exc:  # noqa: BLE001
                    rows.append(ResultRow(seq, tracker, repeat, scene_seed, error=str(exc)))

    rows.sort(key=lambda r: (list(SequenceType).index(r.sequence), r.tracker.value, r.repeat))
    return ResultsTable(tuple(rows))


# --------------------------------------------------------------------------
# Sequence files: one JSON header line, then one JSON record per viewpoint.


def write_sequence(path, seq: Sequence[Viewpoint]) -> None:
    """Serialize viewpoints losslessly to a line-oriented file."""
    feature_dim = None
    for vp in seq:
        for det in vp.detections:
            if det.feature is not None:
                feature_dim = len(det.feature)
                break
        if feature_dim is not None:
            break
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema_version": SCHEMA_VERSION, "feature_dim": feature_dim}) + "\n")
        for vp in seq:
            fh.write(json.dumps(_viewpoint_to_record(vp)) + "\n")


def read_sequence(path) -> list[Viewpoint]:
    """Parse a sequence file written by :func:`write_sequence`.

    Raises:
        ParseError: on malformed JSON or invalid values, naming the line.
        SchemaError: when a feature's length contradicts the header.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("line 1: missing header")
    header = _parse_json_line(lines[0], 1)
    if header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"line 1: unsupported schema version {header.get('schema_version')}")
    feature_dim = header.get("feature_dim")

    viewpoints = []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            raise ParseError(f"line {lineno}: blank record")
        record = _parse_json_line(raw, lineno)
        try:
            vp = _viewpoint_from_record(record, feature_dim)
        except SchemaError:
            raise
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"line {lineno}: {exc}") from exc
        viewpoints.append(vp)
    return viewpoints


def _parse_json_line(raw: str, lineno: int) -> dict:
    try:
        value = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(value, dict):
        raise ParseError(f"line {lineno}: expected an object")
    return value


def _viewpoint_to_record(vp: Viewpoint) -> dict:
    return {
        "index": vp.index,
        "pose": {
            "position": [vp.pose.position.x, vp.pose.position.y, vp.pose.position.z],
            "orientation": list(vp.pose.orientation),
        },
        "detections": [
            {
                "bbox": [d.bbox.x_min, d.bbox.y_min, d.bbox.x_max, d.bbox.y_max],
                "position": [d.position.x, d.position.y, d.position.z],
                "confidence": d.confidence,
                "class_id": d.class_id,
                "feature": None if d.feature is None else [float(v) for v in d.feature],
            }
            for d in vp.detections
        ],
        "gt": [[g.object_id, [g.position.x, g.position.y, g.position.z], g.visible_fraction] for g in vp.gt],
    }


def _viewpoint_from_record(record: dict, feature_dim: int | None) -> Viewpoint:
    pose = CameraPose(
        position=Vec3(*record["pose"]["position"]),
        orientation=tuple(record["pose"]["orientation"]),
    )
    detections = []
    for d in record["detections"]:
        feature = d.get("feature")
        if feature is not None:
            if feature_dim is None or len(feature) != feature_dim:
                raise SchemaError(
                    f"feature dimension {len(feature)} contradicts header feature_dim={feature_dim}"
                )
            feature = np.asarray(feature, dtype=float)
        detections.append(
            Detection(
                bbox=BBox2D(*d["bbox"]),
                position=Vec3(*d["position"]),
                confidence=d["confidence"],
                feature=feature,
                class_id=d["class_id"],
            )
        )
    gt = [GroundTruth(int(g[0]), Vec3(*g[1]), float(g[2])) for g in record["gt"]]
    return Viewpoint(index=int(record["index"]), pose=pose, detections=tuple(detections), gt=tuple(gt))


# --------------------------------------------------------------------------
# Results emission.

_METRIC_COLUMNS = ["HOTA", "DetA", "AssA", "LocA", "MOTA", "IDSW"]


def emit_results(table: ResultsTable, out_dir) -> dict[str, Path]:
    """Write per-row and aggregate CSVs plus a machine-readable summary.

    Returns the paths keyed as ``rows``, ``aggregate`` and ``summary``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows_path = out / "results.csv"
    agg_path = out / "aggregate.csv"
    summary_path = out / "summary.json"

    with open(rows_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sequence", "tracker", "repeat", "seed", *_METRIC_COLUMNS, "note", "error"])
        for r in table.rows:
            metrics = (
                ["", "", "", "", "", ""]
                if r.report is None
                else [
                    repr(r.report.hota),
                    repr(r.report.det_a),
                    repr(r.report.ass_a),
                    repr(r.report.loc_a),
                    repr(r.report.mota),
                    str(r.report.idsw),
                ]
            )
            note = "" if r.report is None else r.report.note
            writer.writerow([r.sequence.value, r.tracker.value, r.repeat, r.seed, *metrics, note, r.error])

    aggregate = table.aggregate()
    with open(agg_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sequence", "tracker", *_METRIC_COLUMNS])
        for entry in aggregate:
            if entry.get("failed"):
                writer.writerow([entry["sequence"], entry["tracker"], *(["failed"] * 6)])
            else:
                writer.writerow(
                    [entry["sequence"], entry["tracker"], *(repr(entry[c]) for c in _METRIC_COLUMNS)]
                )

    summary = {
        "rows": [
            {
                "sequence": r.sequence.value,
                "tracker": r.tracker.value,
                "repeat": r.repeat,
                "seed": r.seed,
                "error": r.error or None,
                "metrics": None
                if r.report is None
                else {
                    "HOTA": r.report.hota,
                    "DetA": r.report.det_a,
                    "AssA": r.report.ass_a,
                    "LocA": r.report.loc_a,
                    "MOTA": r.report.mota,
                    "IDSW": r.report.idsw,
                    "note": r.report.note,
                },
            }
            for r in table.rows
        ],
        "aggregate": aggregate,
    }
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"rows": rows_path, "aggregate": agg_path, "summary": summary_path}


# --------------------------------------------------------------------------
# Track output files (CSV) used by the command-line pipeline.


def write_tracks(path, outputs: Sequence[TrackOutput]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["viewpoint_index", "track_id", "x", "y", "z", "x_min", "y_min", "x_max", "y_max"])
        for o in outputs:
            writer.writerow(
                [
                    o.viewpoint_index,
                    o.track_id,
                    repr(o.position.x),
                    repr(o.position.y),
                    repr(o.position.z),
                    repr(o.bbox.x_min),
                    repr(o.bbox.y_min),
                    repr(o.bbox.x_max),
                    repr(o.bbox.y_max),
                ]
            )


def read_tracks(path) -> list[TrackOutput]:
    outputs = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("line 1: missing header")
        for lineno, row in enumerate(reader, start=2):
            try:
                outputs.append(
                    TrackOutput(
                        viewpoint_index=int(row[0]),
                        track_id=int(row[1]),
                        position=Vec3(float(row[2]), float(row[3]), float(row[4])),
                        bbox=BBox2D(float(row[5]), float(row[6]), float(row[7]), float(row[8])),
                    )
                )
            except (ValueError, IndexError) as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
    return outputs


# --------------------------------------------------------------------------
# Configuration files (YAML).


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    return config_from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(cfg), fh, sort_keys=False)


def config_to_dict(cfg: ExperimentConfig) -> dict:
    ws = cfg.scene.workspace
    return {
        "scene": {
            "n_trusses": cfg.scene.n_trusses,
            "tomatoes_per_truss": list(cfg.scene.tomatoes_per_truss),
            "tomato_radius": cfg.scene.tomato_radius,
            "stem_height": cfg.scene.stem_height,
            "n_leaves": cfg.scene.n_leaves,
            "leaf_radius": cfg.scene.leaf_radius,
            "workspace": {
                "lo": [ws.lo.x, ws.lo.y, ws.lo.z],
                "hi": [ws.hi.x, ws.hi.y, ws.hi.z],
            },
            "feature_dim": cfg.scene.feature_dim,
        },
        "noise": {
            "position_sigma": cfg.noise.position_sigma,
            "feature_sigma": cfg.noise.feature_sigma,
            "base_miss_rate": cfg.noise.base_miss_rate,
            "occlusion_miss_gain": cfg.noise.occlusion_miss_gain,
            "false_positive_rate": cfg.noise.false_positive_rate,
            "confidence_mean": cfg.noise.confidence_params[0],
            "confidence_sigma": cfg.noise.confidence_params[1],
            "occlusion_position_gain": cfg.noise.occlusion_position_gain,
        },
        "camera": {
            "hfov": cfg.camera.hfov,
            "vfov": cfg.camera.vfov,
            "width": cfg.camera.width,
            "height": cfg.camera.height,
            "max_range": cfg.camera.max_range,
        },
        "trackers": {
            "position": {
                "mahalanobis_gate": cfg.position_tracker.mahalanobis_gate,
                "min_confidence": cfg.position_tracker.min_confidence,
                "process_q": cfg.position_tracker.noise.process_q,
                "measurement_r": cfg.position_tracker.noise.measurement_r,
                "initial_p": cfg.position_tracker.noise.initial_p,
            },
            "feature": {
                "cosine_gate": cfg.feature_tracker.cosine_gate,
                "feature_momentum": cfg.feature_tracker.feature_momentum,
                "min_confidence": cfg.feature_tracker.min_confidence,
            },
        },
        "planner": {
            "n_select": cfg.planner.n_select,
            "grid_rows": cfg.planner.grid_rows,
            "grid_cols": cfg.planner.grid_cols,
            "extent": cfg.planner.extent,
            "distances": list(cfg.planner.distances),
            "roi_resolution": cfg.planner.roi_resolution,
        },
        "metrics": {"d_max": cfg.d_max, "clear_threshold": cfg.clear_threshold},
        "repeats": cfg.repeats,
        "base_seed": cfg.base_seed,
    }


def _take(block: dict, section: str, defaults: dict) -> dict:
    unknown = set(block) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    merged = dict(defaults)
    merged.update(block)
    return merged


def config_from_dict(data: dict) -> ExperimentConfig:
    base = config_to_dict(ExperimentConfig())
    unknown = set(data) - set(base)
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    scene_d = _take(data.get("scene", {}) or {}, "scene", base["scene"])
    ws = scene_d["workspace"]
    if set(ws) - {"lo", "hi"}:
        raise ConfigError(f"unknown keys in 'scene.workspace': {sorted(set(ws) - {'lo', 'hi'})}")
    scene = SceneSpec(
        n_trusses=scene_d["n_trusses"],
        tomatoes_per_truss=tuple(scene_d["tomatoes_per_truss"]),
        tomato_radius=scene_d["tomato_radius"],
        stem_height=scene_d["stem_height"],
        n_leaves=scene_d["n_leaves"],
        leaf_radius=scene_d["leaf_radius"],
        workspace=AABox(Vec3(*ws["lo"]), Vec3(*ws["hi"])),
        feature_dim=scene_d["feature_dim"],
    )

    noise_d = _take(data.get("noise", {}) or {}, "noise", base["noise"])
    noise = NoiseModel(
        position_sigma=noise_d["position_sigma"],
        feature_sigma=noise_d["feature_sigma"],
        base_miss_rate=noise_d["base_miss_rate"],
        occlusion_miss_gain=noise_d["occlusion_miss_gain"],
        false_positive_rate=noise_d["false_positive_rate"],
        confidence_params=(noise_d["confidence_mean"], noise_d["confidence_sigma"]),
        occlusion_position_gain=noise_d["occlusion_position_gain"],
    )

    cam_d = _take(data.get("camera", {}) or {}, "camera", base["camera"])
    camera = CameraModel(**cam_d)

    trackers = data.get("trackers", {}) or {}
    if set(trackers) - {"position", "feature"}:
        raise ConfigError(f"unknown keys in 'trackers': {sorted(set(trackers) - {'position', 'feature'})}")
    pos_d = _take(trackers.get("position", {}) or {}, "trackers.position", base["trackers"]["position"])
    feat_d = _take(trackers.get("feature", {}) or {}, "trackers.feature", base["trackers"]["feature"])
    position_tracker = TrackerConfig(
        variant=TrackerVariant.POSITION_ONLY,
        mahalanobis_gate=pos_d["mahalanobis_gate"],
        min_confidence=pos_d["min_confidence"],
        noise=NoiseParams(
            process_q=pos_d["process_q"],
            measurement_r=pos_d["measurement_r"],
            initial_p=pos_d["initial_p"],
        ),
    )
    feature_tracker = TrackerConfig(
        variant=TrackerVariant.FEATURE_BASED,
        cosine_gate=feat_d["cosine_gate"],
        feature_momentum=feat_d["feature_momentum"],
        min_confidence=feat_d["min_confidence"],
    )

    planner_d = _take(data.get("planner", {}) or {}, "planner", base["planner"])
    planner = PlannerParams(
        n_select=planner_d["n_select"],
        grid_rows=planner_d["grid_rows"],
        grid_cols=planner_d["grid_cols"],
        extent=planner_d["extent"],
        distances=tuple(planner_d["distances"]),
        roi_resolution=planner_d["roi_resolution"],
    )

    metrics_d = _take(data.get("metrics", {}) or {}, "metrics", base["metrics"])

    return ExperimentConfig(
        scene=scene,
        noise=noise,
        camera=camera,
        position_tracker=position_tracker,
        feature_tracker=feature_tracker,
        planner=planner,
        d_max=metrics_d["d_max"],
        clear_threshold=metrics_d["clear_threshold"],
        repeats=int(data.get("repeats", base["repeats"])),
        base_seed=int(data.get("base_seed", base["base_seed"])),
    )
