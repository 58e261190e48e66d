"""The two tracker state machines sharing one lifecycle.

Position-only tracking predicts every track's Kalman filter, associates by
gated Mahalanobis distance and updates matched filters. Feature-based
tracking associates by gated cosine distance between unit re-ID vectors and
blends matched track features with an exponential moving average.

Tracks are never deleted: the objects are static and routinely re-enter the
field of view, so a track unmatched for many viewpoints can still pick its
object back up later. Deleting would only manufacture identity switches.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .assignment import cosine_cost, mahalanobis_cost, solve_hungarian
from .core import Detection, TrackOutput, Vec3, Viewpoint
from .estimation import KalmanState, NoiseParams, kf_init, kf_predict, kf_update

# 95% chi-square quantile for 3 degrees of freedom; the usual SORT-family gate.
DEFAULT_MAHALANOBIS_GATE = math.sqrt(7.815)
DEFAULT_COSINE_GATE = 0.4


class TrackerVariant(enum.Enum):
    POSITION_ONLY = "position"
    FEATURE_BASED = "feature"


@dataclass(frozen=True)
class TrackerConfig:
    variant: TrackerVariant
    mahalanobis_gate: float = DEFAULT_MAHALANOBIS_GATE
    cosine_gate: float = DEFAULT_COSINE_GATE
    feature_momentum: float = 0.1
    min_confidence: float = 0.5
    noise: NoiseParams = field(default_factory=NoiseParams)

    def __post_init__(self):
        if self.mahalanobis_gate <= 0:
            raise ValueError(f"mahalanobis_gate must be positive, got {self.mahalanobis_gate}")
        if not 0.0 < self.cosine_gate <= 2.0:
            raise ValueError(f"cosine_gate must be in (0, 2], got {self.cosine_gate}")
        if not 0.0 <= self.feature_momentum <= 1.0:
            raise ValueError(f"feature_momentum must be in [0, 1], got {self.feature_momentum}")
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError(f"min_confidence must be in [0, 1], got {self.min_confidence}")


@dataclass
class TrackRecord:
    """One persistent object hypothesis."""

    track_id: int
    last_seen: int
    hit_count: int = 1
    kalman: KalmanState | None = None  # position-only variant
    position: Vec3 | None = None  # feature-based variant: last matched position
    feature: np.ndarray | None = None  # feature-based variant: EMA re-ID template


@dataclass
class TrackerState:
    """Mutable single-owner tracker state; drive one instance from one thread."""

    config: TrackerConfig
    tracks: list[TrackRecord] = field(default_factory=list)
    next_id: int = 1


def tracker_new(config: TrackerConfig) -> TrackerState:
    return TrackerState(config=config)


def tracker_step(state: TrackerState, vp: Viewpoint) -> tuple[TrackerState, list[TrackOutput]]:
    """Consume one viewpoint: associate, update, and birth tracks.

    Every detection at or above the confidence floor is either matched to an
    existing track or births a new one, so exactly one TrackOutput is emitted
    per considered detection. Returns the (mutated) state and the outputs.

    Raises:
        ValueError: in feature-based mode when a considered detection carries
            no re-ID feature.
    """
    cfg = state.config
    considered = [d for d in vp.detections if d.confidence >= cfg.min_confidence]

    if cfg.variant is TrackerVariant.FEATURE_BASED:
        for d in considered:
            if d.feature is None:
                raise ValueError(
                    f"viewpoint {vp.index}: detection without re-ID feature "
                    "cannot be tracked in feature-based mode"
                )
        matched = _associate_by_feature(state, considered)
    else:
        matched = _associate_by_position(state, considered)

    outputs = []
    for j, det in enumerate(considered):
        track = matched.get(j)
        if track is None:
            track = _birth(state, det, vp.index)
        else:
            _refresh(state, track, det, vp.index)
        outputs.append(
            TrackOutput(
                viewpoint_index=vp.index,
                track_id=track.track_id,
                position=_reported_position(cfg, track),
                bbox=det.bbox,
            )
        )
    return state, outputs


def tracker_run(config: TrackerConfig, seq: list[Viewpoint]) -> list[TrackOutput]:
    """Fold tracker_step over a whole viewpoint sequence."""
    last = None
    for vp in seq:
        if last is not None and vp.index <= last:
            raise ValueError(f"viewpoint indices must be strictly increasing ({last} -> {vp.index})")
        last = vp.index
    state = tracker_new(config)
    outputs: list[TrackOutput] = []
    for vp in seq:
        state, step_out = tracker_step(state, vp)
        outputs.extend(step_out)
    return outputs


def _associate_by_position(state: TrackerState, detections: list[Detection]) -> dict[int, TrackRecord]:
    cfg = state.config
    for track in state.tracks:
        track.kalman = kf_predict(track.kalman, cfg.noise)
    # Gate against the innovation covariance (predicted P plus measurement R),
    # not the bare track covariance: a converged track would otherwise reject
    # its own measurement noise.
    r_eye = cfg.noise.measurement_r * np.eye(3)
    gaussians = [(t.kalman.mean, t.kalman.covariance + r_eye) for t in state.tracks]
    costs = mahalanobis_cost(gaussians, [d.position for d in detections], cfg.mahalanobis_gate)
    result = solve_hungarian(costs)
    return {col: state.tracks[row] for row, col, _ in result.matches}


def _associate_by_feature(state: TrackerState, detections: list[Detection]) -> dict[int, TrackRecord]:
    cfg = state.config
    costs = cosine_cost(
        [t.feature for t in state.tracks],
        [d.feature for d in detections],
        cfg.cosine_gate,
    )
    result = solve_hungarian(costs)
    return {col: state.tracks[row] for row, col, _ in result.matches}


def _birth(state: TrackerState, det: Detection, index: int) -> TrackRecord:
    cfg = state.config
    track = TrackRecord(track_id=state.next_id, last_seen=index)
    if cfg.variant is TrackerVariant.POSITION_ONLY:
        track.kalman = kf_init(det.position, cfg.noise)
    else:
        track.position = det.position
        track.feature = det.feature.copy()
    state.next_id += 1
    state.tracks.append(track)
    return track


def _refresh(state: TrackerState, track: TrackRecord, det: Detection, index: int) -> None:
    cfg = state.config
    if cfg.variant is TrackerVariant.POSITION_ONLY:
        track.kalman = kf_update(track.kalman, det.position, cfg.noise)
    else:
        m = cfg.feature_momentum
        blended = (1.0 - m) * track.feature + m * det.feature
        norm = np.linalg.norm(blended)
        track.feature = det.feature.copy() if norm < 1e-12 else blended / norm
        track.position = det.position
    track.last_seen = index
    track.hit_count += 1


def _reported_position(cfg: TrackerConfig, track: TrackRecord) -> Vec3:
    if cfg.variant is TrackerVariant.POSITION_ONLY:
        return track.kalman.mean
    return track.position
