"""Tracking evaluation: HOTA with its decomposition, and CLEAR-MOT.

Both metric families consume two frame-indexed sequences: ground truth as
``{viewpoint_index: [(gt_id, geometry), ...]}`` and predictions in the same
shape. Geometry is a Vec3 in 3D-distance mode or a BBox2D in IoU mode.

HOTA here follows its standard construction. For each localization threshold
alpha in {0.05, ..., 0.95}, every frame is matched by the Hungarian solver
over the pairs whose similarity reaches alpha, maximizing in order: number of
matched pairs, total global alignment (Jaccard overlap of the frames where
the pair could match at this alpha), and total similarity. Per matched pair c
the association score is A(c) = |TPA| / (|TPA| + |FNA| + |FPA|), and

    HOTA_alpha = sqrt( sum_{c in TP} A(c) / (TP + FN + FP) )

Final scores average over all alphas and are reported as percentages.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .assignment import FORBIDDEN, CostMatrix, solve_hungarian
from .core import BBox2D, TrackOutput, Vec3, Viewpoint, euclidean, iou_2d

ALPHAS = [k / 20 for k in range(1, 20)]
_SIM_EPS = 1e-12
# Lexicographic weight making global alignment dominate similarity in the
# per-frame matching objective.
_ALIGNMENT_SCALE = 1e7


class SimilarityMode(enum.Enum):
    DISTANCE_3D = "distance3d"
    IOU_2D = "iou2d"


@dataclass(frozen=True)
class SimilarityConfig:
    mode: SimilarityMode = SimilarityMode.DISTANCE_3D
    d_max: float = 0.10

    def __post_init__(self):
        if self.d_max <= 0:
            raise ValueError(f"d_max must be positive, got {self.d_max}")


@dataclass(frozen=True)
class FrameMatch:
    """Matching outcome for one frame: matched pairs plus leftover ids."""

    viewpoint_index: int
    pairs: tuple[tuple[int, int, float], ...]  # (gt_id, pred_id, similarity)
    fn_ids: tuple[int, ...]
    fp_ids: tuple[int, ...]


@dataclass(frozen=True)
class MetricsReport:
    """One row of an evaluation table; scores are percentages."""

    hota: float
    det_a: float
    ass_a: float
    loc_a: float
    mota: float
    idsw: int
    note: str = ""


@dataclass(frozen=True)
class HotaScores:
    hota: float
    det_a: float
    ass_a: float
    loc_a: float
    vacuous: bool = False


@dataclass(frozen=True)
class ClearScores:
    mota: float
    idsw: int
    fn: int
    fp: int
    undefined: bool = False


def similarity(gt, pred, cfg: SimilarityConfig) -> float:
    """Localization similarity in [0, 1] between one gt and one predicted object."""
    if cfg.mode is SimilarityMode.DISTANCE_3D:
        if not (isinstance(gt, Vec3) and isinstance(pred, Vec3)):
            raise ValueError("Distance3D similarity requires Vec3 operands")
        return max(0.0, 1.0 - euclidean(gt, pred) / cfg.d_max)
    if not (isinstance(gt, BBox2D) and isinstance(pred, BBox2D)):
        raise ValueError("IoU2D similarity requires BBox2D operands")
    return iou_2d(gt, pred)


FrameSeq = Mapping[int, Sequence[tuple[int, object]]]


def gt_frames_from_viewpoints(seq: Sequence[Viewpoint]) -> dict[int, list[tuple[int, Vec3]]]:
    """Ground-truth frame sequence (3D positions) from simulated viewpoints."""
    return {vp.index: [(g.object_id, g.position) for g in vp.gt] for vp in seq}


def pred_frames_from_outputs(outputs: Sequence[TrackOutput]) -> dict[int, list[tuple[int, Vec3]]]:
    """Prediction frame sequence (3D positions) from tracker outputs."""
    frames: dict[int, list[tuple[int, Vec3]]] = {}
    for out in outputs:
        frames.setdefault(out.viewpoint_index, []).append((out.track_id, out.position))
    return frames


class _SequencePair:
    """Dense similarity tensors shared by the metric computations."""

    def __init__(self, gt_seq: FrameSeq, pred_seq: FrameSeq, cfg: SimilarityConfig):
        self.frames = sorted(set(gt_seq) | set(pred_seq))
        self.gt_ids_by_frame = [tuple(i for i, _ in gt_seq.get(t, ())) for t in self.frames]
        self.pred_ids_by_frame = [tuple(i for i, _ in pred_seq.get(t, ())) for t in self.frames]
        self.sim_by_frame = []
        for t in self.frames:
            gts = gt_seq.get(t, ())
            preds = pred_seq.get(t, ())
            sim = np.zeros((len(gts), len(preds)))
            for i, (_, g_geom) in enumerate(gts):
                for j, (_, p_geom) in enumerate(preds):
                    sim[i, j] = similarity(g_geom, p_geom, cfg)
            self.sim_by_frame.append(sim)

        self.gt_ids = sorted({i for ids in self.gt_ids_by_frame for i in ids})
        self.pred_ids = sorted({i for ids in self.pred_ids_by_frame for i in ids})
        self.gt_index = {g: k for k, g in enumerate(self.gt_ids)}
        self.pred_index = {p: k for k, p in enumerate(self.pred_ids)}
        self.total_gt = sum(len(ids) for ids in self.gt_ids_by_frame)
        self.total_pred = sum(len(ids) for ids in self.pred_ids_by_frame)

        g_n, p_n = len(self.gt_ids), len(self.pred_ids)
        self.gt_count = np.zeros(g_n, dtype=int)
        self.pred_count = np.zeros(p_n, dtype=int)
        # potential[a, g, p]: frames where the pair's similarity reaches alpha a
        self.potential = np.zeros((len(ALPHAS), g_n, p_n), dtype=int)
        alphas = np.asarray(ALPHAS)
        for gt_ids, pred_ids, sim in zip(self.gt_ids_by_frame, self.pred_ids_by_frame, self.sim_by_frame):
            gi = np.array([self.gt_index[g] for g in gt_ids], dtype=int)
            pi = np.array([self.pred_index[p] for p in pred_ids], dtype=int)
            self.gt_count[gi] += 1
            self.pred_count[pi] += 1
            if len(gi) and len(pi):
                reached = sim[None, :, :] >= alphas[:, None, None] - _SIM_EPS
                self.potential[np.ix_(range(len(ALPHAS)), gi, pi)] += reached


def _match_frame_hota(sim: np.ndarray, alignment: np.ndarray, alpha: float) -> list[tuple[int, int]]:
    """Optimal per-frame matching at one alpha (local row/col index pairs)."""
    allowed = sim >= alpha - _SIM_EPS
    if not allowed.any():
        return []
    score = alignment * _ALIGNMENT_SCALE + sim
    cost = np.where(allowed, (_ALIGNMENT_SCALE + 1.0) - score, FORBIDDEN)
    result = solve_hungarian(CostMatrix(cost))
    return [(r, c) for r, c, _ in result.matches]


def evaluate_hota(gt_seq: FrameSeq, pred_seq: FrameSeq, cfg: SimilarityConfig) -> HotaScores:
    """HOTA / DetA / AssA / LocA over a pair of frame sequences.

    An entirely empty problem (no ground truth and no predictions) is scored
    100 across the board and flagged vacuous rather than raising, so batch
    evaluations never abort on degenerate cells.
    """
    pair = _SequencePair(gt_seq, pred_seq, cfg)
    if pair.total_gt == 0 and pair.total_pred == 0:
        return HotaScores(100.0, 100.0, 100.0, 100.0, vacuous=True)

    hota_a, det_a, ass_a = [], [], []
    loc_sums, tp_counts = [], []
    for a_idx, alpha in enumerate(ALPHAS):
        matches = np.zeros((len(pair.gt_ids), len(pair.pred_ids)), dtype=int)
        alignment_full = pair.potential[a_idx] / np.maximum(
            1, pair.gt_count[:, None] + pair.pred_count[None, :] - pair.potential[a_idx]
        )
        tp = 0
        matched_sims: list[float] = []
        for gt_ids, pred_ids, sim in zip(pair.gt_ids_by_frame, pair.pred_ids_by_frame, pair.sim_by_frame):
            if not gt_ids or not pred_ids:
                continue
            gi = [pair.gt_index[g] for g in gt_ids]
            pi = [pair.pred_index[p] for p in pred_ids]
            local_alignment = alignment_full[np.ix_(gi, pi)]
            for r, c in _match_frame_hota(sim, local_alignment, alpha):
                matches[gi[r], pi[c]] += 1
                matched_sims.append(float(sim[r, c]))
                tp += 1
        denom = pair.total_gt + pair.total_pred - tp  # == TP + FN + FP
        assoc_terms = []
        for g_i, p_i in np.argwhere(matches > 0):
            m = int(matches[g_i, p_i])
            union = int(pair.gt_count[g_i] + pair.pred_count[p_i]) - m
            assoc_terms.append(m * (m / union))
        assoc_sum = math.fsum(assoc_terms)
        det_a.append(tp / denom if denom > 0 else 0.0)
        ass_a.append(assoc_sum / tp if tp > 0 else 0.0)
        hota_a.append(math.sqrt(assoc_sum / denom) if denom > 0 else 0.0)
        loc_sums.append(math.fsum(matched_sims))
        tp_counts.append(tp)

    total_tp = sum(tp_counts)
    loc_a = 100.0 * (math.fsum(loc_sums) / total_tp) if total_tp > 0 else 100.0
    return HotaScores(
        hota=100.0 * (math.fsum(hota_a) / len(ALPHAS)),
        det_a=100.0 * (math.fsum(det_a) / len(ALPHAS)),
        ass_a=100.0 * (math.fsum(ass_a) / len(ALPHAS)),
        loc_a=loc_a,
    )


def evaluate_clear(
    gt_seq: FrameSeq,
    pred_seq: FrameSeq,
    cfg: SimilarityConfig,
    clear_threshold: float = 0.5,
) -> ClearScores:
    """CLEAR-MOT scores: MOTA plus its FN/FP/IDSW components.

    Frames are matched sequentially with persistence: pairings from the
    previous frame are carried forward while still above the threshold, then
    the remainder is matched by the Hungarian solver on similarity. An ID
    switch is counted whenever a ground-truth object's matched prediction id
    differs from its most recent previously matched id.
    """
    if not 0.0 < clear_threshold <= 1.0:
        raise ValueError(f"clear_threshold must be in (0, 1], got {clear_threshold}")
    pair = _SequencePair(gt_seq, pred_seq, cfg)

    fn = fp = idsw = 0
    last_matched: dict[int, int] = {}
    prev_pairs: dict[int, int] = {}
    frame_matches: list[FrameMatch] = []
    for gt_ids, pred_ids, sim, frame in zip(
        pair.gt_ids_by_frame, pair.pred_ids_by_frame, pair.sim_by_frame, pair.frames
    ):
        gt_local = {g: i for i, g in enumerate(gt_ids)}
        pred_local = {p: j for j, p in enumerate(pred_ids)}
        pairs: list[tuple[int, int, float]] = []
        used_gt: set[int] = set()
        used_pred: set[int] = set()
        for g in gt_ids:
            p = prev_pairs.get(g)
            if p is None or p not in pred_local:
                continue
            s = float(sim[gt_local[g], pred_local[p]])
            if s >= clear_threshold - _SIM_EPS:
                pairs.append((g, p, s))
                used_gt.add(g)
                used_pred.add(p)

        free_gt = [g for g in gt_ids if g not in used_gt]
        free_pred = [p for p in pred_ids if p not in used_pred]
        if free_gt and free_pred:
            sub = sim[np.ix_([gt_local[g] for g in free_gt], [pred_local[p] for p in free_pred])]
            cost = np.where(sub >= clear_threshold - _SIM_EPS, 1.0 - sub, FORBIDDEN)
            for r, c, _ in solve_hungarian(CostMatrix(np.maximum(cost, 0.0))).matches:
                pairs.append((free_gt[r], free_pred[c], float(sub[r, c])))

        pairs.sort()
        matched_gt = {g for g, _, _ in pairs}
        matched_pred = {p for _, p, _ in pairs}
        fn += len(gt_ids) - len(matched_gt)
        fp += len(pred_ids) - len(matched_pred)
        for g, p, _ in pairs:
            if g in last_matched and last_matched[g] != p:
                idsw += 1
            last_matched[g] = p
        prev_pairs = {g: p for g, p, _ in pairs}
        frame_matches.append(
            FrameMatch(
                viewpoint_index=frame,
                pairs=tuple(pairs),
                fn_ids=tuple(g for g in gt_ids if g not in matched_gt),
                fp_ids=tuple(p for p in pred_ids if p not in matched_pred),
            )
        )

    if pair.total_gt == 0:
        return ClearScores(mota=float("nan"), idsw=idsw, fn=fn, fp=fp, undefined=True)
    mota = 100.0 * (1.0 - (fn + fp + idsw) / pair.total_gt)
    return ClearScores(mota=mota, idsw=idsw, fn=fn, fp=fp)


def evaluate_all(
    gt_seq: FrameSeq,
    pred_seq: FrameSeq,
    cfg: SimilarityConfig,
    clear_threshold: float = 0.5,
) -> MetricsReport:
    """Run both metric families and assemble one report row."""
    hota = evaluate_hota(gt_seq, pred_seq, cfg)
    clear = evaluate_clear(gt_seq, pred_seq, cfg, clear_threshold)
    notes = []
    if hota.vacuous:
        notes.append("vacuous")
    if clear.undefined:
        notes.append("mota-undefined")
    return MetricsReport(
        hota=hota.hota,
        det_a=hota.det_a,
        ass_a=hota.ass_a,
        loc_a=hota.loc_a,
        mota=clear.mota,
        idsw=clear.idsw,
        note=";".join(notes),
    )
