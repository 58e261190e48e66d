"""Independent brute-force reference implementations used by the tests.

Everything here is deliberately slow and literal: exhaustive enumeration over
permutations and matchings, plain Python loops, exact rational arithmetic for
the HOTA alignment term. Nothing is shared with the package internals beyond
the published definitions.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction

ALPHAS = [k / 20 for k in range(1, 20)]
EPS = 1e-12


# --------------------------------------------------------------------------
# Assignment: exhaustive minimum over injective matchings.


def assignment_oracle(matrix) -> tuple[int, float]:
    """(max cardinality avoiding infinities, min total cost at that cardinality)."""
    n_rows = len(matrix)
    n_cols = len(matrix[0]) if n_rows else 0
    best_k = 0
    best_cost = 0.0
    for k in range(min(n_rows, n_cols), 0, -1):
        found = None
        for rows in itertools.combinations(range(n_rows), k):
            for cols in itertools.permutations(range(n_cols), k):
                total = 0.0
                ok = True
                for r, c in zip(rows, cols):
                    cost = matrix[r][c]
                    if math.isinf(cost):
                        ok = False
                        break
                    total += cost
                if ok and (found is None or total < found):
                    found = total
        if found is not None:
            best_k, best_cost = k, found
            break
    return best_k, best_cost


# --------------------------------------------------------------------------
# HOTA: exhaustive small-instance evaluation straight from the definitions.


def _similarity(a, b, d_max: float) -> float:
    dist = math.sqrt((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2)
    return max(0.0, 1.0 - dist / d_max)


def _enumerate_matchings(n_rows: int, n_cols: int, allowed) -> list[list[tuple[int, int]]]:
    """All injective partial row->col mappings over allowed pairs."""
    results = []

    def recurse(row: int, used_cols: frozenset, acc: tuple):
        if row == n_rows:
            results.append(list(acc))
            return
        recurse(row + 1, used_cols, acc)  # leave this row unmatched
        for col in range(n_cols):
            if col not in used_cols and allowed[row][col]:
                recurse(row + 1, used_cols | {col}, acc + ((row, col),))

    recurse(0, frozenset(), ())
    return results


def hota_oracle(gt_seq: dict, pred_seq: dict, d_max: float):
    """Exhaustive HOTA for sequences given as {frame: [(id, (x, y, z)), ...]}.

    Per alpha, each frame's matching is chosen over all enumerated matchings
    by maximizing, in order: cardinality, total global alignment (exact
    rationals), total similarity. Returns (hota, det_a, ass_a, loc_a) as
    percentages.
    """
    frames = sorted(set(gt_seq) | set(pred_seq))
    gt_frames = [list(gt_seq.get(t, [])) for t in frames]
    pred_frames = [list(pred_seq.get(t, [])) for t in frames]
    sims = [
        [[_similarity(g[1], p[1], d_max) for p in preds] for g in gts]
        for gts, preds in zip(gt_frames, pred_frames)
    ]

    cnt_gt: dict = {}
    cnt_pred: dict = {}
    for gts in gt_frames:
        for gid, _ in gts:
            cnt_gt[gid] = cnt_gt.get(gid, 0) + 1
    for preds in pred_frames:
        for pid, _ in preds:
            cnt_pred[pid] = cnt_pred.get(pid, 0) + 1
    total_gt = sum(cnt_gt.values())
    total_pred = sum(cnt_pred.values())
    if total_gt == 0 and total_pred == 0:
        return 100.0, 100.0, 100.0, 100.0

    hota_a, det_a, ass_a, loc_sums, tp_counts = [], [], [], [], []
    for alpha in ALPHAS:
        potential: dict = {}
        for gts, preds, sim in zip(gt_frames, pred_frames, sims):
            for i, (gid, _) in enumerate(gts):
                for j, (pid, _) in enumerate(preds):
                    if sim[i][j] >= alpha - EPS:
                        potential[(gid, pid)] = potential.get((gid, pid), 0) + 1

        def alignment(gid, pid):
            pot = potential.get((gid, pid), 0)
            if pot == 0:
                return Fraction(0)
            return Fraction(pot, cnt_gt[gid] + cnt_pred[pid] - pot)

        tp = 0
        matches: dict = {}
        matched_sims = []
        for gts, preds, sim in zip(gt_frames, pred_frames, sims):
            if not gts or not preds:
                continue
            allowed = [
                [sim[i][j] >= alpha - EPS for j in range(len(preds))] for i in range(len(gts))
            ]
            best = None
            best_key = None
            for matching in _enumerate_matchings(len(gts), len(preds), allowed):
                align_sum = sum(
                    (alignment(gts[i][0], preds[j][0]) for i, j in matching), Fraction(0)
                )
                sim_sum = math.fsum(sim[i][j] for i, j in matching)
                key = (len(matching), align_sum, sim_sum)
                if best_key is None or key > best_key:
                    best_key = key
                    best = matching
            for i, j in best:
                pair = (gts[i][0], preds[j][0])
                matches[pair] = matches.get(pair, 0) + 1
                matched_sims.append(sim[i][j])
                tp += 1

        denom = total_gt + total_pred - tp
        assoc_terms = []
        for (gid, pid) in sorted(matches):
            m = matches[(gid, pid)]
            union = cnt_gt[gid] + cnt_pred[pid] - m
            assoc_terms.append(m * (m / union))
        assoc_sum = math.fsum(assoc_terms)
        det_a.append(tp / denom if denom > 0 else 0.0)
        ass_a.append(assoc_sum / tp if tp > 0 else 0.0)
        hota_a.append(math.sqrt(assoc_sum / denom) if denom > 0 else 0.0)
        loc_sums.append(math.fsum(matched_sims))
        tp_counts.append(tp)

    total_tp = sum(tp_counts)
    loc = 100.0 * (math.fsum(loc_sums) / total_tp) if total_tp > 0 else 100.0
    return (
        100.0 * (math.fsum(hota_a) / len(ALPHAS)),
        100.0 * (math.fsum(det_a) / len(ALPHAS)),
        100.0 * (math.fsum(ass_a) / len(ALPHAS)),
        loc,
    )


def hota_oracle_per_alpha(gt_seq: dict, pred_seq: dict, d_max: float):
    """Per-alpha (hota, det_a, ass_a) triples, for bracket-style properties."""
    frames = sorted(set(gt_seq) | set(pred_seq))
    gt_frames = [list(gt_seq.get(t, [])) for t in frames]
    pred_frames = [list(pred_seq.get(t, [])) for t in frames]
    sims = [
        [[_similarity(g[1], p[1], d_max) for p in preds] for g in gts]
        for gts, preds in zip(gt_frames, pred_frames)
    ]
    cnt_gt: dict = {}
    cnt_pred: dict = {}
    for gts in gt_frames:
        for gid, _ in gts:
            cnt_gt[gid] = cnt_gt.get(gid, 0) + 1
    for preds in pred_frames:
        for pid, _ in preds:
            cnt_pred[pid] = cnt_pred.get(pid, 0) + 1
    total_gt = sum(cnt_gt.values())
    total_pred = sum(cnt_pred.values())

    triples = []
    for alpha in ALPHAS:
        potential: dict = {}
        for gts, preds, sim in zip(gt_frames, pred_frames, sims):
            for i, (gid, _) in enumerate(gts):
                for j, (pid, _) in enumerate(preds):
                    if sim[i][j] >= alpha - EPS:
                        potential[(gid, pid)] = potential.get((gid, pid), 0) + 1

        def alignment(gid, pid):
            pot = potential.get((gid, pid), 0)
            return Fraction(pot, cnt_gt[gid] + cnt_pred[pid] - pot) if pot else Fraction(0)

        tp = 0
        matches: dict = {}
        for gts, preds, sim in zip(gt_frames, pred_frames, sims):
            if not gts or not preds:
                continue
            allowed = [
                [sim[i][j] >= alpha - EPS for j in range(len(preds))] for i in range(len(gts))
            ]
            best_key, best = None, None
            for matching in _enumerate_matchings(len(gts), len(preds), allowed):
                align_sum = sum(
                    (alignment(gts[i][0], preds[j][0]) for i, j in matching), Fraction(0)
                )
                sim_sum = math.fsum(sim[i][j] for i, j in matching)
                key = (len(matching), align_sum, sim_sum)
                if best_key is None or key > best_key:
                    best_key, best = key, matching
            for i, j in best:
                pair = (gts[i][0], preds[j][0])
                matches[pair] = matches.get(pair, 0) + 1
                tp += 1
        denom = total_gt + total_pred - tp
        assoc_sum = math.fsum(
            m * (m / (cnt_gt[g] + cnt_pred[p] - m)) for (g, p), m in sorted(matches.items())
        )
        det = tp / denom if denom > 0 else 0.0
        ass = assoc_sum / tp if tp > 0 else 0.0
        hota = math.sqrt(assoc_sum / denom) if denom > 0 else 0.0
        triples.append((hota, det, ass))
    return triples
