"""Optimal track-to-detection assignment and the two gated cost constructions.

Both trackers reduce data association to a linear assignment problem: build a
cost matrix between existing tracks (rows) and new detections (columns), mark
pairs beyond a gate as forbidden, and solve for the cheapest matching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import Vec3

#: Sentinel marking a gated-out (never matchable) track/detection pair.
FORBIDDEN = np.inf


@dataclass(frozen=True)
class CostMatrix:
    """Rectangular non-negative cost matrix; ``FORBIDDEN`` entries are unmatchable."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError(f"cost matrix must be 2D, got shape {v.shape}")
        finite = np.isfinite(v)
        if np.any(v[finite] < 0.0) or np.any(np.isnan(v)):
            raise ValueError("cost entries must be non-negative reals or FORBIDDEN")
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Assignment:
    """Result of solving a :class:`CostMatrix`.

    ``matches`` holds (row, col, cost) triples; rows and columns appear at most
    once and never through a FORBIDDEN entry.
    """

    matches: tuple[tuple[int, int, float], ...]
    unmatched_rows: tuple[int, ...]
    unmatched_cols: tuple[int, ...]

    @property
    def total_cost(self) -> float:
        return float(sum(c for _, _, c in self.matches))


def solve_hungarian(costs: CostMatrix) -> Assignment:
    """Minimum-cost assignment avoiding FORBIDDEN pairs.

    Matches as many row/column pairs as the FORBIDDEN structure allows, and
    among those maximum matchings returns one of minimal total cost.
    Rectangular matrices are handled by square padding with a large finite
    cost and stripping the padded matches afterwards. The solver is
    deterministic for identical inputs.
    """
    v = costs.values
    n_rows, n_cols = v.shape
    if n_rows == 0 or n_cols == 0:
        return Assignment((), tuple(range(n_rows)), tuple(range(n_cols)))

    finite = np.isfinite(v)
    if not finite.any():
        return Assignment((), tuple(range(n_rows)), tuple(range(n_cols)))

    # One sentinel cost larger than any possible finite total makes the solver
    # prefer every real match over a padded/forbidden one.
    big = float(v[finite].sum()) + 1.0
    n = max(n_rows, n_cols)
    padded = np.full((n, n), big)
    padded[:n_rows, :n_cols] = np.where(finite, v, big)

    row_ind, col_ind = linear_sum_assignment(padded)
    matches = []
    for r, c in zip(row_ind, col_ind):
        if r < n_rows and c < n_cols and finite[r, c]:
            matches.append((int(r), int(c), float(v[r, c])))
    matches.sort()
    matched_rows = {r for r, _, _ in matches}
    matched_cols = {c for _, c, _ in matches}
    return Assignment(
        tuple(matches),
        tuple(r for r in range(n_rows) if r not in matched_rows),
        tuple(c for c in range(n_cols) if c not in matched_cols),
    )


def mahalanobis_cost(
    tracks: list[tuple[Vec3, np.ndarray]],
    detections: list[Vec3],
    gate: float,
) -> CostMatrix:
    """Gated Mahalanobis distances between track distributions and detections.

    Entry (i, j) is sqrt((z_j - m_i)^T S_i^-1 (z_j - m_i)) for track i with
    mean m_i and SPD covariance S_i. Entries above ``gate`` become FORBIDDEN.

    Raises:
        ValueError: if ``gate`` is not positive or any covariance is not
            symmetric positive definite (a corrupted filter state).
    """
    if gate <= 0.0:
        raise ValueError(f"gate must be positive, got {gate}")
    out = np.zeros((len(tracks), len(detections)))
    if len(tracks) == 0 or len(detections) == 0:
        return CostMatrix(out)

    z = np.array([d.to_array() for d in detections])  # (m, 3)
    for i, (mean, cov) in enumerate(tracks):
        cov = np.asarray(cov, dtype=float)
        if cov.shape != (3, 3) or not np.allclose(cov, cov.T, atol=1e-9):
            raise ValueError(f"track {i}: covariance must be a symmetric 3x3 matrix")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError as exc:
            raise ValueError(f"track {i}: covariance is not positive definite") from exc
        delta = (z - mean.to_array()).T  # (3, m)
        y = np.linalg.solve(chol, delta)
        out[i] = np.sqrt(np.sum(y * y, axis=0))
    out[out > gate] = FORBIDDEN
    return CostMatrix(out)


def cosine_cost(
    track_features: list[np.ndarray],
    detection_features: list[np.ndarray],
    gate: float,
) -> CostMatrix:
    """Gated cosine distances (1 - dot) between unit re-ID feature vectors.

    Raises:
        ValueError: if ``gate`` is outside (0, 2] or any feature is not unit
            norm within 1e-6.
    """
    if not 0.0 < gate <= 2.0:
        raise ValueError(f"cosine gate must be in (0, 2], got {gate}")
    if len(track_features) == 0 or len(detection_features) == 0:
        return CostMatrix(np.zeros((len(track_features), len(detection_features))))

    f = np.asarray(track_features, dtype=float)
    g = np.asarray(detection_features, dtype=float)
    for name, arr in (("track", f), ("detection", g)):
        norms = np.linalg.norm(arr, axis=1)
        bad = np.abs(norms - 1.0) > 1e-6
        if bad.any():
            i = int(np.argmax(bad))
            raise ValueError(f"{name} feature {i} is not unit norm (|f| = {norms[i]})")
    out = np.maximum(0.0, 1.0 - f @ g.T)
    out[out > gate] = FORBIDDEN
    return CostMatrix(out)
