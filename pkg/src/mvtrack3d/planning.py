"""Viewpoint-sequence planners: smooth-ordered, random, and active perception.

The sorted and random planners share one seeded sampling stage, so for a
given seed they pick the same viewpoint set and differ only in ordering.
The active-perception planner greedily selects the candidate whose view
would traverse the most still-unknown voxels of a region-of-interest
occupancy grid, then integrates simulated depth from the chosen pose.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import AABox, CameraPose, quat_rotate
from .simulation import CameraModel, Scene, scene_depth

UNKNOWN, FREE, OCCUPIED = 0, 1, 2


@dataclass
class OccupancyGrid:
    """Ternary-state voxel belief over an axis-aligned region of interest."""

    roi: AABox
    resolution: float
    cells: np.ndarray

    @classmethod
    def create(cls, roi: AABox, resolution: float) -> "OccupancyGrid":
        if resolution <= 0:
            raise ValueError(f"resolution must be positive, got {resolution}")
        shape = tuple(int(math.ceil(s / resolution)) for s in roi.size)
        if min(shape) == 0:
            raise ValueError(f"degenerate region {roi} at resolution {resolution}")
        return cls(roi=roi, resolution=resolution, cells=np.full(shape, UNKNOWN, dtype=np.uint8))

    @property
    def total_voxels(self) -> int:
        return int(self.cells.size)

    @property
    def unknown_count(self) -> int:
        return int(np.count_nonzero(self.cells == UNKNOWN))


@dataclass(frozen=True)
class PlanRequest:
    """A pool of candidate poses plus how many to select."""

    candidates: tuple[CameraPose, ...]
    n_select: int
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        if not 0 <= self.n_select <= len(self.candidates):
            raise ValueError(
                f"n_select = {self.n_select} out of range for a pool of {len(self.candidates)}"
            )


def _sample_indices(req: PlanRequest) -> np.ndarray:
    """Seeded sample of n_select pool indices, without replacement, in draw order."""
    rng = np.random.default_rng(req.seed)
    return rng.choice(len(req.candidates), size=req.n_select, replace=False)


def plan_random(req: PlanRequest) -> list[int]:
    """Unordered protocol: the seeded sample in its (shuffled) draw order."""
    return [int(i) for i in _sample_indices(req)]


def plan_sort(req: PlanRequest) -> list[int]:
    """Video-like protocol: sample, then order to keep frame-to-frame travel short.

    Starts from the sampled pose with lexicographically smallest position and
    repeatedly appends the nearest unvisited pose (ties to the lower pool
    index). Greedy rather than an exact shortest path: determinism and
    continuity are what matter here.
    """
    chosen = _sample_indices(req)
    if len(chosen) == 0:
        return []
    pos = np.array([req.candidates[i].position.to_array() for i in chosen])
    start = int(np.lexsort((chosen, pos[:, 2], pos[:, 1], pos[:, 0]))[0])

    order = [start]
    remaining = set(range(len(chosen))) - {start}
    current = pos[start]
    while remaining:
        rem = sorted(remaining)
        d = np.linalg.norm(pos[rem] - current, axis=1)
        nxt = rem[int(np.lexsort((chosen[rem], d))[0])]
        order.append(nxt)
        remaining.discard(nxt)
        current = pos[nxt]
    return [int(chosen[i]) for i in order]


@lru_cache(maxsize=8)
def _camera_ray_grid(cam: CameraModel, resolution: float) -> np.ndarray:
    """Camera-frame unit ray directions at an angular stride of one voxel at range."""
    stride = resolution / cam.max_range
    n_h = max(1, int(math.ceil(cam.hfov / stride)))
    n_v = max(1, int(math.ceil(cam.vfov / stride)))
    th = (np.arange(n_h) + 0.5) / n_h * cam.hfov - cam.hfov / 2.0
    tv = (np.arange(n_v) + 0.5) / n_v * cam.vfov - cam.vfov / 2.0
    hh, vv = np.meshgrid(np.tan(th), np.tan(tv))
    dirs = np.stack([np.ones_like(hh), hh, vv], axis=-1).reshape(-1, 3)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def _clipped_rays(grid: OccupancyGrid, pose: CameraPose, cam: CameraModel):
    """World-frame rays from the pose, clipped to [t0, t1] inside the region.

    Returns (origin, dirs, t0, t1) for the rays that actually cross the
    region of interest within camera range, or None when no ray does.
    """
    origin = pose.position.to_array()
    dirs = _camera_ray_grid(cam, grid.resolution)
    if pose.orientation != (1.0, 0.0, 0.0, 0.0):
        dirs = quat_rotate(pose.orientation, dirs)

    lo = grid.roi.lo.to_array()
    hi = grid.roi.hi.to_array()
    safe = np.where(np.abs(dirs) < 1e-12, 1e-12, dirs)
    ta = (lo[None, :] - origin[None, :]) / safe
    tb = (hi[None, :] - origin[None, :]) / safe
    tmin = np.minimum(ta, tb).max(axis=1)
    tmax = np.maximum(ta, tb).min(axis=1)
    t0 = np.maximum(tmin, 0.0)
    t1 = np.minimum(tmax, cam.max_range)
    keep = t1 > t0 + 1e-9
    if not keep.any():
        return None
    return origin, dirs[keep], t0[keep], t1[keep]


def _sample_voxels(grid: OccupancyGrid, origin, dirs, t0, t1):
    """Flat voxel index per ray sample, -1 where invalid, plus the distances."""
    step = grid.resolution * 0.5
    span = float(np.max(t1 - t0))
    n_steps = int(math.ceil(span / step)) + 1
    ts = t0[:, None] + (np.arange(n_steps)[None, :] + 0.5) * step
    # Entry and exit samples guard against slivers thinner than the step.
    ts = np.concatenate([t0[:, None] + 1e-9, ts, t1[:, None] - 1e-9], axis=1)
    inside = (ts > t0[:, None]) & (ts < t1[:, None])

    pts = origin[None, None, :] + ts[:, :, None] * dirs[:, None, :]
    idx = np.floor((pts - grid.roi.lo.to_array()[None, None, :]) / grid.resolution).astype(int)
    shape = grid.cells.shape
    in_grid = np.all(idx >= 0, axis=2)
    for axis in range(3):
        in_grid &= idx[:, :, axis] < shape[axis]
    ok = inside & in_grid
    flat = np.where(
        ok,
        (idx[:, :, 0] * shape[1] + idx[:, :, 1]) * shape[2] + idx[:, :, 2],
        -1,
    )
    return flat, ts


def info_gain(grid: OccupancyGrid, pose: CameraPose, cam: CameraModel) -> int:
    """Number of distinct unknown voxels this view would traverse.

    Rays march from the pose through the region of interest and stop at the
    first voxel currently believed occupied; unknown voxels passed before
    that (or before leaving the region) are counted once each.
    """
    clipped = _clipped_rays(grid, pose, cam)
    if clipped is None:
        return 0
    flat, _ = _sample_voxels(grid, *clipped)
    states = np.where(flat >= 0, grid.cells.reshape(-1)[np.maximum(flat, 0)], FREE)

    occupied = states == OCCUPIED
    n_rays, n_samples = flat.shape
    first_occ = np.where(occupied.any(axis=1), occupied.argmax(axis=1), n_samples)
    before_block = np.arange(n_samples)[None, :] < first_occ[:, None]

    unknown = flat[(states == UNKNOWN) & before_block & (flat >= 0)]
    if unknown.size == 0:
        return 0
    return int(np.unique(unknown).size)


def integrate_depth(grid: OccupancyGrid, scene: Scene, pose: CameraPose, cam: CameraModel) -> None:
    """Update the belief with simulated depth from one pose.

    Voxels traversed before each ray's first surface hit become free (unknown
    ones only; occupied stays occupied), and the voxel containing the hit
    becomes occupied.
    """
    clipped = _clipped_rays(grid, pose, cam)
    if clipped is None:
        return
    origin, dirs, t0, t1 = clipped
    flat, ts = _sample_voxels(grid, origin, dirs, t0, t1)
    t_hit = scene_depth(scene, origin, dirs)

    cells = grid.cells.reshape(-1)
    free_samples = flat[(flat >= 0) & (ts < np.minimum(t1, t_hit)[:, None])]
    if free_samples.size:
        free_samples = np.unique(free_samples)
        unknown_mask = cells[free_samples] == UNKNOWN
        cells[free_samples[unknown_mask]] = FREE

    hit = np.isfinite(t_hit) & (t_hit >= t0) & (t_hit <= t1) & (t_hit <= cam.max_range)
    if hit.any():
        pts = origin[None, :] + (t_hit[hit] + 1e-9)[:, None] * dirs[hit]
        idx = np.floor((pts - grid.roi.lo.to_array()[None, :]) / grid.resolution).astype(int)
        shape = grid.cells.shape
        ok = np.all(idx >= 0, axis=1)
        for axis in range(3):
            ok &= idx[:, axis] < shape[axis]
        flat_hit = (idx[ok, 0] * shape[1] + idx[ok, 1]) * shape[2] + idx[ok, 2]
        cells[flat_hit] = OCCUPIED


def plan_active(
    scene: Scene,
    req: PlanRequest,
    roi: AABox,
    cam: CameraModel,
    resolution: float = 0.02,
) -> list[int]:
    """Greedy next-best-view selection over the region-of-interest grid.

    Each round picks the candidate with maximal :func:`info_gain` (ties to
    the lower pool index) and integrates its simulated depth into the grid.
    Uses lazy re-evaluation: gains only shrink as the grid fills in, so a
    stale gain is a valid upper bound.
    """
    grid = OccupancyGrid.create(roi, resolution)
    order: list[int] = []
    heap = [
        (-info_gain(grid, pose, cam), i) for i, pose in enumerate(req.candidates)
    ]
    heapq.heapify(heap)

    for _ in range(req.n_select):
        while True:
            neg_bound, idx = heapq.heappop(heap)
            fresh = (-info_gain(grid, req.candidates[idx], cam), idx)
            if not heap or fresh <= heap[0]:
                break
            heapq.heappush(heap, fresh)
        order.append(idx)
        integrate_depth(grid, scene, req.candidates[idx], cam)
    return order
