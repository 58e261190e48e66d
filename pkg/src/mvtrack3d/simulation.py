"""Synthetic greenhouse world and stochastic detection generator.

The scene is deliberately minimal geometry: tomatoes are spheres clustered in
trusses along a vertical stem, leaves are occluding discs hung between the
camera side and the plant. Trackers never see pixels; the simulator plays the
role of the detector stack and emits noisy 3D detections with re-ID features,
plus per-viewpoint ground truth.

Detection quality degrades with occlusion in three ways: the miss probability
rises, the re-ID feature noise grows, and the reported position picks up a
lateral centroid bias (a partially hidden sphere's visible surface is off
center, and where it shifts depends on the viewing direction). The bias term
is what separates smooth camera paths from erratic ones for position-only
tracking: nearby viewpoints share nearly the same bias, far-apart viewpoints
do not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    AABox,
    BBox2D,
    CameraPose,
    DEFAULT_FEATURE_DIM,
    Detection,
    GroundTruth,
    Vec3,
    Viewpoint,
    quat_rotate,
)


class GenerationError(RuntimeError):
    """Raised when a scene cannot be placed inside its workspace bounds."""


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of the random scene generator."""

    n_trusses: int = 6
    tomatoes_per_truss: tuple[int, int] = (4, 6)
    tomato_radius: float = 0.035
    stem_height: float = 1.0
    n_leaves: int = 14
    leaf_radius: float = 0.06
    workspace: AABox = field(
        default_factory=lambda: AABox(Vec3(0.6, -0.4, 0.0), Vec3(1.2, 0.4, 1.4))
    )
    feature_dim: int = DEFAULT_FEATURE_DIM
    seed: int = 0

    def __post_init__(self):
        if self.n_trusses < 0 or self.n_leaves < 0:
            raise ValueError("object counts must be non-negative")
        if self.tomato_radius <= 0 or self.leaf_radius <= 0 or self.stem_height <= 0:
            raise ValueError("radii and stem height must be positive")
        lo, hi = self.tomatoes_per_truss
        if lo < 0 or hi < lo:
            raise ValueError(f"invalid tomatoes_per_truss range {self.tomatoes_per_truss}")


@dataclass(frozen=True)
class Tomato:
    object_id: int
    center: Vec3
    radius: float


@dataclass(frozen=True)
class Leaf:
    center: Vec3
    normal: Vec3  # unit
    radius: float


@dataclass(frozen=True)
class Scene:
    """Immutable generated world; safe to share across threads."""

    tomatoes: tuple[Tomato, ...]
    leaves: tuple[Leaf, ...]
    latent_features: dict[int, np.ndarray]
    roi: AABox

    @property
    def feature_dim(self) -> int:
        if not self.latent_features:
            return DEFAULT_FEATURE_DIM
        return len(next(iter(self.latent_features.values())))


@dataclass(frozen=True)
class NoiseModel:
    """Detector noise knobs; all can be zeroed for a perfect detector."""

    position_sigma: float = 0.005
    feature_sigma: float = 0.15
    base_miss_rate: float = 0.05
    occlusion_miss_gain: float = 0.6
    false_positive_rate: float = 0.3
    confidence_params: tuple[float, float] = (0.85, 0.08)
    # Lateral centroid shift of a partially occluded sphere, as a fraction of
    # its radius per unit hidden fraction.
    occlusion_position_gain: float = 1.2

    def __post_init__(self):
        if not 0.0 <= self.base_miss_rate <= 1.0 or not 0.0 <= self.occlusion_miss_gain <= 1.0:
            raise ValueError("miss rates must lie in [0, 1]")
        if min(self.position_sigma, self.feature_sigma, self.false_positive_rate) < 0:
            raise ValueError("sigmas and rates must be non-negative")
        if self.occlusion_position_gain < 0 or self.confidence_params[1] < 0:
            raise ValueError("gains and sigmas must be non-negative")


@dataclass(frozen=True)
class CameraModel:
    """Pinhole field-of-view model; no intrinsics beyond angles and pixels."""

    hfov: float = 1.05
    vfov: float = 0.85
    width: int = 640
    height: int = 480
    max_range: float = 1.6

    def __post_init__(self):
        if not 0.0 < self.hfov < math.pi or not 0.0 < self.vfov < math.pi:
            raise ValueError("fields of view must lie in (0, pi)")
        if self.width <= 0 or self.height <= 0 or self.max_range <= 0:
            raise ValueError("image dimensions and max_range must be positive")


# Fixed sphere-surface sample directions for visibility estimation: the
# center plus the eight cube-diagonal points.
_SAMPLE_DIRS = np.array(
    [[sx, sy, sz] for sx in (-1.0, 1.0) for sy in (-1.0, 1.0) for sz in (-1.0, 1.0)]
) / math.sqrt(3.0)


def generate_scene(spec: SceneSpec) -> Scene:
    """Sample a scene: trussed tomatoes along a stem, leaves in front of it.

    Fully determined by ``spec.seed``.

    Raises:
        GenerationError: if the workspace cannot host the requested objects.
    """
    rng = np.random.default_rng(spec.seed)
    ws = spec.workspace
    size = ws.size
    if spec.n_trusses > 0 and (size[0] < 4 * spec.tomato_radius or size[1] < 4 * spec.tomato_radius):
        raise GenerationError(f"workspace {ws} too small for tomatoes of radius {spec.tomato_radius}")

    center = ws.center
    stem_base = np.array([center.x, center.y, ws.lo.z + 0.05])
    stem_height = min(spec.stem_height, float(size[2]) - 0.1)
    if stem_height <= 0:
        raise GenerationError("workspace too shallow for the stem")

    tomatoes: list[Tomato] = []
    next_id = 1
    for k in range(spec.n_trusses):
        frac = (k + 0.5) / spec.n_trusses
        anchor_z = stem_base[2] + frac * stem_height + rng.uniform(-0.02, 0.02)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        rho = rng.uniform(0.05, 0.11)
        anchor = stem_base + np.array([rho * math.cos(phi), rho * math.sin(phi), 0.0])
        anchor[2] = anchor_z
        count = int(rng.integers(spec.tomatoes_per_truss[0], spec.tomatoes_per_truss[1] + 1))
        cluster_r = 2.8 * spec.tomato_radius
        for _ in range(count):
            placed = False
            for _ in range(800):
                offset = rng.uniform(-cluster_r, cluster_r, size=3)
                if np.linalg.norm(offset) > cluster_r:
                    continue
                pos = anchor + offset
                if not ws.contains(pos):
                    continue
                min_gap = 1.96 * spec.tomato_radius
                if any(np.linalg.norm(pos - t.center.to_array()) < min_gap for t in tomatoes):
                    continue
                tomatoes.append(Tomato(next_id, Vec3.from_array(pos), spec.tomato_radius))
                next_id += 1
                placed = True
                break
            if not placed:
                raise GenerationError(
                    f"could not place tomato {next_id} inside {ws}; bounds too small or trusses too dense"
                )

    leaves: list[Leaf] = []
    for _ in range(spec.n_leaves):
        pos = np.array(
            [
                stem_base[0] - rng.uniform(0.10, 0.24),
                stem_base[1] + rng.uniform(-0.22, 0.22),
                rng.uniform(stem_base[2], stem_base[2] + stem_height),
            ]
        )
        normal = np.array([-1.0, rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4)])
        normal /= np.linalg.norm(normal)
        leaves.append(
            Leaf(Vec3.from_array(pos), Vec3.from_array(normal), spec.leaf_radius * rng.uniform(0.8, 1.3))
        )

    latents = {}
    for t in tomatoes:
        f = rng.normal(size=spec.feature_dim)
        latents[t.object_id] = f / np.linalg.norm(f)

    roi = AABox(
        Vec3(stem_base[0] - 0.15, stem_base[1] - 0.15, stem_base[2]),
        Vec3(stem_base[0] + 0.15, stem_base[1] + 0.15, stem_base[2] + min(1.0, stem_height)),
    )
    return Scene(tuple(tomatoes), tuple(leaves), latents, roi)


def in_frustum(pose: CameraPose, cam: CameraModel, point: np.ndarray) -> bool:
    """True when a world point lies inside the camera's viewing frustum."""
    pc = pose.world_to_camera(np.asarray(point, dtype=float))
    if pc[0] <= 1e-9 or np.linalg.norm(pc) > cam.max_range:
        return False
    return bool(
        abs(pc[1]) <= pc[0] * math.tan(cam.hfov / 2.0)
        and abs(pc[2]) <= pc[0] * math.tan(cam.vfov / 2.0)
    )


def project_sphere(pose: CameraPose, cam: CameraModel, center: np.ndarray, radius: float) -> BBox2D:
    """Bounding box of a sphere in image pixels, clamped to the image."""
    pc = pose.world_to_camera(np.asarray(center, dtype=float))
    depth = max(pc[0], 1e-6)
    half_w = cam.width / 2.0
    half_h = cam.height / 2.0
    u = (1.0 - (pc[1] / depth) / math.tan(cam.hfov / 2.0)) * half_w
    v = (1.0 - (pc[2] / depth) / math.tan(cam.vfov / 2.0)) * half_h
    du = (radius / depth) / math.tan(cam.hfov / 2.0) * half_w
    dv = (radius / depth) / math.tan(cam.vfov / 2.0) * half_h
    x_min = min(max(u - du, 0.0), cam.width)
    x_max = min(max(u + du, 0.0), cam.width)
    y_min = min(max(v - dv, 0.0), cam.height)
    y_max = min(max(v + dv, 0.0), cam.height)
    return BBox2D(x_min, y_min, x_max, y_max)


def _segments_blocked(origin: np.ndarray, targets: np.ndarray, leaves: tuple[Leaf, ...]) -> np.ndarray:
    """Boolean per target: is the straight segment origin->target cut by a leaf disc."""
    n = targets.shape[0]
    if not leaves:
        return np.zeros(n, dtype=bool)
    dirs = targets - origin[None, :]
    lengths = np.linalg.norm(dirs, axis=1)
    lengths = np.maximum(lengths, 1e-12)
    units = dirs / lengths[:, None]

    centers = np.array([l.center.to_array() for l in leaves])  # (L, 3)
    normals = np.array([l.normal.to_array() for l in leaves])
    radii = np.array([l.radius for l in leaves])

    denom = units @ normals.T  # (n, L)
    numer = np.einsum("lk,lk->l", centers - origin[None, :], normals)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_hit = numer[None, :] / denom  # (n, L)
    valid = np.abs(denom) > 1e-12
    within = valid & (t_hit > 1e-6) & (t_hit < (lengths[:, None] - 1e-6))
    hit_points = origin[None, None, :] + t_hit[:, :, None] * units[:, None, :]
    radial = np.linalg.norm(hit_points - centers[None, :, :], axis=2) <= radii[None, :]
    return np.any(within & radial, axis=1)


def visible_fraction(scene: Scene, pose: CameraPose, cam: CameraModel, object_id: int) -> float:
    """Fraction of an object's sample rays with a clear line of sight.

    Returns 0 when the object's center is outside the frustum or beyond the
    camera range; otherwise the fraction of nine fixed sample points (center
    plus eight sphere-surface offsets) not hidden behind any leaf disc.
    """
    tomato = _find_tomato(scene, object_id)
    center = tomato.center.to_array()
    if not in_frustum(pose, cam, center):
        return 0.0
    targets = np.vstack([center[None, :], center[None, :] + tomato.radius * _SAMPLE_DIRS])
    blocked = _segments_blocked(pose.position.to_array(), targets, scene.leaves)
    return float(np.count_nonzero(~blocked)) / targets.shape[0]


def _find_tomato(scene: Scene, object_id: int) -> Tomato:
    for t in scene.tomatoes:
        if t.object_id == object_id:
            return t
    raise ValueError(f"unknown object id {object_id}")


def detection_probability(v: float, noise: NoiseModel) -> float:
    """Chance that an object with visible fraction ``v`` is detected."""
    return min(1.0, max(0.0, 1.0 - noise.base_miss_rate - noise.occlusion_miss_gain * (1.0 - v)))


def _lateral_bias_direction(latent: np.ndarray, view_dir: np.ndarray) -> np.ndarray:
    """Unit vector orthogonal to the view direction, smooth in the viewpoint."""
    axis = latent[:3].astype(float)
    norm = np.linalg.norm(axis)
    axis = np.array([0.0, 0.0, 1.0]) if norm < 1e-9 else axis / norm
    lateral = np.cross(axis, view_dir)
    lnorm = np.linalg.norm(lateral)
    if lnorm < 1e-9:
        lateral = np.cross(np.array([0.0, 1.0, 0.0]), view_dir)
        lnorm = np.linalg.norm(lateral)
    return lateral / lnorm


def simulate_detections(
    scene: Scene,
    pose: CameraPose,
    cam: CameraModel,
    noise: NoiseModel,
    rng: np.random.Generator,
    index: int = 0,
) -> Viewpoint:
    """Stochastic detector stand-in for one viewpoint.

    Every object with a positive visible fraction gets a ground-truth entry.
    Detected objects are reported with occlusion-dependent position bias and
    feature noise; Poisson clutter detections are added inside the frustum.
    Noisy positions that leave the frustum are dropped, which keeps every
    emitted detection inside the viewing volume.
    """
    origin = pose.position.to_array()
    detections = []
    gt = []
    for tomato in scene.tomatoes:
        v = visible_fraction(scene, pose, cam, tomato.object_id)
        if v <= 0.0:
            continue
        center = tomato.center.to_array()
        gt.append(GroundTruth(tomato.object_id, tomato.center, v))
        if rng.random() >= detection_probability(v, noise):
            continue

        view_dir = center - origin
        view_dir /= np.linalg.norm(view_dir)
        latent = scene.latent_features[tomato.object_id]
        bias = (
            noise.occlusion_position_gain
            * tomato.radius
            * (1.0 - v)
            * _lateral_bias_direction(latent, view_dir)
        )
        position = center + bias
        if noise.position_sigma > 0:
            position = position + rng.normal(0.0, noise.position_sigma, size=3)
        if not in_frustum(pose, cam, position):
            continue

        if noise.feature_sigma > 0:
            noisy = latent + rng.normal(0.0, noise.feature_sigma * (2.0 - v), size=latent.shape)
            feature = noisy / np.linalg.norm(noisy)
        else:
            feature = latent.copy()
        conf = _sample_confidence(noise, rng)
        bbox = project_sphere(pose, cam, center, tomato.radius)
        detections.append(Detection(bbox, Vec3.from_array(position), conf, feature))

    if noise.false_positive_rate > 0:
        nominal_r = scene.tomatoes[0].radius if scene.tomatoes else 0.035
        dim = scene.feature_dim
        for _ in range(int(rng.poisson(noise.false_positive_rate))):
            th = rng.uniform(-0.45, 0.45) * cam.hfov
            tv = rng.uniform(-0.45, 0.45) * cam.vfov
            dist = rng.uniform(0.15, 0.9) * cam.max_range
            dir_cam = np.array([1.0, math.tan(th), math.tan(tv)])
            dir_cam /= np.linalg.norm(dir_cam)
            position = pose.camera_to_world(dir_cam * dist)
            f = rng.normal(size=dim)
            f /= np.linalg.norm(f)
            conf = _sample_confidence(noise, rng)
            bbox = project_sphere(pose, cam, position, nominal_r)
            detections.append(Detection(bbox, Vec3.from_array(position), conf, f))

    return Viewpoint(index=index, pose=pose, detections=tuple(detections), gt=tuple(gt))


def _sample_confidence(noise: NoiseModel, rng: np.random.Generator) -> float:
    mean, sigma = noise.confidence_params
    if sigma <= 0:
        return min(1.0, max(0.0, mean))
    return float(min(1.0, max(0.0, rng.normal(mean, sigma))))


def build_viewpoint_grid(
    plant_center: Vec3,
    distances: Sequence[float],
    grid: tuple[int, int],
    extent: float,
) -> list[CameraPose]:
    """Planar pose grids in front of the plant, one per standoff distance.

    Poses are ordered row-major (top row first, then left to right within a
    row), distances in the given order; all cameras face straight along +X
    toward the plant plane.
    """
    rows, cols = grid
    if rows <= 0 or cols <= 0:
        raise ValueError(f"grid must be positive, got {grid}")
    if any(d <= 0 for d in distances):
        raise ValueError(f"distances must be positive, got {distances}")
    zs = [plant_center.z] if rows == 1 else list(
        np.linspace(plant_center.z + extent / 2.0, plant_center.z - extent / 2.0, rows)
    )
    ys = [plant_center.y] if cols == 1 else list(
        np.linspace(plant_center.y - extent / 2.0, plant_center.y + extent / 2.0, cols)
    )
    poses = []
    for d in distances:
        x = plant_center.x - d
        for z in zs:
            for y in ys:
                poses.append(CameraPose(Vec3(x, float(y), float(z))))
    return poses


def scene_depth(scene: Scene, origin: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    """Distance to the nearest tomato or leaf along each unit ray; inf if none."""
    n = dirs.shape[0]
    t_best = np.full(n, np.inf)

    if scene.tomatoes:
        centers = np.array([t.center.to_array() for t in scene.tomatoes])  # (M, 3)
        radii = np.array([t.radius for t in scene.tomatoes])
        oc = origin[None, :] - centers  # (M, 3)
        b = dirs @ oc.T  # (n, M)
        c0 = np.einsum("mk,mk->m", oc, oc) - radii**2
        disc = b * b - c0[None, :]
        with np.errstate(invalid="ignore"):
            root = np.sqrt(np.maximum(disc, 0.0))
        t_sphere = np.where(disc >= 0.0, -b - root, np.inf)
        t_sphere = np.where(t_sphere > 1e-6, t_sphere, np.inf)
        t_best = np.minimum(t_best, t_sphere.min(axis=1))

    if scene.leaves:
        centers = np.array([l.center.to_array() for l in scene.leaves])
        normals = np.array([l.normal.to_array() for l in scene.leaves])
        radii = np.array([l.radius for l in scene.leaves])
        denom = dirs @ normals.T  # (n, L)
        numer = np.einsum("lk,lk->l", centers - origin[None, :], normals)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_leaf = numer[None, :] / denom
        hit_points = origin[None, None, :] + t_leaf[:, :, None] * dirs[:, None, :]
        radial_ok = np.linalg.norm(hit_points - centers[None, :, :], axis=2) <= radii[None, :]
        good = (np.abs(denom) > 1e-12) & (t_leaf > 1e-6) & radial_ok
        t_leaf = np.where(good, t_leaf, np.inf)
        t_best = np.minimum(t_best, t_leaf.min(axis=1))

    return t_best
