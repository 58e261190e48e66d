"""Shared geometric and tracking-domain value types.

All types in this module are immutable; instances can be shared freely
between threads. Positions are expressed in meters in a fixed, right-handed
robot frame in which cameras look along +X toward the plants.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Width of the re-identification feature vectors used throughout the package.
DEFAULT_FEATURE_DIM = 32

_QUAT_NORM_TOL = 1e-9
_FEATURE_NORM_TOL = 1e-6


@dataclass(frozen=True, slots=True)
class Vec3:
    """A 3D point or vector in the robot-fixed frame (meters)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"Vec3 components must be finite, got ({self.x}, {self.y}, {self.z})")

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @classmethod
    def from_array(cls, a) -> "Vec3":
        a = np.asarray(a, dtype=float)
        if a.shape != (3,):
            raise ValueError(f"expected shape (3,), got {a.shape}")
        return cls(float(a[0]), float(a[1]), float(a[2]))


def euclidean(a: Vec3, b: Vec3) -> float:
    """Euclidean distance between two points, in meters."""
    return math.sqrt((a.x - b.x) ** 2 + (a.y - b.y) ** 2 + (a.z - b.z) ** 2)


@dataclass(frozen=True, slots=True)
class CameraPose:
    """Camera position plus orientation as a unit quaternion (w, x, y, z).

    The camera's optical axis is its local +X direction; +Z is up in the
    image. The identity quaternion therefore looks straight along world +X.
    """

    position: Vec3
    orientation: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        q = self.orientation
        if len(q) != 4 or not all(math.isfinite(c) for c in q):
            raise ValueError(f"orientation must be 4 finite components, got {q}")
        norm = math.sqrt(sum(c * c for c in q))
        if abs(norm - 1.0) > _QUAT_NORM_TOL:
            raise ValueError(f"orientation quaternion must be unit norm, |q| = {norm}")

    def world_to_camera(self, point: np.ndarray) -> np.ndarray:
        """Express a world-frame point in this camera's local frame."""
        return quat_rotate(quat_conjugate(self.orientation), point - self.position.to_array())

    def camera_to_world(self, point: np.ndarray) -> np.ndarray:
        return quat_rotate(self.orientation, point) + self.position.to_array()


def quat_conjugate(q: tuple[float, float, float, float]) -> tuple[float, float, float, float]:
    w, x, y, z = q
    return (w, -x, -y, -z)


def quat_rotate(q: tuple[float, float, float, float], v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) ``v`` (shape (3,) or (n, 3)) by unit quaternion ``q``."""
    w, x, y, z = q
    u = np.array([x, y, z], dtype=float)
    v = np.asarray(v, dtype=float)
    # v' = v + 2 w (u × v) + 2 u × (u × v)
    uv = np.cross(u, v)
    return v + 2.0 * w * uv + 2.0 * np.cross(u, uv)


@dataclass(frozen=True, slots=True)
class BBox2D:
    """Axis-aligned 2D bounding box in pixel coordinates."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"bounding box coordinates must be finite, got {vals}")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate box ordering: {vals}")

    @property
    def area(self) -> float:
        return (self.x_max - self.x_min) * (self.y_max - self.y_min)


def iou_2d(a: BBox2D, b: BBox2D) -> float:
    """Intersection-over-union of two boxes; 0.0 when the union is empty."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(0.0, ix) * max(0.0, iy)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


@dataclass(frozen=True, eq=False, slots=True)
class Detection:
    """One observed object in one viewpoint.

    ``feature`` is an optional unit-norm re-identification vector; position-only
    tracking ignores it, feature-based tracking requires it.
    """

    bbox: BBox2D
    position: Vec3
    confidence: float
    feature: np.ndarray | None = None
    class_id: int = 0

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        if self.feature is not None:
            f = np.asarray(self.feature, dtype=float)
            if f.ndim != 1:
                raise ValueError(f"feature must be a 1D vector, got shape {f.shape}")
            norm = float(np.linalg.norm(f))
            if abs(norm - 1.0) > _FEATURE_NORM_TOL:
                raise ValueError(f"feature must be unit norm within {_FEATURE_NORM_TOL}, |f| = {norm}")
            object.__setattr__(self, "feature", f)

    def __eq__(self, other):
        if not isinstance(other, Detection):
            return NotImplemented
        if (self.feature is None) != (other.feature is None):
            return False
        features_equal = self.feature is None or np.array_equal(self.feature, other.feature)
        return (
            self.bbox == other.bbox
            and self.position == other.position
            and self.confidence == other.confidence
            and self.class_id == other.class_id
            and features_equal
        )


@dataclass(frozen=True, slots=True)
class GroundTruth:
    """Ground-truth record for one object at one viewpoint."""

    object_id: int
    position: Vec3
    visible_fraction: float

    def __post_init__(self):
        if not 0.0 <= self.visible_fraction <= 1.0:
            raise ValueError(f"visible_fraction must be in [0, 1], got {self.visible_fraction}")


@dataclass(frozen=True, eq=False, slots=True)
class Viewpoint:
    """One camera pose together with everything observed and true there."""

    index: int
    pose: CameraPose
    detections: tuple[Detection, ...] = ()
    gt: tuple[GroundTruth, ...] = ()

    def __post_init__(self):
        if self.index < 0:
            raise ValueError(f"viewpoint index must be >= 0, got {self.index}")
        object.__setattr__(self, "detections", tuple(self.detections))
        object.__setattr__(self, "gt", tuple(self.gt))

    def __eq__(self, other):
        if not isinstance(other, Viewpoint):
            return NotImplemented
        return (
            self.index == other.index
            and self.pose == other.pose
            and self.detections == other.detections
            and self.gt == other.gt
        )


@dataclass(frozen=True, slots=True)
class TrackOutput:
    """One per-viewpoint track hypothesis emitted by a tracker."""

    viewpoint_index: int
    track_id: int
    position: Vec3
    bbox: BBox2D


@dataclass(frozen=True, slots=True)
class AABox:
    """Axis-aligned box, used for workspace bounds and planning regions."""

    lo: Vec3
    hi: Vec3

    def __post_init__(self):
        if self.lo.x > self.hi.x or self.lo.y > self.hi.y or self.lo.z > self.hi.z:
            raise ValueError(f"box lo must not exceed hi: {self.lo} vs {self.hi}")

    @property
    def size(self) -> np.ndarray:
        return self.hi.to_array() - self.lo.to_array()

    @property
    def center(self) -> Vec3:
        return Vec3.from_array(0.5 * (self.lo.to_array() + self.hi.to_array()))

    def contains(self, point: np.ndarray) -> bool:
        lo, hi = self.lo.to_array(), self.hi.to_array()
        p = np.asarray(point, dtype=float)
        return bool(np.all(p >= lo) and np.all(p <= hi))
