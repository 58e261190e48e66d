"""Per-track 3D Kalman filtering with a constant-position motion model.

The monitored objects are static in the robot frame (the camera moves, not
the fruit), so the state is just the 3D position. Prediction only inflates
the covariance; an unobserved track therefore widens its gate over time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Vec3


@dataclass(frozen=True)
class NoiseParams:
    """Isotropic noise configuration, as per-axis variances in m^2."""

    process_q: float = 1e-6
    measurement_r: float = 2.5e-5
    initial_p: float = 2.5e-3

    def __post_init__(self):
        if self.process_q <= 0 or self.measurement_r <= 0 or self.initial_p <= 0:
            raise ValueError(
                "noise variances must be positive, got "
                f"q={self.process_q}, r={self.measurement_r}, p0={self.initial_p}"
            )


@dataclass(frozen=True)
class KalmanState:
    """Gaussian belief over one object's position: mean and 3x3 SPD covariance."""

    mean: Vec3
    covariance: np.ndarray

    def __post_init__(self):
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (3, 3):
            raise ValueError(f"covariance must be 3x3, got {cov.shape}")
        object.__setattr__(self, "covariance", cov)


def kf_init(z: Vec3, noise: NoiseParams) -> KalmanState:
    """Start a new track belief at the first measurement."""
    return KalmanState(mean=z, covariance=noise.initial_p * np.eye(3))


def kf_predict(state: KalmanState, noise: NoiseParams) -> KalmanState:
    """Advance one step: the mean is static, uncertainty grows by q per axis."""
    return KalmanState(
        mean=state.mean,
        covariance=state.covariance + noise.process_q * np.eye(3),
    )


def kf_update(state: KalmanState, z: Vec3, noise: NoiseParams) -> KalmanState:
    """Condition the belief on a position measurement with R = r * I.

    K = P (P + R)^-1, mean' = mean + K (z - mean), P' = (I - K) P. The
    posterior covariance is re-symmetrized to keep floating-point drift from
    accumulating over long runs.
    """
    p = state.covariance
    s = p + noise.measurement_r * np.eye(3)
    try:
        gain = np.linalg.solve(s.T, p.T).T  # K = P S^-1
    except np.linalg.LinAlgError as exc:
        raise ValueError("innovation covariance is singular; filter state corrupted") from exc
    innovation = z.to_array() - state.mean.to_array()
    mean = state.mean.to_array() + gain @ innovation
    post = (np.eye(3) - gain) @ p
    post = 0.5 * (post + post.T)
    return KalmanState(mean=Vec3.from_array(mean), covariance=post)
