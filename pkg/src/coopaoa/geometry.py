"""Vehicle states, bearing arithmetic and the AoA measurement model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi

#: Positions closer than this are treated as co-located (bearing undefined).
COLOCATION_EPS = 1e-9


class UndefinedBearingError(ValueError):
    """Raised when a bearing is requested between co-located vehicles."""


def wrap_angle(a):
    """Wrap angles onto the half-open interval (-pi, pi].

    Works on scalars and arrays. Non-finite input raises ``ValueError``.

    >>> float(wrap_angle(-np.pi)) == np.pi
    True
    """
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("wrap_angle: non-finite angle")
    out = np.pi - np.mod(np.pi - arr, TWO_PI)
    if out.ndim == 0:
        return float(out)
    return out


def _wrap(a: np.ndarray) -> np.ndarray:
    # unchecked variant for inner loops
    return np.pi - np.mod(np.pi - a, TWO_PI)


@dataclass(frozen=True)
class VehicleState:
    """Ground-truth pose: position in meters, heading in radians."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y) and np.isfinite(self.theta)):
            raise ValueError("VehicleState fields must be finite")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @classmethod
    def from_array(cls, v) -> "VehicleState":
        v = np.asarray(v, dtype=float)
        return cls(v[0], v[1], v[2])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])


@dataclass(frozen=True)
class AoAPair:
    """Two-sided AoA measurement of one link.

    ``z[0]`` is the bearing measured at vehicle i, ``z[1]`` the one measured
    at vehicle j; ``noise_cov`` is the 2x2 measurement noise covariance.
    """

    z: np.ndarray
    noise_cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).reshape(2)
        R = np.asarray(self.noise_cov, dtype=float).reshape(2, 2)
        if not np.all(np.isfinite(z)):
            raise ValueError("AoAPair.z must be finite")
        if not np.allclose(R, R.T, atol=1e-12 * max(1.0, np.abs(R).max())):
            raise ValueError("AoAPair.noise_cov must be symmetric")
        if np.linalg.eigvalsh(R).min() <= 0.0:
            raise ValueError("AoAPair.noise_cov must be positive definite")
        object.__setattr__(self, "z", _wrap(z))
        object.__setattr__(self, "noise_cov", R)

    def __eq__(self, other):
        if not isinstance(other, AoAPair):
            return NotImplemented
        return np.array_equal(self.z, other.z) and np.array_equal(self.noise_cov, other.noise_cov)

    __hash__ = None


def _pose(v) -> np.ndarray:
    if isinstance(v, VehicleState):
        return v.as_array()
    return np.asarray(v, dtype=float)


def aoa_model(joint: np.ndarray) -> np.ndarray:
    """Vectorized bearing model on stacked joint states.

    Args:
        joint: array of shape (..., 6) holding ``[x_i, y_i, th_i, x_j, y_j, th_j]``.

    Returns:
        Array of shape (..., 2) with the unwrapped bearings
        ``atan2(dy, dx) - th_i`` and ``atan2(-dy, -dx) - th_j``.
        No co-location check is done here.
    """
    joint = np.asarray(joint, dtype=float)
    dx = joint[..., 3] - joint[..., 0]
    dy = joint[..., 4] - joint[..., 1]
    z1 = np.arctan2(dy, dx) - joint[..., 2]
    z2 = np.arctan2(-dy, -dx) - joint[..., 5]
    return np.stack([z1, z2], axis=-1)


def measure_pair(xi, xj) -> np.ndarray:
    """Noise-free AoA pair between two vehicles, wrapped to (-pi, pi]."""
    pi_, pj = _pose(xi), _pose(xj)
    if np.hypot(pj[0] - pi_[0], pj[1] - pi_[1]) < COLOCATION_EPS:
        raise UndefinedBearingError("bearing between co-located vehicles is undefined")
    return wrap_angle(aoa_model(np.concatenate([pi_, pj])))


def in_fov(observer, target, fov: float) -> bool:
    """Whether ``target`` falls in either side array of ``observer``.

    The two arrays look broadside, at +pi/2 and -pi/2 from the heading,
    each covering ``fov`` radians; ``fov = pi`` therefore sees everything.
    """
    if not (0.0 < fov <= np.pi):
        raise ValueError(f"fov must lie in (0, pi], got {fov}")
    if fov >= np.pi:
        return True
    po, pt = _pose(observer), _pose(target)
    bearing = np.arctan2(pt[1] - po[1], pt[0] - po[0]) - po[2]
    half = 0.5 * fov
    left = abs(_wrap(bearing - 0.5 * np.pi))
    right = abs(_wrap(bearing + 0.5 * np.pi))
    return bool(left <= half or right <= half)


def _cov_sqrt(cov: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(cov)
    if w.min() < -1e-12 * max(1.0, abs(w).max()):
        raise ValueError("noise covariance is not positive semi-definite")
    return V * np.sqrt(np.clip(w, 0.0, None))


def simulate_measurement(xi, xj, noise_cov, rng: np.random.Generator) -> AoAPair:
    """Draw a noisy AoA pair: true bearings plus Gaussian noise, then wrapped."""
    R = np.asarray(noise_cov, dtype=float).reshape(2, 2)
    measure_pair(xi, xj)  # co-location check
    clean = aoa_model(np.concatenate([_pose(xi), _pose(xj)]))
    noise = _cov_sqrt(R) @ rng.standard_normal(2)
    return AoAPair(_wrap(clean + noise), R)
