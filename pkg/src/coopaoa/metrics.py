"""Position/heading error metrics and empirical CDFs."""

from __future__ import annotations

import numpy as np

from coopaoa.geometry import VehicleState, wrap_angle


def _means(beliefs) -> np.ndarray:
    if isinstance(beliefs, np.ndarray):
        return beliefs.reshape(len(beliefs), -1)
    return np.array([b.mean if hasattr(b, "mean") else np.asarray(b, float) for b in beliefs])


def _truth(truth) -> np.ndarray:
    if isinstance(truth, np.ndarray):
        return truth.reshape(len(truth), -1)
    return np.array([t.as_array() if isinstance(t, VehicleState) else np.asarray(t, float) for t in truth])


def _included(n: int, exclude) -> np.ndarray:
    keep = np.ones(n, dtype=bool)
    if exclude:
        keep[list(exclude)] = False
    if not keep.any():
        raise ValueError("no vehicles left after exclusion")
    return keep


def position_errors(beliefs, truth, exclude=()) -> np.ndarray:
    mu, tr = _means(beliefs), _truth(truth)
    keep = _included(len(tr), exclude)
    return np.hypot(mu[keep, 0] - tr[keep, 0], mu[keep, 1] - tr[keep, 1])


def heading_errors(beliefs, truth, exclude=()) -> np.ndarray:
    """Absolute wrapped heading residuals."""
    mu, tr = _means(beliefs), _truth(truth)
    keep = _included(len(tr), exclude)
    return np.abs(wrap_angle(mu[keep, 2] - tr[keep, 2]))


def position_rmse(beliefs, truth, exclude=()) -> float:
    """Root mean square of the position error norms over included vehicles."""
    return float(np.sqrt(np.mean(position_errors(beliefs, truth, exclude) ** 2)))


def direction_rmse(beliefs, truth, exclude=()) -> float:
    """RMS heading error; residuals are wrapped to (-pi, pi] before squaring."""
    return float(np.sqrt(np.mean(heading_errors(beliefs, truth, exclude) ** 2)))


def error_cdf(errors) -> list[tuple[float, float]]:
    """Empirical CDF at the sorted sample points as ``(threshold, fraction <= threshold)``."""
    e = np.sort(np.asarray(errors, dtype=float).ravel())
    if e.size == 0:
        raise ValueError("error_cdf needs at least one sample")
    # ties collapse so each threshold counts every equal sample
    vals, counts = np.unique(e, return_counts=True)
    frac = np.cumsum(counts) / e.size
    return [(float(v), float(f)) for v, f in zip(vals, frac)]


def cdf_at(errors, threshold: float) -> float:
    """Fraction of samples ``<= threshold``."""
    e = np.asarray(errors, dtype=float).ravel()
    if e.size == 0:
        raise ValueError("cdf_at needs at least one sample")
    return float(np.count_nonzero(e <= threshold) / e.size)
