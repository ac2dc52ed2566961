"""Gaussian densities, unscented sigma points and the Kalman measurement update."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

SYM_TOL = 1e-9
PSD_TOL = 1e-9
COND_LIMIT = 1e12
JITTER = 1e-9


class NumericalError(ArithmeticError):
    """A covariance lost symmetry/PSD-ness or a value became non-finite."""


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


def check_covariance(cov: np.ndarray, what: str = "covariance") -> None:
    """Raise ``NumericalError`` unless ``cov`` is finite, symmetric and PSD.

    Tolerances are relative: asymmetry up to ``1e-9 * max|cov|`` and
    eigenvalues down to ``-1e-9 * trace(cov)``. Batched input (..., d, d)
    is accepted.
    """
    cov = np.asarray(cov, dtype=float)
    if not np.all(np.isfinite(cov)):
        raise NumericalError(f"{what}: non-finite entries")
    scale = np.abs(cov).max(axis=(-1, -2), initial=0.0)
    asym = np.abs(cov - np.swapaxes(cov, -1, -2)).max(axis=(-1, -2), initial=0.0)
    if np.any(asym > SYM_TOL * np.maximum(scale, 1e-300)):
        raise NumericalError(f"{what}: not symmetric")
    eig = np.linalg.eigvalsh(symmetrize(cov))
    tr = np.trace(cov, axis1=-2, axis2=-1)
    if np.any(eig.min(axis=-1) < -PSD_TOL * np.abs(tr)):
        raise NumericalError(f"{what}: not positive semi-definite")


def psd_sqrt(cov: np.ndarray) -> np.ndarray:
    """Symmetric square root with negative eigenvalues clipped to zero."""
    w, V = np.linalg.eigh(symmetrize(cov))
    return (V * np.sqrt(np.clip(w, 0.0, None))[..., None, :]) @ np.swapaxes(V, -1, -2)


def psd_clip(cov: np.ndarray, floor: float = 0.0) -> np.ndarray:
    """Project onto the PSD cone by eigenvalue clipping (batched)."""
    w, V = np.linalg.eigh(symmetrize(cov))
    return symmetrize((V * np.clip(w, floor, None)[..., None, :]) @ np.swapaxes(V, -1, -2))


@dataclass(frozen=True, eq=False)
class Gaussian:
    """Mean vector and covariance matrix of a multivariate normal."""

    mean: np.ndarray
    cov: np.ndarray = field(repr=False)

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if mean.ndim != 1 or cov.shape != (mean.size, mean.size):
            raise ValueError(f"shape mismatch: mean {mean.shape}, cov {cov.shape}")
        if not np.all(np.isfinite(mean)):
            raise NumericalError("Gaussian mean is not finite")
        check_covariance(cov, "Gaussian covariance")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    def marginal(self, idx) -> "Gaussian":
        idx = np.asarray(idx)
        return Gaussian(self.mean[idx], self.cov[np.ix_(idx, idx)])

    @staticmethod
    def block_product(*parts: "Gaussian") -> "Gaussian":
        """Joint of independent Gaussians (block-diagonal covariance)."""
        mean = np.concatenate([p.mean for p in parts])
        cov = np.zeros((mean.size, mean.size))
        k = 0
        for p in parts:
            cov[k:k + p.dim, k:k + p.dim] = p.cov
            k += p.dim
        return Gaussian(mean, cov)

    def allclose(self, other: "Gaussian", atol: float = 1e-9) -> bool:
        return (np.allclose(self.mean, other.mean, atol=atol, rtol=0)
                and np.allclose(self.cov, other.cov, atol=atol, rtol=0))


@dataclass(frozen=True, eq=False)
class SigmaSet:
    points: np.ndarray   # (L, d)
    weights: np.ndarray  # (L,)

    def mean(self) -> np.ndarray:
        return self.weights @ self.points

    def cov(self) -> np.ndarray:
        d = self.points - self.mean()
        return (self.weights[:, None] * d).T @ d


def default_kappa(d: int) -> float:
    # 3 - d would give a negative centre weight for d >= 4
    return 3.0 - d if d <= 2 else 0.0


def sigma_points(g: Gaussian, kappa: float | None = None) -> SigmaSet:
    """Unscented transform sigma points (2d + 1 of them).

    ``X_0 = mu`` and ``X_{+-i} = mu +- col_i(sqrt((d + kappa) P))`` with the
    symmetric matrix square root. Weights are ``kappa / (d + kappa)`` for the
    centre and ``1 / (2 (d + kappa))`` for the rest.
    """
    d = g.dim
    if kappa is None:
        kappa = default_kappa(d)
    if d + kappa <= 0:
        raise ValueError(f"d + kappa must be positive, got {d + kappa}")
    S = psd_sqrt((d + kappa) * g.cov)
    if not np.all(np.isfinite(S)):
        raise NumericalError("sigma point factorization failed")
    points = np.vstack([g.mean, g.mean + S.T, g.mean - S.T])
    weights = np.full(2 * d + 1, 0.5 / (d + kappa))
    weights[0] = kappa / (d + kappa)
    return SigmaSet(points, weights)


def _solve_spd(S: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve S X = rhs for symmetric S, adding jitter if S is ill-conditioned."""
    if np.linalg.cond(S) > COND_LIMIT:
        m = S.shape[-1]
        S = S + JITTER * np.trace(S) / m * np.eye(m)
    try:
        return np.linalg.solve(S, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular innovation covariance") from exc


def kalman_update(prior: Gaussian, H, z_eff, noise_cov, wrap: np.ndarray | None = None) -> Gaussian:
    """Condition ``prior`` on the linear observation ``z_eff = H x + v``.

    Args:
        prior: Gaussian over x.
        H: (m, d) observation matrix.
        z_eff: (m,) observed value.
        noise_cov: (m, m) covariance of v.
        wrap: optional boolean mask over the m components whose innovation
            is an angle and must be wrapped to (-pi, pi].
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    z_eff = np.atleast_1d(np.asarray(z_eff, dtype=float))
    Rn = np.atleast_2d(np.asarray(noise_cov, dtype=float))
    P = prior.cov
    if H.shape != (z_eff.size, prior.dim) or Rn.shape != (z_eff.size, z_eff.size):
        raise ValueError("kalman_update: inconsistent dimensions")
    innov = z_eff - H @ prior.mean
    if wrap is not None:
        innov = np.where(wrap, np.pi - np.mod(np.pi - innov, 2 * np.pi), innov)
    PHt = P @ H.T
    S = symmetrize(H @ PHt + Rn)
    K = _solve_spd(S, PHt.T).T
    mean = prior.mean + K @ innov
    cov = symmetrize(P - K @ PHt.T)
    return Gaussian(mean, cov)
