"""Sigma-point statistical linear regression of the AoA model.

The regression fits ``h(x) ~= A x + b + e, e ~ N(0, omega)`` in the
mean-square sense over a given Gaussian belief. Bearing images of the sigma
points are first moved onto the 2*pi branch closest to the measurement so
the atan2 cut does not tear the fit apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from coopaoa.gaussian import Gaussian, default_kappa, psd_clip, psd_sqrt, symmetrize
from coopaoa.geometry import AoAPair, aoa_model

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class LinearModel:
    """Affine surrogate ``A x + b`` with regression-error covariance ``omega``.

    For a pair edge, ``A`` is 2x6 and splits as ``[A_i | A_j]``.
    ``angular`` marks outputs that are bearings (residuals get wrapped);
    ``lin_mean`` is the belief mean the fit was made at.
    """

    A: np.ndarray
    b: np.ndarray
    omega: np.ndarray = field(repr=False)
    angular: bool = False
    lin_mean: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        om = np.atleast_2d(np.asarray(self.omega, dtype=float))
        if b.shape != (A.shape[0],) or om.shape != (A.shape[0],) * 2:
            raise ValueError("LinearModel: inconsistent shapes")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(om))):
            raise ValueError("LinearModel: non-finite entries")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "omega", om)
        if self.lin_mean is not None:
            object.__setattr__(self, "lin_mean", np.asarray(self.lin_mean, dtype=float))

    @property
    def A_i(self) -> np.ndarray:
        return self.A[:, : self.A.shape[1] // 2]

    @property
    def A_j(self) -> np.ndarray:
        return self.A[:, self.A.shape[1] // 2:]


def correct_sigma_angles(raw, reference):
    """Shift ``raw`` by a multiple of 2*pi so it lies within pi of ``reference``.

    ``reference + pi - mod(reference - raw + pi, 2*pi)``, elementwise.
    """
    raw = np.asarray(raw, dtype=float)
    reference = np.asarray(reference, dtype=float)
    return reference + (np.pi - np.mod(reference - raw + np.pi, TWO_PI))


def statistical_linear_regression(
    belief: Gaussian,
    fn: Callable[[np.ndarray], np.ndarray],
    reference=None,
    angular: bool = False,
    kappa: float | None = None,
) -> LinearModel:
    """Fit ``fn`` affinely over ``belief`` using unscented sigma points.

    Args:
        belief: Gaussian the fit is taken against.
        fn: maps an (L, d) stack of states to (L, m) outputs.
        reference: (m,) angles used to unwrap the images when ``angular``.
            Defaults to the weighted circular mean of the raw images.
        angular: treat outputs as angles.
        kappa: unscented scaling; see ``gaussian.default_kappa``.
    """
    A, b, omega = _slr_batch(
        belief.mean[None], belief.cov[None], fn,
        None if reference is None else np.atleast_1d(reference)[None],
        angular, kappa,
    )
    return LinearModel(A[0], b[0], omega[0], angular=angular, lin_mean=belief.mean.copy())


def slr_linearize(belief: Gaussian, measurement: AoAPair | None = None, kappa: float | None = None) -> LinearModel:
    """Linearize the pair bearing model over a 6-dim joint belief.

    Sigma images are unwrapped against ``measurement.z``; without a
    measurement the circular mean of the images is used instead.
    """
    if belief.dim != 6:
        raise ValueError("slr_linearize expects a 6-dim joint belief")
    ref = None if measurement is None else measurement.z
    return statistical_linear_regression(belief, aoa_model, reference=ref, angular=True, kappa=kappa)


def _slr_batch(means, covs, fn, reference, angular, kappa=None):
    """Batched SLR over E beliefs; returns A (E,m,d), b (E,m), omega (E,m,m)."""
    E, d = means.shape
    if kappa is None:
        kappa = default_kappa(d)
    S = psd_sqrt((d + kappa) * covs)                       # (E, d, d)
    St = np.swapaxes(S, -1, -2)
    X = np.concatenate([means[:, None, :], means[:, None, :] + St, means[:, None, :] - St], axis=1)
    w = np.full(2 * d + 1, 0.5 / (d + kappa))
    w[0] = kappa / (d + kappa)
    Z = np.asarray(fn(X.reshape(-1, d)), dtype=float).reshape(E, 2 * d + 1, -1)
    if angular:
        if reference is None:
            reference = _circular_mean_batch(Z, w)
        Z = correct_sigma_angles(Z, reference[:, None, :])
    zbar = np.einsum("l,elm->em", w, Z)
    dX = X - means[:, None, :]
    dZ = Z - zbar[:, None, :]
    Cxz = np.einsum("l,eld,elm->edm", w, dX, dZ)
    Czz = symmetrize(np.einsum("l,elm,eln->emn", w, dZ, dZ))
    A = np.swapaxes(_solve_cov(covs, Cxz), -1, -2)
    b = zbar - np.einsum("emd,ed->em", A, means)
    omega = psd_clip(Czz - A @ covs @ np.swapaxes(A, -1, -2))
    return A, b, omega


def _circular_mean_batch(Z, w):
    return np.arctan2(np.einsum("l,elm->em", w, np.sin(Z)), np.einsum("l,elm->em", w, np.cos(Z)))


def _solve_cov(covs, rhs):
    # P^{-1} rhs with jitter on ill-conditioned P
    d = covs.shape[-1]
    cond = np.linalg.cond(covs)
    bad = ~np.isfinite(cond) | (cond > 1e12)
    if np.any(bad):
        covs = covs.copy()
        tr = np.trace(covs[bad], axis1=-2, axis2=-1)
        covs[bad] += (1e-9 * tr / d + 1e-300)[:, None, None] * np.eye(d)
    return np.linalg.solve(covs, rhs)


def slr_linearize_batch(means: np.ndarray, covs: np.ndarray, z: np.ndarray, kappa: float | None = None):
    """Vectorized ``slr_linearize`` over E joint beliefs.

    Returns ``(A, b, omega)`` with shapes (E,2,6), (E,2), (E,2,2).
    """
    return _slr_batch(np.asarray(means, float), np.asarray(covs, float), aoa_model,
                      np.asarray(z, float), True, kappa)
