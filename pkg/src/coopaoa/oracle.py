"""Reference posteriors for small problems.

``importance_posterior`` samples the product of priors and weights by the
exact nonlinear AoA likelihood; ``dense_linear_solve`` conditions the
stacked joint Gaussian on every linearized edge at once. Neither shares code
paths with the message-passing engine beyond the Gaussian container.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from coopaoa.gaussian import Gaussian, kalman_update
from coopaoa.geometry import aoa_model

MIN_ESS = 100.0


class UnreliableOracleError(RuntimeError):
    """Importance weights degenerated (effective sample size too small)."""


@dataclass
class OraclePosterior:
    means: np.ndarray    # (N, 3)
    covs: np.ndarray     # (N, 3, 3)
    ess: float
    stderr: np.ndarray   # (N, 3) standard error of each posterior mean

    @property
    def beliefs(self) -> list[Gaussian]:
        return [Gaussian(m, c) for m, c in zip(self.means, self.covs)]


def importance_posterior(
    scenario,
    sample_count: int = 1_000_000,
    rng: np.random.Generator | int = 0,
    fn: Callable[[np.ndarray], np.ndarray] | None = None,
    angular: bool = True,
    batch: int = 200_000,
) -> OraclePosterior:
    """Self-normalized importance sampling of every vehicle's posterior moments.

    Proposals come from the product of priors; weights are
    ``exp(-0.5 * sum_edges r^T R^-1 r)`` with ``r`` the (wrapped, if
    ``angular``) residual between measurement and ``fn`` at the sample.
    ``fn`` defaults to the true bearing model and acts on (S, 6) stacks.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be positive")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    fn = fn or aoa_model
    priors = scenario.priors
    n = len(priors)
    d = priors[0].dim
    roots = [_eig_sqrt(p.cov) for p in priors]
    edges = [(e.i, e.j, e.measurement.z, np.linalg.inv(e.measurement.noise_cov)) for e in scenario.edges]

    logw_parts, xs = [], []
    done = 0
    while done < sample_count:
        s = min(batch, sample_count - done)
        x = np.empty((s, n, d))
        for k, p in enumerate(priors):
            x[:, k] = p.mean + rng.standard_normal((s, d)) @ roots[k].T
        logw = np.zeros(s)
        for i, j, z, Ri in edges:
            r = z - fn(np.concatenate([x[:, i], x[:, j]], axis=1))
            if angular:
                r = np.pi - np.mod(np.pi - r, 2 * np.pi)
            logw -= 0.5 * np.einsum("sa,ab,sb->s", r, Ri, r)
        logw_parts.append(logw)
        xs.append(x)
        done += s

    logw = np.concatenate(logw_parts)
    x = np.concatenate(xs)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    ess = float(1.0 / np.sum(w ** 2))
    if ess < MIN_ESS:
        raise UnreliableOracleError(f"effective sample size {ess:.1f} < {MIN_ESS}")
    means = np.einsum("s,snd->nd", w, x)
    dev = x - means
    covs = np.einsum("s,sna,snb->nab", w, dev, dev)
    # delta-method standard error of a self-normalized weighted mean
    stderr = np.sqrt(np.einsum("s,snd->nd", w ** 2, dev ** 2))
    return OraclePosterior(means, covs, ess, stderr)


def _eig_sqrt(cov):
    w, V = np.linalg.eigh(cov)
    return V * np.sqrt(np.clip(w, 0, None))


def dense_linear_solve(graph) -> Gaussian:
    """Exact joint posterior of a factor graph whose edges carry affine models.

    All vehicle states are stacked into one Gaussian (block-diagonal priors)
    and conditioned on every edge's ``z - b = A x_ij + noise(omega + R)`` in
    a single update.
    """
    priors = graph.priors
    prior = Gaussian.block_product(*priors)
    if not graph.edges:
        return prior
    d = priors[0].dim
    N = prior.dim
    rows, zs, blocks, wrap = [], [], [], []
    for e in graph.edges:
        m = e.model
        H = np.zeros((m.b.size, N))
        H[:, e.i * d:(e.i + 1) * d] = m.A[:, :d]
        H[:, e.j * d:(e.j + 1) * d] = m.A[:, d:]
        rows.append(H)
        zs.append(e.measurement.z - m.b)
        blocks.append(m.omega + e.measurement.noise_cov)
        wrap.append(np.full(m.b.size, m.angular))
    H = np.vstack(rows)
    z = np.concatenate(zs)
    noise = np.zeros((z.size, z.size))
    k = 0
    for blk in blocks:
        noise[k:k + blk.shape[0], k:k + blk.shape[0]] = blk
        k += blk.shape[0]
    return kalman_update(prior, H, z, noise, wrap=np.concatenate(wrap))
