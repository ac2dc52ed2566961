import math

import numpy as np
import pytest

from _support import affine_graph, small_scenario, TWO_VEHICLES
from coopaoa.gaussian import Gaussian
from coopaoa.oracle import UnreliableOracleError, dense_linear_solve, importance_posterior
from coopaoa.scenario import Scenario


def test_no_edges_recovers_prior():
    s = small_scenario(*TWO_VEHICLES, seed=0)
    s = Scenario(s.truth, s.priors, s.anchor_ids, [], s.params)
    n = 200_000
    post = importance_posterior(s, n, rng=1)
    assert post.ess == pytest.approx(n)
    for p, m in zip(s.priors, post.means):
        assert np.all(np.abs(m - p.mean) < 4 * np.sqrt(np.diag(p.cov)) / math.sqrt(n))


def test_affine_model_matches_dense_solve():
    rng = np.random.default_rng(2)
    g = affine_graph(rng, 3, [(0, 1), (1, 2)])
    # fold omega into the observation noise so the sampler sees the same model
    class Edge:
        def __init__(self, e):
            self.i, self.j = e.i, e.j
            self.measurement = type("M", (), {"z": e.measurement.z - e.model.b,
                                              "noise_cov": e.measurement.noise_cov + e.model.omega})
    A = {(e.i, e.j): e.model.A for e in g.edges}
    scen = type("S", (), {"priors": g.priors, "edges": [Edge(e) for e in g.edges]})

    calls = [(e.i, e.j) for e in g.edges]
    exact = dense_linear_solve(g)
    post = importance_posterior(scen, 400_000, rng=3, fn=_Cycle(calls, A), angular=False, batch=400_000)
    for v in range(3):
        err = np.abs(post.means[v] - exact.mean[3 * v:3 * v + 3])
        assert np.all(err <= 4 * post.stderr[v] + 1e-9)


class _Cycle:
    """Edge-specific affine map; the sampler visits edges in list order for each batch."""

    def __init__(self, order, A):
        self.order, self.A, self.k = order, A, 0

    def __call__(self, x):
        A = self.A[self.order[self.k % len(self.order)]]
        self.k += 1
        return x @ A.T


def test_low_ess_raises():
    s = small_scenario(*TWO_VEHICLES, seed=0, R=1e-8)
    with pytest.raises(UnreliableOracleError):
        importance_posterior(s, 2000, rng=0)


def test_stderr_shrinks_with_samples():
    s = small_scenario(*TWO_VEHICLES, seed=0)
    a = importance_posterior(s, 200_000, rng=5)
    b = importance_posterior(s, 400_000, rng=6)
    ratio = a.stderr[1] / b.stderr[1]
    np.testing.assert_allclose(ratio, math.sqrt(2), rtol=0.15)


def test_dense_solve_without_edges():
    g = affine_graph(np.random.default_rng(0), 2, [])
    out = dense_linear_solve(g)
    assert out.allclose(Gaussian.block_product(*g.priors))
