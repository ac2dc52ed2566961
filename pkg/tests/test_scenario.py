import json
import math

import numpy as np
import pytest

from coopaoa.geometry import VehicleState, aoa_model, wrap_angle
from coopaoa.scenario import (
    MIN_PRIOR_VAR,
    ScenarioFormatError,
    ScenarioParams,
    build_graph,
    generate_scenario,
    load_scenario,
    save_scenario,
    scenario_to_dict,
    scenario_from_dict,
    spread_anchors,
)

SMALL = ScenarioParams(n_vehicles=20, n_anchors=3)


class TestGeneration:
    def test_zero_prior_uncertainty_centres_on_truth(self):
        s = generate_scenario(SMALL.replace(sigma_x=0.0, sigma_y=0.0, sigma_theta=0.0), 3)
        for v, p in zip(s.truth, s.priors):
            np.testing.assert_allclose(p.mean, v.as_array(), atol=1e-12)
            assert np.all(np.diag(p.cov) >= MIN_PRIOR_VAR)

    def test_deterministic_under_seed(self):
        assert generate_scenario(SMALL, 9) == generate_scenario(SMALL, 9)
        assert generate_scenario(SMALL, 9) != generate_scenario(SMALL, 10)

    def test_anchor_count_and_priors(self):
        s = generate_scenario(SMALL, 1)
        assert len(s.anchor_ids) == 3
        for a in s.anchor_ids:
            np.testing.assert_allclose(s.priors[a].mean, s.truth[a].as_array())
            np.testing.assert_allclose(np.diag(s.priors[a].cov), SMALL.anchor_var)

    def test_min_spacing(self):
        s = generate_scenario(SMALL, 2)
        xy = s.truth_array()[:, :2]
        d = np.hypot(*(xy[:, None] - xy[None]).transpose(2, 0, 1))
        d[np.diag_indices_from(d)] = np.inf
        assert d.min() >= SMALL.min_spacing - 1e-9

    def test_uniform_layout(self):
        s = generate_scenario(SMALL.replace(layout="uniform"), 0)
        assert s.n_vehicles == 20

    def test_noise_reuses_standardized_draws(self):
        # same seed, different R: measurement errors scale by sqrt(R) exactly
        a = generate_scenario(SMALL.replace(R=0.01), 4)
        b = generate_scenario(SMALL.replace(R=0.04), 4)
        for ea, eb in zip(a.edges, b.edges):
            clean = aoa_model(np.r_[a.truth[ea.i].as_array(), a.truth[ea.j].as_array()])
            np.testing.assert_allclose(wrap_angle(eb.measurement.z - clean),
                                       2 * wrap_angle(ea.measurement.z - clean), atol=1e-9)

    def test_measurement_noise_statistics(self):
        s = generate_scenario(ScenarioParams(n_vehicles=51, R=0.05), 5)
        res = []
        for e in s.edges:
            clean = aoa_model(np.r_[s.truth[e.i].as_array(), s.truth[e.j].as_array()])
            res.append(wrap_angle(e.measurement.z - clean))
        res = np.concatenate(res)
        assert abs(res.var() - 0.05) < 5 * 0.05 * math.sqrt(2 / res.size)


class TestGraph:
    def test_radius(self):
        truth = [VehicleState(0, 0, 0), VehicleState(0, 20, 0), VehicleState(0, -35, 0)]
        assert build_graph(truth, 30.0, math.pi) == [(0, 1)]

    def test_dead_ahead_outside_fov(self):
        truth = [VehicleState(0, 0, 0), VehicleState(10, 0, 0)]
        assert build_graph(truth, 30.0, math.pi / 2) == []
        assert build_graph(truth, 30.0, math.pi) == [(0, 1)]

    def test_full_fov_is_radius_graph(self):
        s = generate_scenario(SMALL, 6)
        xy = s.truth_array()[:, :2]
        expect = [(i, j) for i in range(20) for j in range(i + 1, 20)
                  if math.hypot(*(xy[i] - xy[j])) <= SMALL.r]
        assert [(e.i, e.j) for e in s.edges] == expect

    def test_spread_anchors(self):
        pos = np.array([[0, 0], [1, 0], [100, 0], [0, 100], [50, 50]], float)
        assert spread_anchors(pos, 3) == [0, 2, 3]
        assert spread_anchors(pos, 0) == []


class TestFileFormat:
    def test_round_trip(self, tmp_path):
        s = generate_scenario(SMALL, 7)
        path = tmp_path / "s.json"
        save_scenario(s, path)
        assert load_scenario(path) == s

    def test_missing_field_named(self):
        doc = scenario_to_dict(generate_scenario(SMALL, 7))
        del doc["priors"][2]["cov"]
        with pytest.raises(ScenarioFormatError, match=r"priors\[2\].*cov"):
            scenario_from_dict(doc)

    def test_radius_violation_named(self):
        doc = scenario_to_dict(generate_scenario(SMALL, 7))
        doc["vehicles"][0]["x"] = 1e4
        first = next(e for e in doc["edges"] if e["i"] == 0)
        with pytest.raises(ScenarioFormatError, match=rf"\(0, {first['j']}\).*beyond r"):
            scenario_from_dict(doc)

    def test_unknown_param(self):
        doc = scenario_to_dict(generate_scenario(SMALL, 7))
        doc["params"]["bogus"] = 1
        with pytest.raises(ScenarioFormatError, match="bogus"):
            scenario_from_dict(doc)

    def test_bad_json_reports_position(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"params": {,}}')
        with pytest.raises(ScenarioFormatError, match="line 1 column"):
            load_scenario(path)

    def test_json_is_plain(self, tmp_path):
        path = tmp_path / "s.json"
        save_scenario(generate_scenario(SMALL, 0), path)
        doc = json.loads(path.read_text())
        assert set(doc) == {"params", "vehicles", "priors", "anchors", "edges"}


class TestParams:
    def test_sigma_p_split(self):
        p = ScenarioParams().replace(sigma_p=10.0)
        assert p.sigma_x == pytest.approx(10 / math.sqrt(2))
        assert p.sigma_p == pytest.approx(10.0)

    @pytest.mark.parametrize("bad", [dict(r=0), dict(fov=4.0), dict(R=0.0), dict(n_anchors=60),
                                     dict(layout="hex"), dict(sigma_x=-1)])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            ScenarioParams(**bad)
