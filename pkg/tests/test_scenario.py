import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from umwave.scenario import (
    ConfigError,
    ScenarioConfig,
    SolverSettings,
    build_angle_grid,
    desired_beampattern,
    load_scenario,
    rng_stream,
    scenario_from_dict,
    steering_matrix,
    steering_vector,
)

from conftest import SCENARIOS


def normal_dict():
    return json.loads((SCENARIOS / "normal.json").read_text())


class TestAngleGrid:
    def test_tenth_degree_grid(self):
        g = build_angle_grid(0.1)
        assert len(g) == 1799
        assert g[0] == pytest.approx(-89.9)
        assert g[-1] == pytest.approx(89.9)

    def test_single_interior_angle(self):
        np.testing.assert_array_equal(build_angle_grid(90.0), [0.0])

    def test_unit_spacing_is_open_interval(self):
        g = build_angle_grid(1.0)
        assert len(g) == 179
        assert g[0] == -89.0 and g[-1] == 89.0

    @pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), 180.0])
    def test_rejects_bad_spacing(self, bad):
        with pytest.raises(ConfigError):
            build_angle_grid(bad)

    @given(st.floats(min_value=0.05, max_value=60.0))
    def test_grid_strictly_inside_and_increasing(self, spacing):
        g = build_angle_grid(spacing)
        assert np.all(np.abs(g) < 90)
        assert np.all(np.diff(g) > 0)


class TestSteering:
    def test_broadside_is_all_ones(self):
        np.testing.assert_allclose(steering_vector(0.0, 4), np.ones(4))

    def test_thirty_degrees(self):
        np.testing.assert_allclose(steering_vector(30.0, 3), [1, 1j, -1], atol=1e-15)

    def test_near_endfire_approaches_alternating(self):
        np.testing.assert_allclose(steering_vector(90.0 - 1e-7, 2), [1, -1], atol=1e-9)

    @pytest.mark.parametrize("theta", [90.0, -90.0, 120.0])
    def test_domain_error(self, theta):
        with pytest.raises(ValueError):
            steering_vector(theta, 4)

    @given(st.floats(min_value=-89.9, max_value=89.9), st.integers(min_value=1, max_value=16))
    def test_unit_modulus_and_first_entry(self, theta, m):
        a = steering_vector(theta, m)
        np.testing.assert_allclose(np.abs(a), 1.0, rtol=0, atol=1e-12)
        assert a[0] == 1

    def test_matrix_columns_match_vectors(self):
        thetas = np.array([-40.0, 0.0, 30.0])
        mat = steering_matrix(thetas, 5)
        for k, t in enumerate(thetas):
            np.testing.assert_allclose(mat[:, k], steering_vector(t, 5))


class TestDesiredBeampattern:
    lobes = ((-40.0, 10.0), (30.0, 10.0))

    def test_mainlobe_centre(self):
        assert desired_beampattern(30.0, self.lobes) == 1.0

    def test_outside(self):
        assert desired_beampattern(0.0, self.lobes) == 0.0

    def test_boundary_included(self):
        assert desired_beampattern(-50.0, self.lobes) == 1.0
        assert desired_beampattern(-30.0, self.lobes) == 1.0

    def test_array_input(self):
        out = desired_beampattern(np.array([-55.0, -40.0, 20.0, 45.0]), self.lobes)
        np.testing.assert_array_equal(out, [0, 1, 1, 0])

    def test_grid_mainlobe_count(self):
        # [-50, -30] and [20, 40] at 0.1 deg: 201 points each
        g = build_angle_grid(0.1)
        assert desired_beampattern(g, self.lobes).sum() == 402


class TestLoadScenario:
    def test_normal_scale_file(self):
        cfg = load_scenario(SCENARIOS / "normal.json")
        assert cfg.shape == (64, 8)
        assert cfg.delay_set == tuple(range(17))
        assert len(cfg.grid) == 1799
        assert cfg.interest_angles == (-40.0, 30.0)
        assert cfg.weight_wc == 25.0

    def test_gradcheck_file_has_37_angles(self):
        cfg = load_scenario(SCENARIOS / "gradcheck.json")
        assert len(cfg.grid) == 37 and cfg.delay_set == (0, 1, 2, 3, 4)

    def test_n_equal_m_rejected(self):
        raw = normal_dict()
        raw["n_samples"] = raw["m_antennas"]
        with pytest.raises(ConfigError, match="n_samples must exceed m_antennas"):
            scenario_from_dict(raw)

    def test_delay_beyond_n_rejected(self):
        raw = normal_dict()
        del raw["delay_max"]
        raw["delay_set"] = [0, 1, raw["n_samples"] + 1]
        with pytest.raises(ConfigError):
            scenario_from_dict(raw)

    def test_unknown_key_rejected(self):
        raw = normal_dict()
        raw["weight"] = 3
        with pytest.raises(ConfigError):
            scenario_from_dict(raw)

    def test_unknown_solver_key_rejected(self):
        raw = normal_dict()
        raw["solver"]["stepsize"] = 1.0
        with pytest.raises(ConfigError):
            scenario_from_dict(raw)

    def test_interest_angle_snaps_to_grid(self):
        raw = normal_dict()
        raw["interest_angles_deg"] = [-40.03]
        assert scenario_from_dict(raw).interest_angles == (-40.0,)

    def test_interest_angle_outside_grid_rejected(self):
        raw = normal_dict()
        raw["interest_angles_deg"] = [95.0]
        with pytest.raises(ConfigError):
            scenario_from_dict(raw)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_scenario(path)

    def test_round_trip_through_to_dict(self):
        cfg = load_scenario(SCENARIOS / "normal.json")
        again = scenario_from_dict(cfg.to_dict())
        assert again.to_dict() == cfg.to_dict()


class TestSolverSettings:
    def test_defaults(self):
        s = SolverSettings()
        assert s.algorithm == "um-agd" and s.t_bar == 1.0 and s.sampling_mode == "unbiased"

    @pytest.mark.parametrize("kw", [{"algorithm": "adam"}, {"beta": 1.0}, {"sigma": 0.0}, {"sampling_mode": "x"}])
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            SolverSettings(**kw)


def test_rng_streams_are_independent_and_reproducible():
    a = rng_stream(3, 0).standard_normal(4)
    b = rng_stream(3, 0).standard_normal(4)
    c = rng_stream(3, 1).standard_normal(4)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_default_m_inner_and_tolerance():
    cfg = ScenarioConfig.build(4, 16, angle_spacing_deg=4.8, interest_angles=[30.0], delay_max=4)
    assert cfg.default_m_inner == 10
    assert cfg.default_grad_tol == pytest.approx(1e-6 * 8)
