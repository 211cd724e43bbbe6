import json
import math

import numpy as np
import pytest

from fxtsafe.case_study import desired_state, fov_angle_cbf
from fxtsafe.marine_sim import AgentState, simulate
from fxtsafe.scenario_cli import (AgentConfig, ConfigError, ScenarioConfig,
                                  build_case_study, default_scenario,
                                  load_scenario, main, read_agent_csv,
                                  run_once, summarize, write_agent_csv)


@pytest.fixture(scope="module")
def short_nominal():
    """One short nominal closed-loop run shared by the reporting tests."""
    config = default_scenario()
    controllers, world = build_case_study(config, gamma=0.0, eps=0.0)
    trace = simulate(world, controllers, duration=1.0, dt=0.02,
                     seed=config.seed)
    return config, trace


class TestDesiredState:
    def test_straight_ahead(self):
        state = AgentState(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        out = desired_state((1.0, 0.0), state, c1=1.0, c2=1.0)
        assert np.allclose(out, [1.0, 0.0, 0.0, 1.0, 0.0, 0.0], atol=1e-12)

    def test_goal_above(self):
        state = AgentState(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
        out = desired_state((0.0, 2.0), state, c1=1.0, c2=0.5)
        assert np.allclose(
            out, [0.0, 2.0, math.pi / 2, 0.0, 2.0, math.pi / 4], atol=1e-12)

    def test_aligned_heading_zeroes_lateral_references(self):
        state = AgentState(1.0, 1.0, math.atan2(2.0, 3.0), 0.5, 0.0, 0.0)
        out = desired_state((4.0, 3.0), state, c1=0.7, c2=1.3)
        assert out[4] == pytest.approx(0.0, abs=1e-12)
        assert out[5] == pytest.approx(0.0, abs=1e-12)

    def test_coincident_convention(self):
        state = AgentState(2.0, -1.0, 0.4, 0.3, 0.0, 0.0)
        out = desired_state((2.0, -1.0), state, c1=1.0, c2=1.0)
        assert np.allclose(out, [2.0, -1.0, 0.4, 0.0, 0.0, 0.0], atol=1e-12)

    def test_angle_certificate_deep_interior_when_aligned(self):
        # heading exactly at the target bearing puts the angle constraint at
        # its most negative value
        alpha = math.pi / 4.0
        cert = fov_angle_cbf((3.0, 4.0), alpha)
        x = np.array([0.0, 0.0, math.atan2(4.0, 3.0), 0.0, 0.0, 0.0])
        assert cert.value(0.0, x) == pytest.approx(-alpha ** 2, abs=1e-12)


class TestConfigValidation:
    def test_default_scenario_is_valid(self):
        config = default_scenario()
        assert len(config.agents) == 4

    def test_round_trip_through_json(self, tmp_path):
        config = default_scenario()
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(config.to_dict()))
        loaded = load_scenario(path)
        assert loaded.d_s == config.d_s
        assert loaded.t_bar == config.t_bar
        assert np.allclose(loaded.agents[2].goal, config.agents[2].goal)

    def test_rejects_agents_inside_safety_distance(self):
        config = default_scenario()
        data = config.to_dict()
        data["safety_distance"] = 10.0  # larger than initial separations
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(data)

    def test_rejects_point_of_interest_out_of_range(self):
        config = default_scenario()
        data = config.to_dict()
        data["fov_radius"] = 1.0
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(data)

    def test_rejects_unknown_schema_version(self):
        data = default_scenario().to_dict()
        data["schema_version"] = 99
        with pytest.raises(ConfigError):
            ScenarioConfig.from_dict(data)

    def test_rejects_empty_shrunk_goal_set(self):
        config = default_scenario()
        config.lipschitz_clf = 1.0  # shift 0.5 swallows the 0.1 level set
        with pytest.raises(ConfigError, match="goal set"):
            build_case_study(config)


class TestBuildCaseStudy:
    def test_pair_composition_counts(self):
        # a single neighbor makes the time-varying certificate equal that
        # neighbor's term; three neighbors sit within the smooth-max band
        config4 = default_scenario(n_agents=4)
        controllers4, _ = build_case_study(config4, gamma=0.0, eps=0.0)
        config2 = default_scenario(n_agents=2, circle_radius=4.5)
        controllers2, _ = build_case_study(config2, gamma=0.0, eps=0.0)
        x0 = config2.agents[0].start.as_vector()
        from fxtsafe.case_study import pair_separation_reduced, ExternalSignal
        other = config2.agents[1].start
        sig = ExternalSignal(pos=(other.x, other.y))
        member = pair_separation_reduced(sig, config2.d_s,
                                         lam=config2.reduction_lambda)
        assert controllers2[0].cbf_tv.value(0.0, x0) == pytest.approx(
            member.value(0.0, x0), abs=1e-9)
        x0 = config4.agents[0].start.as_vector()
        val = controllers4[0].cbf_tv.value(0.0, x0)
        members = []
        for j in (1, 2, 3):
            o = config4.agents[j].start
            members.append(pair_separation_reduced(
                ExternalSignal(pos=(o.x, o.y)), config4.d_s,
                lam=config4.reduction_lambda).value(0.0, x0))
        assert max(members) - 1e-9 <= val <= max(members) + math.log(3) + 1e-9

    def test_initial_states_strictly_inside_shifted_sets(self):
        config = default_scenario()
        controllers, _ = build_case_study(config)
        for spec, agent in zip(controllers, config.agents):
            x0 = agent.start.as_vector()
            assert spec.cbf_static.value(0.0, x0) < 0.0
            assert spec.cbf_tv.value(0.0, x0) < 0.0

    def test_mode_overrides_enter_margins(self):
        config = default_scenario()
        nominal, _ = build_case_study(config, gamma=0.0, eps=0.0)
        robust, _ = build_case_study(config)
        x0 = config.agents[0].start.as_vector()
        shift = robust[0].cbf_static.value(0.0, x0) \
            - nominal[0].cbf_static.value(0.0, x0)
        assert shift == pytest.approx(
            nominal[0].cbf_static.lipschitz * config.eps, abs=1e-9)


class TestSummarize:
    def test_series_lengths_match_trace(self, short_nominal):
        config, trace = short_nominal
        report = summarize(trace, config)
        assert report.v_max_series.shape == (trace.n_steps,)
        assert report.h_max_series.shape == (trace.n_steps,)

    def test_single_agent_distance_sentinel(self):
        config = default_scenario(n_agents=1)
        controllers, world = build_case_study(config, gamma=0.0, eps=0.0)
        trace = simulate(world, controllers, duration=0.5, dt=0.05, seed=0)
        report = summarize(trace, config)
        assert report.min_interagent_distance == math.inf

    def test_goal_reach_times_finite_when_reached(self):
        config = default_scenario()
        code, trace, report = run_once(config, "nominal", "/tmp/fxs_nominal",
                                       seed=config.seed)
        assert all(math.isfinite(g) for g in report.goal_reach_time)

    def test_infeasible_steps_counted(self, short_nominal):
        config, trace = short_nominal
        trace.status[3, 1] = "infeasible"
        report = summarize(trace, config)
        assert report.infeasible_step_count == 1
        trace.status[3, 1] = "optimal"


class TestCsvRoundTrip:
    def test_values_survive_to_full_precision(self, short_nominal, tmp_path):
        config, trace = short_nominal
        path = tmp_path / "agent_0.csv"
        write_agent_csv(path, trace, 0, config)
        cols = read_agent_csv(path)
        assert np.array_equal(cols["t"], trace.t)
        assert np.array_equal(cols["x"], trace.states[:, 0, 0])
        assert np.array_equal(cols["phi"], trace.states[:, 0, 2])
        assert np.array_equal(cols["xh"], trace.estimates[:, 0, 0])
        assert np.array_equal(cols["tau_u"], trace.inputs[:, 0, 0])
        assert np.array_equal(cols["delta1"], trace.slacks[:, 0, 0])
        assert np.array_equal(cols["hG_hat"], trace.cert_values[:, 0, 0])
        assert all(cols["qp_status"] == "optimal")


class TestCli:
    def _write_default(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(default_scenario().to_dict()))
        return path

    def test_template_prints_valid_scenario(self, capsys):
        assert main(["template"]) == 0
        data = json.loads(capsys.readouterr().out)
        assert data["schema_version"] == 1
        ScenarioConfig.from_dict(data)

    def test_short_nominal_run_exits_zero(self, tmp_path):
        path = self._write_default(tmp_path)
        code = main(["run", str(path), "--duration", "1.0", "--mode",
                     "nominal", "--out", str(tmp_path / "out")])
        assert code == 0
        out = tmp_path / "out"
        assert (out / "summary.json").exists()
        assert (out / "series.csv").exists()
        for i in range(4):
            assert (out / f"agent_{i}.csv").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["infeasible_step_count"] == 0
        assert max(summary["h_max_series"]) <= 0.0

    def test_config_error_exits_three(self, tmp_path):
        data = default_scenario().to_dict()
        data["safety_distance"] = 50.0
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data))
        assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 3

    def test_unreadable_scenario_exits_three(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["run", str(path), "--out", str(tmp_path / "o")]) == 3

    def test_batch_creates_per_seed_directories(self, tmp_path):
        path = self._write_default(tmp_path)
        code = main(["run", str(path), "--duration", "0.5", "--mode",
                     "nominal", "--out", str(tmp_path / "batch"),
                     "--batch", "2", "--seed", "5"])
        assert code == 0
        assert (tmp_path / "batch" / "seed_5" / "summary.json").exists()
        assert (tmp_path / "batch" / "seed_6" / "summary.json").exists()

    def test_overstressed_run_reports_failure_honestly(self, tmp_path):
        # ten-fold disturbance bound with unchanged thrust limits: the run
        # must end with a nonzero exit code, never silently clipped inputs
        path = self._write_default(tmp_path)
        code = main(["run", str(path), "--gamma", "5.0", "--duration", "30",
                     "--dt", "0.02", "--out", str(tmp_path / "stress")])
        assert code in (2, 4)
        summary = json.loads(
            (tmp_path / "stress" / "summary.json").read_text())
        assert summary["infeasible_step_count"] > 0 or \
            max(summary["h_max_series"]) > 0.0
