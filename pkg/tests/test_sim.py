import math

import numpy as np
import pytest
import yaml

from missile_afl import (
    ConfigError,
    NumericFault,
    ScenarioConfig,
    SimTrace,
    SimulationFault,
    compute_metrics,
    integrate_rk4,
    load_scenario,
    resolve_scenario,
    run_scenario,
)
from missile_afl.sim import builtin_scenarios, dump_scenario, replay_plant

from . import oracles


def short(name="exp_a_nominal", **over):
    over.setdefault("sim.duration", 0.3)
    return resolve_scenario(name).replace(**over)


class TestRK4:
    def test_zero_derivative(self):
        x = np.array([1.5, -2.0])
        assert np.array_equal(integrate_rk4(lambda t, y: np.zeros(2), 0.0, x, 0.1), x)

    def test_exponential_decay(self):
        x = np.array([1.0])
        for k in range(1000):
            x = integrate_rk4(lambda t, y: -y, k * 1e-3, x, 1e-3)
        assert abs(x[0] - math.exp(-1.0)) < 1e-10

    def test_fourth_order(self):
        def solve(dt):
            x = np.array([1.0, 0.0])
            for k in range(int(round(2.0 / dt))):
                x = integrate_rk4(lambda t, y: np.array([y[1], -4.0 * y[0]]), k * dt, x, dt)
            return x[0]

        exact = math.cos(4.0)
        ratio = abs(solve(0.02) - exact) / abs(solve(0.01) - exact)
        assert ratio == pytest.approx(16.0, rel=0.1)

    def test_time_argument(self):
        x = integrate_rk4(lambda t, y: np.array([t]), 1.0, np.array([0.0]), 0.5)
        assert x[0] == pytest.approx(0.5 * 1.0 + 0.125)

    def test_non_finite_stage(self):
        with pytest.raises(NumericFault):
            integrate_rk4(lambda t, y: np.array([np.nan]), 0.0, np.array([0.0]), 0.1)

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ConfigError):
            integrate_rk4(lambda t, y: y, 0.0, np.array([1.0]), 0.0)


class TestScenarioConfig:
    def test_builtins_load(self):
        names = builtin_scenarios()
        assert {"exp_a_nominal", "exp_a_uncertain", "exp_b_nominal", "exp_b_uncertain", "ramp_uncertainty"} <= set(names)
        for n in names:
            assert resolve_scenario(n).name == n

    def test_partial_file_keeps_defaults(self, tmp_path):
        p = tmp_path / "s.yaml"
        p.write_text("name: x\nsim: {dt: 0.001}\ncontroller: {adaptive: {tau_d: 0.01}}\n")
        cfg = load_scenario(p)
        assert cfg.sim.dt == 0.001 and cfg.controller.adaptive.tau_d == 0.01
        assert cfg.sim.duration == ScenarioConfig().sim.duration
        assert cfg.controller.inner.k1 == 30.0

    def test_dump_round_trip(self, tmp_path):
        cfg = resolve_scenario("exp_b_uncertain")
        p = tmp_path / "rt.yaml"
        p.write_text(dump_scenario(cfg))
        assert load_scenario(p) == cfg

    @pytest.mark.parametrize(
        "text",
        [
            "bogus: 1\n",
            "sim: {dtt: 0.001}\n",
            "controller: {adaptive: {tau: 0.01}}\n",
            "uncertainty: {per_coefficient: {CL: 0.1}}\n",
            "sim: {dt: 0.03}\n",
            "sim: {dt: 0.01, duration: 0.005}\n",
            "sim: {dt: 0.005}\ncontroller: {adaptive: {enabled: false}}\n",
            "sim: {decimation: 2}\n",
            "- not\n- a mapping\n",
            "sim: {dt: [unclosed\n",
        ],
    )
    def test_invalid_files_raise_config_error(self, tmp_path, text):
        p = tmp_path / "bad.yaml"
        p.write_text(text)
        with pytest.raises(ConfigError):
            load_scenario(p)

    def test_ideal_actuator_relaxes_step_bound(self, tmp_path):
        p = tmp_path / "ok.yaml"
        p.write_text("sim: {dt: 0.005}\nactuator: {ideal: true}\ncontroller: {adaptive: {tau_d: 0.02}}\n")
        assert load_scenario(p).sim.dt == 0.005

    def test_replace(self):
        cfg = ScenarioConfig().replace(**{"sim.dt": 0.00025, "command.amplitude": -10.0})
        assert cfg.sim.dt == 0.00025 and cfg.command.amplitude == -10.0
        with pytest.raises(ConfigError):
            cfg.replace(**{"sim.nope": 1})

    def test_missing_scenario(self):
        with pytest.raises(ConfigError):
            resolve_scenario("no_such_scenario")

    def test_command_schedule(self):
        cfg = ScenarioConfig().replace(**{"command.schedule": [(0.0, 10.0), (0.5, -20.0)]})
        assert cfg.command(0.2) == 10.0 and cfg.command(0.5) == -20.0


class TestRunScenario:
    def test_zero_command_equilibrium(self):
        tr = run_scenario(short(**{"command.amplitude": 0.0}))
        for name, col in tr.columns.items():
            if name != "t":
                assert np.max(np.abs(col)) < 1e-12, name

    def test_trace_invariants(self):
        cfg = short("exp_b_uncertain")
        tr = run_scenario(cfg)
        n = int(round(cfg.sim.duration / cfg.sim.dt)) + 1
        assert len(tr) == n
        assert all(np.all(np.isfinite(c)) for c in tr.columns.values())
        np.testing.assert_allclose(np.diff(tr.t), cfg.sim.dt, rtol=1e-9)
        assert np.max(np.abs(tr["delta"])) <= cfg.actuator.position_limit
        assert np.max(np.abs(np.diff(tr["delta"]))) <= cfg.actuator.rate_limit * cfg.sim.dt * (1 + 1e-12)

    def test_adaptation_uses_previous_step(self):
        tr = run_scenario(short("exp_a_uncertain"))
        assert tr["delta_hat"][0] == 0.0
        off = run_scenario(short("exp_a_uncertain", **{"controller.adaptive.enabled": False}))
        assert np.all(off["delta_hat"] == 0.0)

    def test_logs_fl_terms_on_request(self):
        tr = run_scenario(short(**{"sim.log_fl_terms": True, "sim.log_truth_delta": False}))
        assert "f3" in tr and "g3" in tr and "delta_true" not in tr
        assert np.all(tr["g3"] != 0)

    def test_error_column_consistent(self):
        tr = run_scenario(short())
        np.testing.assert_allclose(tr["e"], tr["abar_c"] - tr["abar_z"])

    def test_model_rate_source(self):
        tr = run_scenario(short(**{"controller.rate_source": "model"}))
        assert np.all(np.isfinite(tr["abar_z_dot"]))

    def test_ideal_actuator(self):
        tr = run_scenario(short(**{"actuator.ideal": True}))
        np.testing.assert_array_equal(tr["delta"], tr["delta_cmd"])

    def test_randomized_uncertainty_deterministic(self):
        cfg = short("exp_a_uncertain", **{"uncertainty.randomize": True, "sim.seed": 3})
        a, b = run_scenario(cfg), run_scenario(cfg)
        c = run_scenario(cfg.replace(**{"sim.seed": 4}))
        assert np.array_equal(a["alpha"], b["alpha"])
        assert not np.array_equal(a["alpha"], c["alpha"])

    def test_fault_carries_step(self):
        with pytest.raises(SimulationFault) as info:
            run_scenario(short(**{"command.amplitude": 5000.0, "controller.adaptive.enabled": False}))
        assert info.value.step > 0 and info.value.time == pytest.approx(info.value.step * 0.0005)

    def test_replay_refinement(self):
        cfg = short()
        tr = run_scenario(cfg)
        ref = replay_plant(tr, cfg, substeps=16)
        np.testing.assert_allclose(replay_plant(tr, cfg, substeps=1), ref, rtol=0, atol=1e-6 * np.max(np.abs(ref)))
        np.testing.assert_allclose(np.c_[tr["alpha"], tr["q"]], replay_plant(tr, cfg, substeps=1), rtol=0, atol=1e-14)


class TestTraceCSV:
    def test_round_trip(self, tmp_path):
        tr = run_scenario(short())
        back = SimTrace.from_csv(tr.to_csv(tmp_path / "a" / "t.csv"))
        assert list(back.columns) == list(tr.columns)
        for k in tr.columns:
            np.testing.assert_array_equal(back[k], tr[k].astype(float))

    def test_schema_line_required(self, tmp_path):
        p = tmp_path / "x.csv"
        p.write_text("t,alpha\n0,0\n")
        with pytest.raises(ConfigError):
            SimTrace.from_csv(p)


def make_trace(t, y, command=1.0):
    return SimTrace({"t": t, "a_zc": np.full_like(t, command), "a_z": y}, {"step_time": 0.0})


class TestMetrics:
    def test_first_order_settling(self):
        tau, dt = 0.1, 1e-4
        t = np.arange(0, 1.5 + dt / 2, dt)
        y = np.array([oracles.first_order_step(x, tau) for x in t])
        m = compute_metrics(make_trace(t, y))
        assert abs(m.settling_time - tau * math.log(50)) <= dt
        assert m.rise_time == pytest.approx(tau * math.log(9), abs=dt)
        assert m.overshoot == 0.0 and m.settled and not m.undershoot

    def test_perfect_tracking(self):
        t = np.linspace(0, 1, 1001)
        m = compute_metrics(make_trace(t, np.ones_like(t)))
        assert (m.rise_time, m.settling_time, m.overshoot, m.steady_state_error) == (0.0, 0.0, 0.0, 0.0)

    def test_negative_command_normalised(self):
        t = np.linspace(0, 2, 2001)
        y = -50 * (1 - np.exp(-t / 0.1))
        m_neg = compute_metrics(make_trace(t, y, -50.0))
        m_pos = compute_metrics(make_trace(t, -y, 50.0))
        assert m_neg == m_pos

    def test_overshoot_and_undershoot(self):
        t = np.linspace(0, 3, 3001)
        wn, z = 10.0, 0.3
        wd = wn * math.sqrt(1 - z * z)
        y = 1 - np.exp(-z * wn * t) * (np.cos(wd * t) + z / math.sqrt(1 - z * z) * np.sin(wd * t))
        y[1:30] -= 0.1 * np.sin(np.linspace(0, math.pi, 29))
        m = compute_metrics(make_trace(t, y))
        assert m.overshoot == pytest.approx(100 * math.exp(-z * math.pi / math.sqrt(1 - z * z)), rel=1e-3)
        assert m.undershoot and m.undershoot_depth > 0.05

    def test_unsettled(self):
        t = np.linspace(0, 1, 1001)
        m = compute_metrics(make_trace(t, 1 + 0.1 * np.sin(30 * t)))
        assert not m.settled and m.settling_time == math.inf

    def test_steady_state_error(self):
        t = np.linspace(0, 1, 1001)
        m = compute_metrics(make_trace(t, np.full_like(t, 0.9)))
        assert m.steady_state_error == pytest.approx(0.1) and not m.settled

    def test_zero_command_rejected(self):
        t = np.linspace(0, 1, 11)
        with pytest.raises(ValueError):
            compute_metrics(make_trace(t, t, 0.0))


class TestExperimentB:
    def test_fl_bias_vs_tdafl(self, scenario_run):
        _, fl = scenario_run("exp_b_uncertain", **{"controller.adaptive.enabled": False})
        _, td = scenario_run("exp_b_uncertain")
        m_td = compute_metrics(td, "a_z")
        assert m_td.settled and m_td.steady_state_error < 0.02
        e_fl = np.mean(np.abs(fl["e"][-300:]))
        e_td = np.mean(np.abs(td["e"][-300:]))
        assert e_fl > 0 and e_fl >= 10 * e_td
