import numpy as np
import pytest
from scipy.linalg import expm

from vrft_lab.errors import LengthTooShort, StateOutOfRange, VrftLabError
from vrft_lab.plant import (
    ExcitationConfig,
    ExogenousTraces,
    PlantState,
    ThermalPlantConfig,
    constant_traces,
    generate_excitation,
    generate_occupancy,
    generate_weather,
    run_closed_loop,
    run_open_loop,
    scenario_excitation,
    steady_state,
    step_plant,
    winter_traces,
)
from vrft_lab.lti import SignalSeries
from vrft_lab.vrft import ControllerParams, realize_controller

TS = 540.0
CFG = ThermalPlantConfig()


def derivs(cfg, ta, tw, u, t_out, occ):
    """Independent restatement of the two-state energy balance."""
    d_air = ((tw - ta) / cfg.r_aw + u * cfg.q_max * (cfg.t_supply - ta)
             + occ * cfg.q_person) / cfg.c_air
    d_wall = ((t_out - tw) / cfg.r_wo + (ta - tw) / cfg.r_aw) / cfg.c_wall
    return d_air, d_wall


class TestConfigAndState:
    def test_positive_parameters_enforced(self):
        with pytest.raises(VrftLabError):
            ThermalPlantConfig(c_air=-1.0)
        with pytest.raises(VrftLabError):
            ThermalPlantConfig(ts=0.0)

    def test_state_sanity_bounds(self):
        with pytest.raises(StateOutOfRange):
            PlantState(1000.0, 20.0)
        with pytest.raises(StateOutOfRange):
            PlantState(np.nan, 20.0)


class TestSteadyState:
    @pytest.mark.parametrize("u,t_out,occ", [
        (0.0, -3.0, 0.0), (0.5, -10.0, 1.0), (1.0, 5.0, 0.0), (0.25, 0.0, 2.0),
    ])
    def test_derivatives_vanish_at_equilibrium(self, u, t_out, occ):
        st = steady_state(CFG, u, t_out, occ)
        d_air, d_wall = derivs(CFG, st.t_air, st.t_wall, u, t_out, occ)
        assert abs(d_air) < 1e-12
        assert abs(d_wall) < 1e-12

    def test_long_simulation_converges_to_steady_state(self):
        target = steady_state(CFG, 0.7, -5.0, 0.0)
        st = PlantState(15.0, 15.0)
        for _ in range(3000):
            st = step_plant(CFG, st, 0.7, -5.0, 0.0)
        assert st.t_air == pytest.approx(target.t_air, abs=1e-6)
        assert st.t_wall == pytest.approx(target.t_wall, abs=1e-6)

    def test_input_saturated(self):
        assert steady_state(CFG, 5.0, -3.0, 0.0) == steady_state(CFG, 1.0, -3.0, 0.0)


class TestStepPlant:
    def test_matches_matrix_exponential_for_constant_inputs(self):
        # with u held constant the dynamics are linear: x' = A x + b
        u, t_out, occ = 0.6, -4.0, 1.0
        a = np.array([
            [-(1.0 / CFG.r_aw + u * CFG.q_max) / CFG.c_air, 1.0 / (CFG.r_aw * CFG.c_air)],
            [1.0 / (CFG.r_aw * CFG.c_wall), -(1.0 / CFG.r_wo + 1.0 / CFG.r_aw) / CFG.c_wall],
        ])
        b = np.array([
            (u * CFG.q_max * CFG.t_supply + occ * CFG.q_person) / CFG.c_air,
            t_out / (CFG.r_wo * CFG.c_wall),
        ])
        x0 = np.array([16.0, 14.0])
        x_eq = -np.linalg.solve(a, b)
        x_exact = x_eq + expm(a * TS) @ (x0 - x_eq)
        st = step_plant(CFG, PlantState(*x0), u, t_out, occ)
        assert st.t_air == pytest.approx(x_exact[0], abs=1e-9)
        assert st.t_wall == pytest.approx(x_exact[1], abs=1e-9)

    def test_airflow_saturation(self):
        st = PlantState(18.0, 17.0)
        assert step_plant(CFG, st, 7.0, -3.0, 0.0) == step_plant(CFG, st, 1.0, -3.0, 0.0)
        assert step_plant(CFG, st, -2.0, -3.0, 0.0) == step_plant(CFG, st, 0.0, -3.0, 0.0)


class TestExcitation:
    def test_scenarios(self):
        a = scenario_excitation("A", 100, 0)
        b = scenario_excitation("B", 100, 0)
        assert a.mu == b.mu == 0.5
        assert b.sigma > a.sigma
        with pytest.raises(VrftLabError):
            scenario_excitation("C", 100, 0)

    def test_generation_clipped_and_deterministic(self):
        cfg = ExcitationConfig(mu=0.5, sigma=1.0, n=500, seed=3)
        e1 = generate_excitation(cfg, TS)
        e2 = generate_excitation(cfg, TS)
        assert np.array_equal(e1.samples, e2.samples)
        assert np.all((e1.samples >= 0.0) & (e1.samples <= 1.0))

    def test_invalid_config(self):
        with pytest.raises(VrftLabError):
            ExcitationConfig(mu=1.5, sigma=0.1, n=100, seed=0)
        with pytest.raises(VrftLabError):
            ExcitationConfig(mu=0.5, sigma=0.1, n=5, seed=0)


class TestTraces:
    def test_occupancy_is_weekly_binary_schedule(self):
        occ = generate_occupancy(2, seed=4, ts=TS)
        spd = int(round(86400.0 / TS))
        assert len(occ) == 2 * 7 * spd
        assert set(np.unique(occ.samples)) <= {0.0, 1.0}
        # somebody is home overnight and the home is empty mid-morning weekdays
        assert occ.samples[2] == 1.0
        day1_11am = spd + int(round(11 * 3600 / TS))
        assert occ.samples[day1_11am] == 0.0

    def test_weather_deterministic_and_plausible(self):
        w1 = generate_weather(2000, seed=5, ts=TS)
        w2 = generate_weather(2000, seed=5, ts=TS)
        assert np.array_equal(w1.samples, w2.samples)
        assert -3.0 - 3.0 < np.mean(w1.samples) < -3.0 + 3.0

    def test_traces_validation(self):
        with pytest.raises(VrftLabError):
            ExogenousTraces(t_out=SignalSeries(np.zeros(5), TS),
                            occupancy=SignalSeries(np.zeros(6), TS))
        with pytest.raises(VrftLabError):
            ExogenousTraces(t_out=SignalSeries(np.zeros(5), TS),
                            occupancy=SignalSeries([0.0, 1.0, 0.5, 0.0, 0.0], TS))


class TestOpenLoop:
    def test_initial_sample_and_recorded_input(self):
        exc = SignalSeries(np.linspace(-0.5, 1.5, 20), TS)
        traces = constant_traces(20, -3.0)
        init = PlantState(18.0, 17.0)
        ds = run_open_loop(CFG, exc, traces, init)
        assert ds.y.samples[0] == 18.0
        assert np.all((ds.u.samples >= 0.0) & (ds.u.samples <= 1.0))
        assert np.allclose(ds.u.samples, np.clip(exc.samples, 0.0, 1.0))

    def test_strict_causality(self):
        rng = np.random.default_rng(6)
        u = np.clip(rng.normal(0.5, 0.2, 30), 0, 1)
        traces = constant_traces(30, -3.0)
        init = PlantState(18.0, 17.0)
        base = run_open_loop(CFG, SignalSeries(u, TS), traces, init)
        u2 = u.copy()
        u2[10] = 1.0 - u2[10]
        mod = run_open_loop(CFG, SignalSeries(u2, TS), traces, init)
        assert np.array_equal(base.y.samples[:11], mod.y.samples[:11])
        assert not np.allclose(base.y.samples[11:], mod.y.samples[11:])

    def test_short_traces_rejected(self):
        with pytest.raises(LengthTooShort):
            run_open_loop(CFG, SignalSeries(np.full(30, 0.5), TS),
                          constant_traces(10, -3.0), PlantState(18.0, 17.0))


class TestClosedLoop:
    def test_integral_controller_tracks_setpoint(self):
        cp = ControllerParams(np.array([0.08, -0.07, 0.0]), TS)
        traces = constant_traces(1500, -3.0)
        temp = run_closed_loop(CFG, realize_controller(cp), 21.0, traces,
                               PlantState(15.0, 15.0), 1500)
        assert abs(temp.samples[-1] - 21.0) < 0.05

    def test_saturated_input_keeps_state_bounded(self):
        cp = ControllerParams(np.array([50.0, -10.0, 0.0]), TS)
        traces = constant_traces(500, -3.0)
        temp = run_closed_loop(CFG, realize_controller(cp), 21.0, traces,
                               PlantState(15.0, 15.0), 500)
        assert np.all(temp.samples < 30.0)

    def test_horizon_longer_than_traces_rejected(self):
        cp = ControllerParams(np.array([0.1, -0.09, 0.0]), TS)
        with pytest.raises(LengthTooShort):
            run_closed_loop(CFG, realize_controller(cp), 21.0,
                            constant_traces(10, -3.0), PlantState(15.0, 15.0), 20)


class TestWinterTraces:
    def test_default_occupancy_empty(self):
        tr = winter_traces(100, seed=1, ts=TS)
        assert np.all(tr.occupancy.samples == 0.0)

    def test_short_occupancy_rejected(self):
        with pytest.raises(LengthTooShort):
            winter_traces(100, seed=1,
                          occupancy=SignalSeries(np.zeros(50), TS), ts=TS)
