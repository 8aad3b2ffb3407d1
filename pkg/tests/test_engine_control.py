import pytest

from dsmc.adaptation import AdaptConfig, AdaptMode, LoopEstimator
from dsmc.errors import ConfigurationError, TrajectoryError
from engine.control import (
    EngineController,
    EngineTargets,
    LoopConfig,
    LoopId,
    airflow_control,
    build_estimator,
    desired_fuel_flow,
    fuel_control,
    speed_control,
    texh_control,
    to_physical,
    true_drift_error,
)
from engine.plant import (
    NO_INJECTION,
    EngineParams,
    InjectionMode,
    PlantState,
    UncertaintyInjection,
    cylinder_air_flow,
    step,
    torque_loss,
)

P = EngineParams()
T = 0.02
FREE = LoopConfig(rho=0.5, actuator_limits=None)
NOMINAL = LoopEstimator.build(AdaptConfig())


def controller(loops=None, estimators=None, params=P):
    loops = loops or {loop: FREE for loop in LoopId}
    return EngineController(params, T, loops, estimators or {}, channels={})


def close(a, b, *scale):
    return a == pytest.approx(b, abs=1e-9 * max(1.0, abs(a), abs(b), *map(abs, scale)))


def test_desired_fuel_flow():
    assert desired_fuel_flow(0.0147, 14.7) == pytest.approx(0.001)
    for afr in (0.0, -1.0):
        with pytest.raises(TrajectoryError):
            desired_fuel_flow(0.0147, afr)


def test_fuel_control_reaches_next_afr_target():
    measured = PlantState(t_exh=780.0, mdot_f=0.001, omega_e=125.0, m_a=0.005)
    mdot_ao = cylinder_air_flow(measured.m_a, measured.omega_e, P)
    on_target = PlantState(780.0, mdot_ao / 14.7, 125.0, 0.005)
    d = fuel_control(on_target, (14.7, 14.7), FREE, NOMINAL, 0.0, P, T)
    assert close(d.s, 0.0, on_target.mdot_f)
    assert d.u == pytest.approx(on_target.mdot_f, rel=1e-9)

    d = fuel_control(measured, (14.7, 14.0), FREE, NOMINAL, 0.0, P, T)
    x_next = measured.mdot_f + T * (d.u - measured.mdot_f) / P.tau_f
    expected = 0.5 * (measured.mdot_f - mdot_ao / 14.7)
    assert x_next - mdot_ao / 14.0 == pytest.approx(expected, rel=1e-7, abs=1e-15)


def test_texh_on_target_holds_fixed_point():
    measured = PlantState(t_exh=780.0, mdot_f=0.001, omega_e=125.0, m_a=0.005)
    d = texh_control(measured, (780.0, 780.0), FREE, NOMINAL, 0.0, P, T)
    assert d.s == 0.0
    assert d.u == pytest.approx((780.0 - 600.0) / 7.5)


def test_speed_control_steady_states():
    stopped = PlantState(700.0, 0.001, 0.0, 0.0)
    d = speed_control(stopped, (0.0, 0.0), FREE, NOMINAL, 0.0, P, T)
    assert d.u == pytest.approx(100.0 / 30000.0)

    running = PlantState(700.0, 0.001, 125.0, 0.005)
    d = speed_control(running, (125.0, 125.0), FREE, NOMINAL, 0.0, P, T)
    assert d.u == pytest.approx(torque_loss(125.0) / 30000.0)


def test_airflow_balances_outflow_on_target():
    measured = PlantState(700.0, 0.001, 125.0, 0.005)
    d = airflow_control(measured, 0.005, FREE, NOMINAL, 0.0, P, T)
    assert d.u == pytest.approx(cylinder_air_flow(0.005, 125.0, P))


def test_airflow_negative_command_saturates_at_zero():
    measured = PlantState(700.0, 0.001, 125.0, 0.01)
    limited = LoopConfig(rho=0.5, actuator_limits=(0.0, 0.1))
    d = airflow_control(measured, 0.0, limited, NOMINAL, 0.0, P, T)
    assert d.u == 0.0
    assert d.saturated


def test_multiplicative_unit_estimate_matches_additive_zero():
    measured = PlantState(t_exh=731.0, mdot_f=0.0013, omega_e=118.0, m_a=0.0047)
    mult = LoopEstimator.build(AdaptConfig(AdaptMode.MULTIPLICATIVE, gain=1.0, initial=1.0, frozen=True))
    add = LoopEstimator.build(AdaptConfig(AdaptMode.ADDITIVE, gain=1.0, initial=0.0, frozen=True))
    a = texh_control(measured, (760.0, 765.0), FREE, mult, 0.0, P, T)
    b = texh_control(measured, (760.0, 765.0), FREE, add, 0.0, P, T)
    assert a.u == b.u


def test_nominal_loops_follow_reaching_law_simultaneously():
    state = PlantState(t_exh=780.0, mdot_f=0.0011, omega_e=120.0, m_a=0.0052)
    targets = EngineTargets(t_exh=(800.0, 805.0), omega_e=(125.0, 126.0), afr=(14.7, 14.5))
    ctrl = controller()
    out = ctrl.step_all(state, targets)
    nxt = step(state, out.inputs(), NO_INJECTION, P, T)
    d = out.decisions

    assert close(nxt.t_exh - 805.0, 0.5 * (780.0 - 800.0), nxt.t_exh)
    fuel = d[LoopId.FUEL]
    assert close(nxt.mdot_f - fuel.x_d_next, 0.5 * fuel.s)
    m_ad = d[LoopId.SPEED].u
    assert d[LoopId.AIR].x_d == m_ad
    assert close(nxt.m_a - m_ad, 0.5 * (state.m_a - m_ad))
    cascade = T * (P.torque_gain / P.inertia_j) * (state.m_a - m_ad)
    assert close(nxt.omega_e - 126.0, 0.5 * (120.0 - 125.0) + cascade, nxt.omega_e, cascade)


def test_controller_on_target_commands_equilibrium():
    state = PlantState(t_exh=800.0, mdot_f=0.0, omega_e=125.0, m_a=torque_loss(125.0) / 30000.0)
    mdot_ao = cylinder_air_flow(state.m_a, state.omega_e, P)
    state = PlantState(800.0, mdot_ao / 14.7, state.omega_e, state.m_a)
    out = controller().step_all(state, EngineTargets((800.0, 800.0), (125.0, 125.0), (14.7, 14.7)))
    assert out.delta_spark == pytest.approx(200.0 / 7.5)
    assert out.mdot_fc == pytest.approx(state.mdot_f)
    assert out.m_a_desired == pytest.approx(state.m_a)
    assert out.mdot_ai == pytest.approx(mdot_ao)
    assert all(mu == 0.0 for mu in out.mu_u.values())


def test_estimates_update_after_controls():
    est = {LoopId.TEXH: LoopEstimator.build(AdaptConfig(AdaptMode.ADDITIVE, gain=0.02))}
    ctrl = controller(estimators=est)
    state = PlantState(780.0, 0.0011, 125.0, 0.005)
    out = ctrl.step_all(state, EngineTargets((800.0, 800.0), (125.0, 125.0), (14.7, 14.7)))
    assert out.decisions[LoopId.TEXH].estimate == 0.0
    assert ctrl.estimators[LoopId.TEXH].estimate == pytest.approx(T * (780.0 - 800.0) / 0.02)


def test_trajectory_error_propagates_from_fuel_loop():
    ctrl = controller()
    state = PlantState(780.0, 0.0011, 125.0, 0.005)
    with pytest.raises(TrajectoryError):
        ctrl.step_all(state, EngineTargets((800.0, 800.0), (125.0, 125.0), (0.0, 14.7)))


def test_loop_failures_carry_loop_identity():
    ctrl = controller(params=EngineParams(afi_value=0.0))
    state = PlantState(780.0, 0.0011, 125.0, 0.005)
    with pytest.raises(ConfigurationError) as info:
        ctrl.step_all(state, EngineTargets((800.0, 800.0), (125.0, 125.0), (14.7, 14.7)))
    assert "loop: texh" in info.value.__notes__


def test_controller_requires_all_loops():
    with pytest.raises(ConfigurationError, match="missing"):
        EngineController(P, T, {LoopId.TEXH: FREE}, {}, {})


def test_physical_errors_convert_to_drift_units():
    inj = UncertaintyInjection(alpha_texh=50.0, texh_mode=InjectionMode.ADDITIVE)
    cfg = LoopConfig(adapt=AdaptConfig(AdaptMode.ADDITIVE, gain=0.02, initial=10.0, bound=100.0))
    est = build_estimator(LoopId.TEXH, cfg, inj, P)
    assert est.true_value == pytest.approx(50.0 / P.tau_e)
    assert est.estimate == pytest.approx(10.0 / P.tau_e)
    assert est.config.bound == pytest.approx(100.0 / P.tau_e)
    assert to_physical(LoopId.TEXH, AdaptMode.ADDITIVE, est.true_value, P) == pytest.approx(50.0)

    fuel = build_estimator(
        LoopId.FUEL,
        LoopConfig(adapt=AdaptConfig(AdaptMode.ADDITIVE, gain=0.02, bound=1e-3)),
        UncertaintyInjection(alpha_mdotf=1e-4, fuel_mode=InjectionMode.ADDITIVE),
        P,
    )
    assert fuel.true_value == pytest.approx(-1e-4 / P.tau_f)
    assert fuel.config.bound > 0


def test_true_value_unknown_when_modes_differ():
    inj = UncertaintyInjection(beta_texh=1.2, texh_mode=InjectionMode.MULTIPLICATIVE)
    assert true_drift_error(LoopId.TEXH, AdaptMode.ADDITIVE, inj, P) is None
    assert true_drift_error(LoopId.TEXH, AdaptMode.MULTIPLICATIVE, inj, P) == 1.2
    assert true_drift_error(LoopId.FUEL, AdaptMode.MULTIPLICATIVE, inj, P) == 1.0
    assert true_drift_error(LoopId.SPEED, AdaptMode.NONE, inj, P) is None
