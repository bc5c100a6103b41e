import math

import numpy as np
import pytest

from hecu.integrate import (
    IntegratorConfig,
    StepUnderflowError,
    energy_drift,
    integrate,
    integrate_mcgehee,
    mcgehee_rhs,
    section_crossings,
    trajectory_to_csv,
)
from hecu.model import DomainError, params_for_nu_I0, vector_field_mcgehee
from hecu.separatrix import p_h, q_h

TIGHT = IntegratorConfig(rel_tol=1e-12, abs_tol=1e-12)


@pytest.fixture(scope="module")
def params():
    return params_for_nu_I0(6.0)


@pytest.fixture(scope="module")
def params_eps0():
    return params_for_nu_I0(6.0, epsilon=0.0)


def test_config_rejects_loose_tolerances():
    with pytest.raises(DomainError):
        IntegratorConfig(rel_tol=1e-2)
    with pytest.raises(DomainError):
        IntegratorConfig(abs_tol=1e-16)


def test_rhs_matches_reference_field(params):
    rng = np.random.default_rng(0)
    rhs = mcgehee_rhs(params)
    for _ in range(30):
        y = np.array([rng.uniform(0, 1.2), rng.uniform(-1, 1),
                      rng.uniform(0, 7), rng.uniform(-0.3, 0.3)])
        assert np.allclose(rhs(0.0, y), vector_field_mcgehee(y, params),
                           rtol=1e-15, atol=1e-16)


def test_homoclinic_closed_form(params_eps0):
    traj = integrate_mcgehee(params_eps0, [1.0, 0.0, 0.3, 0.0], (0.0, 10.0), TIGHT)
    ts = np.linspace(0.0, 10.0, 400)
    states = traj(ts)
    err_q = np.max(np.abs(states[0] - q_h(ts)))
    err_p = np.max(np.abs(states[1] - p_h(ts)))
    assert max(err_q, err_p) < 1e-9
    back = integrate_mcgehee(params_eps0, [1.0, 0.0, 0.3, 0.0], (0.0, -10.0), TIGHT)
    ts = np.linspace(0.0, -10.0, 400)
    states = back(ts)
    assert np.max(np.abs(states[0] - q_h(ts))) < 1e-9


def test_q_zero_line_invariant(params):
    traj = integrate_mcgehee(params, [0.0, 0.0, 0.1, 0.0], (0.0, 20.0), TIGHT)
    assert np.max(np.abs(traj.y[0])) == 0.0
    # theta advances linearly
    th = traj.y[2]
    expect = 0.1 + params.nu_I0 * traj.t
    assert np.max(np.abs(th - expect)) < 1e-9


def test_forward_backward_roundtrip(params):
    y0 = np.array([0.9, 0.1, 1.0, 0.01])
    fwd = integrate_mcgehee(params, y0, (0.0, 20.0), TIGHT)
    back = integrate_mcgehee(params, fwd.y1, (20.0, 0.0), TIGHT)
    assert np.max(np.abs(back.y1 - y0)) < 1e-10


def test_determinism(params):
    y0 = [0.8, -0.05, 2.0, 0.0]
    t1 = integrate_mcgehee(params, y0, (0.0, 12.0), TIGHT)
    t2 = integrate_mcgehee(params, y0, (0.0, 12.0), TIGHT)
    assert np.array_equal(t1.t, t2.t)
    assert np.array_equal(t1.y, t2.y)


def test_convergence_with_tolerance(params_eps0):
    errs = []
    for tol in (1e-8, 1e-10):
        cfg = IntegratorConfig(rel_tol=tol, abs_tol=tol)
        traj = integrate_mcgehee(params_eps0, [1.0, 0.0, 0.0, 0.0], (0.0, 10.0), cfg)
        ts = np.linspace(0, 10, 200)
        errs.append(np.max(np.abs(traj(ts)[0] - q_h(ts))))
    assert errs[1] * 10 <= errs[0]


def test_section_events_periodic_orbit(params):
    # on the orbit at infinity, theta mod 2pi = 0 crossings are spaced 2pi/(nu I0)
    y0 = [0.0, 0.0, 0.05, 0.0]
    events = section_crossings(
        mcgehee_rhs(params), y0, (0.0, 12.0),
        section=lambda y: math.sin(y[2] / 2.0),  # zero iff theta = 0 mod 2pi
        config=TIGHT, scan_dt=0.05)
    gaps = np.diff([e.t for e in events])
    assert np.allclose(gaps, 2 * math.pi / params.nu_I0, rtol=1e-10)


def test_section_event_p_zero_on_homoclinic(params_eps0):
    events = section_crossings(
        mcgehee_rhs(params_eps0), [q_h(-5.0), p_h(-5.0), 0.0, 0.0], (0.0, 10.0),
        section=lambda y: y[1], config=TIGHT)
    assert len(events) == 1
    assert events[0].t == pytest.approx(5.0, abs=1e-9)


def test_section_event_qhalf_at_sqrt3(params_eps0):
    events = section_crossings(
        mcgehee_rhs(params_eps0), [1.0, 0.0, 0.0, 0.0], (0.0, 5.0),
        section=lambda y: y[0] - 0.5, config=TIGHT)
    assert len(events) == 1
    assert events[0].t == pytest.approx(math.sqrt(3.0), abs=1e-10)
    assert abs(events[0].state[0] - 0.5) < 1e-12


def test_event_direction_filter(params_eps0):
    events = section_crossings(
        mcgehee_rhs(params_eps0), [q_h(-4.0), p_h(-4.0), 0.0, 0.0], (0.0, 8.0),
        section=lambda y: y[0] - 0.5, direction=+1, config=TIGHT)
    assert len(events) == 1
    assert events[0].direction == 1


def test_energy_drift_homoclinic(params_eps0):
    traj = integrate_mcgehee(params_eps0, [1.0, 0.0, 0.0, 0.0], (-50.0, 50.0), TIGHT)
    assert energy_drift(traj, params_eps0) < 1e-10


def test_energy_drift_trivial_orbit(params):
    traj = integrate_mcgehee(params, [0.0, 0.0, 0.4, 0.0], (0.0, 10.0), TIGHT)
    assert energy_drift(traj, params) == 0.0


def test_energy_drift_full_excursion(params):
    traj = integrate_mcgehee(params, [q_h(-3.0), p_h(-3.0), 0.7, 0.0], (0.0, 6.0), TIGHT)
    assert energy_drift(traj, params) < 1e-9


def test_step_underflow_signals(params):
    # forcing a tiny max_step makes scipy bail out through the step check
    with pytest.raises(StepUnderflowError):
        integrate(lambda t, y: [y[1], 1.0 / (1.0 - t), 0.0, 0.0],
                  [0.0, 0.0, 0.0, 0.0], (0.0, 1.0),
                  IntegratorConfig(rel_tol=1e-10, abs_tol=1e-10))


def test_csv_export(params, tmp_path):
    traj = integrate_mcgehee(params, [0.8, 0.0, 0.0, 0.0], (0.0, 1.0), TIGHT)
    path = tmp_path / "traj.csv"
    trajectory_to_csv(traj, params, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,q,p,theta,J,H"
    assert len(lines) == traj.t.size + 1
    row = lines[1].split(",")
    assert len(row) == 6
    assert float(row[1]) == pytest.approx(0.8)
