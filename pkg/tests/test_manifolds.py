import math

import numpy as np
import pytest

from hecu.integrate import IntegratorConfig
from hecu.manifolds import (
    NonContractionError,
    RootCountError,
    SignalBelowNoiseError,
    delta_field_on_grid,
    find_homoclinics,
    fit_scaling,
    measure_splitting,
    solve_hj_unstable,
    splitting_sweep,
    stable_sheet_direct,
    stable_sheet_from_unstable,
    unstable_initial_conditions,
    unstable_sheet,
)
from hecu.model import DomainError, hamiltonian_mcgehee, params_for_nu_I0
from hecu.separatrix import l_out_plus, melnikov_coeff_closed, p_h, q_h

SER_PARAMS = params_for_nu_I0(4.0, epsilon=1e-4)


@pytest.fixture(scope="module")
def graph():
    return solve_hj_unstable(SER_PARAMS)


@pytest.fixture(scope="module")
def sheets():
    sheet = unstable_sheet(SER_PARAMS, [0.5, 1.0, 1.5], n_theta=64)
    return sheet, stable_sheet_from_unstable(sheet)


def test_hj_eps0_is_zero():
    g = solve_hj_unstable(params_for_nu_I0(6.0, epsilon=0.0))
    assert g.iterations == 1
    assert g.phi1.sup_norm() == 0.0


def test_hj_first_iterate_is_l_out(graph):
    # for small eps the converged graph equals eps * L+_out to second order
    thetas = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    for u0 in (-3.0, -1.0):
        vals = graph.phi1_at(u0, thetas)
        lout = SER_PARAMS.epsilon * np.array(
            [l_out_plus(u0, th, SER_PARAMS.nu_I0, SER_PARAMS.series) for th in thetas])
        assert np.max(np.abs(vals - lout)) <= 1e-6 * np.max(np.abs(lout))


def test_hj_residual_below_tol(graph):
    assert graph.residual <= 1e-11


def test_hj_rejects_u_max_near_zero():
    with pytest.raises(DomainError):
        solve_hj_unstable(SER_PARAMS, u_max=-0.05)


def test_hj_derivative_consistency(graph):
    # stored d/du of Phi1 modes agrees with finite differences of the values
    M = graph.phi1.M
    x = graph.u
    j = len(x) - 300
    for k in (0, 1, 2):
        fd = (graph.phi1.values[k + M, j + 1] - graph.phi1.values[k + M, j - 1]) \
            / (x[j + 1] - x[j - 1])
        stored = graph.phi1.du[k + M, j]
        scale = float(np.max(np.abs(graph.phi1.du[k + M])))
        # central differences carry O(h^2 (nu I0)^2) truncation on the
        # oscillatory modes; this only guards against bookkeeping errors
        assert abs(fd - stored) <= 5e-3 * scale + 1e-14


def test_seeds_on_energy_level(graph):
    thetas = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    seeds = unstable_initial_conditions(graph, -3.0, thetas)
    for s in seeds:
        h = hamiltonian_mcgehee(s, SER_PARAMS)
        assert abs(h - SER_PARAMS.energy) < 1e-12


def test_seeds_reduce_to_gamma0_at_eps0():
    g = solve_hj_unstable(params_for_nu_I0(6.0, epsilon=0.0))
    seeds = unstable_initial_conditions(g, -2.5, np.array([0.3]))
    assert seeds[0][0] == pytest.approx(q_h(-2.5), rel=1e-14)
    assert seeds[0][1] == pytest.approx(p_h(-2.5), rel=1e-12)
    assert seeds[0][3] == 0.0


def test_graph_approaches_gamma0_in_nu_I0():
    # sup deviation of the graph from the separatrix decays ~ 1/(nu I0)
    devs = {}
    for nu_I0 in (8.0, 16.0):
        g = solve_hj_unstable(params_for_nu_I0(nu_I0, epsilon=1.0))
        thetas = np.linspace(0, 2 * math.pi, 16, endpoint=False)
        P, J = g.derivatives_at(-1.0, thetas)
        dev = np.max(np.abs(P - float(p_h(-1.0)) ** 2)) + np.max(np.abs(J))
        devs[nu_I0] = dev
    assert devs[8.0] <= 2.0 * devs[16.0] * 2.0


def test_globalize_eps0_arrives_on_separatrix():
    params = params_for_nu_I0(5.0, epsilon=0.0)
    sheet = unstable_sheet(params, [0.7, 1.2], n_theta=8)
    for u in (0.7, 1.2, -0.7, -1.2):
        lv = sheet.levels[u]
        assert np.max(np.abs(lv.P - float(p_h(u)) ** 2)) < 1e-10
        assert np.max(np.abs(lv.J)) < 1e-10


def test_globalize_energy_conservation(sheets):
    sheet, _ = sheets
    for lv in sheet.levels.values():
        assert np.max(lv.energy_defect) < 1e-9 * SER_PARAMS.energy


def test_stable_sheet_reversor_vs_direct(sheets):
    # the S-constructed stable sheet matches direct backward integration
    sheet, stable = sheets
    direct = stable_sheet_direct(SER_PARAMS, [1.0], n_theta=32)
    for k in (0, 1, 2):
        a = stable.level(1.0).mode("J", k)
        b = direct.level(1.0).mode("J", k)
        assert abs(a - b) < 1e-9
        a = stable.level(1.0).mode("P", k)
        b = direct.level(1.0).mode("P", k)
        assert abs(a - b) < 1e-9


def test_splitting_matches_melnikov(sheets):
    sheet, stable = sheets
    s = measure_splitting(sheet, stable, 1.0, 1)
    pred = 2 * SER_PARAMS.epsilon * abs(
        melnikov_coeff_closed(1, SER_PARAMS.nu_I0, SER_PARAMS.series).value)
    assert abs(s.amp_J - pred) / pred < 0.03
    assert s.amp_P == pytest.approx(SER_PARAMS.nu_I0 * s.amp_J, rel=1e-3)


def test_splitting_eps0_below_noise():
    params = params_for_nu_I0(4.0, epsilon=0.0)
    sheet = unstable_sheet(params, [1.0], n_theta=8)
    stable = stable_sheet_from_unstable(sheet)
    with pytest.raises(SignalBelowNoiseError):
        measure_splitting(sheet, stable, 1.0, 1)


def test_homoclinic_roots(sheets):
    sheet, stable = sheets
    roots = find_homoclinics(sheet, stable, 1.0)
    assert len(roots) == 2
    base = SER_PARAMS.nu_I0 * 1.0 % (2 * math.pi)
    expected = sorted([base % (2 * math.pi), (base + math.pi) % (2 * math.pi)])
    for (th, slope), want in zip(roots, expected):
        assert abs(th - want) <= 2.0 / SER_PARAMS.nu_I0
    assert roots[0][1] * roots[1][1] < 0  # opposite transversality signs


def test_homoclinic_roots_stable_under_refinement(sheets):
    sheet, stable = sheets
    r1 = find_homoclinics(sheet, stable, 1.0, n_scan=360)
    r2 = find_homoclinics(sheet, stable, 1.0, n_scan=1440)
    for (a, _), (b, _) in zip(r1, r2):
        assert abs(a - b) < 1e-6


def test_delta_j_rides_characteristics(sheets):
    # Delta J depends on (u, theta) through theta - nu I0 u: the harmonic
    # in the theta' frame is u-independent
    sheet, stable = sheets
    gammas = []
    for u in (0.5, 1.0, 1.5):
        s = measure_splitting(sheet, stable, u, 1)
        gammas.append(s.amp_J * np.exp(1j * s.phase_J))
    spread = max(abs(g - gammas[0]) for g in gammas)
    assert spread <= 0.2 * abs(gammas[0])


def test_gradient_consistency_dp_vs_dphi():
    # d_u of Delta Phi (reconstructed from Delta J modes) reproduces Delta P
    params = params_for_nu_I0(4.0, epsilon=1e-4)
    h = 0.05
    sheet = unstable_sheet(params, [1.0 - h, 1.0, 1.0 + h], n_theta=32)
    stable = stable_sheet_from_unstable(sheet)

    def dphi_mode(u):
        lv_p, lv_m = sheet.level(u), stable.level(u)
        dj = lv_p.mode("J", 1) - lv_m.mode("J", 1)
        return dj / 1j  # Delta Phi_1 = Delta J_1 / (i k), k = 1

    fd = (dphi_mode(1.0 + h) - dphi_mode(1.0 - h)) / (2 * h)
    lv_p, lv_m = sheet.level(1.0), stable.level(1.0)
    dp = lv_p.mode("P", 1) - lv_m.mode("P", 1)
    # central difference of e^{-i nu I0 u} carries sinc(nu I0 h)
    sinc = math.sin(params.nu_I0 * h) / (params.nu_I0 * h)
    assert abs(fd / sinc - dp) <= 0.05 * abs(dp)


def test_fit_scaling_exponential_law():
    samples = splitting_sweep([4.0, 5.0, 6.0, 7.0], epsilon=1e-4)
    fit = fit_scaling(samples, basis="nu_plus_one")
    assert abs(fit.rho - 1.0) <= 0.02
    assert abs(fit.sigma - 1.0) <= 0.15
    lit = fit_scaling(samples, basis="nu")
    # literal nu-basis absorbs the 1/(nu I0) correction into sigma
    assert lit.sigma < 0.85


def test_fit_scaling_needs_four_samples():
    samples = splitting_sweep([4.0, 5.0], epsilon=1e-4)
    with pytest.raises(DomainError):
        fit_scaling(samples + samples[:1])


def test_epsilon_linearity():
    a1 = splitting_sweep([5.0], epsilon=1e-4)[0].amp_J
    a2 = splitting_sweep([5.0], epsilon=2e-4)[0].amp_J
    assert abs(a2 / a1 - 2.0) <= 1e-3


def test_sweep_rejects_unreliable_nu_I0():
    with pytest.raises(DomainError):
        splitting_sweep([15.0], epsilon=1e-3)
