import numpy as np
import pytest

from hecu.fourier import (
    ModeField,
    geometric_grid,
    ibp_tail,
    modes_to_values,
    osc_integral,
    powerlaw_tail,
    transport,
    values_to_modes,
)


def kern(s):
    return (1.0 + s * s) ** -2.0


def kern_d1(s):
    return -4.0 * s * (1.0 + s * s) ** -3.0


def kern_d2(s):
    return (20.0 * s * s - 4.0) * (1.0 + s * s) ** -4.0


@pytest.mark.parametrize("omega", [1.0, 2.0, 3.0, 5.0, 8.0, 10.0])
def test_residue_identity(omega):
    # int e^{i w t} / (1+t^2)^2 dt = (pi/2) e^{-w} (1 + w)
    T = 300.0
    main = osc_integral(kern, omega, -T, T)
    tm = ibp_tail(kern(-T), kern_d1(-T), kern_d2(-T), omega, -T)
    # upper tail by t -> -t symmetry of the even real kernel
    tp = np.conj(tm)
    total = main + tp + tm
    exact = (np.pi / 2.0) * np.exp(-omega) * (1.0 + omega)
    assert abs(total - exact) / exact < 1e-9


def test_transport_against_panel_quadrature():
    omega = 5.0
    x = geometric_grid(-0.2, h0=0.005, near_span=10.0, x_far=-2e4)
    G = transport(x, kern(x), kern_d1(x), omega,
                  tail=ibp_tail(kern(x[0]), kern_d1(x[0]), kern_d2(x[0]), omega, x[0]))
    for u in (-3.0, -1.0, -0.2):
        j = int(np.argmin(np.abs(x - u)))
        ref = osc_integral(kern, omega, -4e4, x[j]) * np.exp(-1j * omega * x[j])
        assert abs(G[j] - ref) < 1e-11


def test_transport_zero_frequency():
    x = geometric_grid(0.0, h0=0.005, near_span=10.0, x_far=-2e4)
    G = transport(x, kern(x), kern_d1(x), 0.0,
                  tail=powerlaw_tail(kern(x[0]), x[0], 4.0))
    # int_{-inf}^0 (1+s^2)^-2 ds = pi/4
    assert G[-1].real == pytest.approx(np.pi / 4.0, abs=1e-10)
    assert abs(G[-1].imag) == 0.0


def test_transport_derivative_identity():
    # d/dx G = f - i w G, checked by finite differences of the transported values
    omega = 3.0
    x = geometric_grid(-0.5, h0=0.002, near_span=6.0, x_far=-1e4)
    f = kern(x)
    G = transport(x, f, kern_d1(x), omega,
                  tail=ibp_tail(kern(x[0]), kern_d1(x[0]), kern_d2(x[0]), omega, x[0]))
    j = len(x) - 200
    h = x[j + 1] - x[j]
    fd = (G[j + 1] - G[j - 1]) / (x[j + 1] - x[j - 1])
    ana = f[j] - 1j * omega * G[j]
    assert abs(fd - ana) < 5e-5 * max(1.0, abs(ana))


def test_mode_field_product_matches_pointwise():
    x = np.linspace(-1.0, 0.0, 11)
    M = 4
    rng = np.random.default_rng(1)

    def rand_field():
        f = ModeField(M, x)
        for k in range(-2, 3):
            vals = rng.normal(size=len(x)) + 1j * rng.normal(size=len(x))
            f.set_coeff(k, vals, np.zeros_like(vals))
        # make it real: c_{-k} = conj(c_k)
        for k in range(1, M + 1):
            f.values[-k + M] = np.conj(f.values[k + M])
        f.values[M] = f.values[M].real
        return f

    A, B = rand_field(), rand_field()
    C = A.mul(B)
    thetas = np.linspace(0, 2 * np.pi, 7)
    for j in (0, 5, 10):
        a = A.eval_theta(j, thetas)
        b = B.eval_theta(j, thetas)
        c = C.eval_theta(j, thetas)
        assert np.allclose(c, a * b, atol=1e-12)


def test_mode_field_dtheta():
    x = np.linspace(-1.0, 0.0, 5)
    f = ModeField(3, x)
    f.set_coeff(2, np.ones(len(x)), np.zeros(len(x)))
    g = f.dtheta()
    assert np.allclose(g.coeff(2), 2j * np.ones(len(x)))


def test_modes_values_roundtrip():
    M = 5
    rng = np.random.default_rng(2)
    c = rng.normal(size=2 * M + 1) + 1j * rng.normal(size=2 * M + 1)
    for k in range(1, M + 1):
        c[-k + M] = np.conj(c[k + M])
    c[M] = c[M].real
    thetas = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    vals = modes_to_values(c, thetas)
    c2 = values_to_modes(vals, M)
    assert np.allclose(c, c2, atol=1e-12)


def test_interp_coeff_hermite():
    x = np.linspace(-2.0, 0.0, 41)
    f = ModeField(1, x)
    f.set_coeff(0, np.sin(x), np.cos(x))
    val, dval = f.interp_coeff(0, -1.2345)
    # cubic Hermite on h = 0.05: value error O(h^4), slope error O(h^3)
    assert val == pytest.approx(np.sin(-1.2345), abs=5e-8)
    assert dval == pytest.approx(np.cos(-1.2345), abs=1e-5)
