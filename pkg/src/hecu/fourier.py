"""Fourier-mode containers and oscillatory quadrature primitives.

Two solvers in this package (the Hamilton-Jacobi graph solver and the
inner-equation solver) iterate a fixed point of the form

    Phi <- G(F(Phi)),     G(f)(x) = int_{-infty}^x f(s) e^{i w (s - x)} ds,

mode by Fourier mode in the angle.  The semi-infinite transport G is
evaluated by a cumulative Hermite-Filon rule: on each grid cell the
(slowly varying) source is replaced by its cubic Hermite interpolant,
whose product with e^{iws} integrates in closed form.  Endpoint
derivatives are exact throughout because the transport obeys
d/dx G(f) = f - i w G(f).

The same module provides panel Gauss-Legendre oscillatory quadrature used
by the independent Melnikov oracle.
"""

from __future__ import annotations

import numpy as np

_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


# ---------------------------------------------------------------------------
# oscillatory moments and the Hermite-Filon rule
# ---------------------------------------------------------------------------

def _moments(z: np.ndarray) -> np.ndarray:
    """m_j(z) = int_0^1 s^j e^{z s} ds for j = 0..3, stable in both regimes."""
    z = np.asarray(z, dtype=complex)
    m = np.zeros((4,) + z.shape, dtype=complex)
    small = np.abs(z) < 0.8
    zs = z[small]
    for j in range(4):
        term = np.ones_like(zs) / (j + 1)
        acc = term.copy()
        for n in range(1, 26):
            term = term * zs * (j + n) / (n * (j + n + 1))
            acc += term
        m[j][small] = acc
    zb = z[~small]
    ez = np.exp(zb)
    mj = (ez - 1.0) / zb
    m[0][~small] = mj
    for j in range(1, 4):
        mj = (ez - j * mj) / zb
        m[j][~small] = mj
    return m


def hermite_filon_cells(x: np.ndarray, f: np.ndarray, fp: np.ndarray,
                        omega: float) -> np.ndarray:
    """Per-cell integrals int_{x_j}^{x_{j+1}} H(s) e^{i omega s} ds.

    H is the cubic Hermite interpolant of f with endpoint slopes fp.
    """
    h = np.diff(x)
    z = 1j * omega * h
    m0, m1, m2, m3 = _moments(z)
    a0 = 2 * m3 - 3 * m2 + m0
    a1 = m3 - 2 * m2 + m1
    b0 = -2 * m3 + 3 * m2
    b1 = m3 - m2
    return h * np.exp(1j * omega * x[:-1]) * (
        f[:-1] * a0 + h * fp[:-1] * a1 + f[1:] * b0 + h * fp[1:] * b1)


def transport(x: np.ndarray, f: np.ndarray, fp: np.ndarray, omega: float,
              tail: complex = 0.0) -> np.ndarray:
    """G_j = e^{-i omega x_j} (tail + int_{x_0}^{x_j} f(s) e^{i omega s} ds).

    `tail` supplies int_{-infty}^{x_0} f e^{i omega s} ds.  The result is
    the semi-infinite convolution of the mode against its characteristic.
    """
    cells = hermite_filon_cells(x, f, fp, omega)
    acc = np.empty(len(x), dtype=complex)
    acc[0] = tail
    acc[1:] = tail + np.cumsum(cells)
    return acc * np.exp(-1j * omega * x)


def ibp_tail(f0: complex, fp0: complex, fpp0: complex, omega: float,
             x0: float) -> complex:
    """int_{-infty}^{x0} f e^{i omega s} ds by three integrations by parts.

    Valid for omega != 0 and f decaying with bounded derivatives; the
    neglected remainder is O(f'''(x0)/omega^4).
    """
    iw = 1j * omega
    return np.exp(1j * omega * x0) * (f0 / iw - fp0 / iw ** 2 + fpp0 / iw ** 3)


def powerlaw_tail(f0: float, x0: float, decay: float) -> float:
    """int_{-infty}^{x0} f ds assuming f ~ C |s|^{-decay} beyond the grid."""
    if decay <= 1.0:
        raise ValueError("power-law tail needs decay > 1")
    return f0 * abs(x0) / (decay - 1.0)


# ---------------------------------------------------------------------------
# panel Gauss-Legendre quadrature for oscillatory oracles
# ---------------------------------------------------------------------------

def osc_integral(fun, omega: float, a: float, b: float,
                 panel_cap: float = 1.0) -> complex:
    """int_a^b fun(s) e^{i omega s} ds with per-half-period GL panels.

    Panels never exceed half an oscillation period nor `panel_cap`, so the
    16-point rule resolves both the phase and the envelope.
    """
    if b <= a:
        return 0.0 + 0.0j
    panel = panel_cap if omega == 0 else min(np.pi / abs(omega), panel_cap)
    n = max(1, int(np.ceil((b - a) / panel)))
    edges = np.linspace(a, b, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
    vals = fun(nodes) * np.exp(1j * omega * nodes)
    return complex(np.sum(vals * _GL_W[None, :] * half[:, None]))


# ---------------------------------------------------------------------------
# theta-mode fields on a grid
# ---------------------------------------------------------------------------

class ModeField:
    """Truncated Fourier series in theta with values on a 1-D grid.

    values[m, j] is the coefficient of e^{i k_m theta} at grid node j with
    k_m = m - M running over -M..M.  du stores the exact grid-derivative
    of each coefficient; products propagate it by the Leibniz rule.
    """

    def __init__(self, n_modes: int, x: np.ndarray,
                 values: np.ndarray | None = None,
                 du: np.ndarray | None = None):
        self.M = int(n_modes)
        self.x = x
        shape = (2 * self.M + 1, len(x))
        self.values = np.zeros(shape, dtype=complex) if values is None else values
        self.du = np.zeros(shape, dtype=complex) if du is None else du

    @property
    def ks(self) -> np.ndarray:
        return np.arange(-self.M, self.M + 1)

    def copy(self) -> "ModeField":
        return ModeField(self.M, self.x, self.values.copy(), self.du.copy())

    def coeff(self, k: int) -> np.ndarray:
        return self.values[k + self.M]

    def set_coeff(self, k: int, vals, du) -> None:
        self.values[k + self.M] = vals
        self.du[k + self.M] = du

    def dtheta(self) -> "ModeField":
        ik = 1j * self.ks[:, None]
        return ModeField(self.M, self.x, ik * self.values, ik * self.du)

    def mul(self, other: "ModeField") -> "ModeField":
        """Pointwise product in theta: mode convolution, truncated to |k| <= M."""
        out = ModeField(self.M, self.x)
        M = self.M
        for m in range(-M, M + 1):
            lo = max(-M, m - M)
            hi = min(M, m + M)
            acc_v = np.zeros(len(self.x), dtype=complex)
            acc_d = np.zeros(len(self.x), dtype=complex)
            for j in range(lo, hi + 1):
                a_v = self.values[j + M]
                b_v = other.values[m - j + M]
                acc_v += a_v * b_v
                acc_d += self.du[j + M] * b_v + a_v * other.du[m - j + M]
            out.values[m + M] = acc_v
            out.du[m + M] = acc_d
        return out

    def scale_profile(self, prof: np.ndarray, dprof: np.ndarray) -> "ModeField":
        """Multiply every mode by a theta-independent grid profile."""
        return ModeField(self.M, self.x,
                         self.values * prof[None, :],
                         self.du * prof[None, :] + self.values * dprof[None, :])

    def axpy(self, alpha: complex, other: "ModeField") -> "ModeField":
        return ModeField(self.M, self.x,
                         self.values + alpha * other.values,
                         self.du + alpha * other.du)

    def sup_norm(self) -> float:
        """sup over grid and theta of |sum_k c_k e^{ik theta}| (triangle bound)."""
        return float(np.max(np.sum(np.abs(self.values), axis=0)))

    def eval_theta(self, j: int, thetas: np.ndarray) -> np.ndarray:
        """Evaluate the series at grid index j for an array of angles."""
        phases = np.exp(1j * np.outer(self.ks, thetas))
        return np.real(np.tensordot(self.values[:, j], phases, axes=(0, 0)))

    def interp_coeff(self, k: int, u: float) -> tuple[complex, complex]:
        """Cubic Hermite evaluation of (coefficient, d/du coefficient) at u."""
        x = self.x
        j = int(np.searchsorted(x, u)) - 1
        j = min(max(j, 0), len(x) - 2)
        h = x[j + 1] - x[j]
        s = (u - x[j]) / h
        f0 = self.values[k + self.M, j]
        f1 = self.values[k + self.M, j + 1]
        d0 = self.du[k + self.M, j]
        d1 = self.du[k + self.M, j + 1]
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        val = h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1
        dh00 = (6 * s ** 2 - 6 * s) / h
        dh10 = (3 * s ** 2 - 4 * s + 1)
        dh01 = (-6 * s ** 2 + 6 * s) / h
        dh11 = (3 * s ** 2 - 2 * s)
        dval = dh00 * f0 + dh10 * d0 + dh01 * f1 + dh11 * d1
        return complex(val), complex(dval)


def geometric_grid(x_end: float, h0: float, near_span: float,
                   x_far: float, growth: float = 1.04) -> np.ndarray:
    """Grid ending at x_end: uniform spacing h0 over near_span, geometric beyond."""
    near = np.arange(x_end, x_end - near_span - 1e-12, -h0)[::-1]
    pts = [near[0]]
    h = h0
    while pts[-1] > x_far:
        h *= growth
        pts.append(pts[-1] - h)
    far = np.array(pts[::-1])
    return np.concatenate([far[:-1], near])


def modes_to_values(coeffs: np.ndarray, thetas: np.ndarray) -> np.ndarray:
    """Evaluate sum_k c_k e^{i k theta} (k = -M..M) on an angle grid."""
    M = (len(coeffs) - 1) // 2
    ks = np.arange(-M, M + 1)
    return np.real(np.exp(1j * np.outer(thetas, ks)) @ coeffs)


def values_to_modes(values: np.ndarray, M: int) -> np.ndarray:
    """Coefficients c_k, k = -M..M, of samples on a uniform theta grid."""
    n = len(values)
    c = np.fft.fft(values) / n
    out = np.zeros(2 * M + 1, dtype=complex)
    for k in range(-M, M + 1):
        out[k + M] = c[k % n]
    return out
