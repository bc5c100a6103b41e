"""Unperturbed separatrix, generating function, and the Melnikov potential.

The homoclinic loop of the uncorrugated system through (q, p) = (1, 0) is

    q_h(t) = 1/sqrt(1+t^2),     p_h(t) = t/(1+t^2),

and the corrugation couples to it through the Melnikov potential

    L(u, theta) = sum_k L_k(nu I0) e^{i k (theta - nu I0 u)},
    L_k = -(pi nu I0 V_k / 4) e^{-|k| nu I0} (|k| + 1/(nu I0)).

Closed forms are the default everywhere; the quadrature path exists solely
as an independent oracle (per-period Gauss-Legendre panels with
integration-by-parts tails, so the e^{-|k| nu I0} smallness is resolved to
near machine absolute accuracy).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fourier import ibp_tail, osc_integral
from .model import CorrugationSeries, DomainError

# Quadrature window: beyond |t| = T the tail is handled by three
# integrations by parts, residual O(T^-7 / omega^4).
_QUAD_T = 300.0


def q_h(u):
    return 1.0 / np.sqrt(1.0 + np.asarray(u, dtype=float) ** 2)


def p_h(u):
    u = np.asarray(u, dtype=float)
    return u / (1.0 + u ** 2)


def gamma0(u: float, theta: float) -> np.ndarray:
    """Unperturbed separatrix parametrization (q_h, p_h, theta, 0)."""
    return np.array([float(q_h(u)), float(p_h(u)), theta, 0.0])


def phi0(u):
    """Generating function of the separatrix: d phi0/du = p_h(u)^2."""
    u = np.asarray(u, dtype=float)
    return -u / (2.0 * (u ** 2 + 1.0)) + 0.5 * np.arctan(u)


def dphi0(u):
    return p_h(u) ** 2


@dataclass(frozen=True)
class SeparatrixPoint:
    u: float

    @property
    def q(self) -> float:
        return float(q_h(self.u))

    @property
    def p(self) -> float:
        return float(p_h(self.u))

    @property
    def phi0(self) -> float:
        return float(phi0(self.u))


@dataclass(frozen=True)
class MelnikovCoefficient:
    k: int
    nu_I0: float
    value: complex
    method: str  # "closed-form" | "quadrature"
    tail_bound: float = 0.0


# kernel q_h^4 and derivatives, used by the quadrature tails
def _kern(t):
    return (1.0 + t * t) ** -2.0


def _kern_d1(t):
    return -4.0 * t * (1.0 + t * t) ** -3.0


def _kern_d2(t):
    return (20.0 * t * t - 4.0) * (1.0 + t * t) ** -4.0


def _kernel_integral(omega: float, T: float = _QUAD_T) -> complex:
    """int_{-inf}^{inf} q_h^4(t) e^{i omega t} dt by panels plus IBP tails."""
    if omega < 0:
        return np.conj(_kernel_integral(-omega, T))
    main = osc_integral(_kern, omega, -T, T)
    if omega == 0.0:
        # exact antiderivative of (1+t^2)^-2 is t/(2(1+t^2)) + arctan(t)/2
        tail = 2.0 * (math.pi / 4.0 - T / (2.0 * (1.0 + T * T)) - 0.5 * math.atan(T))
        return main + tail
    iw = 1j * omega
    tail_pos = np.exp(1j * omega * T) * (-_kern(T) / iw + _kern_d1(T) / iw ** 2
                                         - _kern_d2(T) / iw ** 3)
    return main + tail_pos + np.conj(tail_pos)


def melnikov_coeff_closed(k: int, nu_I0: float,
                          series: CorrugationSeries) -> MelnikovCoefficient:
    """Residue closed form of the Melnikov coefficient L_k."""
    if nu_I0 <= 0:
        raise DomainError("nu_I0 must be positive")
    vk = series.fourier_coeff(k)
    if k == 0 or vk == 0:
        return MelnikovCoefficient(k, nu_I0, 0.0 + 0.0j, "closed-form")
    val = -(math.pi * nu_I0 * vk / 4.0) * math.exp(-abs(k) * nu_I0) * (abs(k) + 1.0 / nu_I0)
    return MelnikovCoefficient(k, nu_I0, val, "closed-form")


def melnikov_coeff_quadrature(k: int, nu_I0: float,
                              series: CorrugationSeries) -> MelnikovCoefficient:
    """Independent oracle: L_k = -(V_k/2) int q_h^4(t) e^{i k nu I0 t} dt."""
    if nu_I0 < 0:
        raise DomainError("nu_I0 must be nonnegative")
    vk = series.fourier_coeff(k)
    if vk == 0:
        return MelnikovCoefficient(k, nu_I0, 0.0 + 0.0j, "quadrature")
    omega = k * nu_I0
    integral = _kernel_integral(omega)
    # crude analytic tail bound int_T^inf t^-4 dt, reported with the value
    tail_bound = abs(vk) * (_QUAD_T ** -3) / 3.0
    val = -0.5 * vk * integral
    coeff = MelnikovCoefficient(k, nu_I0, complex(val), "quadrature", tail_bound)
    if not np.isfinite(val):
        raise RuntimeError(f"quadrature failed for k={k}, nu_I0={nu_I0}: {val}")
    return coeff


def melnikov_potential(u, theta, nu_I0: float, series: CorrugationSeries,
                       k_max: int | None = None):
    """L(u, theta) = sum_k L_k e^{i k (theta - nu I0 u)} from closed forms."""
    km = series.order if k_max is None else k_max
    phase = np.asarray(theta, dtype=float) - nu_I0 * np.asarray(u, dtype=float)
    out = np.zeros_like(phase)
    for k in range(1, km + 1):
        lk = melnikov_coeff_closed(k, nu_I0, series).value
        out = out + 2.0 * np.real(lk * np.exp(1j * k * phase))
    return out if out.ndim else float(out)


def melnikov_dtheta(u, theta, nu_I0: float, series: CorrugationSeries,
                    k_max: int | None = None):
    """d L / d theta, the first-order prediction of the J-splitting."""
    km = series.order if k_max is None else k_max
    phase = np.asarray(theta, dtype=float) - nu_I0 * np.asarray(u, dtype=float)
    out = np.zeros_like(phase)
    for k in range(1, km + 1):
        lk = melnikov_coeff_closed(k, nu_I0, series).value
        out = out + 2.0 * np.real(1j * k * lk * np.exp(1j * k * phase))
    return out if out.ndim else float(out)


def l_out_plus(u: float, theta, nu_I0: float, series: CorrugationSeries) -> np.ndarray | float:
    """Semi-infinite Melnikov layer
    L+_out(u, theta) = -int_{-inf}^u (q_h^4(s)/2) V(theta + nu I0 (s - u)) ds,
    computed mode by mode with the oscillatory panels.
    """
    theta_arr = np.atleast_1d(np.asarray(theta, dtype=float))
    t_lo = -max(_QUAD_T, abs(u) + 50.0)
    out = np.zeros_like(theta_arr)
    for k in range(-series.order, series.order + 1):
        vk = series.fourier_coeff(k)
        if vk == 0:
            continue
        omega = k * nu_I0
        main = osc_integral(_kern, omega, t_lo, u)
        tail = ibp_tail(_kern(t_lo), _kern_d1(t_lo), _kern_d2(t_lo), omega, t_lo)
        mode = -0.5 * vk * (main + tail) * np.exp(-1j * omega * u)
        out = out + np.real(mode * np.exp(1j * k * theta_arr))
    return out if np.ndim(theta) else float(out[0])


def l_out_minus(u: float, theta, nu_I0: float, series: CorrugationSeries):
    """L-_out(u, theta) = -L+_out(-u, -theta)."""
    val = l_out_plus(-u, -np.asarray(theta, dtype=float), nu_I0, series)
    return -val
