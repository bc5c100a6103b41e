"""Scattering model: potentials, coordinate systems, Hamiltonians, vector fields.

Everything downstream consumes this module.  The dynamics run in the
dimensionless rescaled system (regularized height q with q^2 ~ e^{-alpha z},
angle theta, action offset J); the Cartesian layer is a thin demonstration
layer in user units (energy meV, length angstrom, mass amu).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, replace

import numpy as np

# Experimentally fitted surface parameters (He on Cu).  The mass default is an
# implementation choice for the Cartesian demo layer.
DEFAULT_D = 6.35        # well depth, meV
DEFAULT_A = 3.6         # lattice period, angstrom
DEFAULT_ALPHA = 1.05    # Morse range, 1/angstrom
DEFAULT_MASS = 4.002602  # He mass, amu

DEFAULT_R_COEFFS = (0.06, 0.008)


class DomainError(ValueError):
    """Raised when an input lies outside an operation's domain."""


@dataclass(frozen=True)
class CorrugationSeries:
    """Finite trigonometric corrugation profile.

    V(theta) = sum_{n>=1} r_n cos(n theta) + s_n sin(n theta).

    The complex Fourier convention is fixed so that V^[k] = r_|k|/2 for an
    even series (all s_n = 0).  V has zero average by construction.
    """

    cos_coeffs: tuple[float, ...] = DEFAULT_R_COEFFS
    sin_coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        cos_c = tuple(float(c) for c in self.cos_coeffs)
        n = max(len(cos_c), len(self.sin_coeffs), 1)
        sin_c = tuple(float(c) for c in self.sin_coeffs) + (0.0,) * (n - len(self.sin_coeffs))
        cos_c = cos_c + (0.0,) * (n - len(cos_c))
        object.__setattr__(self, "cos_coeffs", cos_c)
        object.__setattr__(self, "sin_coeffs", sin_c)
        if not all(math.isfinite(c) for c in cos_c + sin_c):
            raise DomainError("corrugation coefficients must be finite")

    @property
    def order(self) -> int:
        return len(self.cos_coeffs)

    @property
    def even(self) -> bool:
        return all(s == 0.0 for s in self.sin_coeffs)

    def value(self, theta):
        """V(theta); accepts scalars or arrays."""
        if np.ndim(theta):
            theta = np.asarray(theta, dtype=float)
            out = np.zeros_like(theta)
            for n, (r, s) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
                if r != 0.0:
                    out += r * np.cos(n * theta)
                if s != 0.0:
                    out += s * np.sin(n * theta)
            return out
        out = 0.0
        for n, (r, s) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            if r != 0.0:
                out += r * math.cos(n * theta)
            if s != 0.0:
                out += s * math.sin(n * theta)
        return out

    def slope(self, theta):
        """V'(theta)."""
        if np.ndim(theta):
            theta = np.asarray(theta, dtype=float)
            out = np.zeros_like(theta)
            for n, (r, s) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
                if r != 0.0:
                    out -= n * r * np.sin(n * theta)
                if s != 0.0:
                    out += n * s * np.cos(n * theta)
            return out
        out = 0.0
        for n, (r, s) in enumerate(zip(self.cos_coeffs, self.sin_coeffs), start=1):
            if r != 0.0:
                out -= n * r * math.sin(n * theta)
            if s != 0.0:
                out += n * s * math.cos(n * theta)
        return out

    def fourier_coeff(self, k: int) -> complex:
        """Complex coefficient V^[k] of e^{i k theta}; zero for k=0 or |k| > order."""
        k = int(k)
        if k == 0 or abs(k) > self.order:
            return 0.0 + 0.0j
        r = self.cos_coeffs[abs(k) - 1]
        s = self.sin_coeffs[abs(k) - 1]
        if k > 0:
            return complex(r / 2.0, -s / 2.0)
        return complex(r / 2.0, s / 2.0)

    def scaled(self, factor: float) -> "CorrugationSeries":
        return CorrugationSeries(
            tuple(factor * r for r in self.cos_coeffs),
            tuple(factor * s for s in self.sin_coeffs),
        )


def physical_corrugation() -> CorrugationSeries:
    """The experimentally fitted profile r1 = 0.06, r2 = 0.008."""
    return CorrugationSeries(DEFAULT_R_COEFFS, ())


@dataclass(frozen=True)
class PhysicalParams:
    """Surface/projectile parameters in laboratory units."""

    D: float = DEFAULT_D
    a: float = DEFAULT_A
    alpha: float = DEFAULT_ALPHA
    m: float = DEFAULT_MASS
    corrugation: CorrugationSeries = field(default_factory=physical_corrugation)

    def __post_init__(self):
        if not (self.D > 0 and self.a > 0 and self.alpha > 0 and self.m > 0):
            raise DomainError("D, a, alpha, m must all be positive")

    # Transform constants between Cartesian and regularized variables.
    @property
    def C(self) -> float:
        return math.sqrt(2.0 * self.m * self.D) * (8.0 * math.pi / (self.a * self.alpha))

    @property
    def B(self) -> float:
        return self.a * self.alpha * self.C / (4.0 * math.pi)

    @property
    def time_rescale(self) -> float:
        """Factor lam with (d/dt_physical) = lam * (d/dt_rescaled) on pushforward."""
        return self.alpha * math.sqrt(2.0 * self.D / self.m)


def nu_from_physical(a: float, alpha: float) -> float:
    """Frequency-squared parameter nu = (4 pi / (a alpha))^2."""
    if a <= 0 or alpha <= 0:
        raise DomainError("a and alpha must be positive")
    return (4.0 * math.pi / (a * alpha)) ** 2


@dataclass(frozen=True)
class ModelParams:
    """All model parameters for the rescaled dynamics.

    nu is stored redundantly and validated against the physical fields;
    epsilon multiplies the corrugation part H1 of the Hamiltonian
    (epsilon = 1 is the physical corrugation).
    """

    physical: PhysicalParams
    nu: float
    I0: float
    epsilon: float = 1.0

    def __post_init__(self):
        nu_check = nu_from_physical(self.physical.a, self.physical.alpha)
        if abs(self.nu - nu_check) > 1e-12 * abs(nu_check):
            raise DomainError(
                f"stored nu={self.nu!r} inconsistent with physical fields ({nu_check!r})"
            )
        if not self.nu * self.I0 > 0:
            raise DomainError("nu * I0 must be positive")

    @property
    def nu_I0(self) -> float:
        return self.nu * self.I0

    @property
    def series(self) -> CorrugationSeries:
        return self.physical.corrugation

    @property
    def energy(self) -> float:
        """Energy level nu I0^2 / 2 of the orbit at infinity."""
        return 0.5 * self.nu * self.I0 ** 2

    def with_nu_I0(self, nu_I0: float) -> "ModelParams":
        return replace(self, I0=nu_I0 / self.nu)

    def with_epsilon(self, epsilon: float) -> "ModelParams":
        return replace(self, epsilon=epsilon)


def default_physical() -> PhysicalParams:
    return PhysicalParams()


def params_for_nu_I0(nu_I0: float, epsilon: float = 1.0,
                     physical: PhysicalParams | None = None) -> ModelParams:
    """ModelParams at a prescribed value of the product nu*I0."""
    phys = physical if physical is not None else default_physical()
    nu = nu_from_physical(phys.a, phys.alpha)
    return ModelParams(physical=phys, nu=nu, I0=nu_I0 / nu, epsilon=epsilon)


@dataclass(frozen=True)
class CartesianState:
    x: float
    z: float
    p_x: float
    p_z: float

    def __post_init__(self):
        vals = (self.x, self.z, self.p_x, self.p_z)
        # z = +inf is the orbit at infinity; everything else must be finite
        if not all(math.isfinite(v) for v in (self.x, self.p_x, self.p_z)):
            raise DomainError("x, p_x, p_z must be finite")
        if math.isnan(self.z) or self.z == -math.inf:
            raise DomainError("z must be finite or +inf")


@dataclass(frozen=True)
class McGeheeState:
    """Regularized state (q, p, theta, J); q = 0 is z = infinity."""

    q: float
    p: float
    theta: float
    J: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(np.mod(self.theta, 2.0 * math.pi)))

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.p, self.theta, self.J], dtype=float)

    @staticmethod
    def from_array(y) -> "McGeheeState":
        q, p, theta, J = (float(v) for v in y)
        return McGeheeState(q, p, theta, J)


# ---------------------------------------------------------------------------
# potentials and Hamiltonians
# ---------------------------------------------------------------------------

def potential_V(theta, series: CorrugationSeries):
    """Corrugation profile V(theta) = sum r_n cos(n theta) + s_n sin(n theta)."""
    return series.value(theta)


def fourier_coeff_V(k: int, series: CorrugationSeries) -> complex:
    """Complex Fourier coefficient V^[k]; V^[0] = 0, real for even series."""
    return series.fourier_coeff(k)


def morse_potential(z, physical: PhysicalParams):
    e = np.exp(-physical.alpha * z)
    return physical.D * e * (e - 2.0)


def corrugation_potential(theta, z, physical: PhysicalParams):
    return physical.D * np.exp(-2.0 * physical.alpha * z) * physical.corrugation.value(theta)


def hamiltonian_cartesian(s: CartesianState, physical: PhysicalParams) -> float:
    """H_CM = (p_x^2 + p_z^2)/(2m) + V_M(z) + V_C(2 pi x / a, z)."""
    theta = 2.0 * math.pi * s.x / physical.a
    kin = (s.p_x ** 2 + s.p_z ** 2) / (2.0 * physical.m)
    if s.z == math.inf:
        return kin
    return float(kin + morse_potential(s.z, physical)
                 + corrugation_potential(theta, s.z, physical))


def hamiltonian_mcgehee(s: McGeheeState | np.ndarray, params: ModelParams) -> float:
    """Rescaled Hamiltonian H = H0 + H1 in (q, p, theta, J)."""
    q, p, theta, J = _unpack(s)
    return h0_mcgehee(q, p, J, params) + h1_mcgehee(q, theta, params)


def h0_mcgehee(q, p, J, params: ModelParams):
    I = params.I0 + J
    return 0.5 * (params.nu * I * I + p * p) - 0.5 * q * q + 0.5 * q ** 4


def h1_mcgehee(q, theta, params: ModelParams):
    return 0.5 * params.epsilon * q ** 4 * params.series.value(theta)


def _unpack(s):
    if isinstance(s, McGeheeState):
        return s.q, s.p, s.theta, s.J
    q, p, theta, J = s
    return q, p, theta, J


# ---------------------------------------------------------------------------
# coordinate changes
# ---------------------------------------------------------------------------

def to_mcgehee(s: CartesianState, params: ModelParams) -> McGeheeState:
    """Regularizing change: 2 q^2 = e^{-alpha z}, B p = p_z, C I = p_x, theta = 2 pi x / a."""
    phys = params.physical
    if s.z == math.inf:
        q = 0.0
    else:
        q = math.sqrt(0.5 * math.exp(-phys.alpha * s.z))
    p = s.p_z / phys.B
    theta = 2.0 * math.pi * s.x / phys.a
    I = s.p_x / phys.C
    return McGeheeState(q=q, p=p, theta=theta, J=I - params.I0)


def from_mcgehee(s: McGeheeState | np.ndarray, params: ModelParams) -> CartesianState:
    """Inverse of :func:`to_mcgehee`; requires q >= 0 (q = 0 maps to z = +inf)."""
    q, p, theta, J = _unpack(s)
    phys = params.physical
    if q < 0:
        raise DomainError("from_mcgehee needs q >= 0")
    z = math.inf if q == 0.0 else -math.log(2.0 * q * q) / phys.alpha
    return CartesianState(
        x=phys.a * theta / (2.0 * math.pi),
        z=z,
        p_x=phys.C * (params.I0 + J),
        p_z=phys.B * p,
    )


def b_form_matrix(q: float) -> np.ndarray:
    """Matrix of the 2-form d theta ^ dJ - (1/q) dq ^ dp in coordinates (q, p, theta, J)."""
    if q == 0:
        raise DomainError("b-form is singular at q = 0")
    O = np.zeros((4, 4))
    O[0, 1] = -1.0 / q
    O[1, 0] = 1.0 / q
    O[2, 3] = 1.0
    O[3, 2] = -1.0
    return O


# ---------------------------------------------------------------------------
# vector fields
# ---------------------------------------------------------------------------

def vector_field_mcgehee(s, params: ModelParams) -> np.ndarray:
    """Equations of motion of H under the b-symplectic form.

    q' = -q p
    p' = -q^2 + 2 q^4 + 2 eps q^4 V(theta)
    theta' = nu (I0 + J)
    J' = -(eps/2) q^4 V'(theta)
    """
    q, p, theta, J = _unpack(s)
    ser = params.series
    q2 = q * q
    q4 = q2 * q2
    return np.array([
        -q * p,
        -q2 + 2.0 * q4 + 2.0 * params.epsilon * q4 * ser.value(theta),
        params.nu * (params.I0 + J),
        -0.5 * params.epsilon * q4 * ser.slope(theta),
    ])


def vector_field_cartesian(s, physical: PhysicalParams) -> np.ndarray:
    """Equations of motion of H_CM in (x, z, p_x, p_z)."""
    if isinstance(s, CartesianState):
        x, z, p_x, p_z = s.x, s.z, s.p_x, s.p_z
    else:
        x, z, p_x, p_z = s
    theta = 2.0 * math.pi * x / physical.a
    ser = physical.corrugation
    e1 = math.exp(-physical.alpha * z)
    e2 = e1 * e1
    return np.array([
        p_x / physical.m,
        p_z / physical.m,
        -(2.0 * math.pi / physical.a) * physical.D * e2 * ser.slope(theta),
        -2.0 * physical.D * physical.alpha * e1 * (1.0 - e1 * (1.0 + ser.value(theta))),
    ])


def reversor(s) -> np.ndarray:
    """Reversibility map S(q, p, theta, J) = (q, -p, -theta, J)."""
    q, p, theta, J = _unpack(s)
    return np.array([q, -p, -theta, J])


# ---------------------------------------------------------------------------
# averaging step
# ---------------------------------------------------------------------------
#
# One step of averaging removes the theta-dependent q^4 term at leading order.
# With A the zero-mean primitive of -eps*V/(2 nu I0) the change
#     theta = Theta, q = Q, J = K + A'(Theta) Q^4, p = P - 4 A(Theta) Q^4
# preserves the b-symplectic form (the p-correction sign is forced by
# d theta ^ dJ picking up 4 A' Q^3 dTheta ^ dQ from the J-shift), and the
# transformed Hamiltonian is H0 + H1~ with sup |H1~| = O(1/(nu I0)).

def _averaging_primitives(params: ModelParams, theta):
    """A(theta) and A'(theta) for the averaging change."""
    ser = params.series
    scale = -params.epsilon / (2.0 * params.nu_I0)
    a_val = 0.0
    for n, (r, s) in enumerate(zip(ser.cos_coeffs, ser.sin_coeffs), start=1):
        # zero-mean primitive of cos/sin
        a_val = a_val + scale * (r * np.sin(n * theta) / n - s * np.cos(n * theta) / n)
    a_slope = scale * ser.value(theta)
    return a_val, a_slope


def averaging_change(new_state, params: ModelParams) -> tuple[np.ndarray, float]:
    """Map averaged variables (Q, P, Theta, K) to (q, p, theta, J); return state and H value."""
    Q, P, Theta, K = _unpack(new_state)
    A, Ap = _averaging_primitives(params, Theta)
    Q4 = Q ** 4
    old = np.array([Q, P - 4.0 * A * Q4, Theta, K + Ap * Q4])
    return old, hamiltonian_mcgehee(old, params)


def averaged_remainder(new_state, params: ModelParams) -> float:
    """H1~ = H(change(Q,P,Theta,K)) - H0(Q,P,K): the post-averaging remainder."""
    Q, P, Theta, K = _unpack(new_state)
    old, h = averaging_change(new_state, params)
    return h - h0_mcgehee(Q, P, K, params)


def averaged_remainder_sup(params: ModelParams, n_grid: int = 9) -> float:
    """sup |H1~| over the test grid |Q| <= 1, |P| <= 1, |K| <= 1/2, theta in T."""
    qs = np.linspace(0.0, 1.0, n_grid)
    ps = np.linspace(-1.0, 1.0, n_grid)
    ks = np.linspace(-0.5, 0.5, 5)
    thetas = np.linspace(0.0, 2.0 * math.pi, 24, endpoint=False)
    sup = 0.0
    for Q in qs:
        for P in ps:
            for K in ks:
                for Th in thetas:
                    sup = max(sup, abs(averaged_remainder((Q, P, Th, K), params)))
    return sup


# ---------------------------------------------------------------------------
# config files
# ---------------------------------------------------------------------------

def _parse_coeff_list(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.replace(",", " ").split())


def load_config(path) -> ModelParams:
    """Read `key = value` config with [physical] and [model] sections.

    Recognized keys: [physical] D, a, alpha, m, r, s; [model] I0, nuI0,
    epsilon.  Missing keys fall back to the physical defaults; nuI0 wins
    over I0 if both are present.
    """
    cp = configparser.ConfigParser()
    read = cp.read(path)
    if not read:
        raise DomainError(f"config file not found: {path}")
    phys_sec = cp["physical"] if cp.has_section("physical") else {}
    model_sec = cp["model"] if cp.has_section("model") else {}

    series = CorrugationSeries(
        _parse_coeff_list(phys_sec.get("r", "")) or DEFAULT_R_COEFFS,
        _parse_coeff_list(phys_sec.get("s", "")),
    )
    phys = PhysicalParams(
        D=float(phys_sec.get("D", DEFAULT_D)),
        a=float(phys_sec.get("a", DEFAULT_A)),
        alpha=float(phys_sec.get("alpha", DEFAULT_ALPHA)),
        m=float(phys_sec.get("m", DEFAULT_MASS)),
        corrugation=series,
    )
    nu = nu_from_physical(phys.a, phys.alpha)
    epsilon = float(model_sec.get("epsilon", 1.0))
    if "nuI0" in model_sec:
        I0 = float(model_sec["nuI0"]) / nu
    else:
        I0 = float(model_sec.get("I0", 6.0 / nu))
    return ModelParams(physical=phys, nu=nu, I0=I0, epsilon=epsilon)
