"""Invariant-manifold graphs, globalization, and splitting measurement.

Near infinity the unstable manifold of the periodic orbit at q = p = J = 0
is the graph P = d_u Phi, J = d_theta Phi of a generating function
Phi = Phi0 + Phi1 solving a Hamilton-Jacobi equation.  Phi1 is found by
Picard iteration of

    Phi1 = G(F(Phi1)),
    F(Phi1) = -(1/(2 p_h^2)) (d_u Phi1)^2 - (nu/2) (d_theta Phi1)^2 - H1(q_h(u), theta),

realized on truncated Fourier modes with the semi-infinite characteristic
transport G evaluated along the real axis (first iterate = the Melnikov
layer L+_out).  The graph seeds trajectories which are globalized by
integration; the stable sheet is obtained through the reversor
S(q, p, theta, J) = (q, -p, -theta, J) plus time reversal, exact for even
corrugation.  Splitting harmonics are read off arrival samples of
Delta J = J+ - J- and Delta P = P+ - P- projected on e^{ik(theta - nu I0 u)}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .fourier import ModeField, geometric_grid, ibp_tail, powerlaw_tail, transport
from .integrate import IntegratorConfig, Trajectory, integrate_mcgehee
from .model import DomainError, ModelParams
from .separatrix import dphi0, p_h, q_h


class NonContractionError(RuntimeError):
    """Picard iteration is not contracting (nu I0 too small or u_max too near 0)."""


class SignalBelowNoiseError(RuntimeError):
    """Measured splitting amplitude is within 10x of the integrator noise floor."""


class RootCountError(RuntimeError):
    def __init__(self, roots):
        super().__init__(f"expected 2 homoclinic roots per period, found {len(roots)}")
        self.roots = roots


# ---------------------------------------------------------------------------
# Hamilton-Jacobi solver
# ---------------------------------------------------------------------------

@dataclass
class ManifoldGraph:
    """One invariant-manifold sheet as a Hamilton-Jacobi graph near infinity."""

    params: ModelParams
    u: np.ndarray
    phi1: ModeField          # correction Phi1; derivatives tracked exactly
    source: ModeField        # F(Phi1) at the converged iterate
    sheet: str = "unstable"
    residual: float = math.nan
    contraction_ratio: float = math.nan
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)

    def derivatives_at(self, u0: float, thetas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(P, J) = (d_u Phi, d_theta Phi) at (u0, thetas); includes Phi0."""
        thetas = np.asarray(thetas, dtype=float)
        P = np.full_like(thetas, float(dphi0(u0)), dtype=complex)
        J = np.zeros_like(thetas, dtype=complex)
        M = self.phi1.M
        for k in range(-M, M + 1):
            val, _ = self.phi1.interp_coeff(k, u0)
            dval = self._du_at(k, u0)
            phase = np.exp(1j * k * thetas)
            P = P + dval * phase
            J = J + 1j * k * val * phase
        return np.real(P), np.real(J)

    def _du_at(self, k: int, u0: float) -> complex:
        x = self.u
        j = min(max(int(np.searchsorted(x, u0)) - 1, 0), len(x) - 2)
        h = x[j + 1] - x[j]
        s = (u0 - x[j]) / h
        d0 = self.phi1.du[k + self.phi1.M, j]
        d1 = self.phi1.du[k + self.phi1.M, j + 1]
        return complex((1 - s) * d0 + s * d1)

    def phi1_at(self, u0: float, thetas: np.ndarray) -> np.ndarray:
        thetas = np.asarray(thetas, dtype=float)
        out = np.zeros_like(thetas, dtype=complex)
        for k in range(-self.phi1.M, self.phi1.M + 1):
            val, _ = self.phi1.interp_coeff(k, u0)
            out = out + val * np.exp(1j * k * thetas)
        return np.real(out)


def _h1_modes(params: ModelParams, M: int, x: np.ndarray) -> ModeField:
    """Mode field of H1(q_h(u), theta) = (eps/2) q_h^4 V(theta)."""
    prof = 0.5 * params.epsilon * (1.0 + x ** 2) ** -2.0
    dprof = 0.5 * params.epsilon * (-4.0 * x) * (1.0 + x ** 2) ** -3.0
    out = ModeField(M, x)
    for k in range(-M, M + 1):
        vk = params.series.fourier_coeff(k)
        if vk != 0:
            out.set_coeff(k, vk * prof, vk * dprof)
    return out


def _transport_field(F: ModeField, nu_I0: float) -> ModeField:
    """Apply the semi-infinite transport G mode by mode; track d/du exactly."""
    x = F.x
    out = ModeField(F.M, x)
    for k in range(-F.M, F.M + 1):
        fvals = F.values[k + F.M]
        fdu = F.du[k + F.M]
        if not np.any(fvals):
            continue
        omega = k * nu_I0
        if omega != 0.0:
            fpp0 = (fdu[1] - fdu[0]) / (x[1] - x[0])
            tail = ibp_tail(fvals[0], fdu[0], fpp0, omega, x[0])
        else:
            tail = powerlaw_tail(fvals[0], x[0], 4.0) if fvals[0] != 0 else 0.0
        g = transport(x, fvals, fdu, omega, tail=tail)
        out.set_coeff(k, g, fvals - 1j * omega * g)
    return out


def _hj_source(phi: ModeField, phi_prev_src: ModeField, h1: ModeField,
               params: ModelParams, inv2p: np.ndarray, dinv2p: np.ndarray) -> ModeField:
    """F(Phi1) with exact grid derivatives via the transport identity."""
    M = phi.M
    x = phi.x
    ks = np.arange(-M, M + 1)[:, None]
    # d_u Phi as a ModeField: value = phi.du, derivative from the identity
    # d_u(d_u Phi_k) = d_u F_prev_k - i k nuI0 d_u Phi_k
    du_field = ModeField(M, x,
                         phi.du.copy(),
                         phi_prev_src.du - 1j * ks * params.nu_I0 * phi.du)
    dth_field = phi.dtheta()
    t1 = du_field.mul(du_field).scale_profile(inv2p, dinv2p)
    t2 = dth_field.mul(dth_field)
    out = ModeField(M, x,
                    -t1.values - 0.5 * params.nu * t2.values - h1.values,
                    -t1.du - 0.5 * params.nu * t2.du - h1.du)
    return out


def solve_hj_unstable(params: ModelParams, u_max: float = -0.2,
                      theta_modes: int = 8, tol: float = 1e-11,
                      max_iter: int = 50, h0: float = 5e-3,
                      near_span: float = 10.0, u_far: float = -2.0e4) -> ManifoldGraph:
    """Picard solution of the Hamilton-Jacobi graph on u <= u_max < 0.

    The first iterate is the Melnikov layer L+_out; iteration continues
    until the sup-residual of the graph equation drops below tol.  Raises
    NonContractionError when the successive-difference ratio reaches 0.9.
    """
    if u_max > -0.2:
        raise DomainError("u_max must be <= -0.2 (1/p_h^2 blows up at u = 0)")
    x = geometric_grid(u_max, h0=h0, near_span=near_span, x_far=u_far)
    M = int(theta_modes)
    h1 = _h1_modes(params, M, x)
    inv2p = (1.0 + x ** 2) ** 2 / (2.0 * x ** 2)
    dinv2p = (4.0 * x * (1.0 + x ** 2) - 2.0 * (1.0 + x ** 2) ** 2 / x) / (2.0 * x ** 2)

    phi = ModeField(M, x)
    src = _hj_source(phi, ModeField(M, x), h1, params, inv2p, dinv2p)
    ratio = math.nan
    prev_delta = math.nan
    first_iterate = None
    for it in range(1, max_iter + 1):
        phi_new = _transport_field(src, params.nu_I0)
        if it == 1:
            first_iterate = phi_new.copy()
        delta = phi_new.axpy(-1.0, phi).sup_norm()
        src_new = _hj_source(phi_new, src, h1, params, inv2p, dinv2p)
        residual = src_new.axpy(-1.0, src).sup_norm()
        phi = phi_new
        src = src_new
        if not math.isnan(prev_delta) and prev_delta > 0:
            ratio = delta / prev_delta
            if ratio >= 0.9:
                raise NonContractionError(
                    f"Picard ratio {ratio:.3f} >= 0.9 at iteration {it}")
        prev_delta = delta
        if residual <= tol:
            graph = ManifoldGraph(params, x, phi, src, "unstable",
                                  residual, ratio, it)
            graph.diagnostics["first_iterate"] = first_iterate
            graph.diagnostics["delta_last"] = delta
            return graph
    raise NonContractionError(
        f"no convergence to tol={tol} within {max_iter} iterations "
        f"(last residual {residual:.3e})")


def unstable_initial_conditions(graph: ManifoldGraph, u0: float,
                                thetas: np.ndarray) -> np.ndarray:
    """Seed states Gamma+(u0, theta) = (q_h, P/p_h, theta, J) on the graph."""
    if not (graph.u[0] <= u0 <= graph.u[-1]):
        raise DomainError(f"u0={u0} outside graph range")
    P, J = graph.derivatives_at(u0, thetas)
    qh = float(q_h(u0))
    ph = float(p_h(u0))
    states = np.empty((len(thetas), 4))
    states[:, 0] = qh
    states[:, 1] = P / ph
    states[:, 2] = thetas
    states[:, 3] = J
    return states


# ---------------------------------------------------------------------------
# globalization
# ---------------------------------------------------------------------------

@dataclass
class SheetLevel:
    """Arrival samples of one sheet on the section u = const."""

    u: float
    theta0: np.ndarray
    theta: np.ndarray      # arrival angle, unwrapped and smooth in theta0
    P: np.ndarray
    J: np.ndarray
    energy_defect: np.ndarray

    def mode(self, which: str, k: int) -> complex:
        """Fourier coefficient of P or J against the arrival angle.

        Uses the smooth reparametrization by the seed angle: spectrally
        accurate trapezoid with the exact Jacobian d theta/d theta0.
        """
        vals = self.P if which == "P" else self.J
        n = len(self.theta0)
        # drift theta - theta0 is constant plus periodic once 2pi wraps are
        # removed; its spectral derivative gives the exact Jacobian
        delta = np.unwrap(self.theta - self.theta0, period=2.0 * math.pi)
        dd = np.fft.ifft(np.fft.fft(delta - np.mean(delta))
                         * 1j * np.fft.fftfreq(n, d=1.0 / n)).real
        jac = 1.0 + dd
        integrand = vals * np.exp(-1j * k * self.theta) * jac
        return complex(np.mean(integrand))

    def reflected(self) -> "SheetLevel":
        """Reversor image: samples of the opposite sheet at -u."""
        order = np.argsort(-self.theta0)
        return SheetLevel(
            u=-self.u,
            theta0=np.mod(-self.theta0[order], 2.0 * math.pi),
            theta=-self.theta[order],
            P=self.P[order].copy(),
            J=self.J[order].copy(),
            energy_defect=self.energy_defect[order].copy(),
        )


@dataclass
class Sheet:
    tag: str
    params: ModelParams
    levels: dict[float, SheetLevel]

    def level(self, u: float) -> SheetLevel:
        key = min(self.levels, key=lambda v: abs(v - u))
        if abs(key - u) > 1e-9:
            raise KeyError(f"no level at u={u}")
        return self.levels[key]

    @property
    def noise_floor(self) -> float:
        """J-equivalent integrator noise: max energy defect / (nu I0)."""
        worst = max(float(np.max(lv.energy_defect)) for lv in self.levels.values())
        return worst / self.params.nu_I0


def globalize(params: ModelParams, seeds: np.ndarray, u_levels,
              config: IntegratorConfig | None = None,
              u_seed: float | None = None) -> Sheet:
    """Integrate unstable seeds and sample (P, J) at sections q = q_h(u).

    u_levels are positive; each fiber crosses q = q_h(u) twice, once rising
    (recorded at -u, the incoming branch p < 0) and once falling (+u,
    p > 0).  Branch selection is keyed on the sign of p.
    """
    cfg = config or IntegratorConfig()
    u_levels = sorted(float(u) for u in u_levels)
    if not u_levels or u_levels[0] <= 0:
        raise DomainError("u_levels must be positive")
    q_targets = {u: float(q_h(u)) for u in u_levels}
    u0 = u_seed if u_seed is not None else -3.0
    t_end = abs(u0) + u_levels[-1] + 1.5

    n = seeds.shape[0]
    store: dict[float, dict[str, list]] = {
        su: {"theta0": [], "theta": [], "P": [], "J": [], "defect": []}
        for u in u_levels for su in (u, -u)}

    from .model import hamiltonian_mcgehee
    energy = params.energy

    for i in range(n):
        y0 = seeds[i]
        traj = integrate_mcgehee(params, y0, (0.0, t_end), cfg)
        ts = _scan_times(traj)
        qs = traj.sol(ts)[0]
        for u, q_t in q_targets.items():
            for signed_u, want_sign in ((-u, -1), (u, +1)):
                t_hit = _locate_crossing(traj, ts, qs, q_t, want_sign)
                if t_hit is None:
                    continue
                state = traj.sol(t_hit)
                rec = store[signed_u]
                rec["theta0"].append(y0[2])
                rec["theta"].append(state[2])
                rec["P"].append(state[1] * float(p_h(signed_u)))
                rec["J"].append(state[3])
                rec["defect"].append(abs(hamiltonian_mcgehee(state, params) - energy))

    levels = {}
    for su, rec in store.items():
        if len(rec["theta0"]) != n:
            raise RuntimeError(
                f"grid coverage gap at u={su}: {len(rec['theta0'])}/{n} fibers arrived")
        levels[su] = SheetLevel(
            u=su,
            theta0=np.array(rec["theta0"]),
            theta=np.array(rec["theta"]),
            P=np.array(rec["P"]),
            J=np.array(rec["J"]),
            energy_defect=np.array(rec["defect"]),
        )
    return Sheet("unstable", params, levels)


def _scan_times(traj: Trajectory) -> np.ndarray:
    """Dense scan grid: integrator nodes subdivided 4x."""
    t = traj.t
    parts = [np.linspace(t[i], t[i + 1], 5)[:-1] for i in range(len(t) - 1)]
    return np.concatenate(parts + [t[-1:]])


def _locate_crossing(traj: Trajectory, ts: np.ndarray, qs: np.ndarray,
                     q_target: float, want_sign: int) -> float | None:
    """First crossing of q = q_target with sign(p) = want_sign."""
    g = qs - q_target
    idx = np.nonzero(g[:-1] * g[1:] < 0)[0]
    for j in idx:
        t_root = brentq(lambda t: traj.sol(t)[0] - q_target, ts[j], ts[j + 1],
                        xtol=1e-14, rtol=8.9e-16, maxiter=200)
        state = traj.sol(t_root)
        if state[1] * want_sign > 0:
            return float(t_root)
    return None


def unstable_sheet(params: ModelParams, u_levels, n_theta: int = 64,
                   u_seed: float = -3.0, theta_modes: int = 8,
                   tol: float = 1e-11,
                   config: IntegratorConfig | None = None,
                   graph: ManifoldGraph | None = None) -> Sheet:
    """Full pipeline: HJ graph, seeds on a uniform angle grid, globalization."""
    g = graph if graph is not None else solve_hj_unstable(
        params, theta_modes=theta_modes, tol=tol)
    thetas = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    seeds = unstable_initial_conditions(g, u_seed, thetas)
    return globalize(params, seeds, u_levels, config=config, u_seed=u_seed)


def stable_sheet_from_unstable(sheet: Sheet) -> Sheet:
    """Reversor image: stable-sheet samples at +u from unstable ones at -u."""
    levels = {lv.u * -1.0: lv.reflected() for lv in sheet.levels.values()}
    return Sheet("stable", sheet.params, levels)


def stable_sheet_direct(params: ModelParams, u_levels, n_theta: int = 64,
                        u_seed: float = 3.0, theta_modes: int = 8,
                        tol: float = 1e-11,
                        config: IntegratorConfig | None = None,
                        graph: ManifoldGraph | None = None) -> Sheet:
    """Stable sheet by direct backward integration (validation path).

    Seeds are S-images of the unstable graph at -u_seed; integrating them
    backward traverses the stable manifold toward decreasing u.
    """
    cfg = config or IntegratorConfig()
    g = graph if graph is not None else solve_hj_unstable(
        params, theta_modes=theta_modes, tol=tol)
    thetas = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    P, J = g.derivatives_at(-u_seed, np.mod(-thetas, 2 * math.pi))
    qh = float(q_h(u_seed))
    ph_minus = float(p_h(-u_seed))
    seeds = np.empty((n_theta, 4))
    seeds[:, 0] = qh
    seeds[:, 1] = -P / ph_minus    # S flips p; p_h(-u) = -p_h(u)
    seeds[:, 2] = thetas
    seeds[:, 3] = J

    u_levels = sorted(float(u) for u in u_levels)
    t_end = -(u_seed - u_levels[0] + 1.0)
    q_targets = {u: float(q_h(u)) for u in u_levels}
    store = {u: {"theta0": [], "theta": [], "P": [], "J": [], "defect": []}
             for u in u_levels}
    from .model import hamiltonian_mcgehee
    for i in range(n_theta):
        traj = integrate_mcgehee(params, seeds[i], (0.0, t_end), cfg)
        ts = _scan_times(traj)
        qs = traj.sol(ts)[0]
        for u, q_t in q_targets.items():
            t_hit = _locate_crossing(traj, ts, qs, q_t, +1)
            if t_hit is None:
                continue
            state = traj.sol(t_hit)
            rec = store[u]
            rec["theta0"].append(seeds[i][2])
            rec["theta"].append(state[2])
            rec["P"].append(state[1] * float(p_h(u)))
            rec["J"].append(state[3])
            rec["defect"].append(abs(hamiltonian_mcgehee(state, params) - params.energy))
    levels = {}
    for u, rec in store.items():
        levels[u] = SheetLevel(u, np.array(rec["theta0"]), np.array(rec["theta"]),
                               np.array(rec["P"]), np.array(rec["J"]),
                               np.array(rec["defect"]))
    return Sheet("stable", params, levels)


# ---------------------------------------------------------------------------
# splitting measurement
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplittingSample:
    nu_I0: float
    epsilon: float
    u: float
    k: int
    amp_J: float
    phase_J: float
    amp_P: float
    phase_P: float
    noise_floor: float


def measure_splitting(unstable: Sheet, stable: Sheet, u: float, k: int = 1,
                      require_signal: bool = True) -> SplittingSample:
    """First-harmonic amplitude/phase of Delta J and Delta P at level u.

    The harmonics are projected on e^{ik theta'} with theta' = theta - nu I0 u.
    Raises SignalBelowNoiseError when the J-amplitude is within 10x of the
    integrator noise floor.
    """
    params = unstable.params
    lv_p = unstable.level(u)
    lv_m = stable.level(u)
    rot = np.exp(1j * k * params.nu_I0 * u)
    gJ = (lv_p.mode("J", k) - lv_m.mode("J", k)) * rot
    gP = (lv_p.mode("P", k) - lv_m.mode("P", k)) * rot
    noise = max(unstable.noise_floor, stable.noise_floor)
    amp_J = 2.0 * abs(gJ)
    if require_signal and amp_J < 10.0 * noise:
        raise SignalBelowNoiseError(
            f"amp_J={amp_J:.3e} below 10x noise floor {noise:.3e}")
    return SplittingSample(
        nu_I0=params.nu_I0, epsilon=params.epsilon, u=u, k=k,
        amp_J=amp_J, phase_J=float(np.angle(gJ)),
        amp_P=2.0 * abs(gP), phase_P=float(np.angle(gP)),
        noise_floor=noise)


def delta_field_on_grid(unstable: Sheet, stable: Sheet, u: float,
                        which: str, thetas: np.ndarray,
                        k_max: int = 6) -> np.ndarray:
    """Delta P or Delta J versus arrival angle, reconstructed from modes."""
    lv_p = unstable.level(u)
    lv_m = stable.level(u)
    out = np.zeros_like(thetas, dtype=complex)
    for k in range(-k_max, k_max + 1):
        dk = lv_p.mode(which, k) - lv_m.mode(which, k)
        out = out + dk * np.exp(1j * k * thetas)
    return np.real(out)


def find_homoclinics(unstable: Sheet, stable: Sheet, u: float,
                     k_max: int = 6, n_scan: int = 720) -> list[tuple[float, float]]:
    """Sorted roots theta of Delta P(u, .) with transversality slopes.

    Exactly two roots per period are expected; any other count raises
    RootCountError carrying everything found.
    """
    thetas = np.linspace(0.0, 2.0 * math.pi, n_scan, endpoint=False)
    vals = delta_field_on_grid(unstable, stable, u, "P", thetas, k_max)
    roots = []
    for j in range(n_scan):
        a, b = vals[j], vals[(j + 1) % n_scan]
        if a == 0.0:
            th_root = thetas[j]
        elif a * b < 0:
            ta = thetas[j]
            tb = thetas[j] + 2 * math.pi / n_scan
            th_root = brentq(
                lambda th: float(delta_field_on_grid(
                    unstable, stable, u, "P", np.array([th]), k_max)[0]),
                ta, tb, xtol=1e-13)
        else:
            continue
        h = 1e-5
        slope = float(delta_field_on_grid(unstable, stable, u, "P",
                                          np.array([th_root + h]), k_max)[0]
                      - delta_field_on_grid(unstable, stable, u, "P",
                                            np.array([th_root - h]), k_max)[0]) / (2 * h)
        roots.append((float(th_root % (2 * math.pi)), slope))
    roots.sort()
    if len(roots) != 2:
        raise RootCountError(roots)
    return roots


# ---------------------------------------------------------------------------
# scaling law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingFit:
    rho: float                 # exponential rate of e^{-rho nu I0}
    sigma: float               # prefactor power of the frequency basis
    intercept: float
    covariance: np.ndarray
    residuals: np.ndarray
    nu_I0: np.ndarray
    basis: str

    @property
    def rho_err(self) -> float:
        return float(math.sqrt(self.covariance[2, 2]))

    @property
    def sigma_err(self) -> float:
        return float(math.sqrt(self.covariance[1, 1]))


def fit_scaling(samples: list[SplittingSample], which: str = "J",
                basis: str = "nu_plus_one") -> ScalingFit:
    """Least squares of log(amplitude) = c + sigma*log(prefactor) - rho*nu I0.

    basis = "nu" uses prefactor nu I0 (the asymptotic form); basis =
    "nu_plus_one" uses nu I0 + 1, the exact first-order prefactor of the
    first Melnikov harmonic.  Over narrow frequency windows the "nu" basis
    is nearly collinear with the exponential and absorbs the 1/(nu I0)
    correction into sigma; both are reported by the sweep tools.
    """
    if len(samples) < 4:
        raise DomainError("fit needs at least 4 samples")
    x = np.array([s.nu_I0 for s in samples])
    amp = np.array([s.amp_J if which == "J" else s.amp_P for s in samples])
    if np.any(amp <= 0):
        raise DomainError("amplitudes must be positive for the log fit")
    pref = x if basis == "nu" else x + 1.0
    A = np.column_stack([np.ones_like(x), np.log(pref), -x])
    y = np.log(amp)
    coef, res, rank, sv = np.linalg.lstsq(A, y, rcond=None)
    fitted = A @ coef
    resid = y - fitted
    dof = max(len(x) - 3, 1)
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(A.T @ A)
    return ScalingFit(rho=float(coef[2]), sigma=float(coef[1]),
                      intercept=float(coef[0]), covariance=cov,
                      residuals=resid, nu_I0=x, basis=basis)


def splitting_sweep(nu_I0_values, epsilon: float, u: float = 1.0, k: int = 1,
                    n_theta: int = 64, tol: float = 1e-11,
                    config: IntegratorConfig | None = None) -> list[SplittingSample]:
    """Measure the k-th splitting harmonic across nu I0 values."""
    from .integrate import MAX_RELIABLE_NU_I0
    from .model import params_for_nu_I0
    out = []
    for nu_I0 in nu_I0_values:
        if nu_I0 > MAX_RELIABLE_NU_I0:
            raise DomainError(
                f"nu I0 = {nu_I0} beyond double-precision reliability bound "
                f"{MAX_RELIABLE_NU_I0}")
        params = params_for_nu_I0(float(nu_I0), epsilon=epsilon)
        sheet = unstable_sheet(params, [u], n_theta=n_theta, tol=tol, config=config)
        stable = stable_sheet_from_unstable(sheet)
        out.append(measure_splitting(sheet, stable, u, k))
    return out
