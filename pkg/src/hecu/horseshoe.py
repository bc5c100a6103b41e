"""Return-map dynamics near the parabolic corner: strips, cones, shadowing.

On the energy level the flow reduces to 1.5 degrees of freedom with the
angle as time.  Near q = p = 0 the reduced flow has a degenerate corner
whose invariant manifolds guide a Smale-horseshoe return map: a global
excursion along the homoclinic loop composed with a slow corner passage.
This module verifies the construction numerically at a fixed operating
point: manifold-anchored section coordinates, passage-count strips,
cone-condition sampling, and nested-bisection shadowing of prescribed
symbol itineraries, including the oscillatory-orbit demonstration.

Charts: the linear straightening (u, v) = ((q - p)/2, (q + p)/2) or the
separatrix-adapted cubic w(q) = q sqrt(1 - q^2), u, v = (w -+ p)/2, which
makes the uncorrugated homoclinic loop exactly {v = 0} u {u = 0}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .manifolds import solve_hj_unstable, unstable_initial_conditions
from .model import DomainError, ModelParams

_TWO_PI = 2.0 * math.pi


class PassageError(RuntimeError):
    """Orbit left the working domain instead of completing the passage."""


class ShadowingError(RuntimeError):
    def __init__(self, message, achieved=()):
        super().__init__(message)
        self.achieved = tuple(achieved)


@dataclass(frozen=True)
class ReducedState:
    q: float
    p: float
    theta: float


# ---------------------------------------------------------------------------
# Poincare-Cartan reduction
# ---------------------------------------------------------------------------

def _w_term(q, p, theta, params: ModelParams) -> float:
    v = params.series.value(theta)
    q2 = q * q
    return p * p - q2 + q2 * q2 * (1.0 + params.epsilon * v)


def action_offset_closed(q, p, theta, params: ModelParams) -> float:
    """J on the level set H = nu I0^2/2 with nu (I0 + J) > 0 (closed form)."""
    disc = params.nu * (2.0 * params.energy - _w_term(q, p, theta, params))
    if disc <= 0:
        raise DomainError("state outside the nu(I0+J) > 0 sheet of the level set")
    return math.sqrt(disc) / params.nu - params.I0


def reduce_poincare_cartan(state, params: ModelParams,
                           tol: float = 1e-13) -> tuple[float, np.ndarray]:
    """K(q, p, theta) by bracketed secant on H(q, p, theta, -K) = E, and the
    reduced field (dq/dtheta, dp/dtheta) at the state."""
    from .model import hamiltonian_mcgehee
    q, p, theta = (state.q, state.p, state.theta) if isinstance(state, ReducedState) \
        else (state[0], state[1], state[2])
    E = params.energy

    def g(K):
        return hamiltonian_mcgehee((q, p, theta, -K), params) - E

    j_guess = action_offset_closed(q, p, theta, params)
    lo, hi = -j_guess - 0.2, -j_guess + 0.2
    glo, ghi = g(lo), g(hi)
    if glo * ghi > 0:
        raise DomainError("failed to bracket K near the level set")
    a, b, ga, gb = lo, hi, glo, ghi
    for _ in range(200):
        m = b - gb * (b - a) / (gb - ga)
        if not (min(a, b) <= m <= max(a, b)):
            m = 0.5 * (a + b)
        gm = g(m)
        if abs(gm) <= tol:
            K = m
            break
        if ga * gm < 0:
            b, gb = m, gm
        else:
            a, ga = m, gm
    else:
        raise DomainError("secant iteration for K did not converge")
    return K, reduced_field(q, p, theta, params)


def reduced_field(q, p, theta, params: ModelParams) -> np.ndarray:
    """(dq/dtheta, dp/dtheta) on the level set."""
    J = action_offset_closed(q, p, theta, params)
    D = params.nu * (params.I0 + J)
    v = params.series.value(theta)
    return np.array([
        -q * p / D,
        q * (-q + 2.0 * q ** 3 + 2.0 * params.epsilon * q ** 3 * v) / D,
    ])


def reduced_rhs(params: ModelParams):
    """Scalar-math reduced right-hand side for the integrator."""
    nu = params.nu
    I0 = params.I0
    eps = params.epsilon
    twoE = 2.0 * params.energy
    terms = [(n, r, s) for n, (r, s) in enumerate(
        zip(params.series.cos_coeffs, params.series.sin_coeffs), start=1)
        if r != 0.0 or s != 0.0]

    def rhs(theta, y):
        q, p = y
        vv = 0.0
        for n, r, s in terms:
            vv += r * math.cos(n * theta) + s * math.sin(n * theta)
        q2 = q * q
        w = p * p - q2 + q2 * q2 * (1.0 + eps * vv)
        D = math.sqrt(nu * (twoE - w))
        return (-q * p / D,
                q * (-q + 2.0 * q * q2 + 2.0 * eps * q * q2 * vv) / D)

    return rhs


# ---------------------------------------------------------------------------
# corner charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LocalChart:
    """Approximate straightening of the corner with sections u = a, v = a."""

    a: float = 0.1
    delta: float = 0.04
    rho: float = 0.5
    kind: str = "adapted"    # "linear" | "adapted"

    def __post_init__(self):
        if not (0 < self.delta < self.a / 2):
            raise DomainError("chart needs 0 < delta < a/2")
        if self.kind not in ("linear", "adapted"):
            raise DomainError("chart kind must be linear or adapted")

    def w(self, q: float) -> float:
        if self.kind == "linear":
            return q
        return q * math.sqrt(max(1.0 - q * q, 0.0))

    def w_inv(self, w: float) -> float:
        if self.kind == "linear":
            return w
        # small-q branch of w = q sqrt(1-q^2); valid for w <= 1/2
        if abs(w) > 0.5:
            raise DomainError("adapted chart valid only for |w| <= 1/2")
        return math.sqrt((1.0 - math.sqrt(1.0 - 4.0 * w * w)) / 2.0)

    def to_chart(self, q: float, p: float) -> tuple[float, float]:
        w = self.w(q)
        return 0.5 * (w - p), 0.5 * (w + p)

    def from_chart(self, u: float, v: float) -> tuple[float, float]:
        return self.w_inv(u + v), v - u


# ---------------------------------------------------------------------------
# terminal-event passages of the reduced flow
# ---------------------------------------------------------------------------

def _masked_section(chart: LocalChart, which: str):
    """Smoothly masked section function killing the near-apex crossings."""

    def g(theta, y):
        q, p = y
        u, v = chart.to_chart(q, p)
        val = (u if which == "u" else v) - chart.a
        penalty = max(0.0, q - 0.5) * 10.0
        return val + penalty

    return g


def _escape_event(chart: LocalChart):
    # fires when u drops below -0.02 inside the corner (v below the Sigma1
    # section); elsewhere the chart u legitimately goes negative, so the
    # detector is masked smoothly outside v < 0.9 a and q < 0.3
    def g(theta, y):
        q = y[0]
        u, v = chart.to_chart(q, y[1])
        return (u + 0.02 + 10.0 * max(0.0, v - 0.9 * chart.a)
                + 10.0 * max(0.0, q - 0.3))
    return g


def _integrate_to_section(params: ModelParams, chart: LocalChart, y0, theta0,
                          which: str, direction: int, theta_max: float,
                          rtol: float = 1e-11, atol: float = 1e-12):
    """Reduced flow until the masked section crossing; detects escape."""
    sec = _masked_section(chart, which)
    sec.terminal = True
    sec.direction = direction
    esc = _escape_event(chart)
    esc.terminal = True
    esc.direction = -1
    res = solve_ivp(reduced_rhs(params), (theta0, theta0 + theta_max),
                    np.asarray(y0, dtype=float), method="DOP853",
                    rtol=rtol, atol=atol, events=[sec, esc],
                    dense_output=False)
    if not res.success and res.status != 1:
        raise PassageError(res.message)
    if res.t_events[0].size:
        th = float(res.t_events[0][0])
        y = res.y_events[0][0]
        return "section", th, y
    if res.t_events[1].size:
        return "escape", float(res.t_events[1][0]), res.y_events[1][0]
    return "timeout", float(res.t[-1]), res.y[:, -1]


def _corner_pass(params: ModelParams, chart: LocalChart, u0: float,
                 theta0: float, theta_max: float = 2.0e5,
                 rtol: float = 1e-11) -> tuple[float, float]:
    if u0 <= 0:
        raise PassageError("entry on the escape side of the stable manifold")
    if u0 >= 0.9 * chart.a:
        raise PassageError("entry outside the corner neighborhood")
    q, p = chart.from_chart(u0, chart.a)
    kind, th1, y1 = _integrate_to_section(params, chart, (q, p), theta0,
                                          "u", +1, theta_max, rtol=rtol)
    if kind != "section":
        raise PassageError(f"corner passage failed: {kind}")
    u, v = chart.to_chart(y1[0], y1[1])
    return v, th1


def local_map(params: ModelParams, chart: LocalChart, u0: float, theta0: float,
              theta_max: float = 2.0e5) -> tuple[float, float]:
    """Corner passage Sigma1 -> Sigma0: (u0, a, theta0) -> (a, v1, theta1).

    Raises PassageError if the orbit escapes along the other side of the
    stable manifold instead of turning around the corner.
    """
    if not 0 < u0 < chart.delta:
        raise DomainError("local map needs 0 < u0 < delta on Sigma1")
    return _corner_pass(params, chart, u0, theta0, theta_max)


def global_map(params: ModelParams, chart: LocalChart, v0: float, theta0: float,
               theta_max: float = 400.0, rtol: float = 1e-11) -> tuple[float, float]:
    """Excursion Sigma0 -> Sigma1: (a, v0, theta0) -> (u1, a, theta1)."""
    q, p = chart.from_chart(chart.a, v0)
    kind, th1, y1 = _integrate_to_section(params, chart, (q, p), theta0,
                                          "v", -1, theta_max, rtol=rtol)
    if kind != "section":
        raise PassageError(f"homoclinic excursion failed: {kind}")
    u, v = chart.to_chart(y1[0], y1[1])
    return u, th1


def truncated_local_map(u0: float, a: float,
                        rtol: float = 1e-13) -> tuple[float, float]:
    """Oracle: passage of u' = u(u+v), v' = -v(u+v) from (u0, a) to u = a.

    The product uv is a first integral, so the exact arrival is (a, u0);
    returns (v1, transit_time)."""

    def rhs(t, y):
        u, v = y
        s = u + v
        return (u * s, -v * s)

    def hit(t, y):
        return y[0] - a

    hit.terminal = True
    hit.direction = +1
    res = solve_ivp(rhs, (0.0, 1e4 / math.sqrt(u0 * a)), [u0, a],
                    method="DOP853", rtol=rtol, atol=1e-16, events=[hit])
    if not res.t_events[0].size:
        raise PassageError("truncated passage did not reach u = a")
    v1 = float(res.y_events[0][0][1])
    return v1, float(res.t_events[0][0])


# ---------------------------------------------------------------------------
# the horseshoe laboratory: traces, coordinates, return map
# ---------------------------------------------------------------------------

class _TrigCurve:
    """Least-squares trigonometric fit of scattered 2pi-periodic samples."""

    def __init__(self, thetas, values, modes: int = 8):
        thetas = np.asarray(thetas, dtype=float)
        values = np.asarray(values, dtype=float)
        cols = [np.ones_like(thetas)]
        for k in range(1, modes + 1):
            cols.append(np.cos(k * thetas))
            cols.append(np.sin(k * thetas))
        A = np.column_stack(cols)
        coef, *_ = np.linalg.lstsq(A, values, rcond=None)
        self.coef = coef
        self.modes = modes
        self.residual = float(np.max(np.abs(A @ coef - values)))

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        out = np.full_like(theta, self.coef[0])
        for k in range(1, self.modes + 1):
            out = out + self.coef[2 * k - 1] * np.cos(k * theta) \
                + self.coef[2 * k] * np.sin(k * theta)
        return out if out.ndim else float(out)

    def slope(self, theta: float) -> float:
        out = 0.0
        for k in range(1, self.modes + 1):
            out += k * (-self.coef[2 * k - 1] * math.sin(k * theta)
                        + self.coef[2 * k] * math.cos(k * theta))
        return out


@dataclass
class _StableBranch:
    """Local branch of the global W^s trace on Sigma0 near one homoclinic point.

    The full trace can fold over the angle; near a transversal crossing it
    is a graph of angle versus the relative v-coordinate, stored here as a
    monotone sample table (v_rel ascending).
    """

    v_rel: np.ndarray
    theta: np.ndarray

    def angle_at(self, v_rel: float) -> float:
        """Angle of the branch at v_rel; endpoint-slope extrapolation outside.

        The working rectangle stays well inside the table; extrapolation
        only classifies far-flung iterates, where the angle offset merely
        labels the point."""
        v = self.v_rel
        t = self.theta
        if v_rel < v[0]:
            s = (t[1] - t[0]) / (v[1] - v[0])
            return float(t[0] + s * (v_rel - v[0]))
        if v_rel > v[-1]:
            s = (t[-1] - t[-2]) / (v[-1] - v[-2])
            return float(t[-1] + s * (v_rel - v[-1]))
        return float(np.interp(v_rel, v, t))


@dataclass
class HorseshoeLab:
    """Operating point with manifold-anchored section coordinates on Sigma0."""

    params: ModelParams
    chart: LocalChart
    wu_local: _TrigCurve        # v-coordinate of W^u on Sigma0 vs theta
    branch: _StableBranch       # local W^s branch: theta as a graph over v_rel
    theta_h: float              # homoclinic angle on Sigma0
    s_v: float                  # orientation of the v_rel axis
    s_tau: float                # orientation of the time-offset axis
    base_count: int             # periods of the reference homoclinic return
    delta_q: float              # working rectangle size
    rtol: float = 1e-11         # passage integration tolerance
    diagnostics: dict = field(default_factory=dict)

    # -- section coordinates -----------------------------------------------
    def state_of(self, v_raw: float, theta: float) -> tuple[float, float, float]:
        q, p = self.chart.from_chart(self.chart.a, v_raw)
        return q, p, theta

    def coords(self, v_raw: float, theta: float) -> tuple[float, float]:
        """(v_rel, tau): distance past W^u and angle offset from W^s."""
        v_rel = self.s_v * (v_raw - float(self.wu_local(theta)))
        theta_n = self._nearest_angle(theta)
        tau = self.s_tau * (theta_n - self.branch.angle_at(v_rel))
        return v_rel, tau

    def point(self, v_rel: float, tau: float) -> tuple[float, float]:
        theta = self.branch.angle_at(v_rel) + self.s_tau * tau
        v_raw = float(self.wu_local(theta)) + self.s_v * v_rel
        return v_raw, theta

    def _nearest_angle(self, theta: float) -> float:
        """Representative of theta mod 2pi nearest to the branch window."""
        ref = self.theta_h
        return theta - _TWO_PI * round((theta - ref) / _TWO_PI)

    # -- return map ----------------------------------------------------------
    def return_map_raw(self, v_raw: float, theta: float) -> tuple[float, float, int]:
        """One full return Sigma0 -> Sigma0; counts completed angle periods."""
        u1, th1 = global_map(self.params, self.chart, v_raw, theta,
                             rtol=self.rtol)
        v2, th2 = _corner_pass(self.params, self.chart, u1, th1,
                               rtol=self.rtol)
        count = int(math.floor((th2 - theta) / _TWO_PI))
        return v2, th2, count

    def return_map(self, v_rel: float, tau: float) -> tuple[float, float, int]:
        v_raw, theta = self.point(v_rel, tau)
        v2, th2, count = self.return_map_raw(v_raw, theta)
        v2_rel, tau2 = self.coords(v2, math.fmod(th2, _TWO_PI))
        return v2_rel, tau2, count

    def passage_count(self, v_rel: float, tau: float) -> int:
        try:
            _, _, count = self.return_map(v_rel, tau)
            return count
        except PassageError:
            return -1


def _run_fiber(params: ModelParams, chart: LocalChart, graph, u_seed: float,
               theta0: float):
    """One W^u fiber: seed -> Sigma0 -> Sigma1.

    Returns (theta1, v1, theta2, u2): the Sigma0 crossing (local trace
    sample) and the Sigma1 crossing after the excursion (global sample)."""
    seed = unstable_initial_conditions(graph, u_seed, np.array([theta0]))[0]
    kind, th1, y1 = _integrate_to_section(params, chart, (seed[0], seed[1]),
                                          seed[2], "u", +1, 900.0)
    if kind != "section":
        raise PassageError(f"W^u fiber failed to reach Sigma0: {kind}")
    u1, v1 = chart.to_chart(y1[0], y1[1])
    kind, th2, y2 = _integrate_to_section(params, chart, y1, th1, "v", -1, 900.0)
    if kind != "section":
        raise PassageError(f"W^u fiber failed to reach Sigma1: {kind}")
    u2, v2 = chart.to_chart(y2[0], y2[1])
    return float(th1), float(v1), float(th2), float(u2)


def setup_horseshoe(params: ModelParams, chart: LocalChart | None = None,
                    n_fibers: int = 64, u_seed: float = -25.0,
                    graph=None) -> HorseshoeLab:
    """Build the operating laboratory: traces, homoclinic branch, orientations.

    The local W^u trace on Sigma0 is a clean graph over the angle.  The
    global W^s trace (reversor image of the W^u return at Sigma1) may fold
    over the angle at physical corrugation, so the homoclinic crossing and
    the rectangle coordinates anchor on its local branch, sampled
    parametrically by seed angle and refined around the crossing.
    """
    chart = chart or LocalChart()
    g = graph if graph is not None else solve_hj_unstable(params)
    thetas0 = np.linspace(0.0, _TWO_PI, n_fibers, endpoint=False)
    runs = [_run_fiber(params, chart, g, u_seed, th0) for th0 in thetas0]
    wu_local = _TrigCurve([math.fmod(r[0], _TWO_PI) for r in runs],
                          [r[1] for r in runs])

    # stable trace through the reversor: (theta_s, v_s) = (-theta2, u2),
    # parametrized by the seed angle
    theta_s = np.array([-r[2] for r in runs])
    v_s = np.array([r[3] for r in runs])
    h = v_s - np.array([float(wu_local(t)) for t in theta_s])

    crossings = [j for j in range(n_fibers)
                 if h[j] == 0.0 or h[j] * h[(j + 1) % n_fibers] < 0]
    if not crossings:
        raise PassageError("stable trace does not cross the unstable trace")

    lab = None
    for j in crossings:
        built = _build_branch(params, chart, g, u_seed, wu_local,
                              thetas0, h, j, n_fibers)
        if built is None:
            continue
        lab = _orient_lab(params, chart, wu_local, built)
        if lab is not None:
            break
    if lab is None:
        raise PassageError("no homoclinic crossing produced a returning rectangle")
    lab.diagnostics["trace_residual"] = wu_local.residual
    lab.diagnostics["n_crossings"] = len(crossings)
    return lab


def _build_branch(params, chart, graph, u_seed, wu_local, thetas0, h, j, n):
    """Fold-free piece of the stable trace through the crossing at fiber j.

    The crossing parameter is refined by bisection in the seed angle; the
    branch is then walked outward in parameter order while the relative
    offset r = v_s - v_u stays monotone, which keeps a single fold-free
    piece even when the global trace winds.
    """
    spacing = thetas0[1] - thetas0[0]

    def sample(th0):
        _, _, th2, u2 = _run_fiber(params, chart, graph, u_seed, th0)
        ts = -th2
        return ts, u2 - float(wu_local(ts))

    lo_p, hi_p = thetas0[j], thetas0[j] + spacing
    r_lo = h[j]
    try:
        for _ in range(18):
            mid = 0.5 * (lo_p + hi_p)
            _, r_mid = sample(mid)
            if r_mid == 0.0:
                lo_p = hi_p = mid
                break
            if r_lo * r_mid < 0:
                hi_p = mid
            else:
                lo_p, r_lo = mid, r_mid
    except PassageError:
        return None
    star = 0.5 * (lo_p + hi_p)

    step = spacing / 6.0
    pieces = {}
    for direction in (+1.0, -1.0):
        pts = []
        last_r = None
        trend = 0.0
        for m in range(1, 40):
            th0 = star + direction * m * step
            try:
                ts, r = sample(th0)
            except PassageError:
                break
            if last_r is not None:
                d = r - last_r
                if trend == 0.0:
                    trend = math.copysign(1.0, d) if d != 0 else 0.0
                elif d * trend < 0:
                    break
            pts.append((ts, r))
            last_r = r
            if abs(r) > 0.2:
                break
        pieces[direction] = pts
    try:
        ts_star, r_star = sample(star)
    except PassageError:
        return None
    samples = list(reversed(pieces[-1.0])) + [(ts_star, r_star)] + pieces[+1.0]
    if len(samples) < 8:
        return None
    return samples


def _orient_lab(params, chart, wu_local, samples) -> HorseshoeLab | None:
    """Choose the v- and tau-orientations that give a returning rectangle."""
    th = np.array([s[0] for s in samples])
    r = np.array([s[1] for s in samples])
    # reduce angles to a common window (they arrive shifted by 2 pi k)
    th = th - _TWO_PI * np.round((th - th[len(th) // 2]) / _TWO_PI)
    dr = np.diff(r)
    if np.all(dr > 0):
        pass
    elif np.all(dr < 0):
        th, r = th[::-1], r[::-1]
    else:
        # keep the longest monotone run through a sign change of r
        runs = _monotone_runs(r)
        best = None
        for a, b in runs:
            if r[a] * r[b] <= 0 and (best is None or b - a > best[1] - best[0]):
                best = (a, b)
        if best is None:
            return None
        th, r = th[best[0]:best[1] + 1], r[best[0]:best[1] + 1]
        if r[0] > r[-1]:
            th, r = th[::-1], r[::-1]
    if not (r[0] < 0 < r[-1]) or len(r) < 6:
        return None

    for s_v in (1.0, -1.0):
        if s_v > 0:
            tv, tt = r.copy(), th.copy()
        else:
            tv, tt = (-r)[::-1].copy(), th[::-1].copy()
        # keep a thin margin below zero so coords() tolerates tiny negatives
        keep = tv >= -0.2 * tv[-1]
        tv, tt = tv[keep], tt[keep]
        if len(tv) < 6 or tv[-1] <= 0:
            continue
        branch = _StableBranch(v_rel=tv, theta=tt)
        delta_q = 0.45 * tv[-1]
        theta_h = branch.angle_at(0.0) if tv[0] <= 0 <= tv[-1] else float(tt[0])
        lab = HorseshoeLab(params, chart, wu_local, branch, theta_h,
                           s_v=s_v, s_tau=1.0, base_count=0, delta_q=delta_q)
        for s_tau in (1.0, -1.0):
            lab.s_tau = s_tau
            try:
                v2, tau2, count = lab.return_map(0.5 * delta_q, 0.5 * delta_q)
            except (PassageError, DomainError):
                continue
            if count > 0 and v2 > 0:
                lab.base_count = count
                return lab
    return None


def _monotone_runs(r: np.ndarray) -> list[tuple[int, int]]:
    runs = []
    start = 0
    d0 = 0.0
    for i in range(1, len(r)):
        d = r[i] - r[i - 1]
        s = math.copysign(1.0, d) if d != 0 else d0
        if d0 == 0.0:
            d0 = s
        elif s != d0:
            runs.append((start, i - 1))
            start = i - 1
            d0 = 0.0
    runs.append((start, len(r) - 1))
    return runs


def select_operating_point(candidates=(4.5, 5.0, 6.0), epsilon: float = 1.0,
                           noise_scale: float = 1e-10) -> ModelParams:
    """Smallest candidate nu I0 whose predicted splitting clears 1e3 x noise."""
    from .model import params_for_nu_I0
    from .separatrix import melnikov_coeff_closed
    for nu_I0 in candidates:
        params = params_for_nu_I0(nu_I0, epsilon=epsilon)
        amp = 2.0 * epsilon * abs(melnikov_coeff_closed(1, nu_I0, params.series).value)
        if amp >= 1e3 * noise_scale:
            return params
    raise DomainError("no candidate operating point clears the noise floor")


# ---------------------------------------------------------------------------
# strips
# ---------------------------------------------------------------------------

@dataclass
class Strip:
    n: int                       # completed angle periods of the return
    tau_lo: np.ndarray           # boundary samples over the v grid
    tau_hi: np.ndarray
    v_grid: np.ndarray

    @property
    def tau_center(self) -> float:
        return float(np.mean(0.5 * (self.tau_lo + self.tau_hi)))

    def contains(self, v_rel: float, tau: float) -> bool:
        lo = float(np.interp(v_rel, self.v_grid, self.tau_lo))
        hi = float(np.interp(v_rel, self.v_grid, self.tau_hi))
        return lo <= tau <= hi

    def lipschitz(self) -> float:
        dv = np.diff(self.v_grid)
        return float(max(np.max(np.abs(np.diff(self.tau_lo) / dv)),
                         np.max(np.abs(np.diff(self.tau_hi) / dv))))


@dataclass
class StripFamily:
    lab: HorseshoeLab
    strips: dict                 # n -> Strip (vertical strips V_n)
    images: dict                 # n -> arrays of (v_rel, tau) samples of H_n
    mu_v: float
    mu_h: float
    diagnostics: dict = field(default_factory=dict)


def _bisect_boundary(lab: HorseshoeLab, v_rel: float, n: int,
                     lo: float, hi: float, rel_tol: float = 3e-7) -> float:
    """tau of the count jump (>= n+1 | escape) -> (<= n); bracket assumed valid."""
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rel_tol * hi:
            return mid
        c = lab.passage_count(v_rel, mid)
        if c >= n + 1 or c == -1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _boundary_with_guess(lab: HorseshoeLab, v_rel: float, n: int,
                         guess: float, cap: float) -> float:
    """Validate/expand a bracket around a predicted boundary, then bisect."""
    lo = min(guess * 0.9, cap)
    hi = min(guess * 1.1, cap)
    c_lo = lab.passage_count(v_rel, lo)
    for _ in range(60):
        if c_lo >= n + 1 or c_lo == -1:
            break
        lo *= 0.8
        c_lo = lab.passage_count(v_rel, lo)
    else:
        raise PassageError(f"no deep bracket for n={n} at v={v_rel:.3e}")
    c_hi = lab.passage_count(v_rel, hi)
    for _ in range(60):
        if 0 <= c_hi <= n:
            break
        hi = min(hi * 1.25, cap)
        c_hi = lab.passage_count(v_rel, hi)
        if hi >= cap and not (0 <= c_hi <= n):
            raise PassageError(f"no shallow bracket for n={n} at v={v_rel:.3e}")
    return _bisect_boundary(lab, v_rel, n, lo, hi)


def build_strips(lab: HorseshoeLab, window: tuple[int, int],
                 n_v: int = 6, tau_max: float | None = None) -> StripFamily:
    """Vertical strips V_n (passage count n) for n in the window, with their
    images H_n, disjointness, Hausdorff monotonicity, and Lipschitz data.

    The count scales like c/sqrt(tau) (corner transit time), which seeds
    the boundary brackets; neighbouring v-lines warm-start each other.
    """
    n_lo, n_hi = window
    if n_hi < n_lo:
        raise DomainError("empty symbol window")
    delta = lab.delta_q
    tau_hi_guard = tau_max if tau_max is not None else delta
    # geometric grid: return-map images hug W^u (v of order tau/expansion),
    # so the strip boundaries must be resolved down to tiny v as well
    v_grid = np.geomspace(2e-3 * delta, 0.85 * delta, n_v)

    # calibrate the count law at the middle line
    v_mid = float(v_grid[n_v // 2])
    tau_ref = 0.5 * tau_hi_guard
    c_ref = lab.passage_count(v_mid, tau_ref)
    if c_ref <= 0:
        raise PassageError("calibration probe escaped; rectangle orientation wrong?")
    law_c = c_ref * math.sqrt(tau_ref)

    bounds: dict[int, np.ndarray] = {
        n: np.empty(n_v) for n in range(n_lo - 1, n_hi + 1)}
    prev: dict[int, float] = {}
    for i, v in enumerate(v_grid):
        for n in range(n_lo - 1, n_hi + 1):
            guess = prev.get(n, (law_c / (n + 0.5)) ** 2)
            tau_b = _boundary_with_guess(lab, v, n, guess, tau_hi_guard)
            bounds[n][i] = tau_b
            prev[n] = tau_b
    strips = {}
    for n in range(n_lo, n_hi + 1):
        strips[n] = Strip(n, tau_lo=bounds[n], tau_hi=bounds[n - 1], v_grid=v_grid)

    # images
    images = {}
    for n, st in strips.items():
        pts = []
        for i, v in enumerate(st.v_grid):
            for frac in (0.25, 0.5, 0.75):
                tau = st.tau_lo[i] + frac * (st.tau_hi[i] - st.tau_lo[i])
                try:
                    v2, tau2, c = lab.return_map(v, tau)
                except PassageError:
                    continue
                if c == n:
                    pts.append((v2, tau2))
        images[n] = np.array(pts)

    mu_v = max(st.lipschitz() for st in strips.values())
    mu_h = _image_lipschitz(images)
    fam = StripFamily(lab, strips, images, mu_v=mu_v, mu_h=mu_h)
    fam.diagnostics["hausdorff"] = {
        n: float(np.max(np.abs(im[:, 0]))) if im.size else math.nan
        for n, im in images.items()}
    _check_disjoint(strips)
    return fam


def _image_lipschitz(images: dict) -> float:
    worst = 0.0
    for im in images.values():
        if im.shape[0] < 2:
            continue
        order = np.argsort(im[:, 1])
        tau = im[order, 1]
        v = im[order, 0]
        dt = np.diff(tau)
        keep = dt > 1e-12
        if np.any(keep):
            worst = max(worst, float(np.max(np.abs(np.diff(v)[keep] / dt[keep]))))
    return worst


def _check_disjoint(strips: dict) -> None:
    ns = sorted(strips)
    for a, b in zip(ns[:-1], ns[1:]):
        # strip b is deeper (closer to W^s): its upper boundary must stay
        # below strip a's lower boundary
        if not np.all(strips[b].tau_hi <= strips[a].tau_lo + 1e-15):
            raise PassageError(f"strips {a} and {b} overlap")


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------

@dataclass
class ConeReport:
    eta_u: float
    eta_s: float
    kappa: float
    pass_rate: float
    n_samples: int
    expansion_min: float
    per_strip_expansion: dict
    fd_agreement: float
    expansion_exponent: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (self.pass_rate >= 0.95 and 0.0 < self.kappa < 1.0 - self.eta_u * self.eta_s)


def _jacobian(lab: HorseshoeLab, v: float, tau: float, h_v: float, h_tau: float):
    """Forward-difference Jacobian of the return map in (v_rel, tau)."""
    def f(vv, tt):
        v2, t2, _ = lab.return_map(vv, tt)
        return np.array([v2, t2])

    base = f(v, tau)
    col_v = (f(v + h_v, tau) - base) / h_v
    col_t = (f(v, tau + h_tau) - base) / h_tau
    return np.column_stack([col_v, col_t]), base


def verify_cones(lab: HorseshoeLab, family: StripFamily,
                 eta_grid=(0.05, 0.1, 0.2, 0.3),
                 samples_per_strip: int = 200,
                 richardson_checks: int = 12,
                 cone_rtol: float = 1e-9) -> ConeReport:
    """Sampled cone conditions for the return map over the strip family.

    Cones |V| <= eta |T| (unstable) and |T| <= eta |V| (stable) in the
    (v_rel, tau) tangent basis, 1-norm; expansion kappa^-1 = min growth of
    cone vectors.  Finite differences are Richardson-validated at h and h/4
    on a subsample.  Jacobian sampling runs at cone_rtol: the steps are
    h ~ 1e-7, far above the integration noise at that tolerance.
    """
    sample_jacs = []
    per_strip = {}
    fd_worst = 0.0
    rng = np.random.default_rng(20240601)
    check_budget = richardson_checks
    saved_rtol = lab.rtol
    lab.rtol = cone_rtol
    for n, st in family.strips.items():
        mats = []
        width = float(np.mean(st.tau_hi - st.tau_lo))
        for _ in range(samples_per_strip):
            i = rng.integers(0, len(st.v_grid))
            v = float(st.v_grid[i])
            frac = rng.uniform(0.2, 0.8)
            tau = float(st.tau_lo[i] + frac * (st.tau_hi[i] - st.tau_lo[i]))
            h_tau = 1e-3 * width
            h_v = 1e-4 * lab.delta_q
            try:
                Dpsi, _ = _jacobian(lab, v, tau, h_v, h_tau)
            except (PassageError, DomainError):
                continue
            if check_budget > 0:
                try:
                    D4, _ = _jacobian(lab, v, tau, h_v / 4.0, h_tau / 4.0)
                    dev = np.max(np.abs(D4 - Dpsi)) / max(np.max(np.abs(D4)), 1e-30)
                    fd_worst = max(fd_worst, float(dev))
                    check_budget -= 1
                    Dpsi = D4
                except (PassageError, DomainError):
                    pass
            mats.append(Dpsi)
        per_strip[n] = mats
        sample_jacs.extend(mats)

    if not sample_jacs:
        raise PassageError("no cone samples could be evaluated")

    best = None
    for eta in eta_grid:
        edges_u = [np.array([eta, 1.0]), np.array([-eta, 1.0])]
        edges_s = [np.array([1.0, eta]), np.array([1.0, -eta])]
        n_pass = 0
        expansions = []
        for D in sample_jacs:
            ok = True
            exp_here = math.inf
            for x in edges_u:
                y = D @ x
                if abs(y[0]) > eta * abs(y[1]):
                    ok = False
                    break
                growth = (abs(y[0]) + abs(y[1])) / (abs(x[0]) + abs(x[1]))
                exp_here = min(exp_here, growth)
            if ok:
                Dinv = np.linalg.inv(D)
                for x in edges_s:
                    y = Dinv @ x
                    if abs(y[1]) > eta * abs(y[0]):
                        ok = False
                        break
                    growth = (abs(y[0]) + abs(y[1])) / (abs(x[0]) + abs(x[1]))
                    exp_here = min(exp_here, growth)
            if ok and exp_here > 1.0:
                n_pass += 1
                expansions.append(exp_here)
        rate = n_pass / len(sample_jacs)
        if expansions:
            kappa = 1.0 / float(np.quantile(expansions, 0.02))
        else:
            kappa = math.inf
        cand = (rate, eta, kappa, expansions)
        if best is None or cand[0] > best[0]:
            best = cand

    lab.rtol = saved_rtol
    rate, eta, kappa, expansions = best
    strip_expansion = {}
    for n, mats in per_strip.items():
        if mats:
            vals = []
            for D in mats:
                y = D @ np.array([0.0, 1.0])
                vals.append(abs(y[0]) + abs(y[1]))
            strip_expansion[n] = float(np.median(vals))
    # expansion ~ (strip depth)^(-rho_exp): fit over strips
    ns = sorted(strip_expansion)
    exponent = math.nan
    if len(ns) >= 3:
        depth = np.array([family.strips[n].tau_center for n in ns])
        lam = np.array([strip_expansion[n] for n in ns])
        exponent = -float(np.polyfit(np.log(depth), np.log(lam), 1)[0])
    return ConeReport(
        eta_u=eta, eta_s=eta, kappa=kappa, pass_rate=rate,
        n_samples=len(sample_jacs),
        expansion_min=float(np.min(expansions)) if expansions else math.nan,
        per_strip_expansion=strip_expansion,
        fd_agreement=fd_worst,
        expansion_exponent=exponent,
    )


# ---------------------------------------------------------------------------
# shadowing
# ---------------------------------------------------------------------------

@dataclass
class SymbolItinerary:
    symbols: tuple                # requested window-relative symbols
    base: int                     # physical count of symbol 0
    counts: tuple                 # achieved physical counts
    v0: float
    tau0: float
    residuals: tuple
    orbit_sections: tuple         # (v_rel, tau) after each return

    @property
    def achieved(self) -> bool:
        return all(c == self.base + s for c, s in zip(self.counts, self.symbols))


def _itinerary_counts(lab: HorseshoeLab, v0: float, tau0: float,
                      n_returns: int) -> tuple[list[int], list[tuple[float, float]]]:
    """Counts of successive returns; -1 marks an escape (itinerary ends)."""
    counts = []
    pts = []
    v, tau = v0, tau0
    for _ in range(n_returns):
        try:
            v, tau, c = lab.return_map(v, tau)
        except (PassageError, DomainError):
            counts.append(-1)
            pts.append((math.nan, math.nan))
            break
        counts.append(c)
        pts.append((v, tau))
    while len(counts) < n_returns:
        counts.append(-1)
        pts.append((math.nan, math.nan))
    return counts, pts


def shadow_orbit(lab: HorseshoeLab, family: StripFamily, symbols,
                 tol: float = 1e-9) -> SymbolItinerary:
    """Nested-interval bisection selecting prescribed excursion counts.

    Symbols are window-relative: symbol s means base + s completed angle
    periods, where base is the smallest count in the verified window.  At
    each depth the bisection aims the (monotone, strongly expanded) image
    angle offset into the target strip's window, then the recount oracle
    verifies the achieved physical counts.
    """
    symbols = tuple(int(s) for s in symbols)
    if any(s < 1 for s in symbols):
        raise DomainError("symbols are positive integers (1 = first strip)")
    ns = sorted(family.strips)
    base = ns[0]
    targets = [base + s - 1 for s in symbols]
    for t in targets:
        if t not in family.strips:
            raise DomainError(f"symbol target {t} outside the verified window {ns}")

    v0 = float(np.mean(family.strips[targets[0]].v_grid))
    st0 = family.strips[targets[0]]
    lo = float(np.interp(v0, st0.v_grid, st0.tau_lo))
    hi = float(np.interp(v0, st0.v_grid, st0.tau_hi))
    width0 = hi - lo

    def image_raw(tau, d):
        """(v_rel, raw angle) after d-1 returns; continuous and monotone in
        tau within the current bracket."""
        v_raw, theta = lab.point(v0, tau)
        th_raw = theta
        for _ in range(d - 1):
            v_raw, th_raw, _ = lab.return_map_raw(v_raw, th_raw)
        v_rel = lab.s_v * (v_raw - float(lab.wu_local(th_raw)))
        return v_rel, th_raw

    def chain_counts(tau, d):
        counts, _ = _itinerary_counts(lab, v0, tau, d)
        return counts

    residuals = []
    for depth in range(1, len(symbols) + 1):
        want = targets[depth - 1]
        strip = family.strips[want]
        t_lo = image_raw(lo, depth)[1]
        t_hi = image_raw(hi, depth)[1]
        slope = (t_hi - t_lo) / (hi - lo)
        v_img = image_raw(0.5 * (lo + hi), depth)[0]
        v_img = min(max(v_img, strip.v_grid[0]), strip.v_grid[-1])
        w_lo = float(np.interp(v_img, strip.v_grid, strip.tau_lo))
        w_hi = float(np.interp(v_img, strip.v_grid, strip.tau_hi))
        width = w_hi - w_lo

        def aim(theta_target, tol_angle):
            """tau in [lo, hi] whose depth-image raw angle hits theta_target.

            The image sweep covers just under one winding; the matching
            2pi-branch is selected, and a target in the uncovered sliver is
            clamped to the nearest sweep edge (the count feedback walks the
            remaining windows)."""
            t_a, t_b = t_lo, t_hi
            lo_t, hi_t = (t_a, t_b) if t_a < t_b else (t_b, t_a)
            tt = theta_target + _TWO_PI * round((0.5 * (lo_t + hi_t)
                                                 - theta_target) / _TWO_PI)
            if not lo_t <= tt <= hi_t:
                for cand_t in (tt - _TWO_PI, tt + _TWO_PI):
                    if lo_t <= cand_t <= hi_t:
                        tt = cand_t
                        break
                else:
                    inset = 1e-3 * (hi_t - lo_t)
                    tt = min(max(tt, lo_t + inset), hi_t - inset)
            a, b = lo, hi
            fa = t_a - tt
            for _ in range(200):
                mid = 0.5 * (a + b)
                if b - a <= max(1e-15 * abs(mid), 1e-17):
                    return mid
                fm = image_raw(mid, depth)[1] - tt
                if abs(fm) <= tol_angle:
                    return mid
                if fa * fm <= 0:
                    b = mid
                else:
                    a, fa = mid, fm
            return 0.5 * (a + b)

        # the interpolated window can be several widths off in tau, but each
        # count step is exactly one window: bracketed integer feedback on the
        # requested window coordinate w_t converges in a few rounds
        th_anchor = lab.branch.angle_at(min(max(v_img, lab.branch.v_rel[0]),
                                            lab.branch.v_rel[-1]))
        w_t = 0.5 * (w_lo + w_hi)
        w_deep = None      # too deep (count > want or escape): need larger w
        w_shallow = None   # too shallow (count < want): need smaller w
        tau_c = None
        for _ in range(24):
            if depth == 1:
                cand = min(max(w_t, 1e-3 * lab.delta_q), lab.delta_q)
            else:
                cand = aim(th_anchor + lab.s_tau * w_t, width / 8.0)
            counts = chain_counts(cand, depth)
            if counts[:depth - 1] != targets[:depth - 1]:
                raise ShadowingError(
                    f"depth {depth}: aim left the previous windows",
                    achieved=counts[:depth - 1])
            c = counts[depth - 1]
            if c == want:
                tau_c = cand
                break
            too_deep = (c < 0) or (c > want)
            if too_deep:
                w_deep = w_t if w_deep is None else max(w_deep, w_t)
            else:
                w_shallow = w_t if w_shallow is None else min(w_shallow, w_t)
            if w_deep is not None and w_shallow is not None:
                w_t = 0.5 * (w_deep + w_shallow)
            else:
                w_t += (2.0 * width if c < 0 else (c - want) * width)
        if tau_c is None:
            raise ShadowingError(
                f"depth {depth}: count feedback did not converge",
                achieved=targets[:depth - 1])

        # 3) exact edges by count bisection around the landed point
        tau_step = 1.5 * width / abs(slope) if depth > 1 else 1.5 * width
        edges = []
        for direction in (-1.0, +1.0):
            out = tau_c
            ok_in = tau_c
            for _ in range(40):
                out = out + direction * tau_step
                cc = chain_counts(out, depth)
                if cc[:depth] != targets[:depth]:
                    break
                ok_in = out
            else:
                raise ShadowingError(f"depth {depth}: window edge not found",
                                     achieved=targets[:depth])
            a_in, b_out = ok_in, out
            for _ in range(80):
                mid = 0.5 * (a_in + b_out)
                if abs(b_out - a_in) <= max(1e-15 * abs(mid), 1e-17):
                    break
                if chain_counts(mid, depth)[:depth] == targets[:depth]:
                    a_in = mid
                else:
                    b_out = mid
            edges.append(a_in)
        lo, hi = min(edges), max(edges)
        if hi - lo <= 0:
            raise ShadowingError(f"depth {depth}: empty window",
                                 achieved=targets[:depth])
        residuals.append(hi - lo)

    tau_star = 0.5 * (lo + hi)
    counts, pts = _itinerary_counts(lab, v0, tau_star, len(symbols))
    return SymbolItinerary(symbols=symbols, base=base, counts=tuple(counts),
                           v0=v0, tau0=tau_star,
                           residuals=tuple(residuals),
                           orbit_sections=tuple(pts))


# ---------------------------------------------------------------------------
# oscillatory orbits
# ---------------------------------------------------------------------------

def oscillatory_demo(params: ModelParams, k: int = 3, z_ret: float = 8.0,
                     lab: HorseshoeLab | None = None,
                     family: StripFamily | None = None,
                     window_span: int | None = None) -> dict:
    """Orbit with k strictly increasing height maxima, returning below z_ret.

    Chooses strictly increasing window-relative symbols (0, 1, ..., k-1),
    shadows them, lifts the section point to the full system, and converts
    to Cartesian coordinates.
    """
    from .integrate import IntegratorConfig, integrate_mcgehee
    from .model import from_mcgehee

    if lab is None:
        lab = setup_horseshoe(params)
    if family is None:
        span = window_span if window_span is not None else k
        family = build_strips(lab, (lab.base_count + 1, lab.base_count + span))
    symbols = tuple(range(1, k + 1))
    if sorted(family.strips)[0] + k - 1 not in family.strips:
        raise DomainError("strip window too small for the requested excursions")
    itinerary = shadow_orbit(lab, family, symbols)
    if not itinerary.achieved:
        raise ShadowingError("oscillatory itinerary not achieved",
                             achieved=itinerary.counts)

    # lift to the full system and integrate in physical time
    v_raw, theta = lab.point(itinerary.v0, itinerary.tau0)
    q, p = lab.chart.from_chart(lab.chart.a, v_raw)
    J = action_offset_closed(q, p, theta, params)
    y0 = np.array([q, p, math.fmod(theta, _TWO_PI), J])
    total_angle = sum(itinerary.counts) * _TWO_PI + 6.0 * _TWO_PI
    t_end = 1.15 * total_angle / (params.nu_I0)
    traj = integrate_mcgehee(params, y0, (0.0, t_end),
                             IntegratorConfig(rel_tol=1e-11, abs_tol=1e-12))
    ts = np.linspace(0.0, t_end, 6000)
    states = traj(ts)
    qs = states[0]
    alpha = params.physical.alpha
    with np.errstate(divide="ignore"):
        zs = -np.log(2.0 * qs ** 2) / alpha

    # height maxima = interior q-minima below the section scale
    maxima = []
    between_ok = True
    idx_max = []
    for j in range(1, len(ts) - 1):
        if qs[j] < qs[j - 1] and qs[j] < qs[j + 1] and qs[j] < 0.05:
            maxima.append(float(zs[j]))
            idx_max.append(j)
    for a, b in zip(idx_max[:-1], idx_max[1:]):
        if float(np.min(zs[a:b])) > z_ret:
            between_ok = False
    xs = params.physical.a * np.unwrap(states[2]) / _TWO_PI
    cart = {
        "t": ts, "z": zs, "x": xs,
        "p_x": params.physical.C * (params.I0 + states[3]),
        "p_z": params.physical.B * states[1],
    }
    return {
        "itinerary": itinerary,
        "maxima": maxima,
        "strictly_increasing": all(b > a for a, b in zip(maxima[:-1], maxima[1:])),
        "returns_below": between_ok,
        "orbit": cart,
        "initial_state": y0,
    }
