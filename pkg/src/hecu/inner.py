"""Inner equation near the separatrix singularity and the constants f_k.

Blowing up u = i at scale 1/(nu I0) and letting nu I0 -> infinity turns the
Hamilton-Jacobi equation into the frequency-free inner equation

    d_theta T + (nu/2)(d_theta T)^2 + 2 v^2 (d_v T)^2
        - 1/(8 v^2) - eps V(theta)/(8 v^2) = 0.

Writing T = T0 + T1 with T0 = -1/(4v), T1 solves L_in T1 = F_in(T1) with
L_in = d_v + d_theta, and is found by Picard iteration of
T1 <- G_in(F_in(T1)) whose first iterate is the inner Melnikov layer L+_in.
The transport G_in integrates along horizontal shifts v + s, s <= 0, so the
solver works on horizontal lines Im v = -depth, which the transport leaves
invariant.  The second solution is the conjugation image
T-(v, theta) = -conj(T+(-conj v, -conj theta)); on the imaginary axis the
mode-k difference is

    Delta_k(-i d) = [inner Melnikov part, closed form: -(pi k eps V_k/4) e^{-kd}]
                    + 2 Re T2_k(-i d),

and f_k = Delta_k(v) e^{ikv} extrapolated to depth infinity (the residual
straightening change is O(1/|v|), so f_k(d) = f_k + c1/d + c2/d^2 + ...).
Only the exponentially small T2 part is measured numerically; the closed
Melnikov part never suffers cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fourier import ModeField, geometric_grid, ibp_tail, transport
from .manifolds import NonContractionError
from .model import DomainError, ModelParams

_MIN_DEPTH = 8.0


def t0_inner(v):
    """Leading inner profile T0(v) = -1/(4v)."""
    v = np.asarray(v, dtype=complex)
    if np.any(v == 0):
        raise DomainError("T0 has a pole at v = 0")
    out = -1.0 / (4.0 * v)
    return out if out.ndim else complex(out)


def inner_line(depth: float, x_end: float = 2.0, h0: float = 0.01,
               near_span: float | None = None, x_far: float = -2.0e4,
               growth: float = 1.05) -> np.ndarray:
    """Real offsets x of the solver line v = x - i*depth."""
    span = near_span if near_span is not None else max(4.0 * depth, 40.0)
    return geometric_grid(x_end, h0=h0, near_span=span, x_far=x_far, growth=growth)


def _source_profile(depth: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """1/(8 v^2) and its x-derivative on the line."""
    v = x - 1j * depth
    prof = 1.0 / (8.0 * v ** 2)
    dprof = -2.0 / (8.0 * v ** 3)
    return prof, dprof


def _primary_source(params: ModelParams, M: int, depth: float,
                    x: np.ndarray) -> ModeField:
    """eps V(theta) / (8 v^2) as a mode field."""
    prof, dprof = _source_profile(depth, x)
    out = ModeField(M, x)
    for k in range(-M, M + 1):
        vk = params.epsilon * params.series.fourier_coeff(k)
        if vk != 0:
            out.set_coeff(k, vk * prof, vk * dprof)
    return out


def _transport_inner(F: ModeField, depth: float) -> ModeField:
    """G_in applied mode by mode (frequency k), derivative tracked exactly."""
    x = F.x
    out = ModeField(F.M, x)
    for k in range(-F.M, F.M + 1):
        fvals = F.values[k + F.M]
        if not np.any(fvals):
            continue
        fdu = F.du[k + F.M]
        if k != 0:
            fpp0 = (fdu[1] - fdu[0]) / (x[1] - x[0])
            tail = ibp_tail(fvals[0], fdu[0], fpp0, float(k), x[0])
        else:
            # sources decay at least like |v|^-4; power-law tail estimate
            tail = fvals[0] * abs(x[0]) / 3.0
        g = transport(x, fvals, fdu, float(k), tail=tail)
        out.set_coeff(k, g, fvals - 1j * k * g)
    return out


def _inner_source(t1: ModeField, prev_src: ModeField, primary: ModeField,
                  params: ModelParams, depth: float) -> ModeField:
    """F_in(T1) = -(nu/2)(d_theta T1)^2 - 2 v^2 (d_v T1)^2 + eps V/(8 v^2)."""
    M = t1.M
    x = t1.x
    ks = np.arange(-M, M + 1)[:, None]
    dv = ModeField(M, x, t1.du.copy(), prev_src.du - 1j * ks * t1.du)
    dth = t1.dtheta()
    v = x - 1j * depth
    v2 = 2.0 * v ** 2
    dv2 = 4.0 * v
    t_v = dv.mul(dv).scale_profile(v2, dv2)
    t_th = dth.mul(dth)
    return ModeField(M, x,
                     -0.5 * params.nu * t_th.values - t_v.values + primary.values,
                     -0.5 * params.nu * t_th.du - t_v.du + primary.du)


@dataclass
class InnerSolution:
    """Converged T1 = L+_in + T2 on one horizontal line."""

    params: ModelParams
    depth: float
    x: np.ndarray
    t1: ModeField
    melnikov: ModeField      # first iterate L+_in
    residual: float
    contraction_ratio: float
    iterations: int
    diagnostics: dict = field(default_factory=dict)

    @property
    def t2(self) -> ModeField:
        return self.t1.axpy(-1.0, self.melnikov)


def solve_inner(params: ModelParams, depth: float = 12.0, modes: int = 8,
                tol: float = 1e-12, max_iter: int = 60,
                x_end: float = 2.0, h0: float = 0.01) -> InnerSolution:
    """Picard solution of the inner equation on the line Im v = -depth.

    The line start acts as the paper's distance kappa; depths below 8 are
    rejected (the contraction constant degrades like 1/kappa).
    """
    if depth < _MIN_DEPTH:
        raise DomainError(f"depth must be >= {_MIN_DEPTH} (kappa too small)")
    x = inner_line(depth, x_end=x_end, h0=h0)
    M = int(modes)
    primary = _primary_source(params, M, depth, x)

    t1 = ModeField(M, x)
    src = _inner_source(t1, ModeField(M, x), primary, params, depth)
    melnikov = None
    ratio = math.nan
    prev_delta = math.nan
    for it in range(1, max_iter + 1):
        t1_new = _transport_inner(src, depth)
        if it == 1:
            melnikov = t1_new.copy()
        delta = t1_new.axpy(-1.0, t1).sup_norm()
        src_new = _inner_source(t1_new, src, primary, params, depth)
        residual = src_new.axpy(-1.0, src).sup_norm()
        t1 = t1_new
        src = src_new
        if not math.isnan(prev_delta) and prev_delta > 0:
            ratio = delta / prev_delta
            if ratio >= 0.9:
                raise NonContractionError(
                    f"inner Picard ratio {ratio:.3f} >= 0.9 (depth too small?)")
        prev_delta = delta
        if residual <= tol:
            sol = InnerSolution(params, depth, x, t1, melnikov,
                                residual, ratio, it)
            sol.diagnostics["theta_V"] = theta_v_constant(sol)
            return sol
    raise NonContractionError(
        f"inner iteration did not reach tol={tol} in {max_iter} steps "
        f"(residual {residual:.3e})")


def theta_v_constant(sol: InnerSolution) -> float:
    """Grid realization of Theta_V = (||L||_2^2 + ||d_theta L||_2^2 + ||d_v L||_3^2)^(1/2).

    Norms ||f||_r = sum_k sup_v |v^r f_k(v)| on the solver line.
    """
    x = sol.x
    v = x - 1j * sol.depth
    L = sol.melnikov
    M = L.M
    n2 = 0.0
    n2t = 0.0
    n3 = 0.0
    for k in range(-M, M + 1):
        vals = L.values[k + M]
        if not np.any(vals):
            continue
        n2 += np.max(np.abs(v ** 2 * vals))
        n2t += abs(k) * np.max(np.abs(v ** 2 * vals))
        n3 += np.max(np.abs(v ** 3 * L.du[k + M]))
    return float(math.sqrt(n2 ** 2 + n2t ** 2 + n3 ** 2))


def t2_weighted_bound(sol: InnerSolution) -> float:
    """K1 with floor-norm |v|^3-weighted T2 <= K1 Theta_V^2."""
    x = sol.x
    v = x - 1j * sol.depth
    t2 = sol.t2
    total = 0.0
    for k in range(-t2.M, t2.M + 1):
        total += float(np.max(np.abs(v ** 3 * t2.values[k + t2.M])))
    theta_v = sol.diagnostics.get("theta_V") or theta_v_constant(sol)
    return total / theta_v ** 2 if theta_v > 0 else 0.0


def l_in_plus_modes(params: ModelParams, depth: float, modes: int = 8,
                    x_end: float = 2.0, h0: float = 0.01) -> ModeField:
    """The inner Melnikov layer L+_in on a line, without solving the fixed point."""
    x = inner_line(depth, x_end=x_end, h0=h0)
    primary = _primary_source(params, int(modes), depth, x)
    return _transport_inner(primary, depth)


def l_in_plus(params: ModelParams, v: complex, theta: float,
              modes: int = 8) -> complex:
    """Pointwise L+_in(v, theta) for Im v < 0 (evaluated on its line)."""
    if v.imag >= 0:
        raise DomainError("evaluation ray must lie in the lower half-plane")
    depth = -v.imag
    field_ = l_in_plus_modes(params, depth)
    x = inner_line(depth)
    out = 0.0 + 0.0j
    for k in range(-field_.M, field_.M + 1):
        val, _ = field_.interp_coeff(k, v.real)
        out += val * np.exp(1j * k * theta)
    return complex(out)


def l_in_minus(params: ModelParams, v: complex, theta: float,
               modes: int = 8) -> complex:
    """L-_in(v, theta) = -conj(L+_in(-conj v, -conj theta))."""
    vv = -np.conj(v)
    tt = -np.conj(theta)
    return -np.conj(l_in_plus(params, complex(vv), complex(tt), modes))


def inner_melnikov_difference_mode(params: ModelParams, k: int, v: complex) -> complex:
    """Closed form of (L+_in - L-_in) mode k for Im v < 0:
    -(pi k eps V_k / 4) e^{-i k v}."""
    if k <= 0:
        return 0.0 + 0.0j
    vk = params.epsilon * params.series.fourier_coeff(k)
    return complex(-(math.pi * k * vk / 4.0) * np.exp(-1j * k * v))


# default extraction depths; mode k only uses depths with k*d below the
# double-precision amplification ceiling (the difference carries e^{-k d})
DEFAULT_DEPTHS = (8.0, 9.0, 10.0, 11.0, 12.0, 14.0, 16.0)
_KD_CEILING = 21.0


@dataclass
class InnerDifference:
    """f_k extraction with extrapolation diagnostics."""

    params: ModelParams
    depths: tuple
    f: dict                      # k -> complex
    err: dict                    # k -> float, extrapolation error estimate
    raw: dict                    # k -> array of f_k(depth) before extrapolation
    low_mode_decay: dict         # k <= 0 -> max |Delta_k| over depths
    diagnostics: dict = field(default_factory=dict)

    @property
    def f1(self) -> complex:
        return self.f[1]


def _fk_at_depth(sol: InnerSolution, k: int, x_off: float = 0.0) -> complex:
    """f_k estimate Delta_k(v) e^{ikv} at v = x_off - i*depth.

    The Melnikov part enters through its closed form (no cancellation);
    the T2 part combines the solved line with its conjugation mirror.
    """
    d = sol.depth
    v = x_off - 1j * d
    t2 = sol.t2
    val_p, _ = t2.interp_coeff(k, x_off)
    val_m, _ = t2.interp_coeff(k, -x_off)
    # T-(v) mode k = -conj(T+ mode k at -conj v); on the line -conj v = -x - i d
    delta_t2 = val_p + np.conj(val_m)
    vk = sol.params.epsilon * sol.params.series.fourier_coeff(k)
    closed = -(math.pi * k * vk / 4.0) if k > 0 else 0.0
    return complex(closed + delta_t2 * np.exp(1j * k * v))


def extract_fk(params: ModelParams, ks=(1, 2), depths=DEFAULT_DEPTHS,
               modes: int = 8, tol: float = 1e-12,
               solutions: dict | None = None) -> InnerDifference:
    """Estimate f_k from the inner difference at several depths.

    f_k(depth) is fitted against 1 + c1/d + c2/d^2 (the straightening
    change is O(1/|v|)); the error bar is the fit residual plus the last
    correction term.  Mode k only uses depths with k*d <= 21, since the
    measured part of the difference is reconstructed through a factor
    e^{k d} that amplifies solver noise.  Modes k <= 0 are checked to
    decay with depth.
    """
    if min(depths) < _MIN_DEPTH:
        raise DomainError("extraction depths must be >= 8")
    sols = {}
    for d in depths:
        if solutions is not None and d in solutions:
            sols[d] = solutions[d]
        else:
            sols[d] = solve_inner(params, depth=float(d), modes=modes, tol=tol)

    f = {}
    err = {}
    raw = {}
    for k in ks:
        usable = [d for d in depths if k * d <= _KD_CEILING]
        if not usable:
            usable = sorted(depths)[:3]
        vals = np.array([_fk_at_depth(sols[d], k) for d in usable])
        raw[k] = vals
        dd = np.array([float(d) for d in usable])
        n_basis = min(3, len(usable))
        A = np.column_stack([dd ** -j for j in range(n_basis)])
        coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
        fit = A @ coef
        resid = float(np.max(np.abs(vals - fit)))
        f[k] = complex(coef[0])
        tail_term = abs(coef[-1]) / float(np.max(dd)) ** n_basis if n_basis > 1 else 0.0
        err[k] = resid + tail_term
        if k >= 2:
            # modes k >= 2 are contaminated by the straightening change
            # mixing f_1 upward with weight ~ e^{(k-1) d}/d (the paper's
            # bound carries e^{k kappa} for the same reason); the spread of
            # the raw values is the honest uncertainty
            spread = float(np.max(np.abs(vals - vals[0])))
            f[k] = complex(vals[0])
            err[k] = max(err[k], spread)
    low = {}
    for k in range(-max(ks), 1):
        mags = []
        for d in depths:
            # for k <= 0 the closed Melnikov part vanishes; the measured
            # difference on the axis is 2 Re T1_k(-i d)
            val, _ = sols[d].t1.interp_coeff(k, 0.0)
            mags.append(float(abs(2.0 * val.real)))
        low[k] = mags
    im_ratio = abs(f[1].imag) / abs(f[1]) if 1 in f and f[1] != 0 else math.nan
    diagnostics = {"im_f1_ratio": im_ratio}
    if 1 in f:
        # off-axis consistency: away from the imaginary axis the raw
        # estimates acquire imaginary parts that must extrapolate away
        usable = [d for d in depths if d <= _KD_CEILING]
        vals = np.array([_fk_at_depth(sols[d], 1, x_off=0.7) for d in usable])
        dd = np.array([float(d) for d in usable])
        A = np.column_stack([np.ones_like(dd), 1.0 / dd, 1.0 / dd ** 2])
        coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
        diagnostics["im_f1_offaxis_ratio"] = float(abs(coef[0].imag) / abs(f[1]))
    out = InnerDifference(params, tuple(depths), f, err, raw, low, diagnostics)
    return out


@dataclass(frozen=True)
class F1ScanRow:
    epsilon: float
    f1: complex
    err: float


def f1_epsilon_scan(eps_values, nu_I0: float = 6.0, modes: int = 8,
                    depths=DEFAULT_DEPTHS) -> dict:
    """Table eps -> f1(eps) with the slope at 0 and quadratic residual.

    The inner equation depends on nu I0 only through the torus frequency
    nu; nu_I0 picks the ModelParams wrapper.
    """
    from .model import params_for_nu_I0
    rows = []
    for eps in eps_values:
        if not 0 < eps <= 1.0:
            raise DomainError("epsilon values must lie in (0, 1]")
        params = params_for_nu_I0(nu_I0, epsilon=float(eps))
        diff = extract_fk(params, ks=(1,), depths=depths, modes=modes)
        rows.append(F1ScanRow(float(eps), diff.f1, diff.err[1]))
    eps_arr = np.array([r.epsilon for r in rows])
    f1_arr = np.array([r.f1.real for r in rows])
    A = np.column_stack([eps_arr, eps_arr ** 2])
    coef, *_ = np.linalg.lstsq(A, f1_arr, rcond=None)
    resid = float(np.max(np.abs(f1_arr - A @ coef)))
    return {
        "rows": rows,
        "slope": float(coef[0]),
        "quadratic": float(coef[1]),
        "residual": resid,
    }
