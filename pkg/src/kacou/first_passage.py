"""First-passage Laplace transforms: closed forms per regime, an independent
integral-equation oracle, and an ODE-residual checker.

The closed forms are hypergeometric ratios valid on the domains where the
underlying power series converge.  Queries outside those domains raise
:class:`OutOfDomainError` instead of extrapolating; the renewal-equation
oracle covers every regime (for q > 0) and is the cross-check for all of
them.

Symmetries used for dispatch: relabelling the chain states and reflecting
space are both first-passage preserving, so every supported query is mapped
onto a canonical orientation (lower attractor first; zero-reversion state
last with unit positive drift) before a formula is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateModelError,
    OracleError,
    OutOfDomainError,
    ParameterError,
    UnsupportedRegimeError,
)
from .model import (
    KacOuModel,
    RegimeTag,
    classify_regime,
    derived_params,
    hyper_args,
    reflect,
    swap_states,
    xi0,
    xi1,
)
from .quadrature import gauss_legendre
from .simulate import _hit_time_vec, _phi_vec
from .specfun import LogValue, gauss_2f1_log, gauss_2f1_pair_log, kummer_1f1_log

__all__ = [
    "FptQuery",
    "laplace_fpt",
    "running_extremum_prob",
    "fpt_integral_oracle",
    "fpt_oracle_curve",
    "fpt_ode_residual",
]

KERNEL_CUT = 16.0 * math.log(10.0)  # integrate until exp(-(q+lam)*tau) < 1e-16
ORACLE_CORE_NODES = 2001
ORACLE_TAIL_NODES = 2000
ORACLE_MAX_ITER = 10_000
_TAIL_RATIO_CAP = 1e13
_QUAD_PANELS = 18
_QUAD_ORDER = 6


@dataclass(frozen=True)
class FptQuery:
    """A first-passage Laplace query: rate q, start x, target y, start state."""

    q: float
    x: float
    y: float
    initial_state: int

    def __post_init__(self):
        if self.x == self.y:
            raise ParameterError("first-passage query requires x != y")
        if self.q < 0.0:
            raise ParameterError(f"q must be >= 0, got {self.q}")
        if self.initial_state not in (0, 1):
            raise ParameterError(f"initial_state must be 0 or 1, got {self.initial_state}")


def _hyper_F(hp, b2: float, z: float):
    """Log-scaled F(b0,b1;b2;z), through the real roots or the (sum, product)
    recurrence when the roots are a conjugate pair."""
    if hp.is_real_pair:
        return gauss_2f1_log(hp.b0, hp.b1, b2, z)
    return gauss_2f1_pair_log(hp.pair_sum, hp.pair_product, b2, z)


def _hyper_ratio(hp, b2_num: float, z_num: float, b2_den: float, z_den: float) -> float:
    """F(b0,b1;b2_num;z_num) / F(b0,b1;b2_den;z_den), formed in log space so
    large-parameter evaluations (big q) stay finite."""
    return _hyper_F(hp, b2_num, z_num).ratio(_hyper_F(hp, b2_den, z_den))


def _attracting_value(model, q, x, y, state):
    d = derived_params(model)
    r0, r1 = d.rho0, d.rho1
    l0, l1 = model.rates.lambda0, model.rates.lambda1
    hp = hyper_args(q, model)
    if x < y:
        if not (r0 <= y < r1):
            raise OutOfDomainError(
                f"attracting x<y formulas need rho0 <= y < rho1, got y={y}, rho=({r0},{r1})"
            )
        if not (2.0 * r0 - r1 < x):
            raise OutOfDomainError(
                f"series converges only for x > 2*rho0 - rho1 = {2 * r0 - r1}, got x={x}"
            )
        zx, zy = xi0(x, r0, r1), xi0(y, r0, r1)
        if state == 1:
            return _hyper_ratio(hp, hp.beta0, zx, hp.beta0, zy)
        return l0 / (q + l0) * _hyper_ratio(hp, 1.0 + hp.beta0, zx, hp.beta0, zy)
    # x > y: mirrored series in xi1
    if not (r0 < y <= r1):
        raise OutOfDomainError(
            f"attracting x>y formulas need rho0 < y <= rho1, got y={y}, rho=({r0},{r1})"
        )
    if not (x < 2.0 * r1 - r0):
        raise OutOfDomainError(
            f"series converges only for x < 2*rho1 - rho0 = {2 * r1 - r0}, got x={x}"
        )
    zx, zy = xi1(x, r0, r1), xi1(y, r0, r1)
    if state == 0:
        return _hyper_ratio(hp, hp.beta1, zx, hp.beta1, zy)
    return l1 / (q + l1) * _hyper_ratio(hp, 1.0 + hp.beta1, zx, hp.beta1, zy)


def _ar_decaying_pair(hp, z):
    """The solution branch of the transform ODE system that decays toward
    -infinity, evaluated through the hypergeometric solution at the point at
    infinity (argument 1/(1-z), inside the unit interval for every z < 1).

    Returns log-scaled (G, H) with ell0 proportional to G/beta1(0) and ell1
    to H.
    """
    b0, b1 = hp.b0, hp.b1
    c3 = b0 - b1 + 1.0
    u = 1.0 / (1.0 - z)
    f1 = gauss_2f1_log(b0, hp.beta0 - b1, c3, u)
    f2 = gauss_2f1_log(b0 + 1.0, hp.beta0 - b1 + 1.0, c3 + 1.0, u)
    kappa = b0 * (hp.beta0 - b1) / c3
    log_pref = -b0 * math.log1p(-z)
    g_val = f1.scaled(hp.beta1 - b0).add(f2.scaled(-kappa * u))
    g_val = LogValue(g_val.log + log_pref, g_val.sign, g_val.terms_used)
    h_val = LogValue(f1.log + log_pref, f1.sign, f1.terms_used)
    return g_val, h_val


def _attraction_repulsion_value(model, q, x, y, state):
    # canonical orientation: gamma0 > 0 > gamma1 and rho0 < rho1
    d = derived_params(model)
    r0, r1 = d.rho0, d.rho1
    l0, l1 = model.rates.lambda0, model.rates.lambda1
    g1 = model.coeffs[1].gamma
    if not (y < r0):
        raise OutOfDomainError(
            f"attraction-repulsion formulas need the threshold below rho0={r0}, got y={y}"
        )
    hp = hyper_args(q, model)
    # the root discriminant is bounded below by (alpha0+alpha1)^2 when the
    # reversion rates have opposite signs, so the pair is always real here
    if x < y:
        beta1_0 = l1 / g1
        gx, hx = _ar_decaying_pair(hp, xi0(x, r0, r1))
        gy, _ = _ar_decaying_pair(hp, xi0(y, r0, r1))
        if state == 0:
            return gx.ratio(gy)
        return hx.scaled(beta1_0).ratio(gy)
    # x > y: the transforms are smooth across rho0 (the no-switch hit time is
    # infinite on both sides), which selects the series branch regular there,
    # normalized by ell1 -> 1 as x decreases to y.
    if not (2.0 * r0 - r1 < y):
        raise OutOfDomainError(
            f"series converges only for y > 2*rho0 - rho1 = {2 * r0 - r1}, got y={y}"
        )
    if not (x < r1):
        raise OutOfDomainError(
            f"x>y branch is valid below the repelling level rho1 = {r1}, got x={x}"
        )
    zx, zy = xi0(x, r0, r1), xi0(y, r0, r1)
    if state == 1:
        return _hyper_ratio(hp, hp.beta0, zx, hp.beta0, zy)
    return l0 / (q + l0) * _hyper_ratio(hp, 1.0 + hp.beta0, zx, hp.beta0, zy)


def _non_strict_value(model, q, x, y, state):
    # canonical: gamma1 = 0, a1 = 1, gamma0 > 0, x < y
    c0 = model.coeffs[0]
    l0, l1 = model.rates.lambda0, model.rates.lambda1
    rho = c0.a / c0.gamma
    if not (y > rho):
        # below the attractor both no-switch hit times are finite and both
        # transforms reach 1 at the boundary; the confluent branch regular at
        # the attractor no longer solves that problem
        raise OutOfDomainError(
            f"non-strict closed form needs the threshold above rho = {rho}, got y={y}"
        )
    beta0 = (q + l0) / c0.gamma
    delta = ((q + l0) * (q + l1) - l0 * l1) / (c0.gamma * (q + l1))
    ux = (x - rho) * (q + l1)
    uy = (y - rho) * (q + l1)
    den = kummer_1f1_log(delta, beta0, uy)
    if state == 1:
        return kummer_1f1_log(delta, beta0, ux).ratio(den)
    return l0 / (q + l0) * kummer_1f1_log(delta, 1.0 + beta0, ux).ratio(den)


def _finalize(value: float) -> float:
    # 0.0 is reachable only by underflow at extreme killing rates
    if not math.isfinite(value) or value < 0.0 or value > 1.0 + 1e-9:
        raise OutOfDomainError(f"closed form produced out-of-range weight {value}")
    return min(value, 1.0)


def laplace_fpt(query: FptQuery, model: KacOuModel) -> float:
    """Closed-form E[exp(-q T(x,y))] for the query's regime and branch.

    Raises OutOfDomainError when (x, y) leaves the stated validity domain,
    DegenerateModelError when the attractor levels coincide, and
    UnsupportedRegimeError when no closed form exists; those cases belong to
    :func:`fpt_integral_oracle`.
    """
    regime = classify_regime(model)
    q, x, y, state = query.q, query.x, query.y, query.initial_state
    tag = regime.tag

    if tag is RegimeTag.DEGENERATE_EQUAL_RHO:
        raise DegenerateModelError(
            "equal attractor levels: no hypergeometric closed form, use fpt_integral_oracle"
        )
    if tag is RegimeTag.ATTRACTING_STRICT:
        d = derived_params(model)
        if d.rho0 > d.rho1:
            model, state = swap_states(model), 1 - state
        return _finalize(_attracting_value(model, q, x, y, state))
    if tag in (RegimeTag.ATTRACTION_REPULSION_01, RegimeTag.ATTRACTION_REPULSION_10):
        if tag is RegimeTag.ATTRACTION_REPULSION_10:
            model, state = swap_states(model), 1 - state
        d = derived_params(model)
        if d.rho0 > d.rho1:
            model, x, y = reflect(model), -x, -y
        return _finalize(_attraction_repulsion_value(model, q, x, y, state))
    if tag is RegimeTag.NON_STRICT_ATTRACTING:
        if regime.zero_state == 0:
            model, state = swap_states(model), 1 - state
        a1 = model.coeffs[1].a
        # x -> x/a1 rescales (and reflects, when a1 < 0) onto unit drift;
        # first-passage times are invariant under this bijection.
        model = KacOuModel.from_values(
            model.rates.lambda0,
            model.rates.lambda1,
            model.coeffs[0].a / a1,
            1.0,
            model.coeffs[0].b,
            model.coeffs[1].b,
            model.coeffs[0].gamma,
            0.0,
        )
        x, y = x / a1, y / a1
        if not (x < y):
            raise OutOfDomainError(
                "non-strict closed form covers passages in the linear state's drift "
                "direction only; use fpt_integral_oracle for the other side"
            )
        return _finalize(_non_strict_value(model, q, x, y, state))
    raise UnsupportedRegimeError(
        f"no closed-form first-passage transform for regime {tag.value}; "
        "use fpt_integral_oracle or simulation"
    )


def running_extremum_prob(q: float, x: float, y: float, initial_state: int, model: KacOuModel) -> float:
    """P{T(x,y) < e_q} for an independent Exp(q) time e_q.

    Equals the Laplace transform at q; read it as the CDF of the running
    minimum at e_q when x > y and the complementary CDF of the running
    maximum when x < y.
    """
    if q <= 0.0:
        raise ParameterError(f"running_extremum_prob requires q > 0, got {q}")
    return laplace_fpt(FptQuery(q, x, y, initial_state), model)


# ---------------------------------------------------------------------------
# Integral-equation oracle
# ---------------------------------------------------------------------------


def _relative_quad_rule():
    """Composite Gauss-Legendre nodes on (0,1) clustered toward 0."""
    breaks = [0.0] + [2.0 ** (-k) for k in range(_QUAD_PANELS, -1, -1)]
    xs, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        x, w = gauss_legendre(_QUAD_ORDER, a, b)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


_QUAD_X, _QUAD_W = _relative_quad_rule()


def _oracle_nodes(model, q, y, lo_needed):
    """Node set on (-inf, y): uniform core plus geometric tails along any
    exponentially escaping flow.

    A repelling level below y is an unstable fixed point of its flow (and a
    kink of the transforms, since the no-switch hit time jumps to infinity
    across it); it gets its own node and a geometric tail beneath it.
    """
    a, g, lam = model.a_vec, model.gamma_vec, model.lam_vec
    span = abs(y - lo_needed)
    core_lo = lo_needed
    for i in range(2):
        rho = a[i] / g[i] if g[i] != 0.0 else None
        if g[i] > 0.0 and rho < y:
            core_lo = min(core_lo, rho)
        elif g[i] < 0.0 and rho < y:
            core_lo = min(core_lo, rho)
        elif g[i] == 0.0 and a[i] < 0.0:
            tau_max = KERNEL_CUT / (q + lam[i])
            core_lo = min(core_lo, lo_needed + 3.0 * a[i] * tau_max)
    span = max(abs(y - core_lo), span, 1e-6 * max(1.0, abs(y)))
    core_lo -= 0.05 * span
    top = y - 1e-9 * max(1.0, abs(y))
    nodes = [np.linspace(core_lo, top, ORACLE_CORE_NODES)]

    for i in range(2):
        if g[i] < 0.0:
            rho = a[i] / g[i]
            tau_max = KERNEL_CUT / (q + lam[i])
            ratio = min(math.exp(min(-g[i] * tau_max, 700.0)), _TAIL_RATIO_CAP)
            scale = max(abs(y - rho), abs(rho - core_lo), 1e-3 * max(1.0, abs(y)))
            if rho >= y:
                d_lo = rho - core_lo
            else:
                nodes.append(np.array([rho]))
                d_lo = 1e-9 * scale
            d_hi = min(max(rho - core_lo, scale) * ratio, _TAIL_RATIO_CAP * scale)
            tail = rho - np.geomspace(d_lo, d_hi, ORACLE_TAIL_NODES)
            nodes.append(tail[tail < top])
    out = np.unique(np.concatenate(nodes))
    return out


def _oracle_state_setup(model, q, y, nodes, state):
    """Quadrature positions/weights and first terms for one state's equation."""
    a = np.full(nodes.shape, model.coeffs[state].a)
    g = np.full(nodes.shape, model.coeffs[state].gamma)
    lam = model.rates.rate(state)
    t_hit = _hit_time_vec(a, g, nodes, y)
    tau_max = KERNEL_CUT / (q + lam)
    T = np.minimum(t_hit, tau_max)
    first = np.where(np.isfinite(t_hit), np.exp(-(q + lam) * np.minimum(t_hit, 700.0)), 0.0)

    tau = T[:, None] * _QUAD_X[None, :]
    weight = T[:, None] * _QUAD_W[None, :] * lam * np.exp(-(q + lam) * tau)
    pos = _phi_vec(a[:, None], g[:, None], tau, nodes[:, None])

    idx = np.searchsorted(nodes, pos, side="right") - 1
    np.clip(idx, 0, nodes.size - 2, out=idx)
    gap = nodes[idx + 1] - nodes[idx]
    frac = np.clip((pos - nodes[idx]) / gap, 0.0, 1.0)
    # positions that escaped below the grid contribute the far-field closure 0
    weight = np.where(pos < nodes[0], 0.0, weight)
    return first, weight, idx, frac


def _interp_rows(values, idx, frac):
    return values[idx] * (1.0 - frac) + values[idx + 1] * frac


def fpt_oracle_curve(model: KacOuModel, q: float, y: float, xs, tol: float = 1e-6):
    """Solve the coupled renewal integral equations on the side of y that
    contains every query point; returns (ell0, ell1) at xs.

    Independent of the hypergeometric route: builds a grid, fixed-point
    iterates the integral system, and interpolates the query points.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if q <= 0.0:
        raise ParameterError(f"the integral oracle requires q > 0, got {q}")
    if np.any(xs == y):
        raise ParameterError("oracle queries require x != y")
    if np.any(xs < y) and np.any(xs > y):
        raise ParameterError("oracle queries must all lie on one side of y")

    if np.all(xs > y):
        # solve the reflected problem below -y; first-passage laws are
        # invariant under x -> -x
        r0, r1 = fpt_oracle_curve(reflect(model), q, -y, -xs, tol)
        return r0, r1

    nodes = _oracle_nodes(model, q, y, float(np.min(xs)))
    f0, w0, i0, fr0 = _oracle_state_setup(model, q, y, nodes, 0)
    f1, w1, i1, fr1 = _oracle_state_setup(model, q, y, nodes, 1)

    ell0 = np.zeros(nodes.size)
    ell1 = np.zeros(nodes.size)
    inner_tol = 0.1 * tol
    for _ in range(ORACLE_MAX_ITER):
        new0 = f0 + np.sum(w0 * _interp_rows(ell1, i0, fr0), axis=1)
        new1 = f1 + np.sum(w1 * _interp_rows(new0, i1, fr1), axis=1)
        delta = max(np.max(np.abs(new0 - ell0)), np.max(np.abs(new1 - ell1)))
        ell0, ell1 = new0, new1
        if delta < inner_tol:
            break
    else:
        raise OracleError(
            f"fixed-point iteration did not contract below {inner_tol} in "
            f"{ORACLE_MAX_ITER} sweeps (last change {delta})"
        )
    return np.interp(xs, nodes, ell0), np.interp(xs, nodes, ell1)


def fpt_integral_oracle(query: FptQuery, model: KacOuModel, tol: float = 1e-6) -> float:
    """Renewal-equation value of E[exp(-q T)]; works in every regime, q > 0."""
    e0, e1 = fpt_oracle_curve(model, query.q, query.y, np.array([query.x]), tol)
    value = float(e0[0] if query.initial_state == 0 else e1[0])
    return min(max(value, 0.0), 1.0)


# ---------------------------------------------------------------------------
# ODE residual checker
# ---------------------------------------------------------------------------


def fpt_ode_residual(q: float, x: float, y: float, model: KacOuModel, h: float):
    """Central-difference residuals of the coupled first-order system obeyed
    by the closed-form transforms; O(h^2) by construction."""
    if h <= 0.0:
        raise ParameterError(f"step h must be positive, got {h}")
    vals = {}
    for state in (0, 1):
        for xx in (x - h, x, x + h):
            vals[(state, xx)] = laplace_fpt(FptQuery(q, xx, y, state), model)
    d0 = (vals[(0, x + h)] - vals[(0, x - h)]) / (2.0 * h)
    d1 = (vals[(1, x + h)] - vals[(1, x - h)]) / (2.0 * h)
    e0, e1 = vals[(0, x)], vals[(1, x)]
    ders = (d0, d1)
    ells = (e0, e1)

    out = []
    for i in (0, 1):
        c = model.coeffs[i]
        lam = model.rates.rate(i)
        other = ells[1 - i]
        if c.gamma != 0.0:
            rho = c.a / c.gamma
            beta_q = (q + lam) / c.gamma
            beta_0 = lam / c.gamma
            out.append((x - rho) * ders[i] + beta_q * ells[i] - beta_0 * other)
        else:
            out.append(c.a * ders[i] - (q + lam) * ells[i] + lam * other)
    return tuple(out)
