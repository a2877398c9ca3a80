"""Invariant measures of the pair (position, chain state): existence test,
closed-form densities with analytic derivatives, stationarity residuals,
normalization checks, and a simulation-based histogram distance.

Each regime admitting a stationary law gets one closed form, written for an
arbitrary orientation (the attracting level may sit on either side), so no
coordinate transforms are needed at evaluation time:

* both reversion rates positive: beta-like density on the interval between
  the two levels;
* one attracting, one repelling rate: power-tailed (Pareto-like) density on
  the half-line beyond the attracting level, existing only when the two
  rate ratios sum negative;
* one rate zero with nonzero drift, the other attracting: gamma-like
  density on the half-line in the drift direction.

Mass and bin integrals evaluate the densities from exact distances to the
support endpoints (see :mod:`kacou.quadrature`), which keeps the integrable
endpoint singularities at full double precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import wraps
from typing import Callable

import numpy as np

from .errors import NoInvariantMeasureError, ParameterError
from .model import KacOuModel, RegimeTag, classify_regime, stationary_state_dist
from .quadrature import integrate_de_offsets, integrate_half_line_offsets
from .simulate import terminal_values
from .specfun import beta_fn, log_gamma

__all__ = [
    "InvariantDensity",
    "invariant_exists",
    "invariant_description",
    "invariant_density",
    "invariant_density_with_derivative",
    "stationarity_residual",
    "invariant_mass",
    "EmpiricalFit",
    "empirical_invariant_profile",
    "empirical_invariant_distance",
    "support_cutoff",
]


@dataclass(frozen=True)
class InvariantDensity:
    """Closed-form descriptor: support, per-state endpoint exponents and
    multiplicative constants, and the qualitative family tag."""

    kind: str  # "BetaLike" | "ParetoLike" | "GammaLike" | "None"
    support: tuple[float, float] | None
    exponents: tuple[tuple[float, float], tuple[float, float]] | None
    constants: tuple[float, float] | None


def _masked_lanes(fn):
    """Suppress numpy noise from lanes that the inside-support mask discards."""

    @wraps(fn)
    def wrapper(x):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return fn(x)

    return wrapper


@dataclass(frozen=True)
class _ClosedForm:
    desc: InvariantDensity
    evaluate: Callable  # x array -> (pi0, pi1, dpi0, dpi1)
    # mixture density from exact distance(s) to the support boundary:
    # bounded kinds take (d_lo, d_hi), half-line kinds take the distance to
    # the finite anchor
    mix_bounded: Callable | None
    mix_anchor: Callable | None
    anchor: float | None
    direction: float  # +1: support extends above the anchor
    scale: float  # characteristic width for the half-line rational map


def invariant_exists(model: KacOuModel) -> tuple[bool, tuple[float, float] | None]:
    """Whether an invariant probability density exists, and its support."""
    regime = classify_regime(model)
    tag = regime.tag
    c0, c1 = model.coeffs

    if tag is RegimeTag.ATTRACTING_STRICT:
        r0, r1 = c0.rho, c1.rho
        return True, (min(r0, r1), max(r0, r1))
    if tag in (RegimeTag.ATTRACTION_REPULSION_01, RegimeTag.ATTRACTION_REPULSION_10):
        alpha_sum = model.rates.lambda0 / c0.gamma + model.rates.lambda1 / c1.gamma
        if alpha_sum >= 0.0:
            return False, None
        attract = 0 if c0.gamma > 0.0 else 1
        rho_a = model.coeffs[attract].rho
        rho_r = model.coeffs[1 - attract].rho
        if rho_a < rho_r:
            return True, (-math.inf, rho_a)
        return True, (rho_a, math.inf)
    if tag is RegimeTag.NON_STRICT_ATTRACTING:
        zero = regime.zero_state
        rho = model.coeffs[1 - zero].rho
        if regime.drift_sign > 0:
            return True, (rho, math.inf)
        return True, (-math.inf, rho)
    # repulsion-only, null non-strict, degenerate levels, and the unnamed
    # zero-gamma corners: no invariant probability density
    return False, None


def _closed_form(model: KacOuModel) -> _ClosedForm:
    regime = classify_regime(model)
    tag = regime.tag
    exists, support = invariant_exists(model)
    if not exists:
        raise NoInvariantMeasureError(f"no invariant density in regime {tag.value}")

    lam = model.lam_vec
    g = model.gamma_vec

    if tag is RegimeTag.ATTRACTING_STRICT:
        lo_state = 0 if model.coeffs[0].rho <= model.coeffs[1].rho else 1
        hi_state = 1 - lo_state
        rho_lo, rho_hi = model.coeffs[lo_state].rho, model.coeffs[hi_state].rho
        a_lo = lam[lo_state] / g[lo_state]
        a_hi = lam[hi_state] / g[hi_state]
        width = rho_hi - rho_lo
        c = 1.0 / (
            width ** (a_lo + a_hi)
            * (beta_fn(a_lo, a_hi + 1.0) / g[lo_state] + beta_fn(a_lo + 1.0, a_hi) / g[hi_state])
        )
        c_lo = c / g[lo_state]
        c_hi = c / g[hi_state]

        @_masked_lanes
        def evaluate(x):
            x = np.asarray(x, dtype=float)
            u = x - rho_lo
            v = rho_hi - x
            inside = (u > 0.0) & (v > 0.0)
            us = np.where(inside, u, 1.0)
            vs = np.where(inside, v, 1.0)
            p_lo = np.where(inside, c_lo * us ** (a_lo - 1.0) * vs**a_hi, 0.0)
            p_hi = np.where(inside, c_hi * us**a_lo * vs ** (a_hi - 1.0), 0.0)
            d_lo = np.where(inside, p_lo * ((a_lo - 1.0) / us - a_hi / vs), 0.0)
            d_hi = np.where(inside, p_hi * (a_lo / us - (a_hi - 1.0) / vs), 0.0)
            if lo_state == 0:
                return p_lo, p_hi, d_lo, d_hi
            return p_hi, p_lo, d_hi, d_lo

        def mix_bounded(du, dv):
            return c_lo * du ** (a_lo - 1.0) * dv**a_hi + c_hi * du**a_lo * dv ** (a_hi - 1.0)

        exps = [None, None]
        exps[lo_state] = (a_lo - 1.0, a_hi)
        exps[hi_state] = (a_lo, a_hi - 1.0)
        consts = [None, None]
        consts[lo_state] = c_lo
        consts[hi_state] = c_hi
        desc = InvariantDensity("BetaLike", support, tuple(exps), tuple(consts))
        return _ClosedForm(desc, evaluate, mix_bounded, None, rho_lo, 1.0, width)

    if tag in (RegimeTag.ATTRACTION_REPULSION_01, RegimeTag.ATTRACTION_REPULSION_10):
        s_a = 0 if g[0] > 0.0 else 1
        s_r = 1 - s_a
        rho_a = model.coeffs[s_a].rho
        rho_r = model.coeffs[s_r].rho
        a_a = lam[s_a] / g[s_a]
        a_r = lam[s_r] / g[s_r]
        width = abs(rho_r - rho_a)
        sgn = -1.0 if rho_a < rho_r else 1.0  # support direction away from the repeller
        c = 1.0 / (
            width ** (a_a + a_r)
            * (
                beta_fn(-a_a - a_r, a_a) / g[s_a]
                - beta_fn(-a_a - a_r, 1.0 + a_a) / g[s_r]
            )
        )
        c_a = c / g[s_a]
        c_r = c / abs(g[s_r])

        @_masked_lanes
        def evaluate(x):
            x = np.asarray(x, dtype=float)
            u = sgn * (x - rho_a)
            v = sgn * (x - rho_r)
            inside = u > 0.0
            us = np.where(inside, u, 1.0)
            vs = np.where(inside, v, 1.0)
            p_a = np.where(inside, c_a * us ** (a_a - 1.0) * vs**a_r, 0.0)
            p_r = np.where(inside, c_r * us**a_a * vs ** (a_r - 1.0), 0.0)
            d_a = np.where(inside, sgn * p_a * ((a_a - 1.0) / us + a_r / vs), 0.0)
            d_r = np.where(inside, sgn * p_r * (a_a / us + (a_r - 1.0) / vs), 0.0)
            if s_a == 0:
                return p_a, p_r, d_a, d_r
            return p_r, p_a, d_r, d_a

        def mix_anchor(d):
            v = d + width
            return c_a * d ** (a_a - 1.0) * v**a_r + c_r * d**a_a * v ** (a_r - 1.0)

        exps = [None, None]
        exps[s_a] = (a_a - 1.0, a_r)
        exps[s_r] = (a_a, a_r - 1.0)
        consts = [None, None]
        consts[s_a] = c_a
        consts[s_r] = c_r
        desc = InvariantDensity("ParetoLike", support, tuple(exps), tuple(consts))
        return _ClosedForm(desc, evaluate, None, mix_anchor, rho_a, sgn, width)

    # non-strict attracting
    zero = regime.zero_state
    other = 1 - zero
    az = model.coeffs[zero].a
    g_o = g[other]
    rho = model.coeffs[other].rho
    alpha = lam[other] / g_o
    k = lam[zero] / abs(az)
    sgn = 1.0 if az > 0.0 else -1.0
    log_c = alpha * math.log(k) + math.log(lam[zero] / (lam[zero] + lam[other])) - log_gamma(alpha)
    c = math.exp(log_c)
    slope = g_o / abs(az)

    @_masked_lanes
    def evaluate(x):
        x = np.asarray(x, dtype=float)
        u = sgn * (x - rho)
        inside = u > 0.0
        us = np.where(inside, u, 1.0)
        damp = np.exp(-k * np.where(inside, u, 0.0))
        p_o = np.where(inside, c * us ** (alpha - 1.0) * damp, 0.0)
        p_z = np.where(inside, slope * c * us**alpha * damp, 0.0)
        d_o = np.where(inside, sgn * p_o * ((alpha - 1.0) / us - k), 0.0)
        d_z = np.where(inside, sgn * p_z * (alpha / us - k), 0.0)
        if other == 0:
            return p_o, p_z, d_o, d_z
        return p_z, p_o, d_z, d_o

    def mix_anchor(d):
        return c * d ** (alpha - 1.0) * (1.0 + slope * d) * np.exp(-k * d)

    exps = [None, None]
    exps[other] = (alpha - 1.0, k)
    exps[zero] = (alpha, k)
    consts = [None, None]
    consts[other] = c
    consts[zero] = slope * c
    desc = InvariantDensity("GammaLike", support, tuple(exps), tuple(consts))
    return _ClosedForm(desc, evaluate, None, mix_anchor, rho, sgn, 1.0 / k)


def invariant_description(model: KacOuModel) -> InvariantDensity:
    exists, _ = invariant_exists(model)
    if not exists:
        return InvariantDensity("None", None, None, None)
    return _closed_form(model).desc


def invariant_density(x, state: int, model: KacOuModel):
    """Closed-form stationary density of (X, state) at x (0 outside support)."""
    cf = _closed_form(model)
    p0, p1, _, _ = cf.evaluate(x)
    out = p0 if state == 0 else p1
    return out if np.ndim(x) else float(out)


def invariant_density_with_derivative(x, model: KacOuModel):
    """(pi0, pi1, dpi0/dx, dpi1/dx) with analytic derivatives."""
    return _closed_form(model).evaluate(x)


def stationarity_residual(x, model: KacOuModel):
    """Relative residuals of the adjoint-generator ODE system at interior x.

    The closed forms and their product-rule derivatives make both equations
    vanish up to roundoff.
    """
    p0, p1, d0, d1 = invariant_density_with_derivative(x, model)
    x = np.asarray(x, dtype=float)
    a0, a1 = model.coeffs[0].a, model.coeffs[1].a
    g0, g1 = model.coeffs[0].gamma, model.coeffs[1].gamma
    l0, l1 = model.rates.lambda0, model.rates.lambda1

    t11 = (g0 * x - a0) * d0
    t12 = (l0 - g0) * p0
    t13 = l1 * p1
    r1 = t11 - t12 + t13
    s1 = np.maximum(np.maximum(np.abs(t11), np.abs(t12)), np.maximum(np.abs(t13), 1e-300))

    t21 = (g1 * x - a1) * d1
    t22 = l0 * p0
    t23 = (l1 - g1) * p1
    r2 = t21 + t22 - t23
    s2 = np.maximum(np.maximum(np.abs(t21), np.abs(t22)), np.maximum(np.abs(t23), 1e-300))

    rel1, rel2 = r1 / s1, r2 / s2
    if np.ndim(x):
        return rel1, rel2
    return float(rel1), float(rel2)


def invariant_mass(model: KacOuModel, tol: float = 1e-11) -> float:
    """Quadrature check of the total mass of pi0 + pi1 (should be 1).

    Bounded supports integrate directly; half-lines go through the rational
    map, so power tails lose no mass to truncation.
    """
    cf = _closed_form(model)
    if cf.mix_bounded is not None:
        lo, hi = cf.desc.support
        return integrate_de_offsets(cf.mix_bounded, lo, hi, tol=tol)
    return integrate_half_line_offsets(cf.mix_anchor, cf.direction, scale=cf.scale, tol=tol)


def _tail_mass(cf: _ClosedForm, dist: float) -> float:
    """Mass beyond distance `dist` from the finite anchor (half-line kinds)."""
    return integrate_half_line_offsets(
        lambda d: cf.mix_anchor(dist + d), cf.direction, scale=cf.scale, tol=1e-9
    )


def support_cutoff(model: KacOuModel, floor: float = 1e-16) -> tuple[float, float]:
    """Finite interval outside which the mixture density is below `floor`.

    For half-line supports the cutoff follows the density envelope by
    doubling-and-bisection; for bounded supports it is the support itself.
    """
    cf = _closed_form(model)
    lo, hi = cf.desc.support
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi

    def mix(d):
        return float(cf.mix_anchor(np.asarray([d]))[0])

    step = 1e-6 * cf.scale
    last_inside = step
    entered = False
    while step < 1e15 * cf.scale:
        if mix(step) >= floor:
            entered = True
            last_inside = step
        elif entered:
            break
        step *= 2.0
    inner, outer = last_inside, step
    for _ in range(200):
        mid = 0.5 * (inner + outer)
        if mix(mid) >= floor:
            inner = mid
        else:
            outer = mid
        if outer - inner <= 1e-9 * outer:
            break
    far = cf.anchor + cf.direction * outer
    return (lo, far) if math.isfinite(lo) else (far, hi)


def _histogram_range(cf: _ClosedForm, tail_mass: float = 5e-4) -> tuple[float, float]:
    """Finite binning window; on half-line supports it leaves `tail_mass`
    outside (that mass is charged to the L1 distance explicitly)."""
    lo, hi = cf.desc.support
    if math.isfinite(lo) and math.isfinite(hi):
        return lo, hi
    inner, outer = 1e-3 * cf.scale, 1e-3 * cf.scale
    while _tail_mass(cf, outer) > tail_mass:
        inner = outer
        outer *= 2.0
        if outer > 1e15 * cf.scale:
            break
    for _ in range(60):
        mid = 0.5 * (inner + outer)
        if _tail_mass(cf, mid) > tail_mass:
            inner = mid
        else:
            outer = mid
        if outer - inner <= 1e-3 * outer:
            break
    far = cf.anchor + cf.direction * outer
    return (lo, far) if math.isfinite(lo) else (far, hi)


def _offset_density(cf: _ClosedForm, state: int | None):
    """Density (one state, or the mixture) written in exact offset
    coordinates: (d_lo, d_hi) for bounded kinds, anchor distance otherwise."""
    if state is None:
        return cf.mix_bounded, cf.mix_anchor
    c = cf.desc.constants[state]
    p, s = cf.desc.exponents[state]
    if cf.desc.kind == "BetaLike":
        return (lambda dl, dh: c * dl**p * dh**s), None
    if cf.desc.kind == "ParetoLike":
        width = cf.scale
        return None, lambda d: c * d**p * (d + width) ** s
    return None, lambda d: c * d**p * np.exp(-s * d)  # GammaLike: s is the rate


def _bin_masses(cf: _ClosedForm, edges: np.ndarray, state: int | None = None) -> np.ndarray:
    """Expected mass per bin (mixture, or one state's density), endpoint
    singularities included."""
    lo, hi = cf.desc.support
    bounded, anchored = _offset_density(cf, state)
    out = np.empty(edges.size - 1)
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        if bounded is not None:
            base_lo = max(a - lo, 0.0)
            base_hi = max(hi - b, 0.0)
            f2 = lambda dl, dh: bounded(base_lo + dl, base_hi + dh)
        elif cf.direction > 0:
            base = max(a - cf.anchor, 0.0)
            f2 = lambda dl, dh: anchored(base + dl)
        else:
            base = max(cf.anchor - b, 0.0)
            f2 = lambda dl, dh: anchored(base + dh)
        out[i] = integrate_de_offsets(f2, a, b, tol=1e-11)
    return out


@dataclass(frozen=True)
class EmpiricalFit:
    pooled: float
    per_state: tuple[float, float] | None  # populated for n_paths >= 1e5


def _l1_against(cf, values, edges, n_paths, expected_total, state=None):
    counts, _ = np.histogram(values, bins=edges)
    outside = values.size - int(np.sum(counts))
    observed = counts / n_paths
    expected = _bin_masses(cf, edges, state=state)
    tail = max(0.0, expected_total - float(np.sum(expected)))
    return float(np.sum(np.abs(observed - expected)) + outside / n_paths + tail)


def empirical_invariant_profile(
    model: KacOuModel,
    n_paths: int,
    t_horizon: float,
    bins: int,
    seed: int,
) -> EmpiricalFit:
    """L1 distances between terminal histograms of simulated paths and the
    closed-form densities integrated bin by bin.

    The pooled comparison always runs; per-state comparisons are added when
    n_paths >= 1e5 (per-state counts halve the sample).  Paths start at the
    median of the invariant mixture with the chain stationary, so t_horizon
    only needs to wash out the spatial transient.  Mass outside the binning
    window (possible for half-line supports) counts toward the distance.
    """
    if bins < 2 or n_paths < 100:
        raise ParameterError("need bins >= 2 and n_paths >= 100")
    cf = _closed_form(model)

    lo, hi = _histogram_range(cf)
    if cf.mix_bounded is not None:
        x0 = 0.5 * (lo + hi)
    else:
        # median distance from the anchor by bisection on the tail mass
        d_lo, d_hi = 1e-6 * cf.scale, abs(hi - lo)
        for _ in range(80):
            mid = 0.5 * (d_lo + d_hi)
            if _tail_mass(cf, mid) > 0.5:
                d_lo = mid
            else:
                d_hi = mid
        x0 = cf.anchor + cf.direction * 0.5 * (d_lo + d_hi)
    sample = terminal_values(
        model, x0, t_horizon, n_paths, seed, with_noise=False,
        initial_state="stationary", purpose="invariant",
    )
    edges = np.linspace(lo, hi, bins + 1)
    pooled = _l1_against(cf, sample.values, edges, n_paths, expected_total=1.0)

    per_state = None
    if n_paths >= 100_000:
        pi = stationary_state_dist(model.rates)
        dists = []
        for state in (0, 1):
            mask = sample.states == state
            dists.append(
                _l1_against(
                    cf, sample.values[mask], edges, n_paths, expected_total=pi[state], state=state
                )
            )
        per_state = (dists[0], dists[1])
    return EmpiricalFit(pooled, per_state)


def empirical_invariant_distance(
    model: KacOuModel,
    n_paths: int,
    t_horizon: float,
    bins: int,
    seed: int,
) -> float:
    """Pooled L1 histogram distance; see :func:`empirical_invariant_profile`."""
    return empirical_invariant_profile(model, n_paths, t_horizon, bins, seed).pooled
