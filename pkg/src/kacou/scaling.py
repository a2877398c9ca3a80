"""Scaled parameter families, their limiting SDE coefficients, and Monte
Carlo convergence measurements.

The scaled families fix lambda0 = nu*n, lambda1 = n and give any scaled pair
(velocities, drift levels, or reversion rates) the form

    u0(n) = s0 * sigma0 * sqrt(nu*n) + delta,
    u1(n) = s1 * (sigma0/sqrt(nu)) * sqrt(n) + delta,

with opposite signs s0 = -s1.  Deriving sigma1 = sigma0/sqrt(nu) makes the
rate ratio and the weighted-drift identity hold exactly at every n, not just
in the limit, so convergence tables measure process-level convergence only.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .model import KacOuModel, StateCoeffs, SwitchRates
from .simulate import terminal_values

__all__ = [
    "ScalingKind",
    "ScaledPair",
    "ScalingSpec",
    "TelegraphParams",
    "LimitSde",
    "ConvergenceRow",
    "sigma_combine",
    "stratonovich_adjusted",
    "pi_star_star",
    "scaled_model",
    "telegraph_to_model",
    "limiting_sde",
    "ou_moments",
    "limit_moment_odes",
    "convergence_check",
]


@dataclass(frozen=True)
class TelegraphParams:
    """Velocities and switching rates of a two-speed telegraph integral."""

    c0: float
    c1: float
    rates: SwitchRates


class ScalingKind(enum.Enum):
    FAST_SWITCHING = "FastSwitching"
    KAC_CLASSIC = "KacClassic"
    KAC_ASYMMETRIC = "KacAsymmetric"
    CASE_A = "CaseA"
    CASE_B = "CaseB"
    CASE_C = "CaseC"


@dataclass(frozen=True)
class ScaledPair:
    """Free parameters of one scaled quantity: amplitude for state 0 and the
    limiting weighted drift.  The state-1 amplitude is sigma0/sqrt(nu)."""

    sigma0: float
    delta: float

    def __post_init__(self):
        if self.sigma0 <= 0.0:
            raise ParameterError(f"sigma0 must be positive, got {self.sigma0}")


@dataclass(frozen=True)
class ScalingSpec:
    kind: ScalingKind
    nu: float
    base: KacOuModel | None = None
    velocity: ScaledPair | None = None  # telegraph kinds
    drift: ScaledPair | None = None  # case (a) and (c): the drift-level pair
    reversion: ScaledPair | None = None  # case (b) and (c): the reversion pair

    def __post_init__(self):
        if self.nu <= 0.0:
            raise ParameterError(f"nu must be positive, got {self.nu}")
        needs = {
            ScalingKind.FAST_SWITCHING: ("base",),
            ScalingKind.KAC_CLASSIC: ("velocity",),
            ScalingKind.KAC_ASYMMETRIC: ("velocity",),
            ScalingKind.CASE_A: ("base", "drift"),
            ScalingKind.CASE_B: ("base", "reversion"),
            ScalingKind.CASE_C: ("base", "drift", "reversion"),
        }[self.kind]
        for field_name in needs:
            if getattr(self, field_name) is None:
                raise ParameterError(f"{self.kind.value} spec requires '{field_name}'")
        if self.kind is ScalingKind.KAC_CLASSIC:
            if self.nu != 1.0 or self.velocity.delta != 0.0:
                raise ParameterError("classic Kac scaling means nu = 1 and delta = 0")

    def sigma1_of(self, pair: ScaledPair) -> float:
        return pair.sigma0 / math.sqrt(self.nu)


@dataclass(frozen=True)
class LimitSde:
    """dM = (drift_const - drift_lin*M) dt
    + (noise_offset - multiplicative_noise*M) dW~ + additive_noise dW."""

    drift_const: float
    drift_lin: float
    additive_noise: float
    multiplicative_noise: float
    noise_offset: float = 0.0

    def __post_init__(self):
        if self.additive_noise < 0.0 or self.multiplicative_noise < 0.0:
            raise ParameterError("noise amplitudes must be nonnegative")


def sigma_combine(sigma0: float, sigma1: float) -> float:
    """Effective Brownian amplitude sigma0*sigma1 / sqrt((sigma0^2+sigma1^2)/2)."""
    if sigma0 <= 0.0 or sigma1 <= 0.0:
        raise ParameterError("sigma_combine requires positive amplitudes")
    return sigma0 * sigma1 / math.sqrt(0.5 * (sigma0 * sigma0 + sigma1 * sigma1))


def pi_star_star(nu: float) -> tuple[float, float]:
    """Limit of the chain's stationary distribution under rate ratio nu."""
    return (1.0 / (1.0 + nu), nu / (1.0 + nu))


def _scaled_pair_values(spec: ScalingSpec, pair: ScaledPair, n: float, sign0: float):
    s1 = spec.sigma1_of(pair)
    u0 = sign0 * pair.sigma0 * math.sqrt(spec.nu * n) + pair.delta
    u1 = -sign0 * s1 * math.sqrt(n) + pair.delta
    return u0, u1


def scaled_model(spec: ScalingSpec, n: float):
    """Concrete parameters at scale index n: a model, or telegraph velocities
    for the telegraph kinds."""
    if n < 1:
        raise ParameterError(f"scale index must be >= 1, got {n}")
    rates = SwitchRates(spec.nu * n, float(n))
    if spec.kind in (ScalingKind.KAC_CLASSIC, ScalingKind.KAC_ASYMMETRIC):
        c0, c1 = _scaled_pair_values(spec, spec.velocity, n, sign0=1.0)
        return TelegraphParams(c0, c1, rates)
    if spec.kind is ScalingKind.FAST_SWITCHING:
        return KacOuModel(rates=rates, coeffs=spec.base.coeffs)

    base = spec.base
    a0, a1 = base.coeffs[0].a, base.coeffs[1].a
    g0, g1 = base.coeffs[0].gamma, base.coeffs[1].gamma
    if spec.kind in (ScalingKind.CASE_A, ScalingKind.CASE_C):
        a0, a1 = _scaled_pair_values(spec, spec.drift, n, sign0=-1.0)
    if spec.kind in (ScalingKind.CASE_B, ScalingKind.CASE_C):
        g0, g1 = _scaled_pair_values(spec, spec.reversion, n, sign0=-1.0)
    return KacOuModel(
        rates=rates,
        coeffs=(
            StateCoeffs(a0, base.coeffs[0].b, g0),
            StateCoeffs(a1, base.coeffs[1].b, g1),
        ),
    )


def telegraph_to_model(tp: TelegraphParams) -> KacOuModel:
    """Telegraph integral as a zero-reversion, zero-noise model."""
    return KacOuModel(
        rates=tp.rates,
        coeffs=(StateCoeffs(tp.c0, 0.0, 0.0), StateCoeffs(tp.c1, 0.0, 0.0)),
    )


def limiting_sde(spec: ScalingSpec) -> LimitSde:
    """Coefficients of the limiting SDE (a drifted Brownian motion for the
    telegraph kinds, an OU-type equation otherwise)."""
    p = pi_star_star(spec.nu)
    if spec.kind in (ScalingKind.KAC_CLASSIC, ScalingKind.KAC_ASYMMETRIC):
        sigma = sigma_combine(spec.velocity.sigma0, spec.sigma1_of(spec.velocity))
        return LimitSde(spec.velocity.delta, 0.0, sigma, 0.0)

    base = spec.base
    a_inf = p[0] * base.coeffs[0].a + p[1] * base.coeffs[1].a
    b_inf = p[0] * base.coeffs[0].b + p[1] * base.coeffs[1].b
    g_inf = p[0] * base.coeffs[0].gamma + p[1] * base.coeffs[1].gamma

    if spec.kind is ScalingKind.FAST_SWITCHING:
        return LimitSde(a_inf, g_inf, b_inf, 0.0)
    if spec.kind is ScalingKind.CASE_A:
        sigma_a = sigma_combine(spec.drift.sigma0, spec.sigma1_of(spec.drift))
        # the scaled-drift noise and the frozen diffusion ride independent
        # Wiener processes, so their amplitudes add in quadrature
        return LimitSde(spec.drift.delta, g_inf, math.hypot(sigma_a, b_inf), 0.0)
    if spec.kind is ScalingKind.CASE_B:
        sigma_g = sigma_combine(spec.reversion.sigma0, spec.sigma1_of(spec.reversion))
        return LimitSde(a_inf, spec.reversion.delta, b_inf, sigma_g)
    sigma_a = sigma_combine(spec.drift.sigma0, spec.sigma1_of(spec.drift))
    sigma_g = sigma_combine(spec.reversion.sigma0, spec.sigma1_of(spec.reversion))
    return LimitSde(spec.drift.delta, spec.reversion.delta, b_inf, sigma_g, sigma_a)


def ou_moments(t: float, x0: float, a: float, gamma: float, b: float):
    """Mean and variance of a constant-coefficient OU value at time t."""
    if t < 0.0:
        raise ParameterError(f"t must be >= 0, got {t}")
    if gamma == 0.0:
        return x0 + a * t, b * b * t
    decay = math.exp(-gamma * t)
    mean = a / gamma + (x0 - a / gamma) * decay
    var = b * b * (1.0 - decay * decay) / (2.0 * gamma)
    return mean, var


def _moment_rhs(limit: LimitSde, m: float, s: float):
    dm = limit.drift_const - limit.drift_lin * m
    noise2 = (
        limit.multiplicative_noise**2 * s
        - 2.0 * limit.multiplicative_noise * limit.noise_offset * m
        + limit.noise_offset**2
        + limit.additive_noise**2
    )
    ds = 2.0 * limit.drift_const * m - 2.0 * limit.drift_lin * s + noise2
    return dm, ds


def limit_moment_odes(limit: LimitSde, t: float, x0: float):
    """(mean, second moment) of the limit SDE at time t by RK4 with step
    doubling until the result is stable to 1e-10."""
    if t < 0.0:
        raise ParameterError(f"t must be >= 0, got {t}")
    if t == 0.0:
        return x0, x0 * x0

    def integrate(steps):
        h = t / steps
        m, s = x0, x0 * x0
        for _ in range(steps):
            k1 = _moment_rhs(limit, m, s)
            k2 = _moment_rhs(limit, m + 0.5 * h * k1[0], s + 0.5 * h * k1[1])
            k3 = _moment_rhs(limit, m + 0.5 * h * k2[0], s + 0.5 * h * k2[1])
            k4 = _moment_rhs(limit, m + h * k3[0], s + h * k3[1])
            m += h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            s += h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        return m, s

    steps = 64
    prev = integrate(steps)
    for _ in range(16):
        steps *= 2
        cur = integrate(steps)
        if abs(cur[0] - prev[0]) < 1e-10 and abs(cur[1] - prev[1]) < 1e-10:
            return cur
        prev = cur
    return prev


def stratonovich_adjusted(limit: LimitSde) -> LimitSde:
    """Drift-corrected coefficients for comparing simulations against a
    multiplicative-noise limit.

    The scaled switching process is a smooth (colored-noise) approximation,
    so its weak limit solves the displayed SDE in the Stratonovich sense;
    converting to Ito shifts the drift by half the noise derivative times
    the noise.  Additive-noise limits are unchanged.
    """
    if limit.multiplicative_noise == 0.0:
        return limit
    sg = limit.multiplicative_noise
    return LimitSde(
        limit.drift_const - 0.5 * sg * limit.noise_offset,
        limit.drift_lin - 0.5 * sg * sg,
        limit.additive_noise,
        sg,
        limit.noise_offset,
    )


@dataclass(frozen=True)
class ConvergenceRow:
    n: float
    emp_mean: float
    emp_var: float
    limit_mean: float
    limit_var: float
    mean_gap: float
    var_gap: float
    mean_stderr: float
    var_stderr: float
    cdf_dist: float | None


def _normal_cdf(z: np.ndarray) -> np.ndarray:
    return np.array([0.5 * (1.0 + math.erf(v / math.sqrt(2.0))) for v in z])


def _ks_distance(values: np.ndarray, mu: float, sd: float) -> float:
    xs = np.sort(values)
    n = xs.size
    cdf = _normal_cdf((xs - mu) / sd)
    lo = np.max(cdf - np.arange(n) / n)
    hi = np.max(np.arange(1, n + 1) / n - cdf)
    return float(max(lo, hi))


def convergence_check(
    spec: ScalingSpec,
    t: float,
    n_list,
    n_paths: int,
    seed: int,
    x0: float = 0.0,
) -> list[ConvergenceRow]:
    """Simulate the scaled process at each n and compare terminal moments
    (and, for Gaussian limits, the whole CDF) against the limiting law.

    The chain starts in its stationary distribution, which makes the
    weighted-drift identity hold exactly at every finite n.
    """
    n_list = list(n_list)
    if sorted(n_list) != n_list:
        raise ParameterError("n_list must be increasing")

    limit = limiting_sde(spec)
    telegraph = spec.kind in (ScalingKind.KAC_CLASSIC, ScalingKind.KAC_ASYMMETRIC)
    gaussian = telegraph or spec.kind in (ScalingKind.FAST_SWITCHING, ScalingKind.CASE_A)

    if limit.multiplicative_noise == 0.0 and limit.noise_offset == 0.0:
        limit_mean, limit_var = ou_moments(t, x0, limit.drift_const, limit.drift_lin, limit.additive_noise)
    else:
        m, s = limit_moment_odes(stratonovich_adjusted(limit), t, x0)
        limit_mean, limit_var = m, s - m * m

    rows = []
    for n in n_list:
        scaled = scaled_model(spec, n)
        if telegraph:
            model = telegraph_to_model(scaled)
            noise = False
        else:
            model = scaled
            noise = bool(np.any(model.b_vec > 0.0))
        sample = terminal_values(
            model, x0, t, n_paths, seed,
            with_noise=noise, initial_state="stationary", purpose=f"scaling-n{n}",
        )
        v = sample.values
        emp_mean = float(np.mean(v))
        emp_var = float(np.var(v, ddof=1))
        mean_se = float(np.std(v, ddof=1) / math.sqrt(n_paths))
        centered = v - emp_mean
        m2 = float(np.mean(centered**2))
        m4 = float(np.mean(centered**4))
        var_se = math.sqrt(max(m4 - m2 * m2, 0.0) / n_paths)
        cdf = _ks_distance(v, limit_mean, math.sqrt(limit_var)) if gaussian else None
        rows.append(
            ConvergenceRow(
                n=n,
                emp_mean=emp_mean,
                emp_var=emp_var,
                limit_mean=limit_mean,
                limit_var=limit_var,
                mean_gap=abs(emp_mean - limit_mean),
                var_gap=abs(emp_var - limit_var),
                mean_stderr=mean_se,
                var_stderr=var_se,
                cdf_dist=cdf,
            )
        )
    return rows
