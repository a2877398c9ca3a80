"""Model parameters, regime classification, deterministic flow patterns and
two-state Markov chain algebra.

A model is a pair of linear drift patterns ``dx/dt = a_i - gamma_i * x``
(one per chain state) together with the switching rates of the underlying
two-state Markov chain.  Everything downstream (first-passage transforms,
invariant densities, simulation, scaling limits) is driven by the eight
numbers stored in :class:`KacOuModel`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

__all__ = [
    "SwitchRates",
    "StateCoeffs",
    "KacOuModel",
    "RegimeTag",
    "Regime",
    "DerivedParams",
    "TransitionMatrix",
    "HyperParams",
    "classify_regime",
    "derived_params",
    "pattern_phi",
    "hitting_time",
    "transition_matrix",
    "stationary_state_dist",
    "hyper_args",
    "xi0",
    "xi1",
    "swap_states",
    "reflect",
]

# Relative tolerance for deciding a0/gamma0 == a1/gamma1 on user input.
RHO_EQUAL_RTOL = 1e-12

# Largest exponent fed to math.exp before we short-circuit to 0 / inf.
_EXP_MAX = 700.0


@dataclass(frozen=True)
class SwitchRates:
    """Transition intensities of the two-state chain, both positive."""

    lambda0: float
    lambda1: float

    def __post_init__(self):
        if not (self.lambda0 > 0.0) or not math.isfinite(self.lambda0):
            raise ParameterError(f"lambda0 must be positive and finite, got {self.lambda0}")
        if not (self.lambda1 > 0.0) or not math.isfinite(self.lambda1):
            raise ParameterError(f"lambda1 must be positive and finite, got {self.lambda1}")

    def rate(self, state: int) -> float:
        return self.lambda0 if state == 0 else self.lambda1

    @property
    def total(self) -> float:
        """lambda0 + lambda1 (written 2*lambda in the closed forms)."""
        return self.lambda0 + self.lambda1


@dataclass(frozen=True)
class StateCoeffs:
    """Drift level, diffusion amplitude and reversion rate of one state."""

    a: float
    b: float
    gamma: float

    def __post_init__(self):
        if self.b < 0.0 or not math.isfinite(self.b):
            raise ParameterError(f"diffusion amplitude b must be >= 0, got {self.b}")
        for name in ("a", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise ParameterError(f"{name} must be finite, got {getattr(self, name)}")

    @property
    def rho(self) -> float:
        """Attractor (or repeller) level a/gamma; requires gamma != 0."""
        if self.gamma == 0.0:
            raise ParameterError("rho undefined for gamma = 0")
        return self.a / self.gamma


@dataclass(frozen=True)
class KacOuModel:
    """Full parameter set: switching rates plus per-state coefficients."""

    rates: SwitchRates
    coeffs: tuple[StateCoeffs, StateCoeffs]

    @classmethod
    def from_values(cls, lambda0, lambda1, a0, a1, b0, b1, gamma0, gamma1) -> "KacOuModel":
        return cls(
            rates=SwitchRates(float(lambda0), float(lambda1)),
            coeffs=(
                StateCoeffs(float(a0), float(b0), float(gamma0)),
                StateCoeffs(float(a1), float(b1), float(gamma1)),
            ),
        )

    def coeff(self, state: int) -> StateCoeffs:
        return self.coeffs[state]

    @property
    def a_vec(self) -> np.ndarray:
        return np.array([self.coeffs[0].a, self.coeffs[1].a])

    @property
    def b_vec(self) -> np.ndarray:
        return np.array([self.coeffs[0].b, self.coeffs[1].b])

    @property
    def gamma_vec(self) -> np.ndarray:
        return np.array([self.coeffs[0].gamma, self.coeffs[1].gamma])

    @property
    def lam_vec(self) -> np.ndarray:
        return np.array([self.rates.lambda0, self.rates.lambda1])


def swap_states(model: KacOuModel) -> KacOuModel:
    """Relabel the chain states 0 <-> 1 (rates and coefficients swap)."""
    return KacOuModel(
        rates=SwitchRates(model.rates.lambda1, model.rates.lambda0),
        coeffs=(model.coeffs[1], model.coeffs[0]),
    )


def reflect(model: KacOuModel) -> KacOuModel:
    """Spatial reflection x -> -x: drift levels flip sign, everything else kept."""
    return KacOuModel(
        rates=model.rates,
        coeffs=tuple(StateCoeffs(-c.a, c.b, c.gamma) for c in model.coeffs),
    )


class RegimeTag(enum.Enum):
    ATTRACTING_STRICT = "AttractingStrict"
    ATTRACTION_REPULSION_01 = "AttractionRepulsion01"
    ATTRACTION_REPULSION_10 = "AttractionRepulsion10"
    NON_STRICT_ATTRACTING = "NonStrictAttracting"
    REPULSION_ONLY = "RepulsionOnly"
    DEGENERATE_EQUAL_RHO = "DegenerateEqualRho"
    NULL_NON_STRICT = "NullNonStrict"
    # Leftover sign combinations (zero gamma paired with a repelling state, or
    # both gammas zero with a drift) that the main case analysis does not
    # name.  They admit no closed forms and no invariant measure here.
    NON_STRICT_REPELLING = "NonStrictRepelling"
    PURE_DRIFT = "PureDrift"


@dataclass(frozen=True)
class Regime:
    """Classification of the sign pattern of (gamma0, gamma1, a0, a1).

    ``zero_state``/``drift_sign`` are populated only for the non-strict tags:
    the index of the zero-gamma state and the sign of its drift.
    """

    tag: RegimeTag
    zero_state: int | None = None
    drift_sign: int | None = None


def _rho_equal(c0: StateCoeffs, c1: StateCoeffs) -> bool:
    # a0/g0 == a1/g1 tested cross-multiplied; user input is compared, so the
    # intended case is exact equality up to quotient rounding.
    lhs = c0.a * c1.gamma
    rhs = c1.a * c0.gamma
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return abs(lhs - rhs) <= RHO_EQUAL_RTOL * scale


def classify_regime(model: KacOuModel) -> Regime:
    """Assign the unique regime tag driving formula dispatch.

    Sign tests compare exactly with zero: the gammas are user-supplied
    constants, not computed quantities.
    """
    c0, c1 = model.coeffs
    g0, g1 = c0.gamma, c1.gamma

    if g0 != 0.0 and g1 != 0.0:
        if _rho_equal(c0, c1):
            return Regime(RegimeTag.DEGENERATE_EQUAL_RHO)
        if g0 > 0.0 and g1 > 0.0:
            return Regime(RegimeTag.ATTRACTING_STRICT)
        if g0 > 0.0 > g1:
            return Regime(RegimeTag.ATTRACTION_REPULSION_01)
        if g0 < 0.0 < g1:
            return Regime(RegimeTag.ATTRACTION_REPULSION_10)
        return Regime(RegimeTag.REPULSION_ONLY)

    if g0 == 0.0 and g1 == 0.0:
        if c0.a == 0.0 and c1.a == 0.0:
            return Regime(RegimeTag.NULL_NON_STRICT, zero_state=0, drift_sign=0)
        return Regime(RegimeTag.PURE_DRIFT)

    zero = 0 if g0 == 0.0 else 1
    other = 1 - zero
    az = model.coeffs[zero].a
    if az == 0.0:
        return Regime(RegimeTag.NULL_NON_STRICT, zero_state=zero, drift_sign=0)
    sign = 1 if az > 0.0 else -1
    if model.coeffs[other].gamma > 0.0:
        return Regime(RegimeTag.NON_STRICT_ATTRACTING, zero_state=zero, drift_sign=sign)
    return Regime(RegimeTag.NON_STRICT_REPELLING, zero_state=zero, drift_sign=sign)


@dataclass(frozen=True)
class DerivedParams:
    """rho_i = a_i/gamma_i and alpha_i = lambda_i/gamma_i; None when gamma_i = 0."""

    rho0: float | None
    rho1: float | None
    alpha0: float | None
    alpha1: float | None


def derived_params(model: KacOuModel) -> DerivedParams:
    c0, c1 = model.coeffs
    rho0 = c0.a / c0.gamma if c0.gamma != 0.0 else None
    rho1 = c1.a / c1.gamma if c1.gamma != 0.0 else None
    alpha0 = model.rates.lambda0 / c0.gamma if c0.gamma != 0.0 else None
    alpha1 = model.rates.lambda1 / c1.gamma if c1.gamma != 0.0 else None
    return DerivedParams(rho0, rho1, alpha0, alpha1)


def _exp(z: float) -> float:
    if z > _EXP_MAX:
        return math.inf
    if z < -_EXP_MAX:
        return 0.0
    return math.exp(z)


def pattern_phi(state: int, t: float, x: float, model: KacOuModel) -> float:
    """Deterministic flow of one state evaluated at time t from x.

    Exponential relaxation toward rho when gamma != 0, a straight line when
    gamma = 0.  Satisfies phi(t+s, x) = phi(t, phi(s, x)).
    """
    if t < 0.0:
        raise ParameterError(f"pattern time must be >= 0, got {t}")
    if t == 0.0:
        return x
    c = model.coeff(state)
    if c.gamma == 0.0:
        return x + c.a * t
    rho = c.a / c.gamma
    expo = -c.gamma * t
    if expo > _EXP_MAX:  # repelling growth; keep the product finite if it is
        diff = x - rho
        if diff == 0.0:
            return rho
        log_mag = math.log(abs(diff)) + expo
        if log_mag > 709.0:
            return math.inf if diff > 0.0 else -math.inf
        return rho + math.copysign(math.exp(log_mag), diff)
    return rho + (x - rho) * math.exp(expo)


def hitting_time(state: int, x: float, y: float, model: KacOuModel) -> float:
    """Time for the state's pattern started at x to reach y; +inf if it never does.

    The +inf return is a deliberate distinguished value (it selects the
    half-line branch of the renewal integral equations), never an overflow.
    """
    if x == y:
        raise ParameterError("hitting_time requires x != y")
    c = model.coeff(state)
    if c.gamma == 0.0:
        if c.a == 0.0:
            return math.inf
        t = (y - x) / c.a
        return t if t > 0.0 else math.inf
    rho = c.a / c.gamma
    if y == rho:
        return math.inf  # the pattern only reaches its own level in the limit
    r = (x - rho) / (y - rho)
    if c.gamma > 0.0:
        if r > 1.0:
            return math.log(r) / c.gamma
        return math.inf
    if 0.0 < r < 1.0:
        return math.log(r) / c.gamma
    return math.inf


@dataclass(frozen=True)
class TransitionMatrix:
    """Chain transition probabilities over a fixed horizon, row-stochastic."""

    p: np.ndarray

    def __post_init__(self):
        if self.p.shape != (2, 2):
            raise ParameterError("transition matrix must be 2x2")


def transition_matrix(t: float, rates: SwitchRates) -> TransitionMatrix:
    """Closed-form matrix exponential of the two-state generator at time t."""
    if t < 0.0:
        raise ParameterError(f"time must be >= 0, got {t}")
    l0, l1 = rates.lambda0, rates.lambda1
    tot = l0 + l1
    e = math.exp(-tot * t) if tot * t < _EXP_MAX else 0.0
    p = np.array(
        [
            [(l1 + l0 * e) / tot, l0 * (1.0 - e) / tot],
            [l1 * (1.0 - e) / tot, (l0 + l1 * e) / tot],
        ]
    )
    return TransitionMatrix(p)


def stationary_state_dist(rates: SwitchRates) -> tuple[float, float]:
    """Stationary distribution (lambda1, lambda0) / (lambda0 + lambda1)."""
    tot = rates.total
    return (rates.lambda1 / tot, rates.lambda0 / tot)


def xi0(x: float, rho0: float, rho1: float) -> float:
    """Affine coordinate (x - rho0)/(rho1 - rho0); undefined when rho0 == rho1."""
    if rho0 == rho1:
        raise ParameterError("xi0 undefined for rho0 == rho1")
    return (x - rho0) / (rho1 - rho0)


def xi1(x: float, rho0: float, rho1: float) -> float:
    """Complementary coordinate 1 - xi0(x); the complement is exact by construction."""
    return 1.0 - xi0(x, rho0, rho1)


@dataclass(frozen=True)
class HyperParams:
    """Arguments feeding the hypergeometric closed forms at a given rate q.

    ``b0``/``b1`` are the roots of z^2 - sum*z + product; they are None when
    the discriminant is negative (possible only for gamma0*gamma1 < 0), in
    which case series must be evaluated through the real (sum, product)
    recurrence instead of the individual roots.
    """

    beta0: float
    beta1: float
    pair_sum: float
    pair_product: float
    b0: float | None
    b1: float | None

    @property
    def is_real_pair(self) -> bool:
        return self.b0 is not None


def hyper_args(q: float, model: KacOuModel) -> HyperParams:
    """beta_i(q) = (q + lambda_i)/gamma_i and the upper-parameter root pair."""
    if q < 0.0:
        raise ParameterError(f"q must be >= 0, got {q}")
    c0, c1 = model.coeffs
    if c0.gamma == 0.0 or c1.gamma == 0.0:
        raise ParameterError("hyper_args requires gamma0 != 0 and gamma1 != 0")
    l0, l1 = model.rates.lambda0, model.rates.lambda1
    beta0 = (q + l0) / c0.gamma
    beta1 = (q + l1) / c1.gamma
    beta0_0 = l0 / c0.gamma
    beta1_0 = l1 / c1.gamma
    s = beta0 + beta1
    # Written so the product vanishes exactly at q = 0 (same rounding on both
    # factors), which makes the q=0 degeneracy of the transforms exact.
    p = beta0 * beta1 - beta0_0 * beta1_0
    if p == 0.0:  # q = 0 collapse: the roots are exactly {0, sum}
        return HyperParams(beta0, beta1, s, p, max(s, 0.0), min(s, 0.0))
    disc = (beta0 - beta1) ** 2 + 4.0 * beta0_0 * beta1_0
    if disc < 0.0:
        return HyperParams(beta0, beta1, s, p, None, None)
    root = math.sqrt(disc)
    return HyperParams(beta0, beta1, s, p, 0.5 * (s + root), 0.5 * (s - root))
