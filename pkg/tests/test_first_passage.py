import math

import numpy as np
import pytest

from kacou.errors import (
    DegenerateModelError,
    OutOfDomainError,
    ParameterError,
    UnsupportedRegimeError,
)
from kacou.first_passage import (
    FptQuery,
    fpt_integral_oracle,
    fpt_ode_residual,
    fpt_oracle_curve,
    laplace_fpt,
    running_extremum_prob,
)
from kacou.model import KacOuModel
from kacou.rng import stream
from kacou.simulate import SimCaps, fpt_samples

ATTRACTING = KacOuModel.from_values(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0)
ATTRACT_REPEL = KacOuModel.from_values(0.3, 1.0, 0.0, -1.0, 0.0, 0.0, 1.0, -1.0)
NON_STRICT = KacOuModel.from_values(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0)
DEGENERATE = KacOuModel.from_values(1.0, 1.0, 1.0, 2.0, 0.0, 0.0, 1.0, 2.0)
REPELLING = KacOuModel.from_values(1.0, 1.0, 1.0, 4.0, 0.0, 0.0, -1.0, -2.0)


def test_attracting_hand_value():
    # lam = gam = 1, rho = (0, 1), q = 1: b = (3, 1), beta0 = 2 and
    # l1 = F(3,1;2;x) / F(3,1;2;y) = ((1-x)^-2 - 1)/(2x) ratio = 7/45
    val = laplace_fpt(FptQuery(1.0, 0.25, 0.75, 1), ATTRACTING)
    assert val == pytest.approx(7.0 / 45.0, rel=1e-12)


def test_q0_is_one_and_monotone_in_q():
    for state in (0, 1):
        assert laplace_fpt(FptQuery(0.0, 0.25, 0.75, state), ATTRACTING) == pytest.approx(
            1.0, abs=1e-10
        )
    values = [laplace_fpt(FptQuery(q, 0.25, 0.75, 1), ATTRACTING) for q in (0.5, 1.0, 2.0, 4.0)]
    assert all(b < a for a, b in zip(values, values[1:]))
    assert all(0.0 < v <= 1.0 for v in values)


def test_boundary_attainment():
    assert laplace_fpt(FptQuery(1.0, 0.75 - 1e-8, 0.75, 1), ATTRACTING) == pytest.approx(
        1.0, abs=1e-6
    )
    # attraction-repulsion: state 0 reaches the threshold from below
    assert laplace_fpt(FptQuery(0.7, -0.5 - 1e-8, -0.5, 0), ATTRACT_REPEL) == pytest.approx(
        1.0, abs=1e-6
    )


@pytest.mark.parametrize(
    "model, q, x, y",
    [
        (ATTRACTING, 1.0, 0.25, 0.75),
        (ATTRACTING, 0.5, 0.9, 0.4),
        (ATTRACT_REPEL, 0.7, -0.9, -0.5),
        (ATTRACT_REPEL, 0.7, 0.4, -0.5),
        (NON_STRICT, 0.7, 0.2, 0.8),
        (NON_STRICT, 1.5, -0.5, 0.4),
    ],
)
def test_closed_form_matches_integral_oracle(model, q, x, y):
    for state in (0, 1):
        closed = laplace_fpt(FptQuery(q, x, y, state), model)
        oracle = fpt_integral_oracle(FptQuery(q, x, y, state), model, tol=1e-7)
        assert closed == pytest.approx(oracle, abs=1e-4)


def test_oracle_reproduces_boundary():
    e0, e1 = fpt_oracle_curve(ATTRACTING, 1.0, 0.75, np.array([0.75 - 1e-8]), tol=1e-7)
    assert e1[0] == pytest.approx(1.0, abs=1e-5)


def test_oracle_monotone_in_q():
    v1 = fpt_integral_oracle(FptQuery(1.0, 0.25, 0.75, 1), ATTRACTING)
    v2 = fpt_integral_oracle(FptQuery(2.0, 0.25, 0.75, 1), ATTRACTING)
    assert v2 < v1


def test_oracle_handles_degenerate_and_matches_mc():
    q = FptQuery(1.0, 2.0, 1.5, 0)
    oracle = fpt_integral_oracle(q, DEGENERATE, tol=1e-7)
    from kacou.simulate import mc_laplace_fpt

    est = mc_laplace_fpt(q, DEGENERATE, 100_000, seed=42)
    assert abs(oracle - est.mean) <= max(3.0 * est.stderr, 1e-3)


def test_oracle_requires_positive_q():
    with pytest.raises(ParameterError):
        fpt_integral_oracle(FptQuery(0.0, 0.25, 0.75, 1), ATTRACTING)


def test_oracle_rejects_straddling_queries():
    with pytest.raises(ParameterError):
        fpt_oracle_curve(ATTRACTING, 1.0, 0.5, np.array([0.25, 0.75]))


# --- dispatch errors ----------------------------------------------------------


def test_degenerate_model_redirects_to_oracle():
    with pytest.raises(DegenerateModelError):
        laplace_fpt(FptQuery(1.0, 2.0, 1.5, 0), DEGENERATE)


def test_repulsion_only_has_no_closed_form():
    with pytest.raises(UnsupportedRegimeError):
        laplace_fpt(FptQuery(1.0, 1.0, 2.0, 0), REPELLING)


def test_attracting_domain_errors():
    with pytest.raises(OutOfDomainError):
        laplace_fpt(FptQuery(1.0, 0.5, 1.5, 1), ATTRACTING)  # threshold above rho1
    with pytest.raises(OutOfDomainError):
        laplace_fpt(FptQuery(1.0, -1.5, 0.75, 1), ATTRACTING)  # outside series radius
    with pytest.raises(OutOfDomainError):
        laplace_fpt(FptQuery(1.0, 2.5, 0.5, 0), ATTRACTING)  # beyond 2*rho1 - rho0


def test_attraction_repulsion_domain_errors():
    with pytest.raises(OutOfDomainError):
        laplace_fpt(FptQuery(0.7, -0.2, 0.3, 0), ATTRACT_REPEL)  # threshold above rho0
    with pytest.raises(OutOfDomainError):
        laplace_fpt(FptQuery(0.7, 1.4, -0.5, 0), ATTRACT_REPEL)  # above the repelling level


def test_non_strict_side_restriction():
    with pytest.raises(OutOfDomainError):
        laplace_fpt(FptQuery(0.7, 0.8, 0.2, 1), NON_STRICT)  # against the drift
    with pytest.raises(OutOfDomainError):
        laplace_fpt(FptQuery(0.7, -2.0, -1.0, 1), NON_STRICT)  # threshold below rho
    # ... but the oracle covers both
    val = fpt_integral_oracle(FptQuery(0.7, -2.0, -1.0, 1), NON_STRICT, tol=1e-6)
    assert 0.0 < val <= 1.0


def test_query_validation():
    with pytest.raises(ParameterError):
        FptQuery(1.0, 0.5, 0.5, 0)
    with pytest.raises(ParameterError):
        FptQuery(-1.0, 0.2, 0.5, 0)
    with pytest.raises(ParameterError):
        FptQuery(1.0, 0.2, 0.5, 2)


# --- symmetry reductions -------------------------------------------------------


def test_mirrored_orientations_agree_with_oracle():
    # swap the state labels: AttractionRepulsion10
    ar10 = KacOuModel.from_values(1.0, 0.3, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0)
    q = FptQuery(0.7, -0.9, -0.5, 1)
    assert laplace_fpt(q, ar10) == pytest.approx(
        laplace_fpt(FptQuery(0.7, -0.9, -0.5, 0), ATTRACT_REPEL), rel=1e-12
    )
    # zero-reversion state first, negative drift: swap + rescale reduction
    ns_neg = KacOuModel.from_values(2.0, 1.0, -3.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    q2 = FptQuery(0.9, 0.5, -0.2, 0)
    closed = laplace_fpt(q2, ns_neg)
    oracle = fpt_integral_oracle(q2, ns_neg, tol=1e-7)
    assert closed == pytest.approx(oracle, abs=1e-4)


def test_rho_ordering_swap_in_attracting():
    flipped = KacOuModel.from_values(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0)  # rho = (1, 0)
    v = laplace_fpt(FptQuery(1.0, 0.25, 0.75, 0), flipped)
    ref = laplace_fpt(FptQuery(1.0, 0.25, 0.75, 1), ATTRACTING)
    assert v == pytest.approx(ref, rel=1e-12)


# --- running extremum -----------------------------------------------------------


def test_running_extremum_equals_laplace():
    v = running_extremum_prob(1.0, 0.25, 0.75, 1, ATTRACTING)
    assert v == laplace_fpt(FptQuery(1.0, 0.25, 0.75, 1), ATTRACTING)
    with pytest.raises(ParameterError):
        running_extremum_prob(0.0, 0.25, 0.75, 1, ATTRACTING)


def test_running_extremum_vanishes_for_fast_killing():
    assert running_extremum_prob(1e6, 0.25, 0.75, 1, ATTRACTING) < 1e-6


def test_running_extremum_monte_carlo():
    # fraction of paths whose running maximum passes y before an independent
    # exponential clock
    q, x, y, state, n = 1.0, 0.25, 0.75, 1, 200_000
    batch = fpt_samples(ATTRACTING, x, y, state, n, seed=314, caps=SimCaps(horizon=200.0))
    clocks = stream(315, "killing").exponential(1.0 / q, size=n)
    hit_before_clock = (~batch.censored) & (batch.times < clocks)
    p_hat = float(np.mean(hit_before_clock))
    se = math.sqrt(p_hat * (1.0 - p_hat) / n)
    assert abs(p_hat - running_extremum_prob(q, x, y, state, ATTRACTING)) < 3.0 * se


# --- ODE residuals ---------------------------------------------------------------


@pytest.mark.parametrize(
    "model, q, x, y",
    [
        (ATTRACTING, 1.0, 0.5, 0.75),
        (ATTRACT_REPEL, 0.7, -0.8, -0.4),
        (NON_STRICT, 0.7, 0.1, 0.8),
    ],
)
def test_ode_residual_small_and_second_order(model, q, x, y):
    r = fpt_ode_residual(q, x, y, model, 1e-4)
    r_half = fpt_ode_residual(q, x, y, model, 5e-5)
    assert max(abs(v) for v in r) < 1e-6
    for a, b in zip(r, r_half):
        if abs(a) > 1e-10:
            assert a / b == pytest.approx(4.0, abs=1.0)


def test_ode_residual_rejects_bad_step():
    with pytest.raises(ParameterError):
        fpt_ode_residual(1.0, 0.5, 0.75, ATTRACTING, 0.0)


@pytest.mark.parametrize(
    "model, x, y, state",
    [
        (ATTRACTING, 0.25, 0.75, 0),
        (ATTRACTING, 0.9, 0.4, 1),
        (ATTRACT_REPEL, -0.9, -0.5, 1),
        (ATTRACT_REPEL, 0.4, -0.5, 0),
        (NON_STRICT, 0.2, 0.8, 0),
    ],
)
def test_laplace_strictly_decreasing_in_q(model, x, y, state):
    values = [laplace_fpt(FptQuery(q, x, y, state), model) for q in (0.25, 0.5, 1.0, 2.0, 4.0)]
    assert all(0.0 < v <= 1.0 for v in values)
    assert all(b < a for a, b in zip(values, values[1:]))


def test_oracle_degenerate_mixed_signs_matches_mc():
    # equal levels with one attracting and one repelling rate: the oracle's
    # grid places a node at the repelling level and a geometric tail past it
    from kacou.simulate import mc_laplace_fpt

    dg = KacOuModel.from_values(1.0, 0.8, 2.0, -1.0, 0.0, 0.0, 2.0, -1.0)
    for x, y, s in [(1.8, 1.3, 0), (1.2, 2.5, 1)]:
        q = FptQuery(0.9, x, y, s)
        oracle = fpt_integral_oracle(q, dg, tol=1e-7)
        est = mc_laplace_fpt(q, dg, 60_000, seed=55)
        assert abs(oracle - est.mean) <= max(3.5 * est.stderr, 1e-3)
