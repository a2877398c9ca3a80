import math
import os

import numpy as np
import pytest

from kacou.errors import ParameterError
from kacou.first_passage import FptQuery, laplace_fpt
from kacou.model import KacOuModel, SwitchRates, pattern_phi
from kacou.rng import stream
from kacou.simulate import (
    SimCaps,
    evaluate_x,
    fpt_samples,
    mc_laplace_fpt,
    path_segments,
    sample_fpt,
    sample_m_path,
    sample_switch_sequence,
    terminal_values,
)

ATTRACTING = KacOuModel.from_values(1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0)
NOISY = KacOuModel.from_values(1.0, 1.0, 0.0, 1.0, 0.6, 0.9, 1.0, 1.0)
DEGENERATE = KacOuModel.from_values(1.0, 1.0, 1.0, 2.0, 0.0, 0.0, 1.0, 2.0)


# --- switch sequences -------------------------------------------------------


def test_holding_time_mean():
    # long horizon keeps the truncation bias of the last (dropped) holding
    # time far below the Monte Carlo band
    rng = stream(1, "test-holding")
    gaps = []
    for _ in range(30):
        seq = sample_switch_sequence(SwitchRates(1.0, 1.0), 0, 1000.0, rng)
        gaps.extend(np.diff(np.concatenate([[0.0], seq.switch_times])))
    gaps = np.asarray(gaps)
    se = gaps.std(ddof=1) / math.sqrt(gaps.size)
    assert abs(gaps.mean() - 1.0) < 3.0 * se + 2e-3


def test_occupation_fraction_matches_stationary():
    rates = SwitchRates(2.0, 0.5)  # pi* = (0.2, 0.8)
    rng = stream(7, "test-occupation")
    horizon = 2000.0
    seq = sample_switch_sequence(rates, 0, horizon, rng)
    times = np.concatenate([[0.0], seq.switch_times, [horizon]])
    gaps = np.diff(times)
    occ0 = gaps[::2].sum() / horizon
    assert abs(occ0 - 0.2) < 0.02


def test_switch_sequence_determinism():
    a = sample_switch_sequence(SwitchRates(1.0, 2.0), 0, 30.0, stream(42, "p", 3))
    b = sample_switch_sequence(SwitchRates(1.0, 2.0), 0, 30.0, stream(42, "p", 3))
    assert np.array_equal(a.switch_times, b.switch_times)
    c = sample_switch_sequence(SwitchRates(1.0, 2.0), 0, 30.0, stream(42, "p", 4))
    assert not np.array_equal(a.switch_times, c.switch_times)


# --- mean path ---------------------------------------------------------------


def test_evaluate_x_single_segment():
    seq = sample_switch_sequence(SwitchRates(0.01, 0.01), 1, 5.0, stream(5, "few-switches"))
    if seq.switch_times.size == 0 or seq.switch_times[0] > 2.0:
        assert evaluate_x(seq, 0.3, 2.0, ATTRACTING) == pattern_phi(1, 2.0, 0.3, ATTRACTING)


def test_evaluate_x_degenerate_formula():
    # with equal levels the path is rho + (x-rho) * exp(-integral of gamma)
    seq = sample_switch_sequence(SwitchRates(1.0, 1.0), 0, 10.0, stream(11, "deg"))
    t = 7.3
    times = np.concatenate([[0.0], seq.switch_times[seq.switch_times < t], [t]])
    gaps = np.diff(times)
    states = (seq.initial_state + np.arange(gaps.size)) % 2
    gammas = np.where(states == 0, 1.0, 2.0)
    big_gamma = float(np.sum(gammas * gaps))
    expected = 1.0 + (5.0 - 1.0) * math.exp(-big_gamma)
    assert evaluate_x(seq, 5.0, t, DEGENERATE) == pytest.approx(expected, rel=1e-12)


def test_evaluate_x_splice():
    seq = sample_switch_sequence(SwitchRates(2.0, 3.0), 0, 4.0, stream(3, "splice"))
    t = 3.7
    full = evaluate_x(seq, -0.4, t, ATTRACTING)
    assert full == pytest.approx(evaluate_x(seq, -0.4, t, ATTRACTING), abs=0.0)
    # exactness at a switch time: segment start equals evaluation there
    if seq.switch_times.size:
        ts = float(seq.switch_times[0])
        segs = path_segments(seq, -0.4, ATTRACTING)
        assert evaluate_x(seq, -0.4, ts, ATTRACTING) == segs[1].x_start


def test_evaluate_x_beyond_horizon_rejected():
    seq = sample_switch_sequence(SwitchRates(1.0, 1.0), 0, 1.0, stream(1, "h"))
    with pytest.raises(ParameterError):
        evaluate_x(seq, 0.0, 2.0, ATTRACTING)


# --- diffusion path ----------------------------------------------------------


def test_m_path_zero_noise_equals_mean_path():
    seq = sample_switch_sequence(SwitchRates(1.0, 1.0), 0, 5.0, stream(9, "zn"))
    times = np.linspace(0.0, 5.0, 11)
    ms = sample_m_path(seq, 0.2, times, ATTRACTING, stream(9, "zn-noise"))
    xs = np.array([evaluate_x(seq, 0.2, float(t), ATTRACTING) for t in times])
    assert np.allclose(ms, xs, rtol=1e-12, atol=1e-12)


def test_m_path_frozen_state_matches_ou_variance():
    # no switches: classical OU transition at time t
    seq_empty = sample_switch_sequence(SwitchRates(1e-9, 1e-9), 0, 10.0, stream(2, "frozen"))
    assert seq_empty.switch_times.size == 0
    t, b, g = 2.0, 0.6, 1.0
    draws = np.array(
        [
            sample_m_path(seq_empty, 0.0, [t], NOISY, stream(1000 + i, "frozen-draw"))[0]
            for i in range(4000)
        ]
    )
    var_exact = b * b * (1.0 - math.exp(-2.0 * g * t)) / (2.0 * g)
    rel = abs(draws.var(ddof=1) - var_exact) / var_exact
    assert rel < 5.0 * math.sqrt(2.0 / draws.size)


def test_m_ensemble_mean_tracks_conditional_mean():
    seq = sample_switch_sequence(SwitchRates(1.0, 1.0), 1, 3.0, stream(21, "ens"))
    t = 2.5
    n = 20000
    draws = np.array(
        [sample_m_path(seq, 0.1, [t], NOISY, stream(i, "ens-noise"))[0] for i in range(n)]
    )
    x_t = evaluate_x(seq, 0.1, t, NOISY)
    se = draws.std(ddof=1) / math.sqrt(n)
    assert abs(draws.mean() - x_t) < 3.0 * se


def test_m_path_conditional_normality():
    seq = sample_switch_sequence(SwitchRates(1.0, 1.0), 0, 3.0, stream(33, "norm"))
    n = 100_000
    rng = stream(34, "norm-draws")
    draws = np.array([sample_m_path(seq, 0.0, [3.0], NOISY, rng)[0] for _ in range(n)])
    segs = path_segments(seq, 0.0, NOISY)
    last = segs[-1]
    c = NOISY.coeff(last.state)
    dt = 3.0 - last.t_start
    mean = pattern_phi(last.state, dt, last.m_mean, NOISY)
    var = last.m_var * math.exp(-2.0 * c.gamma * dt) + c.b**2 * (
        1.0 - math.exp(-2.0 * c.gamma * dt)
    ) / (2.0 * c.gamma)
    z = (draws - mean) / math.sqrt(var)
    skew = float(np.mean(z**3))
    kurt = float(np.mean(z**4) - 3.0)
    assert abs(np.mean(z)) < 5.0 / math.sqrt(n)
    assert abs(np.var(z, ddof=1) - 1.0) < 5.0 * math.sqrt(2.0 / n)
    assert abs(skew) < 5.0 * math.sqrt(6.0 / n)
    assert abs(kurt) < 5.0 * math.sqrt(24.0 / n)


def test_m_path_rejects_unsorted_times():
    seq = sample_switch_sequence(SwitchRates(1.0, 1.0), 0, 5.0, stream(4, "s"))
    with pytest.raises(ParameterError):
        sample_m_path(seq, 0.0, [2.0, 1.0], NOISY, stream(4, "s2"))


# --- first passage -----------------------------------------------------------


def test_sample_fpt_single_segment_exact():
    # long first holding time forced by screening seeds: hit equals the
    # deterministic hitting time exactly
    from kacou.model import hitting_time

    target = hitting_time(1, 0.2, 0.8, ATTRACTING)
    found = False
    for rep in range(200):
        rng = stream(77, "screen", rep)
        probe = rng.standard_exponential()  # the draw sample_fpt will see
        if probe / ATTRACTING.rates.lambda1 > target:
            out = sample_fpt(0.2, 0.8, 1, ATTRACTING, stream(77, "screen", rep))
            assert out.kind == "hit" and out.time == target
            found = True
            break
    assert found


def test_fpt_censoring_vanishes_in_attracting_regime():
    batch = fpt_samples(ATTRACTING, 0.2, 0.8, 0, 20_000, seed=13, caps=SimCaps(horizon=1e3))
    assert batch.censored_fraction <= 1e-3


def test_mc_laplace_fpt_matches_closed_form():
    q = FptQuery(1.0, 0.25, 0.75, 1)
    est = mc_laplace_fpt(q, ATTRACTING, 200_000, seed=99)
    closed = laplace_fpt(q, ATTRACTING)
    assert abs(est.mean - closed) <= max(3.0 * est.stderr, 1e-3)


def test_mc_laplace_q0_reports_defect():
    q = FptQuery(0.0, 0.2, 0.8, 0)
    est = mc_laplace_fpt(q, ATTRACTING, 5_000, seed=1)
    batch = fpt_samples(ATTRACTING, 0.2, 0.8, 0, 5_000, seed=1)
    assert est.mean == pytest.approx(1.0 - batch.censored_fraction, abs=1e-12)


def test_mc_stderr_clt_scaling():
    q = FptQuery(1.0, 0.25, 0.75, 1)
    e1 = mc_laplace_fpt(q, ATTRACTING, 20_000, seed=5)
    e2 = mc_laplace_fpt(q, ATTRACTING, 40_000, seed=6)
    assert e2.stderr / e1.stderr == pytest.approx(1.0 / math.sqrt(2.0), rel=0.2)


def test_mc_laplace_requires_min_samples():
    with pytest.raises(ParameterError):
        mc_laplace_fpt(FptQuery(1.0, 0.2, 0.8, 0), ATTRACTING, 10, seed=0)


def test_trapping_interval_absorbs_paths():
    # once inside [rho0, rho1] the mean path never leaves
    sample = terminal_values(ATTRACTING, 0.5, 5.0, 1_000, seed=17, initial_state=0)
    assert np.all(sample.values >= 0.0) and np.all(sample.values <= 1.0)
    later = terminal_values(ATTRACTING, 0.5, 25.0, 1_000, seed=17, initial_state=0)
    assert np.all(later.values >= 0.0) and np.all(later.values <= 1.0)


# --- determinism across the vectorized kernels --------------------------------


def test_batches_bit_identical_across_thread_counts():
    q_args = dict(x=0.25, y=0.75, initial_state=1, n=50_000, seed=123)
    old = os.environ.get("KACOU_THREADS")
    try:
        os.environ["KACOU_THREADS"] = "1"
        seq = fpt_samples(ATTRACTING, **q_args)
        os.environ["KACOU_THREADS"] = "4"
        par = fpt_samples(ATTRACTING, **q_args)
    finally:
        if old is None:
            os.environ.pop("KACOU_THREADS", None)
        else:
            os.environ["KACOU_THREADS"] = old
    assert np.array_equal(seq.times, par.times, equal_nan=True)
    assert np.array_equal(seq.censored, par.censored)


def test_terminal_values_deterministic_by_seed():
    a = terminal_values(NOISY, 0.1, 2.0, 10_000, seed=9, with_noise=True)
    b = terminal_values(NOISY, 0.1, 2.0, 10_000, seed=9, with_noise=True)
    c = terminal_values(NOISY, 0.1, 2.0, 10_000, seed=10, with_noise=True)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
