import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import driftsquint.core as core
from driftsquint.errors import DimensionError, DistributionError, IntervalError, LossRangeError

losses = st.lists(st.floats(0, 1), min_size=1, max_size=8)


def weights_like(values):
    raw = np.asarray(values, dtype=float) + 1e-3
    return raw / raw.sum()


def test_instantaneous_regret():
    assert core.instantaneous_regret([1, 0], [0, 1]).tolist() == [0, -1]
    assert core.instantaneous_regret([0.5, 0.5], [0, 1]).tolist() == [0.5, -0.5]
    r = core.instantaneous_regret([0.25, 0.75], [0.2, 0.6])
    assert r == pytest.approx([0.3, -0.1], abs=1e-15)


def test_instantaneous_regret_errors():
    with pytest.raises(DimensionError):
        core.instantaneous_regret([0.5, 0.5], [0, 1, 0])
    with pytest.raises(LossRangeError):
        core.instantaneous_regret([0.5, 0.5], [0, 1.5])
    with pytest.raises(DistributionError):
        core.instantaneous_regret([0.5, 0.6], [0, 1])


@given(losses, st.data())
def test_instantaneous_regret_range(values, data):
    w = weights_like(data.draw(st.lists(st.floats(0, 1), min_size=len(values), max_size=len(values))))
    r = core.instantaneous_regret(w, values)
    assert np.all(np.abs(r) <= 1 + 1e-12)
    assert float(w @ r) == pytest.approx(0, abs=1e-12)


def test_surrogate_loss():
    assert core.surrogate_loss(0.5, 1) == -0.25
    assert core.surrogate_loss(0.5, -1) == 0.75
    assert core.surrogate_loss(0, 0.3) == 0
    table = core.surrogate_losses([0.5, 0.25], [1, -1])
    assert table.shape == (2, 2)
    assert table.tolist() == [[-0.25, 0.75], [-0.25 + 0.0625, 0.25 + 0.0625]]


def test_mix_loss():
    assert core.mix_loss([0.3, 0.9], [1, 0]) == 0.3
    assert core.mix_loss([0.4, 0.4, 0.4], [1 / 3, 1 / 3, 1 / 3]) == pytest.approx(0.4, abs=1e-15)
    assert core.mix_loss([0, math.log(3)], [0.5, 0.5]) == pytest.approx(math.log(1.5), abs=1e-12)
    assert core.mix_loss([0, math.log(3)], [0.5, 0.5]) == pytest.approx(0.405465, abs=1e-6)


def test_mix_loss_does_not_overflow():
    assert core.mix_loss([-2000.0, -1999.0], [0.5, 0.5]) == pytest.approx(
        -2000 - math.log((1 + math.exp(-1)) / 2), abs=1e-9
    )
    assert core.mix_loss([5000.0, 5000.0], [0.5, 0.5]) == pytest.approx(5000.0)


def test_mix_loss_errors():
    with pytest.raises(DistributionError):
        core.mix_loss([], [])
    with pytest.raises(DimensionError):
        core.mix_loss([0.1, 0.2], [1.0])


@given(losses, st.data())
def test_mix_loss_between_extremes(values, data):
    dist = weights_like(data.draw(st.lists(st.floats(0, 1), min_size=len(values), max_size=len(values))))
    value = core.mix_loss(values, dist)
    assert min(values) <= value <= max(values)
    assert value <= float(dist @ np.asarray(values)) + 1e-12


@given(losses, st.data(), st.floats(-2, 2))
def test_mix_loss_shifts_with_constant(values, data, shift):
    dist = weights_like(data.draw(st.lists(st.floats(0, 1), min_size=len(values), max_size=len(values))))
    shifted = np.asarray(values) + shift
    assert core.mix_loss(shifted, dist) == pytest.approx(core.mix_loss(values, dist) + shift, abs=1e-12)


def test_mix_loss_of_equal_losses_shifts_exactly():
    dist = [0.3, 0.7]
    assert core.mix_loss([0.4, 0.4], dist) == 0.4
    assert core.mix_loss([-1.6, -1.6], dist) == -1.6


def test_mix_loss_log_matches_mix_loss():
    dist = np.array([0.2, 0.3, 0.5])
    values = np.array([0.1, -0.2, 0.7])
    assert core.mix_loss_log(values, np.log(dist)) == pytest.approx(core.mix_loss(values, dist), abs=1e-14)


def test_kl_divergence():
    assert core.kl_divergence([0.5, 0.5], [0.5, 0.5]) == 0
    assert core.kl_divergence([1, 0, 0, 0], [0.25] * 4) == pytest.approx(math.log(4))
    assert core.kl_divergence([0.75, 0.25], [0.5, 0.5]) == pytest.approx(0.130812, abs=1e-6)
    with pytest.raises(DistributionError):
        core.kl_divergence([0.5, 0.5], [1, 0])


@given(st.data())
def test_kl_divergence_nonnegative(data):
    size = data.draw(st.integers(1, 6))
    q = weights_like(data.draw(st.lists(st.floats(0, 1), min_size=size, max_size=size)))
    p = weights_like(data.draw(st.lists(st.floats(0, 1), min_size=size, max_size=size)))
    assert core.kl_divergence(q, p) >= 0


def test_probability_vector():
    assert core.probability_vector([0.5, 0.5]).tolist() == [0.5, 0.5]
    with pytest.raises(DistributionError):
        core.probability_vector([])
    with pytest.raises(DistributionError):
        core.probability_vector([0.7, 0.7])
    with pytest.raises(DistributionError):
        core.probability_vector([1.5, -0.5])
    with pytest.raises(DimensionError):
        core.probability_vector([0.5, 0.5], size=3)


def test_log_normalize():
    log_weights = core.log_normalize([1000.0, 1000.0])
    assert np.exp(log_weights).tolist() == pytest.approx([0.5, 0.5])
    assert core.normalize_log([-math.inf, 0.0]).tolist() == [0.0, 1.0]
    with pytest.raises(DistributionError):
        core.log_normalize([-math.inf, -math.inf])


def test_expert_prior():
    prior = core.ExpertPrior.uniform(4)
    assert prior.is_uniform
    assert prior.mass([0, 2]) == 0.5
    assert prior.conditional([1, 3]).tolist() == [0, 0.5, 0, 0.5]
    skewed = core.ExpertPrior([0.1, 0.2, 0.7])
    assert not skewed.is_uniform
    assert skewed.conditional([2]).tolist() == [0, 0, 1]
    with pytest.raises(DistributionError):
        skewed.mass([])
    with pytest.raises(DimensionError):
        skewed.mass([3])
    with pytest.raises(DistributionError):
        core.ExpertPrior([0.5, 0.6])


def test_build_grid():
    assert core.build_grid(1).rates.tolist() == [0.5]
    assert core.build_grid(16).rates.tolist() == [0.5, 0.25]
    assert core.build_grid(100).rates.tolist() == [0.5, 0.25, 0.125, 0.0625]
    assert core.build_grid(2).rates.tolist() == [0.5]
    grid = core.build_grid(100)
    assert grid.prior.sum() == pytest.approx(1)
    assert core.log_grid_size(1) == 0
    assert core.log_grid_size(100) == pytest.approx(math.log(4))
    with pytest.raises(IntervalError):
        core.build_grid(0)


@given(st.integers(2, 10 ** 6))
def test_grid_size(horizon):
    assert core.build_grid(horizon).size == math.ceil(math.log2(math.sqrt(horizon)) - 1e-12)


@given(st.integers(1, 4096), st.floats(0, 1))
def test_nearest_rate_within_factor_two(horizon, position):
    grid = core.build_grid(horizon)
    low, high = math.log(0.5 / math.sqrt(horizon)), math.log(0.5)
    rate = math.exp(low + position * (high - low))
    nearest = grid.rates[core.nearest_rate(grid, rate)]
    assert max(nearest / rate, rate / nearest) <= 2 + 1e-12


def test_check_interval():
    assert core.check_interval((2, 5)) == (2, 5)
    with pytest.raises(IntervalError):
        core.check_interval((0, 3))
    with pytest.raises(IntervalError):
        core.check_interval((4, 3))
    with pytest.raises(IntervalError):
        core.check_interval((1, 9), horizon=8)


def test_regret_over_set():
    ledger = core.RegretLedger([[1.0, -0.5], [1.0, -0.5]])
    prior = core.ExpertPrior.uniform(2)
    assert ledger.regret((1, 2)).tolist() == [2, -1]
    assert core.regret_over_set(ledger, prior, [0, 1], (1, 2)) == (0.5, 1.25)
    assert core.regret_over_set(ledger, prior, [0], (1, 2)) == (2, 2)
    assert core.regret_over_set(ledger, prior, [1], (2, 2)) == (-0.5, 0.25)


@settings(max_examples=50)
@given(st.integers(1, 30), st.integers(1, 4), st.data())
def test_ledger_interval_queries(horizon, experts, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2 ** 32 - 1)))
    regrets = rng.uniform(-1, 1, size=(horizon, experts))
    ledger = core.RegretLedger(regrets)
    start = data.draw(st.integers(1, horizon))
    end = data.draw(st.integers(start, horizon))
    assert ledger.regret((start, end)) == pytest.approx(regrets[start - 1 : end].sum(axis=0))
    assert ledger.variance((start, end)) == pytest.approx((regrets[start - 1 : end] ** 2).sum(axis=0))
    many = ledger.interval_regrets(np.array([start]), np.array([end]))
    assert many[0] == pytest.approx(ledger.regret((start, end)))
