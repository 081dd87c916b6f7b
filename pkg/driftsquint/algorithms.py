"""Learners for a single interval: Hedge, Squint over a finite rate grid, and
the Exponential Weights posterior that Squint is a marginal of."""
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from driftsquint import core
from driftsquint.errors import (
    DimensionError,
    DistributionError,
    IntervalError,
    RouteMismatchError,
)

log = logging.getLogger(__name__)


def hedge_default_rate(horizon, experts):
    if horizon < 1:
        raise IntervalError("horizon must be at least 1, got %r" % horizon)
    if experts < 2:
        raise DimensionError("the default Hedge rate needs at least two experts")
    return math.sqrt(8.0 / horizon * math.log(experts))


def hedge_bound(horizon, experts):
    if horizon < 1:
        raise IntervalError("horizon must be at least 1, got %r" % horizon)
    if experts < 2:
        raise DimensionError("the Hedge bound needs at least two experts")
    return math.sqrt(horizon / 2.0 * math.log(experts))


@dataclass(eq=False)
class HedgeState:
    rate: float
    prior: core.ExpertPrior
    cum_losses: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        if not self.rate >= 0:
            raise DistributionError("Hedge needs a nonnegative rate, got %r" % self.rate)
        if self.cum_losses is None:
            self.cum_losses = np.zeros(self.prior.experts)

    @property
    def experts(self):
        return self.prior.experts


def new_hedge(experts, horizon, rate=None, prior=None):
    prior = prior or core.ExpertPrior.uniform(experts)
    if rate is None:
        rate = hedge_default_rate(horizon, experts) if experts >= 2 else 0.0
    return HedgeState(rate, prior)


def hedge_weights(state):
    return core.normalize_log(state.prior.log_probs - state.rate * state.cum_losses)


def hedge_update(state, losses):
    losses = core.loss_vector(losses, state.experts)
    state.cum_losses = state.cum_losses + losses
    state.t += 1
    return state


@dataclass(eq=False)
class EwPosterior:
    """Exponential Weights over a finite support of any shape."""

    log_prior: np.ndarray
    rate: float = 1.0
    cum_losses: np.ndarray = None

    def __post_init__(self):
        self.log_prior = np.asarray(self.log_prior, dtype=float)
        if self.cum_losses is None:
            self.cum_losses = np.zeros(self.log_prior.shape)

    def log_posterior(self):
        return core.log_normalize(self.log_prior - self.rate * self.cum_losses)

    def posterior(self):
        return np.exp(self.log_posterior())

    # ln Z_{t+1}, the log normaliser of the unnormalised posterior
    def log_normalizer(self):
        return float(logsumexp(self.log_prior - self.rate * self.cum_losses))


def ew_posterior_update(posterior, losses):
    losses = np.asarray(losses, dtype=float)
    if losses.shape != posterior.log_prior.shape:
        raise DimensionError("losses do not cover the posterior's support")
    if not np.all(np.isfinite(losses)):
        raise DistributionError("Exponential Weights losses must be finite")
    posterior.cum_losses = posterior.cum_losses + losses
    return posterior


# w^k proportional to E_P[eta 1{k}], from a log posterior over (rate, expert)
def marginalize_rates(log_posterior, rates):
    log_rates = np.log(np.asarray(rates, dtype=float))[:, None]
    return core.normalize_log(logsumexp(log_posterior + log_rates, axis=0))


@dataclass(eq=False)
class SquintState:
    grid: core.LearningRateGrid
    prior: core.ExpertPrior
    ew_rate: float = 1.0
    regret: np.ndarray = None
    variance: np.ndarray = None
    surrogate: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        experts = self.prior.experts
        if self.regret is None:
            self.regret = np.zeros(experts)
        if self.variance is None:
            self.variance = np.zeros(experts)
        if self.surrogate is None:
            self.surrogate = np.zeros((self.grid.size, experts))

    @property
    def experts(self):
        return self.prior.experts

    @property
    def log_joint_prior(self):
        return self.grid.log_prior[:, None] + self.prior.log_probs[None, :]


def new_squint(experts, horizon, prior=None, ew_rate=1.0, grid=None):
    prior = prior or core.ExpertPrior.uniform(experts)
    return SquintState(grid or core.build_grid(horizon), prior, ew_rate)


def squint_posterior(state):
    return EwPosterior(state.log_joint_prior, state.ew_rate, state.surrogate)


def squint_log_posterior(state):
    return squint_posterior(state).log_posterior()


def squint_weights(state):
    return marginalize_rates(squint_log_posterior(state), state.grid.rates)


# the same weights straight from the regret and variance sums
def squint_weights_direct(state):
    rates = state.grid.rates[:, None]
    exponent = state.ew_rate * (rates * state.regret - rates ** 2 * state.variance)
    log_weights = logsumexp(
        state.log_joint_prior + exponent + state.grid.log_rates[:, None], axis=0
    )
    return core.normalize_log(log_weights)


def squint_observe(state, regrets):
    regrets = np.asarray(regrets, dtype=float)
    if regrets.shape != (state.experts,):
        raise DimensionError(
            "expected %d regrets, got shape %s" % (state.experts, regrets.shape)
        )
    state.regret = state.regret + regrets
    state.variance = state.variance + regrets ** 2
    state.surrogate = state.surrogate + core.surrogate_losses(state.grid.rates, regrets)
    state.t += 1

    rates = state.grid.rates[:, None]
    expected = -rates * state.regret + rates ** 2 * state.variance
    drift = np.max(np.abs(state.surrogate - expected))
    if drift > core.EQUIVALENCE_TOL * (1 + np.max(np.abs(expected))):
        raise RouteMismatchError(
            "surrogate sums drifted %g from the regret statistics" % drift
        )
    return state


def squint_update(state, weights, losses):
    return squint_observe(state, core.instantaneous_regret(weights, losses))


def squint_bound(variance, a):
    return 2 * np.sqrt(2 * np.asarray(variance) * a) + 4 * np.asarray(a)


def bound_A(horizon, mass):
    mass = np.asarray(mass, dtype=float)
    if np.any(mass <= 0):
        raise DistributionError("comparator sets need positive prior mass")
    return np.maximum(core.log_grid_size(horizon) - np.log(mass), 1.0)


# Q = point mass on one grid rate times pi(.|subset), shaped like the grid x experts
def comparator_distribution(grid, prior, rate_index, subset):
    if not 0 <= rate_index < grid.size:
        raise DistributionError("rate index %r is not on the grid" % rate_index)
    result = np.zeros((grid.size, prior.experts))
    result[rate_index] = prior.conditional(subset)
    return result


def _check_comparator(comparator, shape):
    comparator = np.asarray(comparator, dtype=float)
    if comparator.shape != shape:
        raise DistributionError("comparator is not supported on the grid x experts")
    if np.any(comparator < 0) or abs(comparator.sum() - 1) > core.EQUIVALENCE_TOL:
        raise DistributionError("comparator is not a probability distribution")
    return comparator


def surrogate_regret(log_posteriors, surrogate_losses, comparator):
    """Sum of per-round mix losses of the surrogate losses under P_t, minus
    the comparator's expected cumulative surrogate loss."""
    if len(log_posteriors) != len(surrogate_losses):
        raise DimensionError("one posterior per round is required")
    if not surrogate_losses:
        return 0.0
    shape = np.shape(surrogate_losses[0])
    comparator = _check_comparator(comparator, shape)
    mixed = sum(
        core.mix_loss_log(losses, log_posterior)
        for log_posterior, losses in zip(log_posteriors, surrogate_losses)
    )
    return mixed - float(np.sum(comparator * np.sum(surrogate_losses, axis=0)))


# the rate-1 Exponential Weights shortcut: the mix losses telescope to -ln Z_{T+1}
def surrogate_regret_telescoped(log_prior, surrogate_losses, comparator):
    log_prior = np.asarray(log_prior, dtype=float)
    comparator = _check_comparator(comparator, log_prior.shape)
    total = np.sum(surrogate_losses, axis=0) if len(surrogate_losses) else 0.0
    return float(-logsumexp(log_prior - total) - np.sum(comparator * total))


class HedgeLearner:
    def __init__(self, experts, horizon, prior=None, rate=None):
        self.state = new_hedge(experts, horizon, rate, prior)
        self.box_updates = 0

    def round(self, losses):
        weights = hedge_weights(self.state)
        hedge_update(self.state, losses)
        self.box_updates += 1
        return weights, None


class SquintLearner:
    """Squint; each round also reports the mix loss of the surrogate losses."""

    def __init__(self, experts, horizon, prior=None, ew_rate=1.0):
        self.state = new_squint(experts, horizon, prior, ew_rate)
        self.box_updates = 0

    def round(self, losses):
        log_posterior = squint_log_posterior(self.state)
        weights = marginalize_rates(log_posterior, self.state.grid.rates)
        direct = squint_weights_direct(self.state)
        gap = np.max(np.abs(weights - direct))
        if gap > core.EQUIVALENCE_TOL:
            raise RouteMismatchError(
                "posterior marginal and closed-form weights differ by %g" % gap
            )
        regrets = core.instantaneous_regret(weights, losses)
        surrogate = core.surrogate_losses(self.state.grid.rates, regrets)
        mixed = core.mix_loss_log(surrogate, log_posterior)
        squint_observe(self.state, regrets)
        self.box_updates += 1
        return weights, mixed
