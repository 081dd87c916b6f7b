"""Shared domain values for prediction with expert advice.

Losses and probability vectors are plain numpy arrays validated on the way in.
Anything built from products of exponentials is kept as log-weights and only
normalised through a max-shifted log-sum-exp (``scipy.special.logsumexp``).
Experts are 0-based here; reports render them 1-based.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, rel_entr

from driftsquint.errors import (
    DimensionError,
    DistributionError,
    IntervalError,
    LossRangeError,
)

# probability vectors sum to one within this after normalisation
NORMALIZATION_TOL = 1e-12
# two routes to the same quantity agree within this
EQUIVALENCE_TOL = 1e-9
# slack granted to every bound check
BOUND_SLACK = 1e-9


def loss_vector(values, experts=None):
    losses = np.asarray(values, dtype=float)
    if losses.ndim != 1 or losses.shape[0] < 1:
        raise DimensionError("a loss vector needs one entry per expert")
    if experts is not None and losses.shape[0] != experts:
        raise DimensionError(
            "expected %d expert losses, got %d" % (experts, losses.shape[0])
        )
    if not np.all(np.isfinite(losses)) or np.any(losses < 0) or np.any(losses > 1):
        raise LossRangeError("losses must lie in [0,1], got %s" % losses.tolist())
    return losses


def loss_matrix(values, experts=None):
    matrix = np.asarray(values, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] < 1:
        raise DimensionError("a loss matrix is T rows of K losses")
    if experts is not None and matrix.shape[1] != experts:
        raise DimensionError(
            "expected %d experts, got %d" % (experts, matrix.shape[1])
        )
    if not np.all(np.isfinite(matrix)) or np.any(matrix < 0) or np.any(matrix > 1):
        raise LossRangeError("losses must lie in [0,1]")
    return matrix


def probability_vector(values, size=None, tol=EQUIVALENCE_TOL):
    weights = np.asarray(values, dtype=float)
    if weights.ndim != 1 or weights.shape[0] < 1:
        raise DistributionError("a probability vector needs a nonempty support")
    if size is not None and weights.shape[0] != size:
        raise DimensionError(
            "expected %d weights, got %d" % (size, weights.shape[0])
        )
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise DistributionError("weights must be finite and nonnegative")
    if abs(weights.sum() - 1.0) > tol:
        raise DistributionError("weights sum to %r, not 1" % weights.sum())
    return weights


def log_normalize(log_weights):
    log_weights = np.asarray(log_weights, dtype=float)
    if log_weights.size == 0:
        raise DistributionError("cannot normalise an empty support")
    total = logsumexp(log_weights)
    if not np.isfinite(total):
        raise DistributionError("cannot normalise: no finite log-weight")
    return log_weights - total


def normalize_log(log_weights):
    weights = np.exp(log_normalize(log_weights))
    return weights / weights.sum()


def safe_log(values):
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(values, dtype=float))


def instantaneous_regret(weights, losses):
    losses = loss_vector(losses)
    weights = probability_vector(weights, size=losses.shape[0])
    return float(weights @ losses) - losses


def surrogate_loss(rate, regret):
    return -rate * regret + rate ** 2 * regret ** 2


# surrogate losses of every (rate, expert) pair, shape |rates| x K
def surrogate_losses(rates, regrets):
    rates = np.asarray(rates, dtype=float)[:, None]
    regrets = np.asarray(regrets, dtype=float)[None, :]
    return surrogate_loss(rates, regrets)


def mix_loss(losses, dist):
    losses = np.asarray(losses, dtype=float).ravel()
    dist = np.asarray(dist, dtype=float).ravel()
    if losses.size == 0:
        raise DistributionError("mix loss of an empty support")
    if losses.shape != dist.shape:
        raise DimensionError("losses and distribution differ in size")
    support = dist > 0
    if not np.any(support):
        raise DistributionError("mix loss under a distribution without mass")
    value = -logsumexp(-losses[support], b=dist[support])
    return float(np.clip(value, losses[support].min(), losses[support].max()))


# mix loss when the distribution is already held as log-weights
def mix_loss_log(losses, log_dist):
    losses = np.asarray(losses, dtype=float)
    log_dist = np.asarray(log_dist, dtype=float)
    if losses.shape != log_dist.shape:
        raise DimensionError("losses and distribution differ in shape")
    return float(-logsumexp(log_dist - losses))


def kl_divergence(q, p):
    q = np.asarray(q, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    if q.shape != p.shape:
        raise DimensionError("distributions differ in size")
    if np.any((q > 0) & (p <= 0)):
        raise DistributionError("q puts mass where p has none")
    return max(float(np.sum(rel_entr(q, p))), 0.0)


@dataclass(frozen=True, eq=False)
class ExpertPrior:
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", probability_vector(self.probs))

    @classmethod
    def uniform(cls, experts):
        if experts < 1:
            raise DimensionError("need at least one expert")
        return cls(np.full(experts, 1.0 / experts))

    @property
    def experts(self):
        return self.probs.shape[0]

    @property
    def log_probs(self):
        return safe_log(self.probs)

    @property
    def is_uniform(self):
        return bool(np.allclose(self.probs, 1.0 / self.experts, rtol=0, atol=1e-15))

    def _members(self, subset):
        members = np.unique(np.asarray(list(subset), dtype=int))
        if members.size == 0:
            raise DistributionError("comparator set is empty")
        if members.min() < 0 or members.max() >= self.experts:
            raise DimensionError("comparator set names an unknown expert")
        return members

    def mass(self, subset):
        return float(self.probs[self._members(subset)].sum())

    # pi(.|subset) as a K-vector, zero outside the subset
    def conditional(self, subset):
        members = self._members(subset)
        mass = self.probs[members].sum()
        if mass <= 0:
            raise DistributionError("comparator set has zero prior mass")
        result = np.zeros(self.experts)
        result[members] = self.probs[members] / mass
        return result


@dataclass(frozen=True, eq=False)
class LearningRateGrid:
    rates: np.ndarray
    log_prior: np.ndarray

    @property
    def size(self):
        return self.rates.shape[0]

    @property
    def prior(self):
        return np.exp(self.log_prior)

    @property
    def log_rates(self):
        return np.log(self.rates)


# the smallest i with 2^i >= sqrt(T), in exact integer arithmetic
def grid_exponent(horizon):
    if horizon < 1:
        raise IntervalError("horizon must be at least 1, got %r" % horizon)
    exponent = 0
    while 4 ** exponent < horizon:
        exponent += 1
    return exponent


# ln |rates|; equals ln ceil(log2 sqrt T) for T >= 2 and 0 for T = 1
def log_grid_size(horizon):
    return math.log(max(grid_exponent(horizon), 1))


def build_grid(horizon):
    exponent = max(grid_exponent(horizon), 1)
    rates = np.array([2.0 ** -i for i in range(1, exponent + 1)])
    return LearningRateGrid(rates, np.full(exponent, -math.log(exponent)))


# index of the grid rate closest to `rate` in ratio; for rates in
# [1/(2 sqrt T), 1/2] that ratio is at most 2
def nearest_rate(grid, rate):
    if not rate > 0:
        raise DistributionError("rates must be positive, got %r" % rate)
    return int(np.argmin(np.abs(grid.log_rates - math.log(rate))))


def check_interval(interval, horizon=None):
    start, end = interval
    if int(start) != start or int(end) != end:
        raise IntervalError("interval bounds must be integers: %r" % (interval,))
    start, end = int(start), int(end)
    if start < 1 or end < start:
        raise IntervalError("not a contiguous interval: [%d,%d]" % (start, end))
    if horizon is not None and end > horizon:
        raise IntervalError(
            "interval [%d,%d] runs past the horizon %d" % (start, end, horizon)
        )
    return start, end


class RegretLedger:
    """Instantaneous regrets r_t^k with prefix sums for interval queries."""

    def __init__(self, regrets):
        regrets = np.asarray(regrets, dtype=float)
        if regrets.ndim != 2:
            raise DimensionError("a ledger is T rows of K regrets")
        if np.any(np.abs(regrets) > 1 + NORMALIZATION_TOL):
            raise LossRangeError("instantaneous regrets must lie in [-1,1]")
        self.regrets = regrets
        zero = np.zeros((1, regrets.shape[1]))
        self._regret_sums = np.vstack([zero, np.cumsum(regrets, axis=0)])
        self._variance_sums = np.vstack([zero, np.cumsum(regrets ** 2, axis=0)])

    @property
    def horizon(self):
        return self.regrets.shape[0]

    @property
    def experts(self):
        return self.regrets.shape[1]

    def regret(self, interval):
        start, end = check_interval(interval, self.horizon)
        return self._regret_sums[end] - self._regret_sums[start - 1]

    def variance(self, interval):
        start, end = check_interval(interval, self.horizon)
        return self._variance_sums[end] - self._variance_sums[start - 1]

    # R_I^k for many intervals at once, one row per interval
    def interval_regrets(self, starts, ends):
        starts, ends = np.asarray(starts), np.asarray(ends)
        return self._regret_sums[ends] - self._regret_sums[starts - 1]

    def interval_variances(self, starts, ends):
        starts, ends = np.asarray(starts), np.asarray(ends)
        return self._variance_sums[ends] - self._variance_sums[starts - 1]


def regret_over_set(ledger, prior, subset, interval):
    weights = prior.conditional(subset)
    return (
        float(ledger.regret(interval) @ weights),
        float(ledger.variance(interval) @ weights),
    )
