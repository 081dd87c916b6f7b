"""Meta learners over black boxes running on the covering intervals.

CBCE bets on each active box with a coin-betting potential.  Squint-CE runs
Exponential Weights over every box with the boxes' Squint mix losses as
losses; a box that is not active is charged the learner's own mix loss, so
conditioning on the active boxes loses nothing.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from driftsquint import algorithms, core
from driftsquint.covering import (
    CoveringInterval,
    CoveringSchedule,
    count_factor,
    partition,
)
from driftsquint.errors import (
    DimensionError,
    DistributionError,
    IntervalError,
    RouteMismatchError,
)

log = logging.getLogger(__name__)

BOX_PRIORS = ("uniform", "jun")


@dataclass(frozen=True, eq=False)
class JunPrior:
    weights: np.ndarray
    normalizer: float

    @property
    def log_weights(self):
        return np.log(self.weights)


def jun_prior(schedule):
    if not len(schedule):
        raise DistributionError("a prior over boxes needs at least one box")
    starts = schedule.starts
    floors = np.array([int(start).bit_length() - 1 for start in starts])
    unnormalized = 1.0 / (starts.astype(float) ** 2 * (1 + floors))
    normalizer = math.fsum(unnormalized)
    return JunPrior(unnormalized / normalizer, normalizer)


def uniform_box_prior(schedule):
    if not len(schedule):
        raise DistributionError("a prior over boxes needs at least one box")
    return np.full(len(schedule), 1.0 / len(schedule))


def box_prior(schedule, kind):
    if kind == "uniform":
        return uniform_box_prior(schedule)
    if kind == "jun":
        return jun_prior(schedule).weights
    raise DistributionError("unknown prior over boxes %r" % (kind,))


def _interval_length(interval):
    start, end = interval
    return np.asarray(end) - np.asarray(start) + 1


def _check_mass(mass):
    mass = np.asarray(mass, dtype=float)
    if np.any(mass <= 0):
        raise DistributionError("comparator sets need positive prior mass")
    return mass


def bound_A_hat(interval, horizon, mass, box_count=None):
    mass = _check_mass(mass)
    boxes = math.log(2 * horizon) if box_count is None else math.log(box_count)
    bracket = boxes + core.log_grid_size(horizon) - np.log(mass)
    return np.maximum(count_factor(_interval_length(interval)) * bracket, 1.0)


def bound_A_tilde(interval, horizon, mass):
    mass = _check_mass(mass)
    _, end = interval
    bracket = 0.5 + 3 * np.log(np.asarray(end, dtype=float))
    bracket = bracket + core.log_grid_size(horizon) - np.log(mass)
    return np.maximum(count_factor(_interval_length(interval)) * bracket, 1.0)


def squintce_bound(variance, a):
    return algorithms.squint_bound(variance, a)


def cbce_meta_bound(box):
    if not isinstance(box, CoveringInterval):
        box = CoveringInterval.from_bounds(*box)
    return math.sqrt(box.length * (7 * math.log(box.end) + 5))


# CBCE meta regret summed over the partition of an interval
def cbce_overhead(interval):
    return sum(cbce_meta_bound(piece) for piece in partition(interval))


def cbce_hedge_bound(interval, experts):
    length = _interval_length(interval)
    _, end = interval
    end = np.asarray(end, dtype=float)
    root2 = math.sqrt(2)
    meta = 2 * root2 / (root2 - 1) * np.sqrt(length * (7 * np.log(end) + 5))
    boxes = 2 / (root2 - 1) * np.sqrt(length * math.log(experts))
    return meta + boxes


@dataclass(eq=False)
class CbceState:
    schedule: CoveringSchedule
    prior: np.ndarray
    gains: np.ndarray = None
    wealth: np.ndarray = None
    z: np.ndarray = None
    v: np.ndarray = None
    active: np.ndarray = None
    q: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        size = len(self.schedule)
        self.prior = core.probability_vector(self.prior, size=size)
        for name in ("gains", "wealth", "z", "v"):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(size))


def new_cbce(schedule, prior="jun"):
    if isinstance(prior, str):
        prior = box_prior(schedule, prior)
    return CbceState(schedule, prior)


def cbce_step(state, box_weights, losses):
    """One CBCE round given the active boxes' weight vectors.

    box_weights maps a box position in the schedule to that box's weights.
    Sums for a box only ever include rounds inside the box's interval.
    """
    t = state.t + 1
    if t > state.schedule.horizon:
        raise IntervalError("CBCE is past its horizon %d" % state.schedule.horizon)
    active = state.schedule.active(t)
    missing = [str(state.schedule.boxes[b]) for b in active if b not in box_weights]
    if missing:
        raise DimensionError("no weights for active boxes %s" % ", ".join(missing))
    losses = core.loss_vector(losses)
    weights = np.array(
        [core.probability_vector(box_weights[b], size=losses.shape[0]) for b in active]
    )

    starts = state.schedule.starts[active]
    z = state.gains[active]
    v = z / (t - starts + 1) * (1 + state.wealth[active])
    bets = state.prior[active] * np.maximum(v, 0)
    mass = bets.sum()
    if mass > 0:
        q = bets / mass
    else:
        q = state.prior[active] / state.prior[active].sum()
    learner = q @ weights

    box_losses = weights @ losses
    regrets = float(q @ box_losses) - box_losses
    gains = np.where(v > 0, regrets, np.maximum(regrets, 0))

    state.wealth[active] += z * v
    state.gains[active] += gains
    state.z[active] = z
    state.v[active] = v
    state.active = active
    state.q = q
    state.t = t
    return q, learner, state


def _new_box(kind, experts, length, prior, ew_rate):
    if kind == "hedge":
        return algorithms.new_hedge(experts, length, prior=prior)
    return algorithms.new_squint(experts, length, prior, ew_rate)


def _box_weights(box):
    if isinstance(box, algorithms.HedgeState):
        return algorithms.hedge_weights(box)
    return algorithms.squint_weights(box)


def _box_update(box, weights, losses):
    if isinstance(box, algorithms.HedgeState):
        algorithms.hedge_update(box, losses)
    else:
        algorithms.squint_update(box, weights, losses)


class CbceLearner:
    """CBCE over Hedge or Squint boxes, each box tuned to its own interval."""

    def __init__(self, experts, horizon, base="hedge", prior=None, tau="jun", ew_rate=1.0):
        if base not in ("hedge", "squint"):
            raise DistributionError("CBCE boxes run hedge or squint, not %r" % (base,))
        self.base = base
        self.experts = experts
        self.prior = prior or core.ExpertPrior.uniform(experts)
        self.ew_rate = ew_rate
        self.state = new_cbce(CoveringSchedule(horizon), tau)
        self.boxes = {}
        self.box_updates = 0

    @property
    def schedule(self):
        return self.state.schedule

    def round(self, losses):
        t = self.state.t + 1
        for b in self.schedule.starting(t):
            length = self.schedule.boxes[b].length
            self.boxes[b] = _new_box(self.base, self.experts, length, self.prior, self.ew_rate)
        active = self.schedule.active(t)
        box_weights = {b: _box_weights(self.boxes[b]) for b in active}
        _, weights, _ = cbce_step(self.state, box_weights, losses)
        for b in active:
            _box_update(self.boxes[b], box_weights[b], losses)
        self.box_updates += len(active)
        for b in self.schedule.ending(t):
            del self.boxes[b]
        return weights, None


@dataclass(eq=False)
class SquintCeRound:
    """What one Squint-CE round computed; losses are filled in once seen."""

    t: int
    active: np.ndarray
    log_q_tilde: np.ndarray
    log_q: np.ndarray
    log_posteriors: np.ndarray
    weights: np.ndarray
    closed_form: np.ndarray
    fallback: bool = False
    box_losses: np.ndarray = None
    ghat: float = None


@dataclass(eq=False)
class SquintCeState:
    schedule: CoveringSchedule
    grid: core.LearningRateGrid
    prior: core.ExpertPrior
    log_tau: np.ndarray
    ew_rate: float = 1.0
    meta_losses: np.ndarray = None
    boxes: dict = field(default_factory=dict)
    frozen: dict = field(default_factory=dict)
    last: SquintCeRound = None
    mixed: list = field(default_factory=list)
    box_updates: int = 0
    t: int = 0

    def __post_init__(self):
        if self.meta_losses is None:
            self.meta_losses = np.zeros(len(self.schedule))

    @property
    def experts(self):
        return self.prior.experts


def new_squintce(experts, horizon, prior=None, tau="uniform", ew_rate=1.0):
    schedule = CoveringSchedule(horizon)
    if isinstance(tau, str):
        tau = box_prior(schedule, tau)
    tau = core.probability_vector(tau, size=len(schedule))
    return SquintCeState(
        schedule,
        core.build_grid(horizon),
        prior or core.ExpertPrior.uniform(experts),
        core.safe_log(tau),
        ew_rate,
    )


def squintce_predict(state):
    t = state.t + 1
    if t > state.schedule.horizon:
        raise IntervalError("Squint-CE is past its horizon %d" % state.schedule.horizon)
    for b in state.schedule.starting(t):
        state.boxes[b] = algorithms.SquintState(state.grid, state.prior, state.ew_rate)
    active = state.schedule.active(t)
    boxes = [state.boxes[b] for b in active]

    log_q_tilde = core.log_normalize(state.log_tau - state.meta_losses)
    active_mass = logsumexp(log_q_tilde[active])
    fallback = not np.isfinite(active_mass)
    log_tau_t = core.log_normalize(state.log_tau[active])
    if fallback:
        log.debug("round %d: active boxes underflowed, playing the prior over them", t)
        log_q = log_tau_t
    else:
        log_q = log_q_tilde[active] - active_mass

    log_joint = boxes[0].log_joint_prior
    log_rates = state.grid.log_rates[None, :, None]

    logits = np.array([log_joint - state.ew_rate * box.surrogate for box in boxes])
    log_z = logsumexp(logits, axis=(1, 2))
    log_posteriors = logits - log_z[:, None, None]
    log_mixture = logsumexp(log_q[:, None, None] + log_posteriors, axis=0)
    weights = algorithms.marginalize_rates(log_mixture, state.grid.rates)

    rates = state.grid.rates[None, :, None]
    exponent = np.array(
        [state.ew_rate * (rates[0] * box.regret - rates[0] ** 2 * box.variance) for box in boxes]
    )
    direct = log_joint[None] + exponent
    log_z_direct = logsumexp(direct, axis=(1, 2))
    scale = log_tau_t - state.meta_losses[active] - log_z_direct
    closed_form = core.normalize_log(
        logsumexp(scale[:, None, None] + direct + log_rates, axis=(0, 1))
    )
    if not fallback:
        gap = np.max(np.abs(weights - closed_form))
        if gap > core.EQUIVALENCE_TOL:
            raise RouteMismatchError(
                "round %d: mixture and closed-form weights differ by %g" % (t, gap)
            )

    state.last = SquintCeRound(
        t, active, log_q_tilde, log_q, log_posteriors, weights, closed_form, fallback
    )
    return weights


def learner_mixloss_equivalence(state, box_losses):
    """The learner's mix loss under q_t and under the unconditioned q~_t.

    box_losses covers every box, with inactive boxes already charged the
    learner's mix loss.
    """
    box_losses = np.asarray(box_losses, dtype=float)
    if box_losses.shape != (len(state.schedule),):
        raise DimensionError("one loss per box is required")
    current = state.last
    via_q = core.mix_loss_log(box_losses[current.active], current.log_q)
    via_q_tilde = core.mix_loss_log(box_losses, current.log_q_tilde)
    return via_q, via_q_tilde


def squintce_observe(state, losses):
    current = state.last
    if current is None or current.t != state.t + 1:
        raise IntervalError("Squint-CE must predict before it observes round %d" % (state.t + 1))
    losses = core.loss_vector(losses, state.experts)
    regrets = core.instantaneous_regret(current.weights, losses)
    surrogate = core.surrogate_losses(state.grid.rates, regrets)

    active_losses = -logsumexp(current.log_posteriors - surrogate[None], axis=(1, 2))
    ghat = core.mix_loss_log(active_losses, current.log_q)
    box_losses = np.full(len(state.schedule), ghat)
    box_losses[current.active] = active_losses
    _, via_q_tilde = learner_mixloss_equivalence(state, box_losses)
    if abs(ghat - via_q_tilde) > core.EQUIVALENCE_TOL:
        raise RouteMismatchError(
            "round %d: learner mix loss %r under q but %r under q~" % (current.t, ghat, via_q_tilde)
        )

    state.meta_losses = state.meta_losses + box_losses
    for b in current.active:
        algorithms.squint_observe(state.boxes[b], regrets)
    state.box_updates += len(current.active)
    for b in state.schedule.ending(current.t):
        state.frozen[b] = state.boxes.pop(b)

    current.box_losses = active_losses
    current.ghat = ghat
    state.mixed.append(ghat)
    state.t = current.t
    log.debug("round %d: %d active boxes, ghat %.6g", current.t, len(current.active), ghat)
    return state


def prefix_gaps(state):
    """G^b + ln Z^b minus the learner's mix losses from before b started,
    for every live box.  Zero up to rounding when ew_rate is 1."""
    sums = np.concatenate([[0.0], np.cumsum(state.mixed)])
    gaps = {}
    for b, box in state.boxes.items():
        log_z = logsumexp(box.log_joint_prior - state.ew_rate * box.surrogate)
        start = state.schedule.boxes[b].start
        gaps[b] = float(state.meta_losses[b] + log_z - sums[start - 1])
    return gaps


def squintce_round(state, losses):
    weights = squintce_predict(state)
    squintce_observe(state, losses)
    return weights, state


class SquintCeLearner:
    def __init__(self, experts, horizon, prior=None, tau="uniform", ew_rate=1.0):
        self.state = new_squintce(experts, horizon, prior, tau, ew_rate)
        self.box_losses = {}

    @property
    def schedule(self):
        return self.state.schedule

    @property
    def box_updates(self):
        return self.state.box_updates

    def round(self, losses):
        weights, state = squintce_round(self.state, losses)
        current = state.last
        for b, loss in zip(current.active, current.box_losses):
            self.box_losses.setdefault(int(b), []).append(loss)
        return weights, current.ghat
