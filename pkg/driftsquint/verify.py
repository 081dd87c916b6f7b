"""Invariant suites behind ``driftsquint verify``.

Every suite draws its runs from a seeded generator, checks each run in a
worker process and reduces the failures in run order.  A check compares a
measured quantity with its bound and fails on slack below -BOUND_SLACK.
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from driftsquint import algorithms, core, envsim, harness, meta
from driftsquint.covering import (
    CoveringInterval,
    CoveringSchedule,
    active_intervals,
    box_count_bound,
    partition,
    partition_count_bound,
)
from driftsquint.util import worker_count

log = logging.getLogger(__name__)

EXPERT_COUNTS = (2, 4, 8)
SQUINTCE_HORIZONS = (32, 64, 128)


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    failures: list = field(default_factory=list)
    seconds: float = 0.0
    advisory: bool = False

    @property
    def ok(self):
        return not self.failures


class Checker:
    def __init__(self, label):
        self.label = label
        self.checks = 0
        self.failures = []

    def at_most(self, name, measured, bound, tol=core.BOUND_SLACK):
        measured, bound = np.broadcast_arrays(np.asarray(measured, float), np.asarray(bound, float))
        self.checks += measured.size
        slack = bound - measured
        if measured.size and np.min(slack) < -tol:
            worst = int(np.argmin(slack))
            self.failures.append(
                "%s: %s exceeded by %.3g (measured %.6g, bound %.6g)"
                % (self.label, name, -slack.flat[worst], measured.flat[worst], bound.flat[worst])
            )

    def close(self, name, a, b, tol=core.EQUIVALENCE_TOL):
        gap = np.max(np.abs(np.asarray(a, float) - np.asarray(b, float)), initial=0.0)
        self.checks += 1
        if gap > tol:
            self.failures.append("%s: %s differ by %.3g" % (self.label, name, gap))

    def holds(self, name, condition):
        self.expect(None if condition else name)

    def expect(self, problem):
        self.checks += 1
        if problem:
            self.failures.append("%s: %s" % (self.label, problem))


def random_config(algorithm, seed, horizon=None, experts=None, prior=None):
    rng = np.random.default_rng(seed)
    experts = experts or int(rng.choice(EXPERT_COUNTS))
    horizon = horizon or int(rng.integers(1, 257))
    means = tuple(float(m) for m in rng.uniform(0, 1, size=experts))
    env = envsim.EnvironmentSpec(
        experts, horizon, (envsim.Segment(1, "coin", means),), int(rng.integers(2 ** 32)), "random"
    )
    return harness.ExperimentConfig(algorithm, env, prior=prior)


def _skewed_prior(experts):
    raw = np.arange(1, experts + 1, dtype=float)
    return tuple(raw / raw.sum())


def check_hedge(seed):
    record = harness.run(random_config("hedge", seed))
    check = Checker("hedge seed %d" % seed)
    if record.experts >= 2:
        check.at_most(
            "total regret",
            record.ledger.regret((1, record.horizon)),
            algorithms.hedge_bound(record.horizon, record.experts),
        )
    return check.checks, check.failures


def _surrogate_rows(grid, regret, variance):
    """E_Q of the cumulative surrogate loss for Q = point mass on each rate
    times each expert; shape |rates| x ... x K."""
    rates = grid.rates.reshape((-1,) + (1,) * np.ndim(regret))
    return -rates * regret + rates ** 2 * variance, rates


def check_squint(seed):
    rng = np.random.default_rng(seed)
    prior = None if seed % 5 else _skewed_prior(int(rng.choice(EXPERT_COUNTS)))
    experts = len(prior) if prior else None
    config = random_config("squint", seed, experts=experts, prior=prior)
    config.comparators = ("singletons", "top-half")
    record = harness.run(config)
    check = Checker("squint seed %d" % seed)

    report = harness.evaluate_bounds(record)
    check.at_most("squint bound", report.frame["R"], report.frame["bound"])

    horizon = record.horizon
    grid = core.build_grid(horizon)
    expert_prior = config.expert_prior()
    mixed = record.mix_losses()
    check.at_most("negative mix loss", -mixed, 0.0, tol=1e-12)

    regret = record.ledger.regret((1, horizon))
    variance = record.ledger.variance((1, horizon))
    surrogate, rates = _surrogate_rows(grid, regret, variance)
    log_joint = grid.log_prior[:, None] + expert_prior.log_probs[None, :]
    joint = np.exp(log_joint)
    total = float(np.sum(mixed))
    subsets = [[k] for k in range(record.experts)]
    subsets.append(list(np.argsort(-regret, kind="stable")[: math.ceil(record.experts / 2)]))
    for subset in subsets:
        if expert_prior.mass(subset) <= 0:
            continue
        weights = expert_prior.conditional(subset)
        for i in range(grid.size):
            comparator = algorithms.comparator_distribution(grid, expert_prior, i, subset)
            expected = float(weights @ surrogate[i])
            s = total - expected
            check.at_most(
                "regret split",
                rates[i, 0] * float(weights @ regret),
                rates[i, 0] ** 2 * float(weights @ variance) + s,
            )
            check.at_most("surrogate regret", s, core.kl_divergence(comparator, joint))
            telescoped = algorithms.surrogate_regret_telescoped(
                log_joint, [surrogate], comparator
            )
            check.close("telescoped surrogate regret", s, telescoped)
    return check.checks, check.failures


def check_squintce(args):
    seed, horizon, tau = args
    config = random_config("squint-ce-" + tau, seed, horizon=horizon)
    config.comparators = ("singletons",)
    config.intervals = "exhaustive"
    record = harness.run(config)
    check = Checker("squint-ce-%s T=%d seed %d" % (tau, horizon, seed))

    report = harness.evaluate_bounds(record)
    asserted = report.frame[report.frame["asserted"]]
    check.at_most("interval bound", asserted["R"], asserted["bound"])

    schedule = record.schedule
    check.holds("box updates", record.box_updates == schedule.work())
    mixed = record.mix_losses()
    check.at_most("negative mix loss", -mixed, 0.0, tol=1e-12)

    grid = core.build_grid(horizon)
    expert_prior = config.expert_prior()
    mixed_sums = np.concatenate([[0.0], np.cumsum(mixed)])
    if tau == "uniform":
        log_tau = np.log(meta.uniform_box_prior(schedule))
    else:
        prior = meta.jun_prior(schedule)
        check.at_most("Jun normaliser", prior.normalizer, math.pi ** 2 / 6)
        log_tau = prior.log_weights

    # learner-level split on every interval
    starts, ends = harness.interval_set("exhaustive", horizon)
    regrets = record.ledger.interval_regrets(starts, ends)
    variances = record.ledger.interval_variances(starts, ends)
    learner_mix = mixed_sums[ends] - mixed_sums[starts - 1]
    surrogate, rates = _surrogate_rows(grid, regrets, variances)
    s = learner_mix[None, :, None] - surrogate
    check.at_most("interval regret split", rates * regrets, rates ** 2 * variances + s)

    # per box: meta and black-box surrogate regrets
    grid_term = core.log_grid_size(horizon)
    for b, box in enumerate(schedule.boxes):
        losses = record.box_losses[b]
        meta_regret = (mixed_sums[box.end] - mixed_sums[box.start - 1]) - losses.sum()
        check.at_most("meta surrogate regret", meta_regret, -log_tau[b])
        if tau == "uniform":
            check.at_most("meta surrogate regret", meta_regret, math.log(len(schedule)))
        else:
            check.at_most("meta surrogate regret", meta_regret, 0.5 + 3 * math.log(box.end))
        box_surrogate, _ = _surrogate_rows(
            grid, record.ledger.regret(box.bounds), record.ledger.variance(box.bounds)
        )
        check.at_most(
            "box surrogate regret",
            losses.sum() - box_surrogate,
            grid_term - expert_prior.log_probs[None, :],
        )

    # replay a quarter of the runs round by round
    if seed % 4 == 0:
        state = meta.new_squintce(record.experts, horizon, expert_prior, tau)
        for t in range(horizon):
            weights, state = meta.squintce_round(state, record.losses[t])
            check.close("replayed weights", weights, record.weights[t], tol=0.0)
            check.close("box prefix identity", list(meta.prefix_gaps(state).values()), 0.0, tol=1e-8)

    # the split of an interval's surrogate regret over its partition
    rng = np.random.default_rng(seed)

    def comparator_loss(interval, rate, expert):
        regret = record.ledger.regret(interval)[expert]
        variance = record.ledger.variance(interval)[expert]
        return -rate * regret + rate ** 2 * variance

    for _ in range(20):
        a, b = sorted(int(x) for x in rng.integers(1, horizon + 1, size=2))
        rate = float(rng.choice(grid.rates))
        expert = int(rng.integers(record.experts))
        direct = mixed_sums[b] - mixed_sums[a - 1] - comparator_loss((a, b), rate, expert)
        pieces = 0.0
        for piece in partition((a, b)):
            losses = record.box_losses[schedule.index[piece]]
            pieces += (mixed_sums[piece.end] - mixed_sums[piece.start - 1]) - losses.sum()
            pieces += losses.sum() - comparator_loss(piece.bounds, rate, expert)
        check.close("partitioned surrogate regret", direct, pieces)
    return check.checks, check.failures


def partition_problem(start, end):
    pieces = partition((start, end))
    position = start
    for piece in pieces:
        if CoveringInterval.from_bounds(*piece.bounds) != piece:
            return "%s is not a covering interval" % piece
        if piece.start != position:
            return "partition of [%d,%d] skips at %d" % (start, end, position)
        position = piece.end + 1
    if position != end + 1:
        return "partition of [%d,%d] stops at %d" % (start, end, position - 1)
    lengths = [piece.length for piece in pieces]
    rising = lengths[: pieces.rising + 1]
    falling = lengths[pieces.rising + 1 :]
    if not all(2 * x <= y for x, y in zip(rising, rising[1:])):
        return "partition of [%d,%d] does not double: %s" % (start, end, lengths)
    if not all(2 * y <= x for x, y in zip(falling, falling[1:])):
        return "partition of [%d,%d] does not halve: %s" % (start, end, lengths)
    if len(pieces) > partition_count_bound((start, end)):
        return "partition of [%d,%d] has %d pieces" % (start, end, len(pieces))
    return None


def check_structure(horizon):
    check = Checker("structure up to %d" % horizon)
    for start in range(1, horizon + 1):
        for end in range(start, horizon + 1):
            check.expect(partition_problem(start, end))
    return check.checks, check.failures


def check_schedules(_):
    check = Checker("schedules")
    for t in range(1, 2 ** 16 + 1):
        if len(active_intervals(t)) != t.bit_length():
            check.expect("%d intervals active at %d" % (len(active_intervals(t)), t))
        else:
            check.expect(None)
    for exponent in range(17):
        for horizon in (2 ** exponent - 1, 2 ** exponent, 2 ** exponent + 1):
            if horizon < 1:
                continue
            schedule = CoveringSchedule(horizon)
            check.holds("|B| <= 2T at T=%d" % horizon, len(schedule) <= 2 * horizon)
            check.holds(
                "box lengths at T=%d" % horizon, bool(np.all(2 * schedule.lengths <= horizon + 1))
            )
            check.holds(
                "refined |B| bound at T=%d" % horizon, len(schedule) <= box_count_bound(horizon)
            )
    for horizon in range(1, 2 ** 12 + 1):
        grid = core.build_grid(horizon)
        for rate in np.geomspace(0.5 / math.sqrt(horizon), 0.5, 7):
            nearest = grid.rates[core.nearest_rate(grid, rate)]
            if max(nearest / rate, rate / nearest) > 2 + 1e-12:
                check.expect("no grid rate near %g at T=%d" % (rate, horizon))
            else:
                check.expect(None)
    for exponent in (5, 6, 7):
        horizon = 2 ** exponent - 1
        record = harness.run(random_config("squint-ce-uniform", exponent, horizon=horizon))
        expected = sum(t.bit_length() for t in range(1, horizon + 1))
        check.holds("box updates at T=%d" % horizon, record.box_updates == expected)
    return check.checks, check.failures


def check_adaptivity(seed):
    configs = []
    for algorithm in ("squint", "squint-ce-uniform"):
        env = envsim.scenario("single-switch", 4, 512, seed)
        configs.append(harness.ExperimentConfig(algorithm, env))
    regrets = []
    for config in configs:
        record = harness.run(config)
        switch = config.env.boundaries[0]
        after = (switch, record.horizon)
        best = int(np.argmin(record.losses[switch - 1 :].sum(axis=0)))
        regrets.append(float(record.ledger.regret(after)[best]))
    return regrets


def _pool_map(function, items, workers):
    items = list(items)
    if workers == 1 or len(items) < 2:
        return [function(item) for item in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(function, items, chunksize=max(1, len(items) // (4 * workers))))


def _reduce(name, results, started):
    suite = SuiteResult(name)
    for checks, failures in results:
        suite.checks += checks
        suite.failures.extend(failures)
    suite.seconds = time.perf_counter() - started
    return suite


def hedge_suite(runs=500, seed=0, workers=1):
    started = time.perf_counter()
    return _reduce("hedge", _pool_map(check_hedge, range(seed, seed + runs), workers), started)


def squint_suite(runs=500, seed=0, workers=1):
    started = time.perf_counter()
    return _reduce("squint", _pool_map(check_squint, range(seed, seed + runs), workers), started)


def squintce_suite(tau, runs=100, seed=0, workers=1):
    started = time.perf_counter()
    items = [
        (seed + i, horizon, tau) for horizon in SQUINTCE_HORIZONS for i in range(runs)
    ]
    return _reduce("squint-ce-" + tau, _pool_map(check_squintce, items, workers), started)


def structure_suite(runs=None, seed=0, workers=1):
    started = time.perf_counter()
    results = [check_structure(512)] + _pool_map(check_schedules, [None], workers)
    return _reduce("structure", results, started)


def adaptivity_suite(runs=20, seed=0, workers=1):
    started = time.perf_counter()
    results = _pool_map(check_adaptivity, range(seed, seed + runs), workers)
    squint = np.mean([r[0] for r in results])
    adaptive = np.mean([r[1] for r in results])
    suite = SuiteResult("adaptivity", checks=1, advisory=True)
    if adaptive > squint:
        suite.failures.append(
            "post-switch regret: squint-ce %.3f above squint %.3f" % (adaptive, squint)
        )
    suite.seconds = time.perf_counter() - started
    log.info("post-switch regret: squint %.3f, squint-ce %.3f", squint, adaptive)
    return suite


SUITES = {
    "hedge": hedge_suite,
    "squint": squint_suite,
    "squint-ce-uniform": lambda runs=100, seed=0, workers=1: squintce_suite("uniform", runs, seed, workers),
    "squint-ce-jun": lambda runs=100, seed=0, workers=1: squintce_suite("jun", runs, seed, workers),
    "structure": structure_suite,
    "adaptivity": adaptivity_suite,
}


def verify(names=None, runs=None, seed=0, workers=None):
    workers = worker_count(workers)
    results = []
    for name in names or list(SUITES):
        suite = SUITES[name]
        result = suite(seed=seed, workers=workers) if runs is None else suite(runs, seed, workers)
        log.info(
            "%s: %d checks, %d failures in %.1fs",
            result.name,
            result.checks,
            len(result.failures),
            result.seconds,
        )
        for failure in result.failures[:20]:
            log.warning(failure)
        results.append(result)
    return results
