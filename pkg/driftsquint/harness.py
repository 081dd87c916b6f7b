"""Experiments: configuration, the round loop, interval bounds and comparisons."""
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import pandas as pd

from driftsquint import algorithms, core, envsim, meta, tables
from driftsquint.covering import CoveringSchedule, box_count
from driftsquint.errors import ConfigError, DistributionError, DriftSquintError, RunError
from driftsquint.util import expert_label, mkdirp, worker_count

log = logging.getLogger(__name__)

ALGORITHMS = (
    "hedge",
    "squint",
    "cbce+hedge",
    "cbce+squint",
    "squint-ce-uniform",
    "squint-ce-jun",
)
COMPARATOR_KINDS = ("singletons", "best", "top-half")
EXHAUSTIVE_LIMIT = 128
SAMPLED_DEFAULT = 200


def parse_interval_policy(policy, horizon):
    if policy is None:
        policy = "exhaustive" if horizon <= EXHAUSTIVE_LIMIT else "sampled:%d" % SAMPLED_DEFAULT
    if policy in ("exhaustive", "dyadic"):
        return policy, 0
    kind, _, count = policy.partition(":")
    if kind == "sampled" and count.isdigit():
        return kind, int(count)
    raise ConfigError("unknown interval policy %r" % (policy,), key="intervals")


@dataclass
class ExperimentConfig:
    algorithm: str
    env: envsim.EnvironmentSpec
    prior: tuple = None
    eta_ew: float = 1.0
    hedge_rate: float = None
    comparators: tuple = ("singletons", "best")
    intervals: str = None
    out: str = "out"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(
                "algorithm must be one of %s, got %r" % (", ".join(ALGORITHMS), self.algorithm),
                key="algorithm",
            )
        if self.prior is not None:
            self.prior = tuple(float(p) for p in self.prior)
            if len(self.prior) != self.experts:
                raise ConfigError(
                    "prior needs %d weights, got %d" % (self.experts, len(self.prior)),
                    key="prior",
                )
            try:
                core.ExpertPrior(np.array(self.prior))
            except DistributionError as error:
                raise ConfigError(str(error), key="prior") from error
        if not (math.isfinite(self.eta_ew) and self.eta_ew > 0):
            raise ConfigError("eta_ew must be positive, got %r" % self.eta_ew, key="eta_ew")
        if self.hedge_rate is not None and not self.hedge_rate >= 0:
            raise ConfigError("hedge_rate must be nonnegative", key="hedge_rate")
        comparators = []
        for kind in self.comparators:
            if isinstance(kind, str):
                if kind not in COMPARATOR_KINDS:
                    raise ConfigError("unknown comparator %r" % kind, key="comparators")
                comparators.append(kind)
            else:
                members = tuple(int(k) for k in kind)
                if not members or min(members) < 1 or max(members) > self.experts:
                    raise ConfigError(
                        "comparator %r names experts outside 1..%d" % (list(kind), self.experts),
                        key="comparators",
                    )
                comparators.append(members)
        self.comparators = tuple(comparators)
        parse_interval_policy(self.intervals, self.horizon)

    @property
    def horizon(self):
        return self.env.horizon

    @property
    def experts(self):
        return self.env.experts

    @property
    def seed(self):
        return self.env.seed

    def expert_prior(self):
        if self.prior is None:
            return core.ExpertPrior.uniform(self.experts)
        return core.ExpertPrior(np.array(self.prior))


def with_seed(config, seed):
    return replace(config, env=replace(config.env, seed=seed))


def config_to_dict(config):
    document = envsim.spec_to_dict(config.env)
    document.update(
        {
            "algorithm": config.algorithm,
            "prior": list(config.prior) if config.prior is not None else None,
            "eta_ew": config.eta_ew,
            "hedge_rate": config.hedge_rate,
            "comparators": [c if isinstance(c, str) else list(c) for c in config.comparators],
            "intervals": config.intervals,
            "out": config.out,
        }
    )
    return document


def config_from_dict(document):
    if not isinstance(document, dict):
        raise ConfigError("a config is a JSON object")
    if "algorithm" not in document:
        raise ConfigError("config names no algorithm", key="algorithm")
    try:
        return ExperimentConfig(
            document["algorithm"],
            envsim.spec_from_dict(document),
            document.get("prior"),
            float(document.get("eta_ew", 1.0)),
            document.get("hedge_rate"),
            tuple(document.get("comparators", ("singletons", "best"))),
            document.get("intervals"),
            document.get("out", "out"),
        )
    except (TypeError, ValueError) as error:
        if isinstance(error, ConfigError):
            raise
        raise ConfigError("malformed config: %s" % error) from error


def _line_of(text, key):
    if key:
        for number, line in enumerate(text.splitlines(), 1):
            if '"%s"' % key in line:
                return number
    return None


def read_config(path):
    with open(path, encoding="utf8") as handle:
        text = handle.read()
    try:
        document = json.loads(text)
    except json.JSONDecodeError as error:
        raise ConfigError(error.msg, path, error.lineno) from error
    try:
        return config_from_dict(document)
    except ConfigError as error:
        raise ConfigError(error.reason, path, _line_of(text, error.key), error.key) from error


def write_config(config, path):
    mkdirp(os.path.dirname(path))
    with open(path, "w", encoding="utf8") as handle:
        json.dump(config_to_dict(config), handle, indent=2)
        handle.write("\n")


def make_learner(config):
    experts, horizon = config.experts, config.horizon
    prior = config.expert_prior()
    if config.algorithm == "hedge":
        return algorithms.HedgeLearner(experts, horizon, prior, config.hedge_rate)
    if config.algorithm == "squint":
        return algorithms.SquintLearner(experts, horizon, prior, config.eta_ew)
    if config.algorithm.startswith("cbce+"):
        base = config.algorithm.split("+")[1]
        return meta.CbceLearner(experts, horizon, base, prior, ew_rate=config.eta_ew)
    tau = config.algorithm.rsplit("-", 1)[1]
    return meta.SquintCeLearner(experts, horizon, prior, tau, config.eta_ew)


@dataclass(eq=False)
class RunRecord:
    config: ExperimentConfig
    losses: np.ndarray
    weights: np.ndarray
    regrets: np.ndarray
    ghat: list
    support: np.ndarray
    box_updates: int
    box_losses: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def horizon(self):
        return self.losses.shape[0]

    @property
    def experts(self):
        return self.losses.shape[1]

    @cached_property
    def ledger(self):
        return core.RegretLedger(self.regrets)

    @cached_property
    def schedule(self):
        return CoveringSchedule(self.horizon)

    def mix_losses(self):
        return np.array([np.nan if g is None else g for g in self.ghat])


def run(config):
    losses = envsim.generate(config.env)
    horizon, experts = losses.shape
    learner = make_learner(config)
    schedule = getattr(learner, "schedule", None)
    weights = np.empty((horizon, experts))
    regrets = np.empty((horizon, experts))
    support = np.ones(horizon, dtype=int)
    ghat = []
    started = time.perf_counter()
    for t in range(horizon):
        try:
            weights[t], mixed = learner.round(losses[t])
            regrets[t] = core.instantaneous_regret(weights[t], losses[t])
        except DriftSquintError as error:
            raise RunError(t + 1, error) from error
        ghat.append(mixed)
        if schedule is not None:
            support[t] = len(schedule.active(t + 1))
    seconds = time.perf_counter() - started
    box_losses = {
        b: np.array(values) for b, values in getattr(learner, "box_losses", {}).items()
    }
    log.info(
        "%s T=%d K=%d seed=%d: %d box updates in %.2fs",
        config.algorithm,
        horizon,
        experts,
        config.seed,
        learner.box_updates,
        seconds,
    )
    return RunRecord(
        config, losses, weights, regrets, ghat, support, learner.box_updates, box_losses, seconds
    )


def run_many(configs, workers=None):
    configs = list(configs)
    workers = min(worker_count(workers), max(len(configs), 1))
    if workers == 1:
        return [run(config) for config in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, configs))


def interval_set(policy, horizon, seed=0):
    kind, count = parse_interval_policy(policy, horizon)
    if kind == "exhaustive":
        starts, ends = np.triu_indices(horizon)
        return starts + 1, ends + 1
    schedule = CoveringSchedule(horizon)
    pairs = set(zip(schedule.starts.tolist(), schedule.ends.tolist()))
    pairs.add((1, horizon))
    if kind == "sampled":
        rng = np.random.default_rng(seed)
        a = rng.integers(1, horizon + 1, size=count)
        b = rng.integers(1, horizon + 1, size=count)
        pairs.update(zip(np.minimum(a, b).tolist(), np.maximum(a, b).tolist()))
    pairs = sorted(pairs)
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def interval_losses(losses, starts, ends):
    cumulative = np.vstack([np.zeros((1, losses.shape[1])), np.cumsum(losses, axis=0)])
    return cumulative[ends] - cumulative[starts - 1]


# (kind, mask) pairs; mask[i, k] says expert k is in the set for interval i
def comparator_masks(kinds, losses, starts, ends):
    rows, experts = len(starts), losses.shape[1]
    totals = interval_losses(losses, starts, ends)
    index = np.arange(rows)
    for kind in kinds:
        if kind == "singletons":
            for k in range(experts):
                mask = np.zeros((rows, experts), dtype=bool)
                mask[:, k] = True
                yield "singleton", mask
        elif kind == "best":
            mask = np.zeros((rows, experts), dtype=bool)
            mask[index, np.argmin(totals, axis=1)] = True
            yield "best", mask
        elif kind == "top-half":
            mask = np.zeros((rows, experts), dtype=bool)
            top = np.argsort(totals, axis=1, kind="stable")[:, : math.ceil(experts / 2)]
            mask[index[:, None], top] = True
            yield "top-half", mask
        else:
            mask = np.zeros((rows, experts), dtype=bool)
            mask[:, [k - 1 for k in kind]] = True
            yield "set", mask


def _labels(mask):
    if np.all(mask == mask[0]):
        return [expert_label(np.flatnonzero(mask[0]))] * len(mask)
    return [expert_label(np.flatnonzero(row)) for row in mask]


def _bounds(config, horizon, experts, starts, ends, mass, variance, overhead):
    """(name, values, asserted) for the bounds that apply to this algorithm."""
    algorithm = config.algorithm
    exact = config.eta_ew == 1.0
    interval = (starts, ends)
    if algorithm == "hedge":
        if experts < 2:
            return []
        asserted = config.hedge_rate is None and config.expert_prior().is_uniform
        bound = algorithms.hedge_bound(horizon, experts)
        return [("hedge", np.full(len(starts), bound), asserted)]
    if algorithm == "squint":
        a = algorithms.bound_A(horizon, mass)
        return [("squint", algorithms.squint_bound(variance, a), exact)]
    if algorithm == "squint-ce-uniform":
        a = meta.bound_A_hat(interval, horizon, mass)
        a_exact = meta.bound_A_hat(interval, horizon, mass, box_count(horizon))
        return [
            ("squintce-2T", meta.squintce_bound(variance, a), exact),
            ("squintce-exact", meta.squintce_bound(variance, a_exact), exact),
        ]
    if algorithm == "squint-ce-jun":
        a = meta.bound_A_tilde(interval, horizon, mass)
        return [("squintce-jun", meta.squintce_bound(variance, a), exact)]
    rows = [("cbce-overhead", overhead, False)]
    if algorithm == "cbce+hedge" and experts >= 2:
        rows.insert(0, ("cbce-hedge", meta.cbce_hedge_bound(interval, experts), False))
    return rows


@dataclass(eq=False)
class BoundReport:
    """One row per (interval, comparator set, bound); slack = bound - R."""

    frame: pd.DataFrame

    def violations(self, tol=core.BOUND_SLACK):
        frame = self.frame
        return frame[frame["asserted"] & (frame["slack"] < -tol)]

    @property
    def ok(self):
        return self.violations().empty

    @property
    def min_slack(self):
        asserted = self.frame[self.frame["asserted"]]
        return float(asserted["slack"].min()) if len(asserted) else math.inf

    def summary(self):
        return self.frame.groupby("bound_name").agg(
            rows=("slack", "size"), min_slack=("slack", "min"), asserted=("asserted", "all")
        )


def evaluate_bounds(record, config=None, intervals=None, comparators=None):
    config = config or record.config
    if config.algorithm != record.config.algorithm:
        raise ConfigError(
            "record comes from %s, not %s" % (record.config.algorithm, config.algorithm)
        )
    horizon, experts = record.horizon, record.experts
    prior = config.expert_prior()
    if config.algorithm in ("hedge", "squint"):
        starts, ends = np.array([1]), np.array([horizon])
    else:
        starts, ends = interval_set(intervals or config.intervals, horizon, config.seed)
    regrets = record.ledger.interval_regrets(starts, ends)
    variances = record.ledger.interval_variances(starts, ends)
    overhead = None
    if config.algorithm.startswith("cbce"):
        overhead = np.array([meta.cbce_overhead((a, b)) for a, b in zip(starts, ends)])

    frames = []
    for kind, mask in comparator_masks(comparators or config.comparators, record.losses, starts, ends):
        mass = mask @ prior.probs
        keep = mass > 0
        if kind == "set" and not np.all(keep):
            raise DistributionError("comparator set has zero prior mass")
        if not np.any(keep):
            continue
        mask, mass = mask[keep], mass[keep]
        conditional = np.where(mask, prior.probs, 0.0) / mass[:, None]
        regret = np.sum(regrets[keep] * conditional, axis=1)
        variance = np.sum(variances[keep] * conditional, axis=1)
        labels = _labels(mask)
        rows = _bounds(
            config,
            horizon,
            experts,
            starts[keep],
            ends[keep],
            mass,
            variance,
            overhead[keep] if overhead is not None else None,
        )
        for name, bound, asserted in rows:
            frames.append(
                pd.DataFrame(
                    {
                        "I1": starts[keep],
                        "I2": ends[keep],
                        "Kset": labels,
                        "comparator": kind,
                        "R": regret,
                        "V": variance,
                        "bound_name": name,
                        "bound": bound,
                        "slack": bound - regret,
                        "asserted": asserted,
                    }
                )
            )
    columns = ["I1", "I2", "Kset", "comparator", "R", "V", "bound_name", "bound", "slack", "asserted"]
    if not frames:
        return BoundReport(pd.DataFrame(columns=columns))
    frame = pd.concat(frames, ignore_index=True)
    frame = frame.sort_values(["I1", "I2", "Kset", "comparator", "bound_name"], kind="stable")
    report = BoundReport(frame.reset_index(drop=True)[columns])
    if not report.ok:
        log.warning(
            "%s seed=%d: %d bound rows violated", config.algorithm, config.seed, len(report.violations())
        )
    return report


def _same_environment(a, b):
    return replace(a, seed=0, name="") == replace(b, seed=0, name="")


def _primary_bound(config, horizon, experts, starts, ends, mass, variance):
    full = (starts == 1) & (ends == horizon)
    algorithm = config.algorithm
    if algorithm == "hedge":
        bound = algorithms.hedge_bound(horizon, experts) if experts >= 2 else 0.0
        return np.where(full, bound, np.nan)
    if algorithm == "squint":
        bound = algorithms.squint_bound(variance, algorithms.bound_A(horizon, mass))
        return np.where(full, bound, np.nan)
    interval = (starts, ends)
    if algorithm == "squint-ce-uniform":
        return meta.squintce_bound(variance, meta.bound_A_hat(interval, horizon, mass))
    if algorithm == "squint-ce-jun":
        return meta.squintce_bound(variance, meta.bound_A_tilde(interval, horizon, mass))
    if algorithm == "cbce+hedge" and experts >= 2:
        return meta.cbce_hedge_bound(interval, experts)
    return np.full(len(starts), np.nan)


def compare(records, intervals=None):
    """Seed-averaged regret against the best expert of each interval, with
    each algorithm's bound beside it."""
    if not records:
        raise ConfigError("nothing to compare")
    first = records[0].config.env
    for record in records[1:]:
        if not _same_environment(first, record.config.env):
            raise ConfigError("records come from different environments")
    horizon = first.horizon
    starts, ends = interval_set(intervals, horizon)

    frames = []
    index = np.arange(len(starts))
    for record in records:
        prior = record.config.expert_prior()
        best = np.argmin(interval_losses(record.losses, starts, ends), axis=1)
        regret = record.ledger.interval_regrets(starts, ends)[index, best]
        variance = record.ledger.interval_variances(starts, ends)[index, best]
        mass = prior.probs[best]
        positive = mass > 0
        bound = _primary_bound(
            record.config,
            horizon,
            record.experts,
            starts,
            ends,
            np.where(positive, mass, 1.0),
            variance,
        )
        # no bound covers a best expert the prior rules out
        bound = np.where(positive, bound, np.nan)
        frames.append(
            pd.DataFrame(
                {
                    "I1": starts,
                    "I2": ends,
                    "algorithm": record.config.algorithm,
                    "regret": regret,
                    "bound": bound,
                }
            )
        )
    frame = pd.concat(frames, ignore_index=True)
    table = frame.groupby(["I1", "I2", "algorithm"], sort=True).agg(
        regret=("regret", "mean"), bound=("bound", "mean"), runs=("regret", "size")
    )
    wide = table.unstack("algorithm")
    wide.columns = ["%s:%s" % (stat, algorithm) for stat, algorithm in wide.columns]
    return wide.sort_index()


def write_csv(obj, path):
    mkdirp(os.path.dirname(path))
    if isinstance(obj, RunRecord):
        return tables.to_csv(obj, "run", path)
    if isinstance(obj, BoundReport):
        return tables.to_csv(obj, "bounds", path)
    return tables.to_csv(obj, "comparison", path)
