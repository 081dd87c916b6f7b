"""Seedable loss sequences for stationary and changing environments.

A spec is split into segments starting at given rounds.  Each segment is
constant losses, independent coins with per-expert means, coins whose means
move linearly to a target over the segment ("drift"), or an explicit table.
Cell (t, k) always uses draw (t-1)*K + k of a Philox stream keyed by the
seed, so a loss depends only on (seed, t, k).
"""
import json
from dataclasses import dataclass

import numpy as np

from driftsquint.errors import ConfigError

KINDS = ("constant", "coin", "drift", "table")


@dataclass(frozen=True)
class Segment:
    start: int
    kind: str
    values: tuple
    target: tuple = None


@dataclass(frozen=True)
class EnvironmentSpec:
    experts: int
    horizon: int
    segments: tuple
    seed: int = 0
    name: str = ""

    @property
    def boundaries(self):
        return [segment.start for segment in self.segments[1:]]

    def spans(self):
        starts = [segment.start for segment in self.segments]
        ends = [start - 1 for start in starts[1:]] + [self.horizon]
        return list(zip(self.segments, starts, ends))


def _check_means(values, experts, what):
    values = np.asarray(values, dtype=float)
    if values.shape != (experts,):
        raise ConfigError("%s needs %d entries, got %s" % (what, experts, values.tolist()))
    if not np.all(np.isfinite(values)) or np.any(values < 0) or np.any(values > 1):
        raise ConfigError("%s must lie in [0,1], got %s" % (what, values.tolist()))
    return values


def validate(spec):
    if spec.experts < 1 or spec.horizon < 1:
        raise ConfigError("need K >= 1 and T >= 1, got K=%r T=%r" % (spec.experts, spec.horizon))
    if not 0 <= spec.seed < 2 ** 64:
        raise ConfigError("seed must be a 64-bit unsigned integer, got %r" % spec.seed)
    if not spec.segments or spec.segments[0].start != 1:
        raise ConfigError("the first segment must start at round 1")
    starts = [segment.start for segment in spec.segments]
    if any(b <= a for a, b in zip(starts, starts[1:])) or starts[-1] > spec.horizon:
        raise ConfigError("segment starts must increase within [1,%d]: %s" % (spec.horizon, starts))
    for segment, start, end in spec.spans():
        where = "segment at round %d" % start
        if segment.kind not in KINDS:
            raise ConfigError("%s has unknown kind %r" % (where, segment.kind))
        if segment.kind == "table":
            rows = np.asarray(segment.values, dtype=float)
            if rows.shape != (end - start + 1, spec.experts):
                raise ConfigError("%s needs a %dx%d table" % (where, end - start + 1, spec.experts))
            if np.any(rows < 0) or np.any(rows > 1) or not np.all(np.isfinite(rows)):
                raise ConfigError("%s has table losses outside [0,1]" % where)
        else:
            _check_means(segment.values, spec.experts, where)
        if segment.kind == "drift":
            if segment.target is None:
                raise ConfigError("%s drifts but names no target means" % where)
            _check_means(segment.target, spec.experts, where + " target")
    return spec


def generate(spec):
    validate(spec)
    rng = np.random.Generator(np.random.Philox(key=spec.seed))
    draws = rng.random((spec.horizon, spec.experts))
    losses = np.empty((spec.horizon, spec.experts))
    for segment, start, end in spec.spans():
        rows = slice(start - 1, end)
        if segment.kind == "constant":
            losses[rows] = np.asarray(segment.values, dtype=float)
        elif segment.kind == "table":
            losses[rows] = np.asarray(segment.values, dtype=float)
        elif segment.kind == "coin":
            losses[rows] = draws[rows] < np.asarray(segment.values, dtype=float)
        else:
            length = end - start + 1
            fraction = (np.arange(length) / max(length - 1, 1))[:, None]
            first = np.asarray(segment.values, dtype=float)
            means = first + fraction * (np.asarray(segment.target, dtype=float) - first)
            losses[rows] = draws[rows] < means
    return losses


# means where expert `best` is good and everybody else is mediocre or bad
def _leader(experts, best, good=0.1, bad=0.9, rest=0.5):
    means = [rest] * experts
    means[best % experts] = good
    if experts > 1:
        means[(best + 1) % experts] = bad
    return tuple(means)


def _segments(horizon, count):
    starts = sorted({1 + j * horizon // count for j in range(count)})
    return [start for start in starts if start <= horizon]


def builtin_scenarios(experts=4, horizon=256, seed=0):
    """The preset environments.

    stationary:    one coin segment, expert means spread evenly over [0.25, 0.75].
    single-switch: expert 1 at 0.1 and expert 2 at 0.9, swapped from T//2 + 1.
    two-switch:    the good expert moves 1 -> 2 -> 3 at T//3 + 1 and 2T//3 + 1.
    drift:         eight segments; within each the means slide linearly from
                   one leader to the next.
    """
    if experts > 1:
        spread = tuple(0.25 + 0.5 * k / (experts - 1) for k in range(experts))
    else:
        spread = (0.5,)
    scenarios = [
        EnvironmentSpec(experts, horizon, (Segment(1, "coin", spread),), seed, "stationary")
    ]

    switch = horizon // 2 + 1
    single = [Segment(1, "coin", _leader(experts, 0))]
    if 1 < switch <= horizon:
        swapped = list(_leader(experts, 0))
        if experts > 1:
            swapped[0], swapped[1] = swapped[1], swapped[0]
        else:
            swapped = [0.9]
        single.append(Segment(switch, "coin", tuple(swapped)))
    scenarios.append(EnvironmentSpec(experts, horizon, tuple(single), seed, "single-switch"))

    two = [
        Segment(start, "coin", _leader(experts, j))
        for j, start in enumerate(_segments(horizon, 3))
    ]
    scenarios.append(EnvironmentSpec(experts, horizon, tuple(two), seed, "two-switch"))

    drift = [
        Segment(start, "drift", _leader(experts, j), _leader(experts, j + 1))
        for j, start in enumerate(_segments(horizon, 8))
    ]
    scenarios.append(EnvironmentSpec(experts, horizon, tuple(drift), seed, "drift"))
    return scenarios


def scenario(name, experts=4, horizon=256, seed=0):
    for spec in builtin_scenarios(experts, horizon, seed):
        if spec.name == name:
            return spec
    raise ConfigError("unknown scenario %r" % (name,))


def spec_to_dict(spec):
    segments = []
    for segment in spec.segments:
        entry = {"start": segment.start, "kind": segment.kind}
        if segment.kind == "table":
            entry["values"] = [list(row) for row in segment.values]
        else:
            entry["values"] = list(segment.values)
        if segment.target is not None:
            entry["target"] = list(segment.target)
        segments.append(entry)
    return {
        "name": spec.name,
        "experts": spec.experts,
        "horizon": spec.horizon,
        "seed": spec.seed,
        "segments": segments,
    }


def spec_from_dict(document):
    try:
        segments = []
        for entry in document["segments"]:
            values = entry["values"]
            if entry["kind"] == "table":
                values = tuple(tuple(row) for row in values)
            else:
                values = tuple(values)
            target = entry.get("target")
            segments.append(
                Segment(
                    int(entry["start"]),
                    entry["kind"],
                    values,
                    tuple(target) if target is not None else None,
                )
            )
        spec = EnvironmentSpec(
            int(document["experts"]),
            int(document["horizon"]),
            tuple(segments),
            int(document.get("seed", 0)),
            document.get("name", ""),
        )
    except (KeyError, TypeError, ValueError) as error:
        raise ConfigError("malformed environment: %s" % error) from error
    return validate(spec)


def spec_to_json(spec):
    return json.dumps(spec_to_dict(spec), indent=2)
