"""Geometric covering intervals.

Level n holds the intervals [i*2^n, (i+1)*2^n - 1] for i >= 1, so a round t
lies in exactly one interval per level n = 0..floor(log2 t).  A horizon T
keeps the intervals that end by T; those are the black boxes of a meta
learner.
"""
import math
from dataclasses import dataclass

import numpy as np

from driftsquint.core import check_interval
from driftsquint.errors import IntervalError


@dataclass(frozen=True, order=False)
class CoveringInterval:
    level: int
    index: int

    def __post_init__(self):
        if self.level < 0 or self.index < 1:
            raise IntervalError(
                "no covering interval at level %r index %r" % (self.level, self.index)
            )

    @classmethod
    def from_bounds(cls, start, end):
        start, end = check_interval((start, end))
        length = end - start + 1
        if length & (length - 1) or start % length:
            raise IntervalError("[%d,%d] is not a covering interval" % (start, end))
        return cls(length.bit_length() - 1, start // length)

    @property
    def start(self):
        return self.index << self.level

    @property
    def end(self):
        return ((self.index + 1) << self.level) - 1

    @property
    def length(self):
        return 1 << self.level

    @property
    def bounds(self):
        return self.start, self.end

    def __contains__(self, t):
        return self.start <= t <= self.end

    def __str__(self):
        return "[%d,%d]" % self.bounds


def check_round(t):
    if int(t) != t or t < 1:
        raise IntervalError("rounds are numbered from 1, got %r" % (t,))
    return int(t)


# the covering intervals containing t, one per level
def active_intervals(t):
    t = check_round(t)
    return [CoveringInterval(n, t >> n) for n in range(t.bit_length())]


def box_count(horizon):
    if horizon < 1:
        raise IntervalError("horizon must be at least 1, got %r" % horizon)
    return sum(
        (horizon + 1) // (1 << n) - 1 for n in range(((horizon + 1) // 2).bit_length())
    )


class CoveringSchedule:
    """The covering intervals that end by the horizon, in (start, length) order."""

    def __init__(self, horizon):
        if int(horizon) != horizon or horizon < 1:
            raise IntervalError("horizon must be at least 1, got %r" % (horizon,))
        self.horizon = int(horizon)
        boxes = []
        level = 0
        while (2 << level) - 1 <= self.horizon:
            last = (self.horizon + 1) >> level
            boxes.extend(CoveringInterval(level, i) for i in range(1, last))
            level += 1
        boxes.sort(key=lambda box: (box.start, box.length))
        self.boxes = tuple(boxes)
        self.index = {box: position for position, box in enumerate(self.boxes)}
        self.starts = np.array([box.start for box in self.boxes])
        self.ends = np.array([box.end for box in self.boxes])
        self.lengths = np.array([box.length for box in self.boxes])

    def __len__(self):
        return len(self.boxes)

    def __iter__(self):
        return iter(self.boxes)

    def _check(self, t):
        t = check_round(t)
        if t > self.horizon:
            raise IntervalError(
                "round %d is past the horizon %d" % (t, self.horizon)
            )
        return t

    # positions of the boxes active at t, by level
    def active(self, t):
        t = self._check(t)
        return np.array(
            [self.index[box] for box in active_intervals(t) if box.end <= self.horizon],
            dtype=int,
        )

    def starting(self, t):
        t = self._check(t)
        return np.flatnonzero(self.starts == t)

    def ending(self, t):
        t = self._check(t)
        return np.flatnonzero(self.ends == t)

    # box-update events of a full run over the horizon
    def work(self):
        return int(self.lengths.sum())


# |B| <= 2T - floor(log2((T+1)/2)) - 1
def box_count_bound(horizon):
    if horizon < 1:
        raise IntervalError("horizon must be at least 1, got %r" % horizon)
    return 2 * horizon - ((horizon + 1) // 2).bit_length()


def enumerate_boxes(horizon):
    return CoveringSchedule(horizon)


@dataclass(frozen=True)
class Partition:
    pieces: tuple
    rising: int
    falling: int

    def __len__(self):
        return len(self.pieces)

    def __iter__(self):
        return iter(self.pieces)

    @property
    def count(self):
        return len(self.pieces)

    @property
    def pivot(self):
        return self.pieces[self.rising]


# greedy longest-aligned-fit from the left
def partition(interval):
    start, end = check_interval(interval)
    pieces = []
    position = start
    while position <= end:
        level = (position & -position).bit_length() - 1
        while position + (1 << level) - 1 > end:
            level -= 1
        pieces.append(CoveringInterval(level, position >> level))
        position += 1 << level

    rising = 0
    while (
        rising + 1 < len(pieces)
        and pieces[rising + 1].length >= 2 * pieces[rising].length
    ):
        rising += 1
    return Partition(tuple(pieces), rising, len(pieces) - rising - 1)


def count_factor(length):
    return 2 * np.log2(np.asarray(length, dtype=float) + 2)


def partition_count_bound(interval):
    start, end = check_interval(interval)
    return 2 * math.log2(end - start + 3)
