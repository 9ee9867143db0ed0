"""
Summary statistics and piecewise-constant curves.

Curves and integer samples stay exact until serialization. Rational samples
are rounded once each and summed with ``fsum``, which is correctly rounded, so
two computations over the same values agree bit for bit in any order.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from fractions import Fraction
from math import fsum
from typing import Iterable, Optional, Sequence, Union

Exact = Union[int, Fraction]


def to_json_number(x: Optional[Exact]):
    if x is None:
        return None
    if isinstance(x, (int, float)):
        return x
    if x.denominator == 1:
        return int(x.numerator)
    return x.numerator / x.denominator


def ratio(num: int, den: int) -> Optional[float]:
    """Correctly rounded num/den, or None when den is zero."""
    if den == 0:
        return None
    return num / den


@dataclass(frozen=True)
class SummaryStats:
    count: int
    min: Optional[Exact] = None
    max: Optional[Exact] = None
    # exact for integer samples; otherwise floats summed with fsum
    mean: Optional[Union[Fraction, float]] = None
    variance: Optional[Union[Fraction, float]] = None  # population variance

    @classmethod
    def of(cls, values: Iterable[Exact]) -> "SummaryStats":
        vals = list(values)
        n = len(vals)
        if n == 0:
            return cls(0)
        if all(type(v) is int for v in vals):
            s = sum(vals)
            sq = sum(v * v for v in vals)
            mean = Fraction(s, n)
            var = Fraction(n * sq - s * s, n * n)
        else:
            fl = [float(v) for v in vals]
            mean = fsum(fl) / n
            var = fsum((x - mean) ** 2 for x in fl) / n
        return cls(n, min(vals), max(vals), mean, var)

    def to_json(self) -> dict:
        if self.count == 0:
            return {"count": 0}
        return {
            "count": self.count,
            "min": to_json_number(self.min),
            "max": to_json_number(self.max),
            "mean": to_json_number(self.mean),
            "variance": to_json_number(self.variance),
        }


class StepCurve:
    """Right-continuous step function on ``[start, end)``.

    ``points`` holds ``(time, value)`` pairs with strictly increasing times,
    the first at ``start``, and no two consecutive equal values.
    """

    __slots__ = ("points", "end", "_times")

    def __init__(self, points: Sequence[tuple[int, int]], end: int):
        self.points = [tuple(p) for p in points]
        self.end = end
        self._times: Optional[list[int]] = None

    def _index(self, t: int) -> int:
        """Index of the point in force at ``t``."""
        if self._times is None:
            self._times = [p[0] for p in self.points]
        return bisect_right(self._times, t) - 1

    @property
    def start(self) -> int:
        return self.points[0][0]

    @classmethod
    def constant(cls, value: int, start: int, end: int) -> "StepCurve":
        return cls([(start, value)], end)

    @classmethod
    def from_deltas(cls, deltas: Iterable[tuple[int, int]], start: int, end: int,
                    initial: int = 0) -> "StepCurve":
        """Build from ``(time, +/-n)`` changes; changes at or after ``end`` are dropped.

        Changes before ``start`` fold into the initial value.
        """
        acc: dict[int, int] = {}
        value = initial
        for t, d in deltas:
            if t <= start:
                value += d
            elif t < end:
                acc[t] = acc.get(t, 0) + d
        points = [(start, value)]
        for t in sorted(acc):
            d = acc[t]
            if d:
                value += d
                points.append((t, value))
        return cls(points, end)

    @classmethod
    def from_intervals(cls, intervals: Iterable[tuple[int, int]], start: int,
                       end: int) -> "StepCurve":
        """Count of half-open intervals covering each instant."""
        deltas = []
        for a, b in intervals:
            if a < b:
                deltas.append((a, 1))
                deltas.append((b, -1))
        return cls.from_deltas(deltas, start, end)

    def value_at(self, t: int) -> int:
        i = self._index(t)
        if i < 0:
            raise ValueError("time before curve start")
        return self.points[i][1]

    def segments(self):
        """Yield ``(t0, t1, value)`` for each constant piece of positive length."""
        pts = self.points
        for i, (t, v) in enumerate(pts):
            t1 = pts[i + 1][0] if i + 1 < len(pts) else self.end
            if t1 > t:
                yield t, t1, v

    def integral(self) -> int:
        pts = self.points
        total = 0
        for (t0, v), (t1, _) in zip(pts, pts[1:]):
            total += (t1 - t0) * v
        t0, v = pts[-1]
        if self.end > t0:
            total += (self.end - t0) * v
        return total

    def _live_values(self) -> list[int]:
        pts = self.points
        live = pts if self.end > pts[-1][0] else pts[:-1]
        return [v for _, v in live]

    def max(self) -> int:
        """Largest value over the domain; a zero-length domain reports its start value."""
        vals = self._live_values()
        return max(vals) if vals else self.points[0][1]

    def min(self) -> int:
        vals = self._live_values()
        return min(vals) if vals else self.points[0][1]

    def time_weighted_avg(self) -> Optional[Fraction]:
        span = self.end - self.start
        if span <= 0:
            return None
        return Fraction(self.integral(), span)

    def restrict(self, start: int, end: int) -> "StepCurve":
        i = self._index(start)
        pts = [(start, self.points[i][1])]
        j = i + 1
        n = len(self.points)
        while j < n and self.points[j][0] < end:
            pts.append(self.points[j])
            j += 1
        return StepCurve(_collapse(pts), end)

    @staticmethod
    def combine(terms: Sequence[tuple[int, "StepCurve"]], constant: int,
                start: int, end: int) -> "StepCurve":
        """``constant + sum(coef * curve)`` over ``[start, end)``."""
        deltas: list[tuple[int, int]] = []
        initial = constant
        for coef, c in terms:
            r = c.restrict(start, end)
            prev = None
            for t, v in r.points:
                if prev is None:
                    initial += coef * v
                else:
                    deltas.append((t, coef * (v - prev)))
                prev = v
        return StepCurve.from_deltas(deltas, start, end, initial)

    def to_json(self) -> dict:
        avg = self.time_weighted_avg()
        return {
            "points": [list(p) for p in self.points],
            "end_ns": self.end,
            "max": self.max(),
            "integral": self.integral(),
            "time_weighted_avg": to_json_number(avg),
        }

    def __eq__(self, other):
        return (isinstance(other, StepCurve) and self.points == other.points
                and self.end == other.end)

    def __repr__(self):
        return f"StepCurve({self.points!r}, end={self.end})"


def _collapse(points: list[tuple[int, int]]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for t, v in points:
        if out and out[-1][1] == v:
            continue
        out.append((t, v))
    return out


def curve_stats(curves: Sequence[StepCurve]) -> dict:
    """Per-site aggregation: summaries of each instance's max and time-weighted average."""
    maxima = [c.max() for c in curves]
    avgs = [a for a in (c.time_weighted_avg() for c in curves) if a is not None]
    return {"max": SummaryStats.of(maxima).to_json(),
            "avg": SummaryStats.of(avgs).to_json()}
