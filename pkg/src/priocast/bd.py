"""Bjontegaard deltas for comparing rate-quality curves.

Classic cubic-polynomial variant: each curve is fitted with a cubic in
the log10-rate domain and integrated in closed form (polynomial
antiderivative, no quadrature error) over the interval the two curves
share.

  * bd_quality: average quality difference at equal rate
    (fit quality(log10 rate), integrate over common log-rate range).
  * bd_rate: average rate difference at equal quality, in percent
    (fit log10rate(quality), integrate over common quality range,
    return 100 * (10**delta - 1); negative means the test curve needs
    less rate).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CurveError

MIN_POINTS = 4


@dataclass(frozen=True)
class RatePoint:
    rate: float  # bytes, > 0
    quality: float

    def __post_init__(self):
        if not self.rate > 0.0:
            raise CurveError(f"rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class RQCurve:
    points: tuple[RatePoint, ...]

    def __post_init__(self):
        rates = [p.rate for p in self.points]
        if any(b <= a for a, b in zip(rates, rates[1:])):
            raise CurveError("rates must be strictly increasing")
        qualities = [p.quality for p in self.points]
        if any(b < a for a, b in zip(qualities, qualities[1:])):
            warnings.warn("curve quality is not non-decreasing; fitting as-is", stacklevel=3)

    @classmethod
    def from_pairs(cls, pairs) -> "RQCurve":
        return cls(points=tuple(RatePoint(rate=r, quality=q) for r, q in pairs))

    def rates(self) -> np.ndarray:
        return np.array([p.rate for p in self.points])

    def qualities(self) -> np.ndarray:
        return np.array([p.quality for p in self.points])


def _check(curve: RQCurve, name: str):
    if len(curve.points) < MIN_POINTS:
        raise CurveError(f"{name} curve needs >= {MIN_POINTS} points, has {len(curve.points)}")


def _fit_integrate(x: np.ndarray, y: np.ndarray, lo: float, hi: float) -> float:
    coeff = np.polyfit(x, y, 3)
    anti = np.polyint(coeff)
    return float(np.polyval(anti, hi) - np.polyval(anti, lo))


def bd_quality(reference: RQCurve, test: RQCurve) -> float:
    """Mean quality delta of test over reference at equal rate."""
    _check(reference, "reference")
    _check(test, "test")
    ref_x = np.log10(reference.rates())
    test_x = np.log10(test.rates())
    lo = max(ref_x.min(), test_x.min())
    hi = min(ref_x.max(), test_x.max())
    if not hi > lo:
        raise CurveError("curves share no rate interval")
    int_ref = _fit_integrate(ref_x, reference.qualities(), lo, hi)
    int_test = _fit_integrate(test_x, test.qualities(), lo, hi)
    return (int_test - int_ref) / (hi - lo)


def bd_rate(reference: RQCurve, test: RQCurve) -> float:
    """Mean rate delta of test over reference at equal quality, in percent."""
    _check(reference, "reference")
    _check(test, "test")
    lo = max(reference.qualities().min(), test.qualities().min())
    hi = min(reference.qualities().max(), test.qualities().max())
    if not hi > lo:
        raise CurveError("curves share no quality interval")
    int_ref = _fit_integrate(reference.qualities(), np.log10(reference.rates()), lo, hi)
    int_test = _fit_integrate(test.qualities(), np.log10(test.rates()), lo, hi)
    delta = (int_test - int_ref) / (hi - lo)
    return 100.0 * (10.0 ** delta - 1.0)


def read_curve_csv(path) -> RQCurve:
    """Load "rate,quality" rows (a header line is allowed and skipped)."""
    pairs = []
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                pairs.append((float(row[0]), float(row[1])))
            except ValueError:
                if pairs:
                    raise CurveError(f"malformed curve row {row!r}") from None
                continue  # header line
    return RQCurve.from_pairs(pairs)
