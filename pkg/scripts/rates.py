import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy import stats

from scripts.exceptions import RateFitError

logger = logging.getLogger(__name__)

DEFAULT_FLOOR = 1e-14
SLOPE_TOLERANCE = 0.15


class Verdict(str, Enum):
    """Outcome of comparing an empirical decay slope with a predicted exponent."""

    SATURATED = "saturated"
    BOUND_RESPECTED = "bound-respected"
    VIOLATED = "violated"
    EXACT = "exact"


@dataclass(frozen=True)
class RateFit:
    """
    Least-squares line through (log n, log value).

    Attributes:
        slope (float): Empirical decay exponent (negative for decaying sequences).
        intercept (float): log of the fitted constant.
        r_squared (float): Coefficient of determination in [0, 1].
        n_used (list of int): Ascending sample sizes that entered the fit.
        dropped (int): Points excluded by burn-in or the floor.
    """

    slope: float
    intercept: float
    r_squared: float
    n_used: list = field(default_factory=list)
    dropped: int = 0

    @property
    def constant(self) -> float:
        return float(np.exp(self.intercept))

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "n_used": list(self.n_used),
            "dropped": self.dropped,
        }


def fit_rate(points, burn_in: int = 0, floor: float = DEFAULT_FLOOR) -> RateFit:
    """
    Fit log(value) = intercept + slope * log(n).

    Parameters:
        points (iterable): Pairs (n, value) with value > 0.
        burn_in (int): Number of leading entries (in ascending n) to drop.
        floor (float): Values below this are treated as noise and dropped.

    Returns:
        RateFit: The fitted line.

    Raises:
        RateFitError: On a nonpositive value or fewer than 3 usable points.
    """
    ordered = sorted((int(n), float(v)) for n, v in points)
    if any(not v > 0.0 for _, v in ordered):
        raise RateFitError("fit_rate needs strictly positive values.")

    kept = [(n, v) for n, v in ordered[burn_in:] if v >= floor]
    dropped = len(ordered) - len(kept)
    if len(kept) < 3:
        raise RateFitError(f"Only {len(kept)} usable points after burn-in and floor; need at least 3.")
    if len({n for n, _ in kept}) < 2:
        raise RateFitError("fit_rate needs at least two distinct n.")

    log_n = np.log([n for n, _ in kept])
    log_v = np.log([v for _, v in kept])
    result = stats.linregress(log_n, log_v)

    # linregress reports r = 0 for a constant sequence, which the line fits exactly
    if np.ptp(log_v) == 0.0:
        r_squared = 1.0
    else:
        r_squared = float(np.clip(result.rvalue ** 2, 0.0, 1.0))

    return RateFit(
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=r_squared,
        n_used=[n for n, _ in kept],
        dropped=dropped,
    )


def classify_slope(slope: float, exponent: float, tolerance: float = SLOPE_TOLERANCE) -> Verdict:
    """
    Compare a fitted slope with the predicted O(n^-exponent) bound.

    saturated if |slope + exponent| <= tolerance, bound-respected if
    slope <= -exponent + tolerance otherwise, violated in every other case.
    """
    if abs(slope + exponent) <= tolerance:
        return Verdict.SATURATED
    if slope <= -exponent + tolerance:
        return Verdict.BOUND_RESPECTED
    return Verdict.VIOLATED


@dataclass(frozen=True)
class DriftFit:
    """A residual sequence summarized as a RateFit, or marked exact when it never leaves the floor."""

    label: str
    fit: RateFit = None
    max_residual: float = 0.0

    @property
    def exact(self) -> bool:
        return self.fit is None

    def verdict(self, exponent: float, tolerance: float = SLOPE_TOLERANCE) -> Verdict:
        if self.exact:
            return Verdict.EXACT
        return classify_slope(self.fit.slope, exponent, tolerance)


def fit_residuals(label: str, ns, residuals, min_n: int = 0, floor: float = DEFAULT_FLOOR) -> DriftFit:
    """
    Fit a residual sequence, reporting it as exact when it stays below the floor.

    Zero residuals are allowed here (they are floor-level noise). Points with
    n < min_n are burn-in and never enter the fit; if fewer than three of the
    remaining points reach the floor the sequence is marked exact.
    """
    pairs = sorted((int(n), abs(float(r))) for n, r in zip(ns, residuals))
    max_residual = max((r for _, r in pairs), default=0.0)
    after_burn_in = [(n, r) for n, r in pairs if n >= min_n]
    if len(after_burn_in) < 3:
        raise RateFitError(f"{label}: only {len(after_burn_in)} points with n >= {min_n}; need at least 3.")

    usable = [(n, r) for n, r in after_burn_in if r >= floor]
    if len(usable) < 3:
        logger.info(f"{label}: residuals stay below {floor:g} (max {max_residual:.3e}); reported exact.")
        return DriftFit(label=label, fit=None, max_residual=max_residual)

    positive = [(n, r) for n, r in pairs if r > 0.0]
    burn_in = sum(1 for n, _ in positive if n < min_n)
    fit = fit_rate(positive, burn_in=burn_in, floor=floor)
    fit = replace(fit, dropped=fit.dropped + len(pairs) - len(positive))
    logger.info(f"{label}: slope {fit.slope:.4f}, r^2 {fit.r_squared:.5f} over {len(fit.n_used)} points.")
    return DriftFit(label=label, fit=fit, max_residual=max_residual)
