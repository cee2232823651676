"""Sequential allocation of exposure floors across intervals.

The remaining exposure requirement of a provider is treated as an estate to
be divided among the remaining intervals, whose claims are the (scaled)
predicted traffic. The talmud rule does the division; naive and prop are
simpler baseline rules sharing the same interface.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InfeasibleAllocationError

logger = logging.getLogger(__name__)

RULES = ("talmud", "naive", "prop", "none")

_REL_TOL = 1e-9


@dataclass(frozen=True)
class BankruptcyInstance:
    """An estate to divide among claimants whose claims exceed it."""

    claims: np.ndarray
    estate: float

    def __post_init__(self):
        claims = np.asarray(self.claims, dtype=float)
        if claims.ndim != 1 or claims.size == 0:
            raise ConfigError("claims must be a nonempty vector")
        if not np.isfinite(claims).all() or (claims < 0).any():
            raise ConfigError("claims must be finite and nonnegative")
        total = float(claims.sum())
        if self.estate < 0 or not math.isfinite(self.estate):
            raise ConfigError("estate must be finite and nonnegative")
        if self.estate > total * (1 + _REL_TOL) + _REL_TOL:
            raise InfeasibleAllocationError(
                f"estate {self.estate} exceeds total claims {total}; clamp before allocating")
        object.__setattr__(self, "claims", claims)
        object.__setattr__(self, "estate", float(min(self.estate, total)))


@dataclass(frozen=True)
class AllocationResult:
    awards: np.ndarray
    theta: float


@dataclass(frozen=True)
class AllocationRecord:
    """One audit row of the per-interval allocation trace."""

    provider: int
    estate: float
    claim: float
    award: float
    theta: float


@dataclass(frozen=True)
class IntervalPlan:
    """Per-provider exposure floor for the current interval."""

    min_exposure: np.ndarray
    audit: tuple[AllocationRecord, ...] = ()


def _bisect(fn, lo: float, hi: float, target: float) -> float:
    """Root of the monotone nondecreasing map fn(theta) - target on [lo, hi]."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if fn(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def talmud(instance: BankruptcyInstance) -> AllocationResult:
    """Divide the estate by the talmud rule.

    When the estate is at most half the total claims, each claimant receives
    min(claim/2, theta); otherwise max(claim/2, claim - theta). In both
    branches theta is the unique level at which the awards sum to the estate
    (found by bisection; both maps are piecewise linear and monotone).
    """
    d = instance.claims
    estate = instance.estate
    total = float(d.sum())
    if total == 0.0 or estate == 0.0:
        return AllocationResult(np.zeros_like(d), 0.0)
    half = 0.5 * d.max()
    if estate <= 0.5 * total:
        theta = _bisect(lambda t: np.minimum(0.5 * d, t).sum(), 0.0, half, estate)
        awards = np.minimum(0.5 * d, theta)
    else:
        # The award sum decreases in theta here; negate to reuse the bisection.
        theta = _bisect(lambda t: -np.maximum(0.5 * d, d - t).sum(), 0.0, half, -estate)
        awards = np.maximum(0.5 * d, d - theta)
    return AllocationResult(awards, float(theta))


def update_remaining(prev_remaining: np.ndarray, earned_last: np.ndarray) -> np.ndarray:
    """Remaining requirement after an interval: [previous - earned]_+ ."""
    prev = np.asarray(prev_remaining, dtype=float)
    earned = np.asarray(earned_last, dtype=float)
    if (prev < 0).any() or (earned < 0).any():
        logger.warning("negative remaining/earned values clamped to zero")
        prev = np.maximum(prev, 0.0)
        earned = np.maximum(earned, 0.0)
    return np.maximum(prev - earned, 0.0)


def predict_demands(forecast: np.ndarray, alpha: float, list_size: int) -> np.ndarray:
    """Per-interval exposure claims: alpha * K * predicted traffic."""
    if alpha <= 0:
        raise ConfigError("alpha must be positive")
    fc = np.asarray(forecast, dtype=float)
    if (fc < 0).any():
        raise ConfigError("forecast traffic must be nonnegative")
    return alpha * list_size * fc


def plan_interval(rule: str, remaining: np.ndarray, claims: np.ndarray,
                  forecast: np.ndarray, interval: int = 0) -> IntervalPlan:
    """Exposure floor for the current interval under the chosen rule.

    ``remaining`` is per-provider; ``claims`` and ``forecast`` cover the
    current through final interval (claims are shared by all providers).
    talmud: allocate each provider's remaining requirement over the coming
    intervals and keep the first slice. naive: half the remaining requirement
    when this interval's forecast is at or above the mean of the coming
    forecasts, else nothing. prop: the current interval's share of the coming
    forecast traffic. none: no floor.
    """
    remaining = np.asarray(remaining, dtype=float)
    claims = np.asarray(claims, dtype=float)
    forecast = np.asarray(forecast, dtype=float)
    if rule not in RULES:
        raise ConfigError(f"unknown allocation rule {rule!r}")
    nprov = remaining.size
    audit = []

    if rule == "none":
        plan = np.zeros(nprov)
        records = [(float(remaining[p]), 0.0, 0.0, math.nan) for p in range(nprov)]
    elif rule == "talmud":
        total_claims = float(claims.sum())
        plan = np.zeros(nprov)
        records = []
        for p in range(nprov):
            estate = float(remaining[p])
            if estate > total_claims:
                if total_claims <= 0:
                    raise InfeasibleAllocationError(
                        f"provider {p}: remaining requirement {estate} but zero total claims",
                        provider=p, interval=interval)
                logger.warning(
                    "provider %d: estate %.3f exceeds total claims %.3f; clamping, "
                    "surplus stays in the remaining requirement", p, estate, total_claims)
                estate = total_claims
            res = talmud(BankruptcyInstance(claims, estate))
            plan[p] = res.awards[0]
            records.append((estate, float(claims[0]), float(res.awards[0]), res.theta))
    elif rule == "naive":
        threshold = forecast.mean()
        active = forecast[0] >= threshold
        plan = remaining / 2.0 if active else np.zeros(nprov)
        records = [(float(remaining[p]), float(remaining[p] / 2.0), float(plan[p]), math.nan)
                   for p in range(nprov)]
    else:  # prop
        total_fc = float(forecast.sum())
        if total_fc <= 0:
            logger.warning("prop rule with zero total forecast; planning no exposure")
            share = 0.0
        else:
            share = float(forecast[0]) / total_fc
        plan = share * remaining
        records = [(float(remaining[p]), float(share * remaining[p]), float(plan[p]), math.nan)
                   for p in range(nprov)]

    for p, (estate, claim, award, theta) in enumerate(records):
        audit.append(AllocationRecord(p, estate, claim, award, theta))
    return IntervalPlan(plan, tuple(audit))
