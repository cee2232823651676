"""Online per-user re-ranking under per-interval exposure floors.

Each arriving user's top-K list maximizes relevance adjusted by per-provider
dual prices; the prices are then updated by a projected subgradient step that
compares the list's realized exposure against the price-optimal exposure of
the penalty conjugate. Prices live in {mu >= -lambda}, so a provider's boost
can never exceed its violation penalty.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .bankruptcy import IntervalPlan
from .domain import Catalog, RankedList, UserRequest
from .errors import ConfigError

ESTAR_TARGETS = ("remaining", "plan")


@dataclass(frozen=True)
class DualState:
    """Dual prices plus the fixed per-interval parameters they move under."""

    mu: np.ndarray
    eta: float
    lam: np.ndarray
    gamma: np.ndarray
    weight: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        lam = np.asarray(self.lam, dtype=float)
        gamma = np.asarray(self.gamma, dtype=float)
        weight = np.asarray(self.weight, dtype=float)
        if (mu < -lam - 1e-12).any():
            raise ConfigError("dual variable below -lambda")
        if (gamma < 0).any() or (weight <= 0).any():
            raise ConfigError("caps must be >= 0 and weights > 0")
        if self.eta < 0:
            raise ConfigError("step size must be >= 0")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "weight", weight)

    @classmethod
    def initial(cls, lam, gamma, eta, weight=None):
        lam = np.asarray(lam, dtype=float)
        w = np.ones_like(lam) if weight is None else np.asarray(weight, dtype=float)
        return cls(np.zeros_like(lam), float(eta), lam, np.asarray(gamma, dtype=float), w)


@dataclass
class ExposureLedger:
    """Exposure bookkeeping for one interval.

    ``beta_remaining`` is the plan minus earned exposure; it goes negative
    when a provider is served past its floor and is recorded as-is.
    """

    earned: np.ndarray
    beta_remaining: np.ndarray
    cumulative: np.ndarray


@dataclass
class RerankConfig:
    """Knobs of the online re-ranker."""

    list_size: int = 10
    alpha_k: float = 1.5  # claim scaling factor, sensible range [1, 2]
    beta_mix: float = 0.5  # penalty emphasis on small-inventory providers
    eta: float | str = "auto"  # "auto" -> 1/sqrt(predicted traffic)
    warm_start_dual: bool = False
    estar_target: str = "remaining"  # conjugate target: unmet remainder or static plan

    def __post_init__(self):
        if self.list_size < 1:
            raise ConfigError("list size must be >= 1")
        if not 1.0 <= self.alpha_k <= 2.0:
            raise ConfigError("alpha_k must lie in [1, 2]")
        if not 0.0 <= self.beta_mix <= 1.0:
            raise ConfigError("beta_mix must lie in [0, 1]")
        if self.estar_target not in ESTAR_TARGETS:
            raise ConfigError(f"estar_target must be one of {ESTAR_TARGETS}")

    def step_size(self, rhat_n: float) -> float:
        if self.eta == "auto":
            return 1.0 / math.sqrt(max(float(rhat_n), 1.0))
        return float(self.eta)


def compute_penalties(catalog: Catalog, beta_mix: float) -> np.ndarray:
    """Violation penalties: beta * max_inventory/inventory + (1-beta)/num_providers.

    The first term weights small providers up; the second is a uniform floor.
    """
    if not 0.0 <= beta_mix <= 1.0:
        raise ConfigError("beta_mix must lie in [0, 1]")
    inv = catalog.inventory.astype(float)
    if (inv < 1).any():
        raise ConfigError("every provider needs at least one item")
    return beta_mix * inv.max() / inv + (1.0 - beta_mix) / catalog.num_providers


def compute_caps(catalog: Catalog, list_size: int, rhat_n: float) -> np.ndarray:
    """Exposure caps proportional to inventory share; they sum to K * rhat_n."""
    if rhat_n < 0:
        raise ConfigError("predicted traffic must be >= 0")
    inv = catalog.inventory.astype(float)
    return list_size * float(rhat_n) * inv / inv.sum()


def top_k(relevance: np.ndarray, k: int) -> RankedList:
    """Plain top-K by relevance; ties go to the lower item id."""
    relevance = np.asarray(relevance, dtype=float)
    if relevance.size < k:
        raise ConfigError(f"need at least {k} items, catalog has {relevance.size}")
    order = np.lexsort((np.arange(relevance.size), -relevance))[:k]
    return RankedList(order, relevance[order])


def select_list(relevance: np.ndarray, dual: DualState, catalog: Catalog,
                rhat_n: float, k: int) -> RankedList:
    """Top-K by price-adjusted score relevance/rhat_n - mu[provider(item)].

    Ties break toward higher raw relevance, then the lower item id, which
    makes replays deterministic. The greedy prefix of this ordering is the
    exact maximizer of the summed adjusted score over all K-subsets.
    """
    relevance = np.asarray(relevance, dtype=float)
    if relevance.size < k:
        raise ConfigError(f"need at least {k} items, catalog has {relevance.size}")
    if rhat_n <= 0:
        raise ConfigError("predicted traffic must be positive when selecting")
    adjusted = relevance / float(rhat_n) - dual.mu[catalog.item_provider]
    order = np.lexsort((np.arange(relevance.size), -relevance, -adjusted))[:k]
    return RankedList(order, relevance[order])


def conjugate_argmax(dual: DualState, plan: IntervalPlan) -> np.ndarray:
    """Exposure maximizing the penalty conjugate at the current prices.

    Per provider the objective -lam*[M - E]_+ + mu*E over E in [0, gamma] is
    piecewise linear, so the maximizer sits at gamma when mu >= 0 and at
    min(M, gamma) when mu < 0 (on mu >= -lam the kink at M always beats 0).
    """
    m = np.asarray(plan.min_exposure, dtype=float)
    return np.where(dual.mu >= 0.0, dual.gamma, np.minimum(m, dual.gamma))


def conjugate_value(dual: DualState, plan: IntervalPlan) -> float:
    """Closed-form conjugate value mu'M + sum (gamma - M) * max(mu, 0)."""
    m = np.asarray(plan.min_exposure, dtype=float)
    return float(dual.mu @ m + ((dual.gamma - m) * np.maximum(dual.mu, 0.0)).sum())


def dual_step(dual: DualState, x_exposure: np.ndarray, e_star: np.ndarray) -> DualState:
    """Weighted projected subgradient step on the dual prices.

    g = -x_exposure + e_star; the proximal step under the weighted norm has
    the closed form mu - eta*g/weight, clipped to the feasible mu >= -lam.
    """
    g = np.asarray(e_star, dtype=float) - np.asarray(x_exposure, dtype=float)
    mu_new = np.maximum(dual.mu - dual.eta * g / dual.weight, -dual.lam)
    return replace(dual, mu=mu_new)


def run_interval(requests: Sequence[UserRequest], plan: IntervalPlan, cfg: RerankConfig,
                 catalog: Catalog, rhat_n: float, lam: np.ndarray | None = None,
                 mu0: np.ndarray | None = None, cumulative_start: np.ndarray | None = None,
                 trace_hook=None):
    """Serve one interval's arrivals in order.

    Dual prices start at zero (or ``mu0`` when warm-starting across
    intervals). After each list the ledger and the unearned remainder are
    updated, then the price step runs against the conjugate maximizer. With
    cfg.estar_target == "remaining" the conjugate sees the still-unearned
    part of the plan, so pressure fades once a floor is met; "plan" keeps the
    static floor as the target throughout.

    ``trace_hook(t, request, ranked, mu)`` is called per arrival with the
    prices that selected the list, for replay debugging.

    Returns (lists, ledger, final dual state).
    """
    nprov = catalog.num_providers
    k = cfg.list_size
    if rhat_n <= 0:
        raise ConfigError("predicted traffic for the interval must be positive")
    lam = compute_penalties(catalog, cfg.beta_mix) if lam is None else np.asarray(lam, float)
    gamma = compute_caps(catalog, k, rhat_n)
    dual = DualState.initial(lam, gamma, cfg.step_size(rhat_n))
    if mu0 is not None:
        dual = replace(dual, mu=np.maximum(np.asarray(mu0, dtype=float), -lam))

    plan_vec = np.asarray(plan.min_exposure, dtype=float)
    beta = plan_vec.copy()
    earned = np.zeros(nprov, dtype=np.int64)
    lists = []
    for t, req in enumerate(requests, start=1):
        ranked = select_list(req.relevance, dual, catalog, rhat_n, k)
        if trace_hook is not None:
            trace_hook(t, req, ranked, dual.mu)
        exposure = catalog.exposure_of(ranked.items)
        earned += exposure
        beta -= exposure
        if cfg.estar_target == "remaining":
            target = IntervalPlan(np.maximum(beta, 0.0))
        else:
            target = plan
        e_star = conjugate_argmax(dual, target)
        dual = dual_step(dual, exposure, e_star)
        lists.append(ranked)

    start = np.zeros(nprov, dtype=np.int64) if cumulative_start is None else \
        np.asarray(cumulative_start, dtype=np.int64)
    ledger = ExposureLedger(earned=earned, beta_remaining=beta, cumulative=start + earned)
    return lists, ledger, dual
