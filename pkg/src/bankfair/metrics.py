"""Accuracy and fairness metrics plus the aggregated run report."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .domain import RankedList
from .errors import ConfigError


def dcg(scores: np.ndarray) -> float:
    """Discounted cumulative gain of scores in list order (1-based ranks, log2)."""
    scores = np.asarray(scores, dtype=float)
    ranks = np.arange(1, scores.size + 1)
    return float((scores / np.log2(ranks + 1)).sum())


def ndcg_at_k(reranked: RankedList, original: RankedList, relevance: np.ndarray) -> float:
    """DCG of the re-ranked list over the DCG of the original top-K list."""
    relevance = np.asarray(relevance, dtype=float)
    num = dcg(relevance[reranked.items])
    den = dcg(relevance[original.items])
    if den == 0.0:
        if num == 0.0:
            return 1.0
        raise ValueError("original list has zero gain but the re-ranked list does not")
    return num / den


def vio_at_k(per_user_ndcg: Sequence[float], phi: float) -> float:
    """Fraction of users whose list accuracy falls strictly below phi."""
    if not 0.0 <= phi <= 1.0:
        raise ConfigError("phi must lie in [0, 1]")
    values = np.asarray(per_user_ndcg, dtype=float)
    if values.size == 0:
        raise ValueError("no users")
    return float((values < phi).mean())


def esp_at_k(cumulative_exposure: np.ndarray, required: np.ndarray) -> float:
    """Fraction of providers whose cumulative exposure meets their floor."""
    exposure = np.asarray(cumulative_exposure, dtype=float)
    required = np.asarray(required, dtype=float)
    if exposure.shape != required.shape:
        raise ConfigError("exposure and requirement vectors must align")
    return float((exposure >= required).mean())


def feasible_region_ratio(plan: np.ndarray, traffic: float, list_size: int) -> float:
    """Share of the unconstrained exposure region surviving the floors.

    max(0, 1 - sum(plan) / (traffic * K)); a per-interval diagnostic of how
    much room the fairness floors leave.
    """
    budget = float(traffic) * list_size
    if budget <= 0:
        raise ConfigError("traffic * K must be positive")
    return max(0.0, 1.0 - float(np.asarray(plan, dtype=float).sum()) / budget)


@dataclass
class SimReport:
    """Aggregate and per-interval results of one simulation run."""

    ndcg_at_k: float
    vio_at_k: float
    esp_at_k: float
    per_interval_traffic: list[int]
    per_interval_accuracy: list[float]
    per_interval_vio: list[float]
    per_interval_esp: list[float]
    per_provider_cumulative_exposure: list[int]
    per_user_ndcg: list[float]
    config_echo: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("ndcg_at_k", "vio_at_k", "esp_at_k"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0 + 1e-12:
                raise ConfigError(f"{name} out of [0, 1]: {v}")

    def to_json(self) -> str:
        """Stable-key JSON; identical configs and seeds give identical bytes."""
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"

    def write(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(self.to_json())
        with open(directory / "intervals.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["interval", "traffic", "accuracy", "vio", "esp_partial"])
            for n in range(len(self.per_interval_traffic)):
                w.writerow([n + 1, self.per_interval_traffic[n],
                            repr(self.per_interval_accuracy[n]),
                            repr(self.per_interval_vio[n]),
                            repr(self.per_interval_esp[n])])


@dataclass(frozen=True)
class LossCurve:
    """Mean accuracy loss per traffic level plus their rank correlation."""

    points: tuple[tuple[float, float], ...]
    spearman: float | None


def accuracy_loss_curve(reports: Sequence[SimReport]) -> LossCurve:
    """Empirical loss-versus-traffic curve pooled from run reports.

    Loss per interval is 1 - accuracy (the unconstrained accuracy is exactly
    1 by the metric's definition). Intervals are grouped by traffic level and
    averaged; the Spearman correlation is reported over the grouped means, or
    None when fewer than three levels are present.
    """
    buckets: dict[float, list[float]] = {}
    for rep in reports:
        for traffic, acc in zip(rep.per_interval_traffic, rep.per_interval_accuracy):
            buckets.setdefault(float(traffic), []).append(1.0 - acc)
    if not buckets:
        raise ConfigError("no intervals to build a loss curve from")
    points = tuple(sorted((lvl, float(np.mean(vals))) for lvl, vals in buckets.items()))
    if len(points) < 3:
        return LossCurve(points, None)
    levels = [p[0] for p in points]
    losses = [p[1] for p in points]
    with warnings.catch_warnings():
        # Constant losses (e.g. an unconstrained run) make the correlation
        # undefined; report that as None instead of warning.
        warnings.simplefilter("ignore", stats.ConstantInputWarning)
        rho = stats.spearmanr(levels, losses).statistic
    return LossCurve(points, None if np.isnan(rho) else float(rho))
