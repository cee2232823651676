"""Pluggable traffic predictors for the remaining horizon.

These deliberately stay simple and deterministic; any of them can be swapped
for a learned model behind the same call signature.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

logger = logging.getLogger(__name__)

METHODS = ("last_value", "moving_average", "seasonal", "oracle")


@dataclass(frozen=True)
class Forecast:
    """Predicted traffic for the current through final interval."""

    horizon_values: np.ndarray
    method_id: str

    def __post_init__(self):
        v = np.asarray(self.horizon_values, dtype=float)
        if v.ndim != 1 or v.size == 0 or (v < 0).any():
            raise ConfigError("forecast values must be a nonempty nonnegative vector")
        object.__setattr__(self, "horizon_values", v)


def forecast_traffic(history, horizon: int, method: str, params: dict | None = None,
                     future=None) -> Forecast:
    """Predict the next ``horizon`` interval counts from observed history.

    last_value repeats the latest observation; moving_average repeats the
    mean of the last ``w`` observations; seasonal tiles the last ``lag``
    observations; oracle returns the true future counts (simulator-only, the
    zero-error upper bound). With no history yet, the configured
    ``prior_mean`` is used.
    """
    params = dict(params or {})
    history = np.asarray(history, dtype=float)
    if horizon < 1:
        raise ConfigError("forecast horizon must be >= 1")
    if method not in METHODS:
        raise ConfigError(f"unknown forecaster {method!r}")

    if method == "oracle":
        if future is None:
            raise ConfigError("oracle forecaster needs the true future counts")
        values = np.asarray(future, dtype=float)
        if values.size != horizon:
            raise ConfigError("oracle future length must equal the horizon")
        return Forecast(values, "oracle")

    prior_mean = float(params.get("prior_mean", 1.0))
    if history.size == 0:
        return Forecast(np.full(horizon, max(prior_mean, 0.0)), method)

    if method == "seasonal":
        lag = int(params.get("lag", 7))
        if lag < 1:
            raise ConfigError("seasonal lag must be >= 1")
        if history.size < lag:
            logger.warning("seasonal lag %d exceeds history length %d; "
                           "falling back to moving_average", lag, history.size)
            method = "moving_average"
        else:
            period = history[-lag:]
            values = np.tile(period, horizon // lag + 1)[:horizon]
            return Forecast(np.maximum(values, 0.0), "seasonal")

    if method == "last_value":
        level = float(history[-1])
    else:  # moving_average
        w = int(params.get("w", 3))
        if w < 1:
            raise ConfigError("moving average window must be >= 1")
        level = float(history[-w:].mean())
    return Forecast(np.full(horizon, max(level, 0.0)), method)
