"""Traffic-adaptive provider exposure guarantees for two-sided top-K re-ranking.

The package splits into: `domain` (instances, ingestion, synthetic data),
`bankruptcy` (interval allocation of exposure floors), `forecast` (traffic
predictors), `reranker` (the online dual re-ranker), `metrics` (NDCG / Vio /
ESP and diagnostics), `harness` (the end-to-end driver and sweeps), and
`acceptance` (the built-in verification suite behind `bankfair verify`).
"""

from .bankruptcy import (AllocationResult, BankruptcyInstance, IntervalPlan,
                         plan_interval, predict_demands, talmud, update_remaining)
from .domain import (Catalog, FairnessPolicy, LogSchema, RankedList, SynthConfig,
                     TrafficSeries, UserRequest, load_interactions, resample_traffic,
                     save_instance, synth_instance)
from .errors import (BankfairError, ConfigError, ConsistencyError,
                     InfeasibleAllocationError, ParseError)
from .forecast import Forecast, forecast_traffic
from .harness import RunConfig, SweepSpec, run, sweep
from .metrics import (SimReport, accuracy_loss_curve, esp_at_k, feasible_region_ratio,
                      ndcg_at_k, vio_at_k)
from .reranker import (DualState, ExposureLedger, RerankConfig, compute_caps,
                       compute_penalties, conjugate_argmax, conjugate_value,
                       dual_step, run_interval, select_list, top_k)

__version__ = "0.1.0"

__all__ = [
    "AllocationResult", "BankruptcyInstance", "BankfairError", "Catalog",
    "ConfigError", "ConsistencyError", "DualState", "ExposureLedger",
    "FairnessPolicy", "Forecast", "InfeasibleAllocationError", "IntervalPlan",
    "LogSchema", "ParseError", "RankedList", "RerankConfig", "RunConfig",
    "SimReport", "SweepSpec", "SynthConfig", "TrafficSeries", "UserRequest",
    "accuracy_loss_curve", "compute_caps", "compute_penalties",
    "conjugate_argmax", "conjugate_value", "dual_step", "esp_at_k",
    "feasible_region_ratio", "forecast_traffic", "load_interactions",
    "ndcg_at_k", "plan_interval", "predict_demands", "resample_traffic", "run",
    "run_interval", "save_instance", "select_list", "sweep", "synth_instance",
    "talmud", "top_k", "update_remaining", "vio_at_k",
]
