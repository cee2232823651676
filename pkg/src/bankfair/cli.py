"""Command line front end: run one simulation, sweep a grid, or verify.

Exit codes: 0 success, 1 I/O or configuration error, 2 infeasible allocation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import harness
from .domain import FairnessPolicy, LogSchema, SynthConfig
from .errors import BankfairError, ConfigError, InfeasibleAllocationError
from .reranker import RerankConfig


def parse_forecaster(spec: str):
    """Parse 'name' or 'name:key=value,key=value' into (name, params)."""
    name, _, raw = spec.partition(":")
    params = {}
    if raw:
        for pair in raw.split(","):
            key, sep, value = pair.partition("=")
            if not sep:
                raise ConfigError(f"bad forecaster parameter {pair!r} (expected key=value)")
            try:
                params[key] = int(value)
            except ValueError:
                try:
                    params[key] = float(value)
                except ValueError:
                    params[key] = value
    return name, params


def _parse_eta(value: str):
    if value == "auto":
        return "auto"
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"eta must be 'auto' or a number, got {value!r}") from None


def config_from_options(opts: dict) -> harness.RunConfig:
    """Build a RunConfig from a flat option mapping (CLI flags or sweep json)."""
    opts = dict(opts)
    synth_spec = opts.get("synth")
    synth = None
    if synth_spec is not None:
        if isinstance(synth_spec, (str, Path)):
            synth_spec = json.loads(Path(synth_spec).read_text())
        synth = SynthConfig(**synth_spec)

    k = int(opts.get("K", 10))
    m = float(opts.get("m", 100.0))
    num_providers = synth.num_providers if synth is not None else 1
    policy = FairnessPolicy.uniform(m, num_providers, float(opts.get("phi", 0.95)), k)
    if synth is not None and synth.list_size != k:
        synth.list_size = k

    forecaster, params = parse_forecaster(str(opts.get("forecaster", "moving_average:w=3")))
    rerank = RerankConfig(
        list_size=k,
        alpha_k=float(opts.get("k", 1.5)),
        beta_mix=float(opts.get("beta", 0.5)),
        eta=_parse_eta(str(opts.get("eta", "auto"))),
        warm_start_dual=bool(opts.get("warm_start_dual", False)),
        estar_target=str(opts.get("estar_target", "remaining")),
    )
    schema = LogSchema(interval_seconds=float(opts.get("interval_hours", 24.0)) * 3600.0,
                       list_size=k)
    return harness.RunConfig(
        policy=policy,
        rerank=rerank,
        rule=str(opts.get("rule", "talmud")),
        data_path=opts.get("data"),
        schema=schema,
        synth=synth,
        forecaster=forecaster,
        forecaster_params=params,
        tau=None if opts.get("tau") is None else float(opts["tau"]),
        seed=int(opts.get("seed", 0)),
        out_dir=opts.get("out"),
        relevance_noise=float(opts.get("noise", 0.0)),
        alpha_traffic=str(opts.get("alpha_traffic", "forecast")),
        remaining_update=str(opts.get("remaining_update", "earned")),
    )


def _add_run_flags(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="interaction log csv or interchange directory")
    src.add_argument("--synth", help="synthetic generator config (json file)")
    p.add_argument("--rule", default="talmud", choices=["talmud", "naive", "prop", "none"])
    p.add_argument("--forecaster", default="moving_average:w=3",
                   help="name[:key=value,...] from last_value, moving_average, seasonal, oracle")
    p.add_argument("--m", type=float, default=100.0, help="uniform per-provider exposure floor")
    p.add_argument("--phi", type=float, default=0.95, help="required per-user accuracy")
    p.add_argument("--K", type=int, default=10, help="list size")
    p.add_argument("--k", type=float, default=1.5, help="claim scaling factor in [1, 2]")
    p.add_argument("--beta", type=float, default=0.5, help="penalty mix toward small providers")
    p.add_argument("--eta", default="auto", help="dual step size, 'auto' = 1/sqrt(traffic)")
    p.add_argument("--interval-hours", type=float, default=24.0)
    p.add_argument("--tau", type=float, default=None, help="traffic resampling temperature")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.0, help="per-interval relevance noise sigma")
    p.add_argument("--warm-start-dual", action="store_true")
    p.add_argument("--out", default=None, help="output directory for report/csv files")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="bankfair")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="simulate one configuration")
    _add_run_flags(run_p)

    sweep_p = sub.add_parser("sweep", help="run a hyperparameter grid")
    sweep_p.add_argument("--spec", required=True, help="sweep spec json")
    sweep_p.add_argument("--out", required=True, help="output directory")

    verify_p = sub.add_parser("verify", help="run the built-in acceptance suite")
    verify_p.add_argument("--criteria", default=None,
                          help="comma-separated criterion numbers (default: all)")

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            opts = {k: v for k, v in vars(args).items() if k != "command"}
            report = harness.run(config_from_options(opts))
            print(json.dumps({"ndcg_at_k": report.ndcg_at_k, "vio_at_k": report.vio_at_k,
                              "esp_at_k": report.esp_at_k}, sort_keys=True))
            return 0
        if args.command == "sweep":
            spec = json.loads(Path(args.spec).read_text())
            base = config_from_options(spec.get("base", {}))
            result = harness.sweep(harness.SweepSpec(base, spec["grid"],
                                                     spec.get("seeds", [0])))
            result.write(args.out)
            failures = sum(1 for r in result.rows if r["status"] != "ok")
            print(f"{len(result.rows)} runs, {failures} failed; wrote {args.out}")
            return 0
        # verify
        from . import acceptance
        wanted = None
        if args.criteria:
            wanted = {int(c) for c in args.criteria.split(",")}
        results = acceptance.run_all(wanted)
        for res in results:
            print(res.line())
        return 0 if all(r.passed for r in results) else 1
    except InfeasibleAllocationError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except (BankfairError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
