"""Built-in acceptance suite.

Each criterion is a self-contained check with its own independent oracle
(grid search, exhaustive enumeration, Monte Carlo, or pinned hand-computed
values). ``bankfair verify`` runs them and prints one line per criterion;
the pytest suite asserts the same results.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from . import bankruptcy, harness, metrics, reranker
from .bankruptcy import BankruptcyInstance, IntervalPlan, talmud
from .domain import Catalog, FairnessPolicy, SynthConfig, UserRequest, synth_instance
from .reranker import DualState, RerankConfig


@dataclass
class CriterionResult:
    cid: int
    description: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.cid}: {self.description} ({self.seconds:.2f}s) {self.detail}"


def _theta_grid_oracle(claims: np.ndarray, estate: float, points: int = 300_000):
    """Brute-force the award vector by scanning theta on a dense grid."""
    claims = np.asarray(claims, dtype=float)
    total = claims.sum()
    thetas = np.linspace(0.0, claims.max() / 2.0, points)
    if estate <= total / 2.0:
        sums = np.minimum.outer(thetas, claims / 2.0).sum(axis=1)
        best = thetas[np.argmin(np.abs(sums - estate))]
        return np.minimum(claims / 2.0, best), best
    sums = np.maximum(claims / 2.0, claims[None, :] - thetas[:, None]).sum(axis=1)
    best = thetas[np.argmin(np.abs(sums - estate))]
    return np.maximum(claims / 2.0, claims - best), best


def criterion_1() -> CriterionResult:
    """Textbook triple against the theta-grid oracle."""
    start = time.perf_counter()
    claims = np.array([100.0, 200.0, 300.0])
    expected = {
        100.0: np.array([100.0, 100.0, 100.0]) / 3.0,
        200.0: np.array([50.0, 75.0, 75.0]),
        300.0: np.array([50.0, 100.0, 150.0]),
    }
    worst_exact = worst_grid = 0.0
    ok = True
    for estate, want in expected.items():
        got = talmud(BankruptcyInstance(claims, estate)).awards
        oracle, _ = _theta_grid_oracle(claims, estate)
        worst_exact = max(worst_exact, float(np.abs(got - want).max()))
        worst_grid = max(worst_grid, float(np.abs(got - oracle).max()))
        ok &= np.abs(got - want).max() <= 1e-6
        ok &= np.abs(got - oracle).max() <= 1e-3  # grid pitch limited
    dt = time.perf_counter() - start
    ok &= dt < 1.0
    return CriterionResult(1, "talmud textbook triple vs theta-grid oracle", bool(ok),
                           f"max|err|={worst_exact:.2e}, grid gap={worst_grid:.2e}", dt)


def criterion_2(n_instances: int = 10_000) -> CriterionResult:
    """Allocation-rule property suite on random instances."""
    start = time.perf_counter()
    rng = np.random.default_rng(20240901)
    failures = []
    for i in range(n_instances):
        n = int(rng.integers(1, 9))
        claims = rng.uniform(0.0, 1000.0, size=n)
        if n >= 2:
            claims[1] = claims[0]  # force an equal pair for equal-treatment
        if rng.random() < 0.1:
            claims[rng.integers(0, n)] = 0.0
        total = claims.sum()
        estate = float(rng.uniform(0.0, 1.0) * total)
        res = talmud(BankruptcyInstance(claims, estate))
        a = res.awards

        if abs(a.sum() - estate) > 1e-9 * max(1.0, estate):
            failures.append((i, "efficiency"))
        if (a < -1e-12).any() or (a > claims + 1e-9).any():
            failures.append((i, "claim bounds"))
        if n >= 2 and claims[0] == claims[1] and abs(a[0] - a[1]) > 1e-9:
            failures.append((i, "equal treatment"))
        dual = talmud(BankruptcyInstance(claims, total - estate)).awards
        if np.abs(a - (claims - dual)).max() > 1e-9 * max(1.0, total):
            failures.append((i, "self-duality"))
        if estate <= total / 2.0 + 1e-12:
            if (a > claims / 2.0 + 1e-9).any():
                failures.append((i, "case consistency low"))
        elif (a < claims / 2.0 - 1e-9).any():
            failures.append((i, "case consistency high"))
        bigger = float(min(total, estate + rng.uniform(0.0, 1.0) * (total - estate)))
        a2 = talmud(BankruptcyInstance(claims, bigger)).awards
        if (a2 < a - 1e-8).any():
            failures.append((i, "resource monotonicity"))
        if failures:
            break
    dt = time.perf_counter() - start
    ok = not failures and dt < 10.0
    return CriterionResult(2, f"talmud property suite on {n_instances} random instances",
                           bool(ok), f"failures={failures[:3]}", dt)


def _two_provider_toy():
    """Fixed two-provider instance: four items each, graded relevance."""
    catalog = Catalog(np.array([0, 0, 0, 0, 1, 1, 1, 1]))
    relevance = np.array([0.90, 0.62, 0.42, 0.20, 0.85, 0.80, 0.75, 0.70])
    return catalog, relevance


def toy_exposure_run(n_users: int, eta: float = 0.12):
    """Serve the toy instance with a floor of 4 on provider 1 (index 0)."""
    catalog, relevance = _two_provider_toy()
    cfg = RerankConfig(list_size=5, alpha_k=1.5, beta_mix=0.5, eta=eta)
    plan = IntervalPlan(np.array([4.0, 0.0]))
    requests = [UserRequest(str(t), 1, t + 1, relevance) for t in range(n_users)]
    lists, ledger, _ = reranker.run_interval(requests, plan, cfg, catalog, float(n_users))
    ndcgs = [metrics.ndcg_at_k(lst, reranker.top_k(relevance, 5), relevance) for lst in lists]
    return ledger.cumulative, float(np.mean(ndcgs))


def criterion_3() -> CriterionResult:
    """Feasible-region ratios plus the two-provider toy runs."""
    start = time.perf_counter()
    r3 = metrics.feasible_region_ratio(np.array([4.0, 0.0]), 3, 5)
    r2 = metrics.feasible_region_ratio(np.array([4.0, 0.0]), 2, 5)
    ok = abs(r3 - 0.7333) <= 1e-3 and abs(r2 - 0.6000) <= 1e-3
    expo3, ndcg3 = toy_exposure_run(3)
    expo2, ndcg2 = toy_exposure_run(2)
    ok &= expo3[0] >= 4 and expo2[0] >= 4
    ok &= ndcg3 > ndcg2
    dt = time.perf_counter() - start
    return CriterionResult(
        3, "feasible-region ratios and two-provider toy enforcement", bool(ok),
        f"ratios=({r3:.4f},{r2:.4f}) exposure=({int(expo3[0])},{int(expo2[0])}) "
        f"ndcg=({ndcg3:.4f},{ndcg2:.4f})", dt)


def _conjugate_objective(e: np.ndarray, mu: float, lam: float, m: float) -> np.ndarray:
    return -lam * np.maximum(m - e, 0.0) + mu * e


def criterion_5(n_draws: int = 1000) -> CriterionResult:
    """Closed-form conjugate maximizer against a 10^4-point grid search."""
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    ok = True
    for i in range(n_draws):
        lam = float(rng.uniform(0.1, 2.0))
        m = float(rng.uniform(0.0, 10.0))
        gamma = float(m + rng.uniform(0.0, 10.0))
        if i % 4 == 0:
            mu = float(rng.choice([0.0, -lam]))  # branch boundaries
        else:
            mu = float(rng.uniform(-lam, 2.0))
        dual = DualState(np.array([mu]), 1.0, np.array([lam]),
                         np.array([gamma]), np.array([1.0]))
        plan = IntervalPlan(np.array([m]))
        e_star = reranker.conjugate_argmax(dual, plan)[0]
        grid = np.linspace(0.0, gamma, 10_000)
        obj = _conjugate_objective(grid, mu, lam, m)
        pitch = gamma / (len(grid) - 1)
        tol = max(1e-3, pitch * (lam + abs(mu)))
        gap = float(obj.max() - _conjugate_objective(np.array([e_star]), mu, lam, m)[0])
        worst = max(worst, gap)
        ok &= gap <= tol
        # The closed-form value must equal the attained objective when caps
        # sit above the floor.
        value = reranker.conjugate_value(dual, plan)
        attained = float(_conjugate_objective(np.array([e_star]), mu, lam, m)[0])
        ok &= abs(value - attained) <= 1e-9
    dt = time.perf_counter() - start
    return CriterionResult(5, f"conjugate closed form vs grid search on {n_draws} draws",
                           bool(ok), f"worst gap={worst:.2e}", dt)


def _enumeration_oracle(relevance, providers, mu, rhat, k):
    """Exhaustive argmax over all K-subsets with the documented tie-breaking.

    Among subsets of maximal adjusted score (up to summation noise), the
    winner is the one whose (-adjusted, -relevance, id) key sequence sorts
    first; its items are returned in key order.
    """
    adjusted = relevance / rhat - mu[providers]
    keys = [(-adjusted[i], -relevance[i], i) for i in range(relevance.size)]
    combos = list(itertools.combinations(range(relevance.size), k))
    totals = [float(np.sum(adjusted[list(c)])) for c in combos]
    best_total = max(totals)
    best_seq = min(sorted(keys[i] for i in combo)
                   for combo, total in zip(combos, totals)
                   if total >= best_total - 1e-12)
    return np.array([key[2] for key in best_seq])


def criterion_6(n_instances: int = 1000) -> CriterionResult:
    """List selection against exhaustive subset enumeration."""
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    mismatches = 0
    for _ in range(n_instances):
        n_items = int(rng.integers(5, 13))
        k = int(rng.integers(1, 5))
        n_prov = int(rng.integers(1, 5))
        providers = rng.integers(0, n_prov, size=n_items)
        providers[:n_prov] = np.arange(n_prov)  # every provider owns an item
        catalog = Catalog(providers, n_prov)
        relevance = rng.integers(0, 21, size=n_items) / 20.0  # 0.05 grid forces ties
        lam = np.ones(n_prov)
        mu = rng.integers(-20, 21, size=n_prov) / 20.0
        mu = np.maximum(mu, -lam)
        rhat = float(rng.choice([1.0, 2.0, 4.0]))
        dual = DualState(mu, 1.0, lam, np.full(n_prov, 100.0), np.ones(n_prov))
        got = reranker.select_list(relevance, dual, catalog, rhat, k).items
        want = _enumeration_oracle(relevance, providers, mu, rhat, k)
        if not np.array_equal(got, want):
            mismatches += 1
    dt = time.perf_counter() - start
    return CriterionResult(6, f"select_list vs exhaustive enumeration on {n_instances} instances",
                           mismatches == 0, f"mismatches={mismatches}", dt)


def binding_plan_loss(traffic: int, seed: int, plan_vec: np.ndarray,
                       weights, num_items: int = 40, k: int = 10) -> float:
    cfg = SynthConfig(num_items=num_items, num_providers=len(plan_vec), num_intervals=1,
                      traffic=[traffic], list_size=k, provider_weights=weights)
    catalog, _, requests = synth_instance(cfg, seed)
    # Hold the dual oscillation at a fixed fraction of the adjusted-score
    # resolution (which shrinks like 1/traffic while the caps grow like
    # traffic), so the fixed floor is the only effect that varies with
    # traffic.
    eta = 0.08 / float(traffic) ** 2
    rcfg = RerankConfig(list_size=k, eta=eta)
    lists, _, _ = reranker.run_interval(requests, IntervalPlan(plan_vec), rcfg,
                                        catalog, float(traffic))
    ndcgs = [metrics.ndcg_at_k(lst, reranker.top_k(req.relevance, k), req.relevance)
             for req, lst in zip(requests, lists)]
    return 1.0 - float(np.mean(ndcgs))


def criterion_4(n_levels: int = 20, n_seeds: int = 10) -> CriterionResult:
    """Higher traffic, lower mean accuracy loss under a fixed binding floor."""
    start = time.perf_counter()
    levels = np.linspace(5, 100, n_levels).astype(int)
    plan_vec = np.array([12.0, 0.0, 0.0, 0.0])
    weights = [0.3, 1.0, 1.0, 1.0]  # the constrained provider is unpopular
    mean_losses = []
    for traffic in levels:
        losses = [binding_plan_loss(int(traffic), seed, plan_vec, weights)
                  for seed in range(n_seeds)]
        mean_losses.append(float(np.mean(losses)))
    rho = float(stats.spearmanr(levels, mean_losses).statistic)
    dt = time.perf_counter() - start
    return CriterionResult(4, f"loss vs traffic rank correlation over {n_levels} levels",
                           rho <= -0.8, f"spearman={rho:.3f}", dt)


def benchmark_config(rule: str, seed: int) -> harness.RunConfig:
    """Desk-scale fluctuating-traffic benchmark shared by criteria 7, 8 and 9.

    Twenty providers over fourteen intervals at mean traffic 100 and K=10;
    floors of 210 each put 30% of the 14000-slot exposure budget under
    guarantee. Twelve popular providers (high relevance band, large
    inventories) meet their floors organically; eight niche providers (wide
    lower band, three items each) need enforcement. Inventories track
    popularity so the exposure caps sit near organic demand, and the small
    step size keeps dual oscillation below the relevance resolution.
    """
    n_prov, n_intervals, mean_traffic, k = 20, 14, 100, 10
    synth = SynthConfig(
        num_items=200, num_providers=n_prov, num_intervals=n_intervals,
        mean_traffic=mean_traffic, list_size=k,
        provider_bands=[(0.86, 1.0)] * 12 + [(0.5, 0.99)] * 8,
        inventory=[15] * 8 + [14] * 4 + [3] * 8)
    total_budget = k * mean_traffic * n_intervals
    m = 0.3 * total_budget / n_prov
    policy = FairnessPolicy.uniform(m, n_prov, phi=0.95, k=k)
    rerank = RerankConfig(list_size=k, alpha_k=1.5, beta_mix=0.0, eta=1e-5)
    return harness.RunConfig(policy=policy, rerank=rerank, rule=rule, synth=synth,
                             forecaster="oracle", tau=0.2, seed=seed)


def criterion_7(seeds=(0, 1, 2, 3, 4)) -> CriterionResult:
    """Talmud rule meets every floor and violates fewer users than baselines."""
    start = time.perf_counter()
    means = {}
    esps = {}
    for rule in ("talmud", "naive", "prop"):
        reports = [harness.run(benchmark_config(rule, seed)) for seed in seeds]
        means[rule] = float(np.mean([r.vio_at_k for r in reports]))
        esps[rule] = [r.esp_at_k for r in reports]
    ok = all(e == 1.0 for e in esps["talmud"])
    ok &= all(min(esps["talmud"]) >= max(esps[rule]) for rule in ("naive", "prop"))
    ok &= means["talmud"] < means["naive"] and means["talmud"] < means["prop"]
    dt = time.perf_counter() - start
    ok &= dt < 60.0
    detail = (f"vio: talmud={means['talmud']:.4f} naive={means['naive']:.4f} "
              f"prop={means['prop']:.4f}; talmud esp={esps['talmud']}")
    return CriterionResult(7, "desk-scale dominance over naive and prop", bool(ok), detail, dt)


def criterion_8() -> CriterionResult:
    """Unconstrained rule reproduces plain top-K exactly."""
    start = time.perf_counter()
    ok = True
    details = []
    for seed in (0, 3):
        cfg = replace(benchmark_config("none", seed))
        rep = harness.run(cfg)
        ok &= rep.ndcg_at_k == 1.0 and rep.vio_at_k == 0.0
        details.append(f"seed {seed}: ndcg={rep.ndcg_at_k} vio={rep.vio_at_k} esp={rep.esp_at_k:.2f}")
    dt = time.perf_counter() - start
    return CriterionResult(8, "unconstrained collapse (rule=none)", bool(ok),
                           "; ".join(details), dt)


def criterion_9() -> CriterionResult:
    """Identical seeds give byte-identical reports."""
    start = time.perf_counter()
    def make():
        cfg = benchmark_config("talmud", seed=42)
        cfg = replace(cfg, relevance_noise=0.05)
        return harness.run(cfg).to_json()
    ok = make() == make()
    dt = time.perf_counter() - start
    return CriterionResult(9, "byte-identical report for identical seeds", bool(ok), "", dt)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
}


def run_all(wanted=None) -> list[CriterionResult]:
    results = []
    for cid in sorted(CRITERIA):
        if wanted is None or cid in wanted:
            results.append(CRITERIA[cid]())
    return results
