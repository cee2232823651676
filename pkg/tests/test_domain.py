"""Instance types, synthetic generation, resampling, and ingestion round trips."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bankfair.domain import (Catalog, FairnessPolicy, LogSchema, RankedList,
                             SynthConfig, TrafficSeries, load_interactions,
                             redistribute_requests, resample_traffic, save_instance,
                             synth_instance)
from bankfair.errors import ConfigError, ConsistencyError, ParseError


class TestCatalog:
    def test_inventory_matches_column_sums(self):
        cat = Catalog(np.array([0, 0, 1, 2, 2, 2]))
        np.testing.assert_array_equal(cat.inventory, [2, 1, 3])
        np.testing.assert_array_equal(cat.provider_matrix().sum(axis=0), cat.inventory)
        assert cat.inventory.sum() == cat.num_items

    def test_exposure_of_counts_list_slots(self):
        cat = Catalog(np.array([0, 0, 1, 1]))
        np.testing.assert_array_equal(cat.exposure_of(np.array([0, 2, 3])), [1, 2])

    def test_rejects_empty_and_bad_indices(self):
        with pytest.raises(ConfigError):
            Catalog(np.array([], dtype=int))
        with pytest.raises(ConfigError):
            Catalog(np.array([0, -1]))

    def test_immutable_after_construction(self):
        cat = Catalog(np.array([0, 1]))
        with pytest.raises(ValueError):
            cat.item_provider[0] = 1


class TestRankedList:
    def test_rejects_duplicates(self):
        with pytest.raises(ConfigError):
            RankedList(np.array([1, 1, 2]), np.ones(3))


class TestFairnessPolicy:
    def test_validation(self):
        with pytest.raises(ConfigError):
            FairnessPolicy(np.array([-1.0]), 0.9, 5)
        with pytest.raises(ConfigError):
            FairnessPolicy(np.array([1.0]), 1.5, 5)
        with pytest.raises(ConfigError):
            FairnessPolicy(np.array([1.0]), 0.9, 0)


class TestSynthInstance:
    def test_two_provider_toy_scale(self):
        cfg = SynthConfig(num_items=8, num_providers=2, num_intervals=2,
                          traffic=[3, 2], list_size=5)
        catalog, series, requests = synth_instance(cfg, seed=1)
        np.testing.assert_array_equal(series.counts, [3, 2])
        np.testing.assert_array_equal(catalog.inventory, [4, 4])
        # 15 exposures available in interval 1, then 10.
        assert [c * cfg.list_size for c in series.counts] == [15, 10]
        assert [r.interval for r in requests] == [1, 1, 1, 2, 2]

    def test_deterministic_per_seed(self):
        cfg = SynthConfig(num_items=20, num_providers=4, num_intervals=3, mean_traffic=10)
        a = synth_instance(cfg, seed=9)
        b = synth_instance(cfg, seed=9)
        np.testing.assert_array_equal(a[1].counts, b[1].counts)
        for ra, rb in zip(a[2], b[2]):
            assert ra.user_id == rb.user_id
            np.testing.assert_array_equal(ra.relevance, rb.relevance)

    def test_uniform_relevance_mean(self):
        cfg = SynthConfig(num_items=100, num_providers=5, num_intervals=1, traffic=[100])
        _, _, requests = synth_instance(cfg, seed=0)
        values = np.concatenate([r.relevance for r in requests])
        assert values.size == 10_000
        assert abs(values.mean() - 0.5) < 0.02

    def test_provider_bands(self):
        cfg = SynthConfig(num_items=10, num_providers=2, num_intervals=1, traffic=[5],
                          provider_bands=[(0.8, 1.0), (0.0, 0.2)], inventory=[5, 5])
        catalog, _, requests = synth_instance(cfg, seed=2)
        for req in requests:
            assert (req.relevance[:5] >= 0.8).all()
            assert (req.relevance[5:] <= 0.2).all()

    def test_more_providers_than_items_rejected(self):
        with pytest.raises(ConfigError):
            synth_instance(SynthConfig(num_items=2, num_providers=3, num_intervals=1), 0)

    def test_degenerate_flagging(self):
        cfg = SynthConfig(num_items=6, num_providers=2, num_intervals=1, traffic=[2],
                          relevance_low=0.0, relevance_high=0.0, list_size=5)
        _, _, requests = synth_instance(cfg, seed=0)
        assert all(r.degenerate for r in requests)


class TestResampleTraffic:
    def test_sum_preserved(self):
        series = TrafficSeries(np.array([5, 9, 2, 14]))
        out = resample_traffic(series, tau=0.4, total=200, seed=3)
        assert out.counts.sum() == 200

    @given(st.integers(min_value=0, max_value=2**31 - 1),
           st.floats(min_value=0.05, max_value=1.0))
    @settings(max_examples=50, deadline=None)
    def test_sum_preserved_any_seed(self, seed, tau):
        out = resample_traffic(TrafficSeries(np.array([3, 1, 7])), tau, 57, seed)
        assert out.counts.sum() == 57

    def test_equal_counts_stay_balanced_in_expectation(self):
        series = TrafficSeries(np.array([10, 10, 10, 10]))
        totals = np.zeros(4)
        for seed in range(200):
            totals += resample_traffic(series, tau=0.5, total=100, seed=seed).counts
        np.testing.assert_allclose(totals / 200, 25.0, atol=1.5)

    def test_small_tau_concentrates(self):
        out = resample_traffic(TrafficSeries(np.array([10, 0])), tau=0.01, total=100, seed=0)
        assert out.counts[0] >= 99

    def test_tau_one_matches_softmax_monte_carlo(self):
        # Fluctuating daily-style counts; the expected share under tau=1 is the
        # softmax of max-normalized counts, checked against a large multinomial.
        counts = np.array([8200, 9100, 12400, 15800, 11000, 9600, 7300, 6900,
                           14200, 18100, 13300, 9900, 9400, 8700, 7800, 9100])
        logits = counts / counts.max()
        probs = np.exp(logits - logits.max())
        probs /= probs.sum()
        draws = resample_traffic(TrafficSeries(counts), tau=1.0, total=100_000, seed=11)
        shares = draws.counts / 100_000
        np.testing.assert_allclose(shares, probs, atol=4 * np.sqrt(probs.max() / 100_000) + 1e-3)

    def test_bad_tau(self):
        with pytest.raises(ConfigError):
            resample_traffic(TrafficSeries(np.array([1])), tau=0.0, total=10, seed=0)


class TestRedistributeRequests:
    def test_relabels_intervals_and_positions(self):
        cfg = SynthConfig(num_items=6, num_providers=2, num_intervals=2, traffic=[4, 2])
        _, _, requests = synth_instance(cfg, seed=5)
        new_series = TrafficSeries(np.array([1, 5]))
        out = redistribute_requests(requests, new_series, seed=7)
        assert [r.interval for r in out] == [1, 2, 2, 2, 2, 2]
        assert [r.arrival_seq for r in out] == [1, 1, 2, 3, 4, 5]
        assert sorted(r.user_id for r in out) == sorted(r.user_id for r in requests)

    def test_total_mismatch_rejected(self):
        cfg = SynthConfig(num_items=6, num_providers=2, num_intervals=1, traffic=[3])
        _, _, requests = synth_instance(cfg, seed=5)
        with pytest.raises(ConfigError):
            redistribute_requests(requests, TrafficSeries(np.array([5])), seed=0)


class TestIngestion:
    def _write_csv(self, path, rows):
        path.write_text("user_id,item_id,provider_id,timestamp,score\n"
                        + "".join(f"{r}\n" for r in rows))

    def test_single_interval_grouping(self, tmp_path):
        f = tmp_path / "log.csv"
        self._write_csv(f, ["u1,a,1,100,0.5", "u2,b,1,7000,0.9", "u1,a,1,50000,0.4"])
        catalog, series, requests = load_interactions(f, LogSchema(interval_seconds=86400))
        np.testing.assert_array_equal(series.counts, [3])
        assert catalog.num_items == 2 and catalog.num_providers == 1
        assert [r.arrival_seq for r in requests] == [1, 2, 3]

    def test_sixteen_day_span(self, tmp_path):
        # One request per day over an inclusive 16-day span.
        f = tmp_path / "log.csv"
        day = 86400
        rows = [f"u{d},i{d},1,{d * day},0.5" for d in range(16)]
        self._write_csv(f, rows)
        _, series, _ = load_interactions(f, LogSchema(interval_seconds=day))
        assert series.horizon == 16
        np.testing.assert_array_equal(series.counts, np.ones(16))

    def test_empty_file_flags_no_requests(self, tmp_path):
        f = tmp_path / "log.csv"
        self._write_csv(f, [])
        with pytest.raises(ParseError, match="no requests"):
            load_interactions(f)

    def test_malformed_row_reports_line(self, tmp_path):
        f = tmp_path / "log.csv"
        self._write_csv(f, ["u1,a,1,100,0.5", "u2,b,1,not_a_time,0.9"])
        with pytest.raises(ParseError, match="row 3"):
            load_interactions(f)

    def test_item_with_two_providers(self, tmp_path):
        f = tmp_path / "log.csv"
        self._write_csv(f, ["u1,a,1,100,0.5", "u2,a,2,200,0.9"])
        with pytest.raises(ConsistencyError):
            load_interactions(f)

    def test_user_profile_from_own_rows(self, tmp_path):
        f = tmp_path / "log.csv"
        self._write_csv(f, ["u1,a,1,100,0.5", "u1,b,1,200,0.9", "u2,b,1,300,0.2"])
        _, _, requests = load_interactions(f, LogSchema(list_size=2))
        first = requests[0]
        np.testing.assert_allclose(first.relevance, [0.5, 0.9])
        assert requests[2].user_id == "u2"
        np.testing.assert_allclose(requests[2].relevance, [0.0, 0.2])

    def test_round_trip_identity(self, tmp_path):
        cfg = SynthConfig(num_items=12, num_providers=3, num_intervals=3,
                          traffic=[4, 1, 3], list_size=4, inventory=[6, 4, 2])
        catalog, series, requests = synth_instance(cfg, seed=13)
        save_instance(tmp_path / "inst", catalog, series, requests)
        cat2, series2, requests2 = load_interactions(tmp_path / "inst",
                                                     LogSchema(list_size=4))
        np.testing.assert_array_equal(catalog.item_provider, cat2.item_provider)
        np.testing.assert_array_equal(series.counts, series2.counts)
        assert len(requests) == len(requests2)
        for a, b in zip(requests, requests2):
            assert (a.user_id, a.interval, a.arrival_seq) == (b.user_id, b.interval, b.arrival_seq)
            np.testing.assert_array_equal(a.relevance, b.relevance)
            assert a.degenerate == b.degenerate

    def test_bad_relevance_magic(self, tmp_path):
        cfg = SynthConfig(num_items=4, num_providers=2, num_intervals=1, traffic=[2])
        catalog, series, requests = synth_instance(cfg, seed=0)
        save_instance(tmp_path / "inst", catalog, series, requests)
        rel = tmp_path / "inst" / "relevance.bin"
        rel.write_bytes(b"XXXX" + rel.read_bytes()[4:])
        with pytest.raises(ParseError, match="magic"):
            load_interactions(tmp_path / "inst")
