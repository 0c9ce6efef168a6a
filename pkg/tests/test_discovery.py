import json

import numpy as np
import pytest

from slicekit.dataset import matrix_from_codes
from slicekit.discovery import (
    DiscoveryConfig,
    beam_search_from_row,
    compute_group_metrics,
    discover,
    evaluate_rule,
    results_to_json,
    sample_source_rows,
    targeted_discover,
)
from slicekit.errors import ConfigError
from slicekit.ranking import RankingSpec
from slicekit.rules import Mask, Rule, evaluate_mask, parse_rule

from conftest import tiny_matrix

RATE = RankingSpec(kind="outcome-rate-high", outcome="target", weight=2)
SIZE = RankingSpec(kind="group-size", weight=1)


def toy_matrix():
    """12-row, 5-feature binary table whose level-1 scores are checkable by
    hand: the outcome fires exactly when f1=1 and f3=0 together."""
    codes = np.array([
        [0, 1, 1, 0, 0],
        [0, 1, 1, 0, 1],
        [1, 1, 0, 0, 0],
        [0, 1, 0, 0, 1],
        [1, 0, 1, 1, 0],
        [0, 0, 0, 1, 1],
        [1, 0, 1, 1, 0],
        [0, 0, 0, 1, 1],
        [1, 1, 1, 0, 0],
        [0, 1, 1, 0, 1],
        [1, 0, 0, 1, 0],
        [0, 0, 1, 1, 1],
    ])
    y = ((codes[:, 1] == 1) & (codes[:, 3] == 0)).astype(int)
    return matrix_from_codes(codes, outcomes={"target": y}, seed=0,
                             fraction=0.5)


class TestSampleSourceRows:
    def test_deterministic_and_sorted(self, small_matrix, rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=20, seed=9)
        a = sample_source_rows(small_matrix, cfg)
        b = sample_source_rows(small_matrix, cfg)
        assert np.array_equal(a, b)
        assert np.array_equal(a, np.sort(a))

    def test_rows_come_from_discovery_split(self, small_matrix, rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=50, seed=0)
        rows = sample_source_rows(small_matrix, cfg)
        assert set(rows.tolist()) <= set(
            small_matrix.split.discovery_rows.tolist())

    def test_no_replacement(self, small_matrix, rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=100, seed=0)
        rows = sample_source_rows(small_matrix, cfg)
        assert len(set(rows.tolist())) == len(rows)

    def test_source_mask_restricts(self, small_matrix, rate_specs):
        values = np.zeros(small_matrix.n_rows, dtype=bool)
        keep = small_matrix.split.discovery_rows[:10]
        values[keep] = True
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=100, seed=0,
                              source_mask=Mask.from_bool(values, small_matrix))
        rows = sample_source_rows(small_matrix, cfg)
        assert set(rows.tolist()) <= set(keep.tolist())

    def test_empty_source_rejected(self, small_matrix, rate_specs):
        values = np.zeros(small_matrix.n_rows, dtype=bool)
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=10, seed=0,
                              source_mask=Mask.from_bool(values, small_matrix))
        with pytest.raises(ConfigError):
            sample_source_rows(small_matrix, cfg)


class TestBeamSearchFromRow:
    def test_rules_match_source_row(self):
        m = toy_matrix()
        row = int(m.split.discovery_rows[0])
        cfg = DiscoveryConfig(specs=(RATE,), n_samples=1, min_size=0.1,
                              beam_width=2)
        found = beam_search_from_row(row, m, cfg)
        assert found
        for rule in found:
            mask = evaluate_mask(rule, m)
            assert mask.values[row], f"{rule} does not contain its source row"

    def test_all_univariate_matching_rules_evaluated(self):
        m = toy_matrix()
        row = int(m.split.discovery_rows[0])
        cfg = DiscoveryConfig(specs=(RATE,), n_samples=1, min_size=0.1,
                              beam_width=2)
        found = beam_search_from_row(row, m, cfg)
        min_count = int(np.ceil(0.1 * len(m.split.discovery_rows)))
        for j, col in enumerate(m.features):
            value = col.vocabulary[col.codes[row]]
            rule = Rule.single(col.name, value)
            disc_count = evaluate_mask(rule, m).discovery_count
            if disc_count >= min_count:
                assert rule in found

    def test_size_filter_enforced(self):
        m = toy_matrix()
        row = int(m.split.discovery_rows[0])
        cfg = DiscoveryConfig(specs=(RATE,), n_samples=1, min_size=0.34,
                              beam_width=3)
        found = beam_search_from_row(row, m, cfg)
        n_disc = len(m.split.discovery_rows)
        min_count = int(np.ceil(0.34 * n_disc))
        for rule, stats in found.items():
            assert stats["size"] >= min_count
            assert evaluate_mask(rule, m).discovery_count == stats["size"]

    def test_beam_expansion_beats_greedy_univariate(self):
        # two features that only predict the outcome jointly; a depth-2 beam
        # from a positive row must surface the conjunction
        rng = np.random.default_rng(1)
        codes = rng.integers(0, 2, size=(600, 6))
        y = (codes[:, 0] & codes[:, 1]).astype(int)
        m = matrix_from_codes(codes, outcomes={"target": y}, seed=0)
        pos_rows = [r for r in m.split.discovery_rows.tolist()
                    if y[r] == 1]
        cfg = DiscoveryConfig(specs=(RATE,), n_samples=1, beam_width=5,
                              max_length=2)
        found = beam_search_from_row(pos_rows[0], m, cfg)
        target = Rule((("f0", frozenset({"1"})), ("f1", frozenset({"1"}))))
        assert target in found

    def test_rule_length_bounded(self, small_matrix):
        row = int(small_matrix.split.discovery_rows[0])
        cfg = DiscoveryConfig(specs=(RATE,), n_samples=1, max_length=2)
        found = beam_search_from_row(row, small_matrix, cfg)
        assert max(len(r) for r in found) <= 2

    def test_row_outside_discovery_split_rejected(self, small_matrix):
        row = int(small_matrix.split.evaluation_rows[0])
        cfg = DiscoveryConfig(specs=(RATE,), n_samples=1)
        with pytest.raises(ConfigError):
            beam_search_from_row(row, small_matrix, cfg)


class TestDiscover:
    def test_deterministic_per_seed(self, small_matrix, rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=30, seed=5)
        a = [str(r.rule) for r in discover(small_matrix, cfg)]
        b = [str(r.rule) for r in discover(small_matrix, cfg)]
        assert a == b

    def test_results_unique(self, small_matrix, rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=30, seed=0)
        rules = [str(r.rule) for r in discover(small_matrix, cfg)]
        assert len(rules) == len(set(rules))

    def test_ranked_by_total_descending(self, small_matrix, rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=30, seed=0)
        totals = [r.scores.total for r in discover(small_matrix, cfg)]
        assert totals == sorted(totals, reverse=True)

    def test_max_results_honored(self, small_matrix, rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=30, seed=0,
                              max_results=7)
        assert len(discover(small_matrix, cfg)) <= 7

    def test_provenance_rows_generate_their_rules(self, small_matrix,
                                                  rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=10, seed=0)
        for res in discover(small_matrix, cfg)[:20]:
            assert res.provenance
            mask = res.mask(small_matrix)
            for row in res.provenance:
                assert mask.values[row]

    def test_worker_count_does_not_change_json(self, small_matrix,
                                               rate_specs):
        from dataclasses import replace

        cfg1 = DiscoveryConfig(specs=rate_specs, n_samples=30, seed=2,
                               workers=1)
        cfg8 = replace(cfg1, workers=8)
        a = json.dumps(results_to_json(discover(small_matrix, cfg1), cfg1),
                       sort_keys=True)
        b = json.dumps(results_to_json(discover(small_matrix, cfg8), cfg8),
                       sort_keys=True)
        assert a == b

    def test_finds_planted_conjunction(self):
        rng = np.random.default_rng(7)
        codes = rng.integers(0, 2, size=(4000, 8))
        hit = codes[:, 2] & codes[:, 5]
        y = (rng.random(4000) < np.where(hit, 0.95, 0.02)).astype(int)
        m = matrix_from_codes(codes, outcomes={"target": y}, seed=0)
        cfg = DiscoveryConfig(specs=(RATE, SIZE), n_samples=60, seed=0)
        results = discover(m, cfg)
        # every top hit must be a refinement of the planted pair; the pair
        # itself sits lower only because group-size prefers smaller groups
        for res in results[:3]:
            assert res.rule.values_for("f2") == frozenset({"1"})
            assert res.rule.values_for("f5") == frozenset({"1"})
        assert '"f2" = "1" & "f5" = "1"' in [
            str(r.rule) for r in results[:15]]

    def test_displayed_metrics_come_from_evaluation_split(self, small_matrix,
                                                          rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=20, seed=1)
        eval_rows = small_matrix.split.evaluation_rows
        y = small_matrix.outcomes["target"].values
        for res in discover(small_matrix, cfg):
            member = res.mask(small_matrix).values[eval_rows]
            assert res.evaluation.size == int(member.sum())
            if res.evaluation.size:
                expect = float(y[eval_rows][member].mean())
                assert res.evaluation.outcomes["target"]["rate"] == expect


class TestComputeGroupMetrics:
    def test_matches_manual_counts(self, small_matrix):
        rule = Rule.single("f0", "1")
        mask = evaluate_mask(rule, small_matrix)
        rows = small_matrix.split.evaluation_rows
        got = compute_group_metrics(mask, small_matrix, rows)
        member = mask.values[rows]
        y = small_matrix.outcomes["target"].values[rows]
        assert got.size == int(member.sum())
        assert got.outcomes["target"]["rate"] == float(y[member].mean())
        assert got.outcomes["target"]["coverage"] == float(
            y[member].sum() / y.sum())

    def test_empty_subgroup_reports_none(self, small_matrix):
        mask = Mask.from_bool(np.zeros(small_matrix.n_rows, dtype=bool),
                              small_matrix)
        got = compute_group_metrics(mask, small_matrix,
                                    small_matrix.split.evaluation_rows)
        assert got.size == 0
        assert got.outcomes["target"]["rate"] is None


class TestEvaluateRule:
    def test_matches_discover_fields(self, small_matrix, rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=20, seed=1)
        res = discover(small_matrix, cfg)[0]
        direct = evaluate_rule(res.rule, small_matrix, rate_specs)
        assert direct.evaluation.size == res.evaluation.size
        assert direct.evaluation.outcomes == res.evaluation.outcomes

    def test_custom_rule_text(self, small_matrix, rate_specs):
        rule = parse_rule('"f0" = "1" & "f1" = "1"', small_matrix)
        res = evaluate_rule(rule, small_matrix, rate_specs)
        assert res.discovery.size + res.evaluation.size == evaluate_mask(
            rule, small_matrix).population


class TestTargetedDiscover:
    def test_results_skew_toward_selection(self, rate_specs):
        rng = np.random.default_rng(3)
        codes = rng.integers(0, 3, size=(3000, 6))
        y = rng.integers(0, 2, 3000)
        m = matrix_from_codes(codes, outcomes={"target": y}, seed=0)
        selection = m.feature("f3").codes == 2
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=40, seed=0)
        results = targeted_discover(m, cfg, selection)
        assert results
        top = results[0]
        sel_rate = float(
            selection[top.mask(m).values].mean())
        assert sel_rate > selection.mean()
        assert "f3" in [n for n, _ in top.rule.predicates]

    def test_empty_selection_rejected(self, small_matrix, rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, n_samples=10, seed=0)
        with pytest.raises(ConfigError):
            targeted_discover(small_matrix, cfg,
                              np.zeros(small_matrix.n_rows, dtype=bool))


class TestConfigValidation:
    def test_needs_outcome_bearing_spec(self):
        with pytest.raises(ConfigError):
            DiscoveryConfig(specs=(SIZE,))

    def test_min_size_bounds(self, rate_specs):
        with pytest.raises(ConfigError):
            DiscoveryConfig(specs=rate_specs, min_size=0.0)
        with pytest.raises(ConfigError):
            DiscoveryConfig(specs=rate_specs, min_size=1.0)

    def test_json_round_trip_excludes_workers(self, rate_specs):
        cfg = DiscoveryConfig(specs=rate_specs, workers=8, seed=3)
        data = cfg.to_json_dict()
        assert "workers" not in data
        clone = DiscoveryConfig.from_json_dict(data)
        assert clone.seed == 3
        assert clone.specs == cfg.specs


def test_sparse_and_dense_paths_agree():
    import scipy.sparse as sp

    from slicekit.dataset import matrix_from_sparse_binary

    rng = np.random.default_rng(11)
    dense = (rng.random((1500, 12)) < 0.3).astype(np.int64)
    y = (rng.random(1500) < np.where(dense[:, 0] & dense[:, 1], 0.8,
                                     0.05)).astype(int)
    m_dense = matrix_from_codes(dense, outcomes={"target": y}, seed=0)
    m_sparse = matrix_from_sparse_binary(
        sp.csr_matrix(dense), names=[f"f{j}" for j in range(12)],
        outcomes={"target": y}, seed=0)
    cfg = DiscoveryConfig(specs=(RATE, SIZE), n_samples=40, seed=0)
    a = [(str(r.rule), r.evaluation.size) for r in discover(m_dense, cfg)]
    b = [(str(r.rule), r.evaluation.size) for r in discover(m_sparse, cfg)]
    assert a == b
