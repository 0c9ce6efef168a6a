"""End-to-end acceptance gate.

Each test covers one headline criterion (fixture statistics, oracle recall,
scaling, throughput, determinism, scoring correctness, split separation,
map invariants, re-rank latency) and prints a single PASS line with the
measured numbers when it succeeds.
"""

import json
import math
import time
from dataclasses import replace

import numpy as np
import pytest

import slicekit as sk
from slicekit.fixtures import (
    airline_matrix,
    planted_matrix,
    random_binary_matrix,
    sparse_bow_matrix,
)

RATE_TARGET = sk.RankingSpec(kind="outcome-rate-high", outcome="target",
                             weight=2)
SIZE_SPEC = sk.RankingSpec(kind="group-size", weight=1)


def report(line):
    print(f"[PASS] {line}", flush=True)


def test_airline_fixture_rule_statistics_and_runtime():
    matrix = airline_matrix()
    specs = (
        sk.RankingSpec(kind="outcome-rate-high", outcome="dissatisfied",
                       weight=2),
        SIZE_SPEC,
    )
    config = sk.DiscoveryConfig(specs=specs, n_samples=100, seed=0)
    t0 = time.perf_counter()
    results = sk.discover(matrix, config)
    elapsed = time.perf_counter() - t0

    target = ('"Ease of online booking" = "not satisfied"'
              ' & "Gate location" = "neutral"'
              ' & "Inflight wifi service" = "not satisfied"')
    found = {str(r.rule): r for r in results}
    assert target in found, "planted dissatisfaction rule not discovered"
    res = found[target]

    assert res.evaluation.size_fraction == pytest.approx(0.057, abs=0.003)
    assert res.discovery.size_fraction == pytest.approx(0.057, abs=0.003)
    assert res.evaluation.outcomes["dissatisfied"]["rate"] == 1.0
    base = float(matrix.outcomes["dissatisfied"].values.mean())
    assert base == pytest.approx(0.566, abs=0.001)
    assert elapsed < 5.0

    report(f"airline: rule size {res.evaluation.size_fraction:.4f}, "
           f"rate 1.0, base {base:.4f}, discover {elapsed:.2f}s < 5s")


def test_recall_against_exhaustive_oracle():
    t_start = time.perf_counter()
    matrix = planted_matrix(20_000, 30, 5, seed=0)
    specs = (RATE_TARGET, SIZE_SPEC)
    exact = sk.exhaustive_search(matrix, p_min=0.05, max_length=3,
                                 specs=specs)

    def mean_recall(n_samples):
        recalls = []
        for seed in range(10):
            config = sk.DiscoveryConfig(
                specs=specs, n_samples=n_samples, min_size=0.05,
                beam_width=50, max_length=3, seed=seed)
            approx = sk.discover(matrix, config)
            recalls.append(sk.recall_at_k(approx, exact, 50))
        return float(np.mean(recalls))

    r10 = mean_recall(10)
    r100 = mean_recall(100)
    r200 = mean_recall(200)
    total = time.perf_counter() - t_start

    assert r100 >= 0.5, f"mean recall@50 at n=100 was {r100:.3f}"
    assert r200 >= r10, f"recall fell from {r10:.3f} (n=10) to {r200:.3f}"
    assert total < 120.0

    report(f"recall@50 vs oracle: n=10 {r10:.3f}, n=100 {r100:.3f} >= 0.5, "
           f"n=200 {r200:.3f} >= n=10, total {total:.1f}s < 120s")


def test_scaling_with_feature_width():
    times = {}
    estimates = {}
    specs = None
    for width in (100, 1000, 2000):
        matrix = random_binary_matrix(50_000, width, seed=width)
        specs = (RATE_TARGET, SIZE_SPEC)
        config = sk.DiscoveryConfig(specs=specs, n_samples=100, seed=0)
        t0 = time.perf_counter()
        sk.discover(matrix, config)
        times[width] = time.perf_counter() - t0
        estimates[width] = sk.estimate_rule_count(matrix, 3)
        assert times[width] < 60.0
        if width == 2000:
            with pytest.raises(sk.CandidateSpaceError):
                sk.exhaustive_search(matrix, p_min=0.01, max_length=3,
                                     specs=specs)

    # candidate space grows ~10^4x from width 100 to 2000; discover must not
    growth_time = times[2000] / times[100]
    growth_space = estimates[2000] / estimates[100]
    assert growth_time < growth_space / 100

    report("scaling: discover "
           + ", ".join(f"w={w} {times[w]:.1f}s" for w in times)
           + f" (all < 60s); oracle refuses at w=2000 "
           f"({estimates[2000]:.1e} candidates); time growth "
           f"{growth_time:.1f}x vs space growth {growth_space:.0f}x")


def test_wide_sparse_throughput_anchor():
    matrix = sparse_bow_matrix(75_000, 5_000, seed=0)
    specs = (sk.RankingSpec(kind="outcome-rate-high", outcome="flagged",
                            weight=2),)
    config = sk.DiscoveryConfig(specs=specs, n_samples=200, seed=0)
    t0 = time.perf_counter()
    results = sk.discover(matrix, config)
    elapsed = time.perf_counter() - t0
    assert results
    assert elapsed <= 30.0
    report(f"sparse 75,000x5,000 n=200: discover {elapsed:.1f}s <= 30s")


def test_determinism_across_worker_counts():
    matrix = planted_matrix(20_000, 30, 5, seed=0)
    base = sk.DiscoveryConfig(specs=(RATE_TARGET, SIZE_SPEC), n_samples=100,
                              seed=4, workers=1)
    blobs = []
    for workers in (1, 8):
        config = replace(base, workers=workers)
        results = sk.discover(matrix, config)
        blobs.append(json.dumps(sk.results_to_json(results, config),
                                sort_keys=True).encode())
    assert blobs[0] == blobs[1]
    report(f"determinism: 1-worker and 8-worker discover JSON byte-identical "
           f"({len(blobs[0])} bytes)")


def test_ranking_functions_against_counting_oracle():
    rng = np.random.default_rng(1234)
    n = 80
    for _ in range(100):
        mask = rng.random(n) < rng.uniform(0.2, 0.8)
        y = (rng.random(n) < rng.uniform(0.2, 0.8)).astype(float)
        rows = np.sort(rng.choice(n, size=60, replace=False))
        inside = [y[i] for i in rows if mask[i]]
        total_pos = sum(y[i] for i in rows)
        if not inside or total_pos == 0:
            continue
        assert sk.outcome_rate(mask, y, rows) == sum(inside) / len(inside)
        assert sk.outcome_rate_low(mask, y, rows) == 1 - sum(inside) / len(
            inside)
        assert sk.outcome_coverage(mask, y, rows) == sum(
            y[i] for i in rows if mask[i]) / total_pos

    # interaction effect vs explicit subset enumeration
    from conftest import tiny_matrix
    from slicekit.rules import Rule, evaluate_mask, rule_subsets

    matrix = tiny_matrix(seed=9)
    y = matrix.outcomes["target"].values
    rows = matrix.split.evaluation_rows
    rule = Rule((("f0", frozenset({"1"})), ("f1", frozenset({"1"})),
                 ("f2", frozenset({"0"}))))
    best = max(sk.outcome_rate(evaluate_mask(s, matrix), y, rows)
               for s in rule_subsets(rule))
    expect = sk.outcome_rate(evaluate_mask(rule, matrix), y, rows) / best
    assert sk.interaction_effect(rule, y, matrix, rows) == pytest.approx(
        expect)

    # group-size peaks exactly at the ideal fraction
    rows = np.arange(100)
    fractions = [i / 100 for i in range(1, 101)]
    scores = []
    for f in fractions:
        m = np.zeros(100, dtype=bool)
        m[: int(f * 100)] = True
        scores.append(sk.group_size_score(m, rows, ideal=0.10))
    assert fractions[int(np.argmax(scores))] == 0.10

    # simple-rule strictly decreasing in predicate count
    lengths = [sk.simple_rule_score(Rule(tuple(
        (f"f{i}", frozenset({"1"})) for i in range(k)))) for k in
        range(1, 8)]
    assert all(a > b for a, b in zip(lengths, lengths[1:]))

    # uniform positive weight scaling never changes the order
    from slicekit.discovery import attach_raw_scores, evaluate_rule

    pool = []
    rng = np.random.default_rng(5)
    seen = set()
    for _ in range(40):
        feats = rng.choice(5, size=rng.integers(1, 4), replace=False)
        rule = Rule(tuple((f"f{f}", frozenset({str(rng.integers(0, 2))}))
                          for f in feats))
        if rule not in seen:
            seen.add(rule)
            pool.append(evaluate_rule(rule, matrix, specs=()))
    specs1 = [sk.RankingSpec(kind="outcome-rate-high", outcome="target",
                             weight=1), sk.RankingSpec(kind="group-size",
                                                       weight=1)]
    specs4 = [replace(s, weight=4) for s in specs1]
    attach_raw_scores(pool, specs1, matrix)
    a = [str(r.rule) for r in sk.combine_and_rank(pool, specs1)]
    b = [str(r.rule) for r in sk.combine_and_rank(pool, specs4)]
    assert a == b

    report("ranking: 100-mask counting oracle exact; interaction effect "
           "matches subset brute force; group-size peaks at ideal; "
           "simple-rule strictly decreasing; rank invariant under uniform "
           "weight scaling")


def test_split_separation_of_displayed_metrics():
    matrix = planted_matrix(20_000, 30, 5, seed=0)
    config = sk.DiscoveryConfig(specs=(RATE_TARGET, SIZE_SPEC), n_samples=50,
                                seed=0)
    results = sk.discover(matrix, config)
    eval_rows = matrix.split.evaluation_rows
    disc_rows = matrix.split.discovery_rows
    y = matrix.outcomes["target"].values
    for res in results:
        member_eval = res.mask(matrix).values[eval_rows]
        assert res.evaluation.size == int(member_eval.sum())
        assert res.evaluation.size_fraction == res.evaluation.size / len(
            eval_rows)
        if res.evaluation.size:
            assert res.evaluation.outcomes["target"]["rate"] == float(
                y[eval_rows][member_eval].mean())
        # a polluted recomputation that includes discovery rows must differ
        # from the displayed value whenever the two splits disagree
        member_disc = res.mask(matrix).values[disc_rows]
        pooled_rate = float(
            (y[eval_rows][member_eval].sum() + y[disc_rows][member_disc].sum())
            / (member_eval.sum() + member_disc.sum()))
        disc_rate = res.discovery.outcomes["target"]["rate"]
        if disc_rate != res.evaluation.outcomes["target"]["rate"]:
            assert res.evaluation.outcomes["target"]["rate"] != pooled_rate
    report(f"split separation: all {len(results)} displayed metrics "
           f"reproduce exactly from evaluation rows only")


def test_map_invariants_on_random_layouts():
    from conftest import tiny_matrix
    from slicekit.groupmap import row_signatures
    from slicekit.rules import Rule, evaluate_mask

    rng = np.random.default_rng(0)
    sizes = np.unique(np.logspace(math.log10(2_000), math.log10(200_000),
                                  20).astype(int))
    checked = 0
    for i, n in enumerate(sizes.tolist()):
        matrix = tiny_matrix(seed=100 + i, n=n, m=6)
        n_rules = int(rng.integers(0, 4))
        rules = [Rule.single(f"f{int(rng.integers(0, 6))}", "1")
                 for _ in range(n_rules)]
        rules = list({str(r): r for r in rules}.values())
        layout = sk.build_layout(matrix, seed=i, subgroups=rules,
                                 outcome="target", method="pca")
        eval_rows = matrix.split.evaluation_rows
        # partition
        assert sum(b.count for b in layout.bubbles) == len(eval_rows)
        # property purity
        sig = row_signatures(matrix, rules, eval_rows)
        y = matrix.outcomes["target"].values[eval_rows]
        pos = {r: j for j, r in enumerate(eval_rows.tolist())}
        for b in layout.bubbles:
            idx = [pos[r] for r in b.members.tolist()]
            assert len(set(sig[idx].tolist())) == 1
            assert len(set(y[idx].tolist())) == 1
        # post-relaxation non-overlap
        eps = 1e-6 * max(layout.diagonal, 1e-12)
        coords = np.array([[b.x, b.y] for b in layout.bubbles])
        radii = np.array([b.radius for b in layout.bubbles])
        from scipy.spatial import cKDTree

        pairs = cKDTree(coords).query_pairs(float(2 * radii.max()),
                                            output_type="ndarray")
        for a, b in map(tuple, pairs):
            dist = float(np.hypot(*(coords[b] - coords[a])))
            assert dist >= radii[a] + radii[b] - eps - 1e-9
        # intersection sizes sum to split size
        if rules:
            summary = sk.intersection_summary(matrix, rules, "target")
            assert summary.unassigned + sum(
                e["size"] for e in summary.entries) == len(eval_rows)
        checked += 1

    # distinguishing feature recovers a perfect separator
    matrix = tiny_matrix(seed=7, n=5_000, m=6)
    selection = evaluate_mask(Rule.single("f5", "0"), matrix)
    name, value, precision, recall = sk.distinguishing_feature(
        selection, matrix)
    assert (name, value, precision, recall) == ("f5", "0", 1.0, 1.0)

    report(f"map: partition/purity/non-overlap on {checked} layouts "
           f"(2e3..2e5 rows); distinguishing feature exact on planted "
           f"selection; intersection sizes sum to split size")


def test_rerank_latency_p95():
    from fastapi.testclient import TestClient

    from slicekit.server import create_app

    matrix = planted_matrix(20_000, 30, 5, seed=0)
    app = create_app()
    sid = app.state.register_matrix(matrix)
    client = TestClient(app)
    job = client.post(f"/sessions/{sid}/discover", json={
        "specs": [s.to_json_dict() for s in (RATE_TARGET, SIZE_SPEC)],
        "n_samples": 100, "seed": 0, "max_results": 1000,
    })
    job_id = job.json()["job_id"]
    deadline = time.time() + 60
    while time.time() < deadline:
        body = client.get(f"/sessions/{sid}/jobs/{job_id}").json()
        if body["status"] != "running":
            break
        time.sleep(0.05)
    assert body["status"] == "done"
    assert len(body["results"]) == 1000

    payloads = [
        {"specs": [
            {"kind": "outcome-rate-high", "outcome": "target", "weight": w},
            {"kind": "group-size", "weight": 4 - w},
        ]}
        for w in (1, 2, 3, 4)
    ]
    latencies = []
    for i in range(60):
        payload = payloads[i % len(payloads)]
        t0 = time.perf_counter()
        resp = client.post(f"/sessions/{sid}/rerank", json=payload)
        latencies.append(time.perf_counter() - t0)
        assert resp.status_code == 200
    p95 = float(np.quantile(latencies, 0.95))
    assert p95 < 0.100
    report(f"rerank: p95 {1000 * p95:.1f}ms < 100ms over 1,000 cached "
           f"candidates (60 requests)")
