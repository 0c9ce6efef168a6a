"""Exhaustive lattice-search baseline and the recall/runtime harness.

The exhaustive search enumerates every single-value conjunctive rule up to
a maximum length, filters by minimum discovery-split size, and ranks with
the same score combination as the sampled search. It is the ground truth
for recall measurements, and refuses candidate spaces above a cap instead
of approximating.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass

import numpy as np

from .dataset import FeatureMatrix
from .discovery import (
    DiscoveryConfig,
    SubgroupResult,
    attach_raw_scores,
    compute_group_metrics,
    discover,
)
from .errors import CandidateSpaceError, ConfigError
from .ranking import combine_and_rank
from .rules import Mask, Rule

DEFAULT_CAP = 10_000_000


def estimate_rule_count(matrix: FeatureMatrix, max_length: int) -> int:
    """Exact count of single-value rules of length <= max_length: the sum of
    elementary symmetric polynomials over the feature vocabulary sizes."""
    sizes = [len(c.vocabulary) for c in matrix.features]
    # e[l] after processing some features = number of length-l combinations
    e = [1] + [0] * max_length
    for s in sizes:
        for l in range(min(max_length, len(sizes)), 0, -1):
            e[l] += e[l - 1] * s
    return sum(e[1:])


def exhaustive_search(matrix: FeatureMatrix, p_min: float, max_length: int,
                      specs, cap: int = DEFAULT_CAP) -> list[SubgroupResult]:
    """Enumerate, filter, and rank every single-value rule of length
    <= max_length with discovery-split size fraction >= p_min."""
    if not 0.0 < p_min < 1.0:
        raise ConfigError("p_min must be in (0, 1)")
    estimate = estimate_rule_count(matrix, max_length)
    if estimate > cap:
        raise CandidateSpaceError(estimate, cap)

    disc_rows = matrix.split.discovery_rows
    eval_rows = matrix.split.evaluation_rows
    n_disc = len(disc_rows)
    min_count = max(1, int(np.ceil(p_min * n_disc)))

    value_masks = []
    for col in matrix.features:
        value_masks.append([col.codes == c for c in range(len(col.vocabulary))])

    found = []

    def dfs(start_feature, mask, preds, depth):
        for f in range(start_feature, matrix.n_features):
            col = matrix.features[f]
            for code in range(len(col.vocabulary)):
                sub = value_masks[f][code] if mask is None else mask & value_masks[f][code]
                disc_count = int(sub[disc_rows].sum())
                if disc_count < min_count:
                    continue  # supersets cannot recover size: prune
                new_preds = preds + ((col.name, frozenset({col.vocabulary[code]})),)
                found.append((new_preds, sub))
                if depth + 1 < max_length:
                    dfs(f + 1, sub, new_preds, depth + 1)

    dfs(0, None, (), 0)

    results = []
    for preds, sub in found:
        rule = Rule(preds)
        mask = Mask.from_bool(sub, matrix)
        res = SubgroupResult(
            rule=rule,
            discovery=compute_group_metrics(mask, matrix, disc_rows),
            evaluation=compute_group_metrics(mask, matrix, eval_rows),
        )
        res._mask = mask
        results.append(res)
    attach_raw_scores(results, specs, matrix)
    return combine_and_rank(results, list(specs))


def recall_at_k(approx, exact, k: int) -> float:
    """|top-k(approx) ∩ top-k(exact)| / k by canonical rule identity."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    if len(exact) < k:
        raise ConfigError(f"exact list has {len(exact)} entries, fewer than k={k}")
    top_exact = {str(r.rule) for r in exact[:k]}
    top_approx = {str(r.rule) for r in approx[:k]}
    return len(top_exact & top_approx) / k


@dataclass
class SweepCell:
    n_samples: int
    p_min: float
    trial: int
    runtime_s: float
    recall_at_50: float


def run_sweep(matrix: FeatureMatrix, n_samples_grid, p_min_grid, trials: int,
              specs, max_length: int = 3, beam_width: int = 50,
              out_path=None, k: int = 50, cap: int = DEFAULT_CAP) -> list[SweepCell]:
    """Mean/stddev-ready sweep of runtime and recall@k over a parameter grid;
    each cell runs ``trials`` times with distinct seeds."""
    if not n_samples_grid or not p_min_grid:
        raise ConfigError("sweep grid must be nonempty")
    if any(p <= 0 or p >= 1 for p in p_min_grid):
        raise ConfigError("p_min values must be in (0, 1)")
    if trials < 1:
        raise ConfigError("trials must be >= 1")

    cells = []
    for p_min in p_min_grid:
        exact = exhaustive_search(matrix, p_min, max_length, specs, cap=cap)
        for n in n_samples_grid:
            for trial in range(trials):
                cfg = DiscoveryConfig(
                    specs=tuple(specs), n_samples=n, min_size=p_min,
                    beam_width=beam_width, max_length=max_length,
                    seed=trial, max_results=max(k, 100),
                )
                t0 = time.perf_counter()
                approx = discover(matrix, cfg)
                dt = time.perf_counter() - t0
                rec = recall_at_k(approx, exact, k) if len(exact) >= k else float("nan")
                cells.append(SweepCell(n, p_min, trial, dt, rec))

    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n_samples", "p_min", "trial", "runtime_s", "recall_at_50"])
            for c in cells:
                writer.writerow([c.n_samples, c.p_min, c.trial,
                                 f"{c.runtime_s:.6f}", f"{c.recall_at_50:.4f}"])
    return cells
