"""Sampled beam-search subgroup discovery.

The search samples source rows from the discovery split and, per row,
runs a beam search over conjunctive rules that match the row: level 1
scores every univariate rule containing the row, then the top-k rules per
enabled ranking function are repeatedly expanded by one (feature = row
value) predicate up to the maximum rule length. Candidates below the
minimum size fraction never enter a beam.

Scoring during the search runs on the discovery split only; the returned
results carry metrics recomputed on the evaluation split, which is also
what the final ranking uses.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .dataset import FeatureMatrix, OutcomeVector
from .errors import ConfigError
from .ranking import (
    OUTCOME_KINDS,
    RankingSpec,
    ScoreVector,
    combine_and_rank,
    raw_score,
    simple_rule_score,
)
from .rules import Mask, Rule, evaluate_mask

_EVAL_POOL_FLOOR = 20_000  # candidates carried into evaluation-split ranking
_STATS_CACHE_CAP = 768   # per-parent contingency tables kept in memory


@dataclass(frozen=True)
class DiscoveryConfig:
    """Tuning knobs for the sampled search. Defaults follow the interactive
    tool's defaults: 100 samples, 1% minimum size, beam width 50, depth 3."""

    specs: tuple[RankingSpec, ...]
    n_samples: int = 100
    source_mask: Mask | None = None
    min_size: float = 0.01
    beam_width: int = 50
    max_length: int = 3
    seed: int = 0
    workers: int = 1
    max_results: int = 100

    def __post_init__(self):
        object.__setattr__(self, "specs", tuple(self.specs))
        if self.n_samples < 1:
            raise ConfigError("n_samples must be >= 1")
        if not 0.0 < self.min_size < 1.0:
            raise ConfigError("min_size must be in (0, 1)")
        if self.beam_width < 1:
            raise ConfigError("beam_width must be >= 1")
        if self.max_length < 1:
            raise ConfigError("max_length must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if not any(s.enabled for s in self.specs):
            raise ConfigError("at least one enabled ranking spec is required")
        if not any(s.enabled and s.kind in OUTCOME_KINDS for s in self.specs):
            raise ConfigError(
                "at least one enabled outcome-bearing spec must guide the search"
            )

    def to_json_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "min_size": self.min_size,
            "beam_width": self.beam_width,
            "max_length": self.max_length,
            "seed": self.seed,
            "max_results": self.max_results,
            "specs": [s.to_json_dict() for s in self.specs],
        }

    @classmethod
    def from_json_dict(cls, data, source_mask=None) -> "DiscoveryConfig":
        return cls(
            specs=tuple(RankingSpec.from_json_dict(s) for s in data["specs"]),
            n_samples=int(data.get("n_samples", 100)),
            source_mask=source_mask,
            min_size=float(data.get("min_size", 0.01)),
            beam_width=int(data.get("beam_width", 50)),
            max_length=int(data.get("max_length", 3)),
            seed=int(data.get("seed", 0)),
            workers=int(data.get("workers", 1)),
            max_results=int(data.get("max_results", 100)),
        )


@dataclass
class GroupMetrics:
    """Per-split summary of one subgroup: size plus per-outcome statistics."""

    size: int
    size_fraction: float
    outcomes: dict

    def to_json_dict(self) -> dict:
        return {
            "size": self.size,
            "size_fraction": self.size_fraction,
            "outcomes": self.outcomes,
        }


@dataclass
class SubgroupResult:
    """A rule with metrics on both splits, its score vector, and the sampled
    source rows that generated it."""

    rule: Rule
    discovery: GroupMetrics
    evaluation: GroupMetrics
    scores: ScoreVector = field(default_factory=ScoreVector)
    provenance: tuple[int, ...] = ()
    _mask: Mask | None = field(default=None, repr=False, compare=False)

    def mask(self, matrix: FeatureMatrix) -> Mask:
        if self._mask is None:
            self._mask = evaluate_mask(self.rule, matrix)
        return self._mask

    @property
    def evaluation_size(self) -> int:
        return self.evaluation.size

    def to_json_dict(self) -> dict:
        return {
            "rule": str(self.rule),
            "predicates": self.rule.to_json_list(),
            "size": {
                "discovery": self.discovery.size_fraction,
                "evaluation": self.evaluation.size_fraction,
            },
            "metrics": {
                "discovery": self.discovery.to_json_dict(),
                "evaluation": self.evaluation.to_json_dict(),
            },
            "scores": {
                "raw": self.scores.raw,
                "normalized": self.scores.normalized,
                "total": self.scores.total,
            },
            "provenance": list(self.provenance),
        }


def compute_group_metrics(mask: Mask, matrix: FeatureMatrix, rows) -> GroupMetrics:
    """Metrics of one subgroup restricted to ``rows``; statistics that are
    undefined on an empty subgroup are reported as None."""
    return _metrics_from_member(mask.values[rows], matrix, rows)


def _metrics_from_member(member, matrix: FeatureMatrix, rows) -> GroupMetrics:
    size = int(member.sum())
    fraction = size / len(rows)
    per_outcome = {}
    for name, out in matrix.outcomes.items():
        y = out.values[rows]
        if out.kind == "binary":
            total_pos = float(y.sum())
            pos = float(y[member].sum())
            per_outcome[name] = {
                "rate": pos / size if size else None,
                "coverage": pos / total_pos if total_pos else None,
            }
        else:
            per_outcome[name] = {
                "mean": float(y[member].sum() / size) if size else None,
                "mean_difference": float(abs(y[member].sum() / size - y.mean()))
                if size
                else None,
            }
    return GroupMetrics(size=size, size_fraction=fraction, outcomes=per_outcome)


# -- column stores -----------------------------------------------------------

class _DenseStore:
    """Discovery-split codes as a dense (n_disc x M) array of the smallest
    sufficient unsigned dtype."""

    def __init__(self, matrix: FeatureMatrix, disc_rows):
        self.vocab_sizes = np.array(
            [len(c.vocabulary) for c in matrix.features], dtype=np.int64
        )
        vmax = int(self.vocab_sizes.max())
        dtype = np.uint8 if vmax <= 255 else np.uint16 if vmax <= 65535 else np.uint32
        self.codes = np.empty((len(disc_rows), len(matrix.features)), dtype=dtype)
        for j, col in enumerate(matrix.features):
            self.codes[:, j] = col.codes[disc_rows]
        self.vmax = vmax
        self.n_rows, self.n_features = self.codes.shape

    def row_values(self, local_row: int) -> np.ndarray:
        return self.codes[local_row].astype(np.int64)

    def value_mask(self, feature: int, code: int) -> np.ndarray:
        return self.codes[:, feature] == code

    def group_counts(self, rows, weight_rows_by_value=None):
        """Counts (and optionally per-outcome sums) of every (feature, value)
        pair within ``rows``. Returns (counts, sums) with shape (M, vmax)."""
        sub = self.codes[rows]
        counts = np.zeros((self.n_features, self.vmax), dtype=np.int64)
        for v in range(1, self.vmax):
            counts[:, v] = (sub == v).sum(axis=0)
        counts[:, 0] = len(rows) - counts[:, 1:].sum(axis=1)
        sums = {}
        if weight_rows_by_value:
            for name, y in weight_rows_by_value.items():
                y_local = y[rows]
                if np.all((y_local == 0) | (y_local == 1)):
                    pos = sub[y_local == 1]
                    s = np.zeros((self.n_features, self.vmax), dtype=np.float64)
                    for v in range(1, self.vmax):
                        s[:, v] = (pos == v).sum(axis=0)
                    s[:, 0] = len(pos) - s[:, 1:].sum(axis=1)
                else:
                    s = np.zeros((self.n_features, self.vmax), dtype=np.float64)
                    yf = y_local.astype(np.float64)
                    for v in range(self.vmax):
                        s[:, v] = yf @ (sub == v)
                sums[name] = s
        return counts, sums


class _SparseBinaryStore:
    """Discovery-split codes as a CSR 0/1 matrix; only usable when every
    feature vocabulary is exactly ("0", "1")."""

    def __init__(self, csr, disc_rows):
        self.csr = csr[disc_rows].tocsr()
        self.csr.data = np.ones_like(self.csr.data)
        self.csc = self.csr.tocsc()
        self.n_rows, self.n_features = self.csr.shape
        self.vmax = 2
        self.vocab_sizes = np.full(self.n_features, 2, dtype=np.int64)

    def row_values(self, local_row: int) -> np.ndarray:
        out = np.zeros(self.n_features, dtype=np.int64)
        row = self.csr[local_row]
        out[row.indices] = 1
        return out

    def value_mask(self, feature: int, code: int) -> np.ndarray:
        col = self.csc.indices[
            self.csc.indptr[feature]: self.csc.indptr[feature + 1]
        ]
        mask = np.zeros(self.n_rows, dtype=bool)
        mask[col] = True
        return mask if code == 1 else ~mask

    def group_counts(self, rows, weight_rows_by_value=None):
        sub = self.csr[rows]
        ones = np.asarray(sub.sum(axis=0)).ravel()
        counts = np.empty((self.n_features, 2), dtype=np.int64)
        counts[:, 1] = ones
        counts[:, 0] = len(rows) - ones
        sums = {}
        if weight_rows_by_value:
            for name, y in weight_rows_by_value.items():
                y_local = y[rows].astype(np.float64)
                s1 = np.asarray(y_local @ sub).ravel()
                s = np.empty((self.n_features, 2), dtype=np.float64)
                s[:, 1] = s1
                s[:, 0] = float(y_local.sum()) - s1
                sums[name] = s
        return counts, sums


def _build_store(matrix: FeatureMatrix, disc_rows):
    if matrix.sparse_store is not None:
        return _SparseBinaryStore(matrix.sparse_store, disc_rows)
    return _DenseStore(matrix, disc_rows)


# -- search engine -----------------------------------------------------------

@dataclass
class _BeamEntry:
    key: tuple
    size: int
    sums: dict
    # best outcome rate over this rule and all its tracked subsets, per
    # interaction-effect outcome; guides the interaction-effect beam
    best_rates: dict


class _Engine:
    def __init__(self, matrix: FeatureMatrix, config: DiscoveryConfig):
        self.matrix = matrix
        self.config = config
        self.disc_rows = matrix.split.discovery_rows
        self.n_disc = len(self.disc_rows)
        self.store = _build_store(matrix, self.disc_rows)
        self.min_count = max(1, math.ceil(config.min_size * self.n_disc))

        self.guides = [
            s for s in config.specs if s.enabled and s.kind in OUTCOME_KINDS
        ]
        self.guide_ys = {}
        for s in self.guides:
            out = matrix.outcomes[s.outcome]
            self.guide_ys.setdefault(s.outcome, out.values[self.disc_rows])
        self.y_totals = {n: float(y.sum()) for n, y in self.guide_ys.items()}
        self.y_means = {n: float(y.mean()) for n, y in self.guide_ys.items()}

        all_rows = np.arange(self.n_disc)
        self.uni_counts, self.uni_sums = self.store.group_counts(
            all_rows, self.guide_ys
        )

        self._stats_cache = OrderedDict()
        self._stats_lock = threading.Lock()

    # parent contingency tables, LRU-cached by rule key
    def group_stats(self, key):
        with self._stats_lock:
            hit = self._stats_cache.get(key)
            if hit is not None:
                self._stats_cache.move_to_end(key)
                return hit
        rows = self.rows_of(key)
        stats = self.store.group_counts(rows, self.guide_ys)
        with self._stats_lock:
            self._stats_cache[key] = stats
            if len(self._stats_cache) > _STATS_CACHE_CAP:
                self._stats_cache.popitem(last=False)
        return stats

    def rows_of(self, key):
        mask = None
        for f, code in key:
            m = self.store.value_mask(f, code)
            mask = m if mask is None else (mask & m)
        return np.flatnonzero(mask)

    def guide_scores(self, spec, sizes, sums, best_rates):
        """Vectorized discovery-split raw scores for one guiding spec over a
        batch of candidates with the given sizes and per-outcome sums."""
        with np.errstate(divide="ignore", invalid="ignore"):
            if spec.kind in ("outcome-rate-high", "selection-score"):
                return sums[spec.outcome] / sizes
            if spec.kind == "outcome-rate-low":
                return 1.0 - sums[spec.outcome] / sizes
            if spec.kind == "outcome-coverage":
                total = self.y_totals[spec.outcome]
                if total == 0:
                    return np.zeros_like(sizes, dtype=np.float64)
                return sums[spec.outcome] / total
            if spec.kind == "mean-difference":
                return np.abs(sums[spec.outcome] / sizes - self.y_means[spec.outcome])
            if spec.kind == "interaction-effect":
                # best-known subset rate: approximate guide, exact at ranking
                rate = sums[spec.outcome] / sizes
                return rate / np.maximum(best_rates[spec.outcome], 1e-12)
        raise ConfigError(f"spec kind {spec.kind!r} cannot guide the beam")


def _search_row(engine: _Engine, local_row: int, keep_per_level: int | None):
    """Beam search constrained to rules matching one sampled source row.

    Returns a dict of rule key -> (size, {outcome: sum}) over every candidate
    retained at any level (all evaluated candidates when keep_per_level is
    None).
    """
    cfg = engine.config
    store = engine.store
    rv = store.row_values(local_row)
    m = store.n_features
    feats = np.arange(m)
    base_rates = {
        n: max(engine.y_means[n], 1e-12) for n in engine.guide_ys
    }

    results = {}

    # level 1: every univariate rule matching the row, from global stats
    sizes = engine.uni_counts[feats, rv].astype(np.float64)
    sums = {n: engine.uni_sums[n][feats, rv] for n in engine.guide_ys}
    valid = sizes >= engine.min_count
    uni_rates = {}
    for n in engine.guide_ys:
        with np.errstate(divide="ignore", invalid="ignore"):
            uni_rates[n] = np.where(sizes > 0, sums[n] / np.maximum(sizes, 1), 0.0)

    def key_for_feature(f):
        return ((int(f), int(rv[f])),)

    best_for_level1 = {
        n: np.full(m, base_rates[n]) for n in engine.guide_ys
    }
    beam = _select_level(
        engine, valid, sizes, sums, best_for_level1,
        key_fn=key_for_feature, results=results,
        keep_per_level=keep_per_level,
        parent_best=None, uni_rates=uni_rates, added_feature=feats,
    )

    # deeper levels: expand each beam rule with one (feature = row value)
    for level in range(2, cfg.max_length + 1):
        if not beam:
            break
        cand_sizes = []
        cand_sums = {n: [] for n in engine.guide_ys}
        cand_valid = []
        cand_parent = []
        cand_feature = []
        for p_idx, parent in enumerate(beam):
            counts, psums = engine.group_stats(parent.key)
            csize = counts[feats, rv].astype(np.float64)
            ok = csize >= engine.min_count
            used = np.fromiter((f for f, _ in parent.key), dtype=np.int64)
            ok[used] = False
            cand_sizes.append(csize)
            cand_valid.append(ok)
            for n in engine.guide_ys:
                cand_sums[n].append(psums[n][feats, rv])
            cand_parent.append(np.full(m, p_idx, dtype=np.int64))
            cand_feature.append(feats)
        sizes = np.concatenate(cand_sizes)
        valid = np.concatenate(cand_valid)
        sums = {n: np.concatenate(cand_sums[n]) for n in engine.guide_ys}
        parent_idx = np.concatenate(cand_parent)
        feature_idx = np.concatenate(cand_feature)

        best = {}
        for n in engine.guide_ys:
            parent_best = np.array([
                max(b.best_rates[n], _rate_of(b, n)) for b in beam
            ])
            best[n] = np.maximum(parent_best[parent_idx], uni_rates[n][feature_idx])

        def key_for_idx(i):
            f = int(feature_idx[i])
            return tuple(sorted(beam[parent_idx[i]].key + ((f, int(rv[f])),)))

        beam = _select_level(
            engine, valid, sizes, sums, best,
            key_fn=key_for_idx, results=results,
            keep_per_level=keep_per_level,
            parent_best=None, uni_rates=None, added_feature=None,
        )

    return results


def _rate_of(entry: _BeamEntry, outcome: str) -> float:
    return entry.sums[outcome] / entry.size if entry.size else 0.0


def _select_level(engine, valid, sizes, sums, best_rates, key_fn, results,
                  keep_per_level, parent_best, uni_rates, added_feature):
    """Per-guide top-k beam selection plus retention of scored candidates.

    Candidates are walked in stable score order per guide, deduplicating by
    canonical key; retained candidates are merged into ``results``.
    """
    cfg = engine.config
    k = cfg.beam_width
    keep = keep_per_level
    idx_valid = np.flatnonzero(valid)
    if idx_valid.size == 0:
        return []

    key_cache = {}

    def key_at(i):
        key = key_cache.get(i)
        if key is None:
            key = key_fn(i)
            key_cache[i] = key
        return key

    if keep is None:
        # keep everything that passed the size filter
        for i in idx_valid:
            key = key_at(int(i))
            if key not in results:
                results[key] = (
                    int(sizes[i]),
                    {n: float(sums[n][i]) for n in sums},
                )

    beam_keys = {}
    for spec in engine.guides:
        scores = engine.guide_scores(
            spec,
            np.maximum(sizes[idx_valid], 1),
            {n: sums[n][idx_valid] for n in sums},
            {n: best_rates[n][idx_valid] for n in best_rates},
        )
        order = np.argsort(-scores, kind="stable")
        taken = 0
        kept = 0
        seen = set()
        for j in order:
            i = int(idx_valid[j])
            key = key_at(i)
            if key in seen:
                continue
            seen.add(key)
            if taken < k and key not in beam_keys:
                beam_keys[key] = i
            taken += 1
            if keep is not None and kept < keep and key not in results:
                results[key] = (
                    int(sizes[i]),
                    {n: float(sums[n][i]) for n in sums},
                )
                kept += 1
            if taken >= k and (keep is None or kept >= keep):
                break

    entries = []
    for key in sorted(beam_keys):
        i = beam_keys[key]
        entries.append(_BeamEntry(
            key=key,
            size=int(sizes[i]),
            sums={n: float(sums[n][i]) for n in sums},
            best_rates={n: float(best_rates[n][i]) for n in best_rates},
        ))
    return entries


# -- public operations --------------------------------------------------------

def sample_source_rows(matrix: FeatureMatrix, config: DiscoveryConfig) -> np.ndarray:
    """Uniform sample without replacement from the discovery split (optionally
    restricted to the source mask), deterministic given the seed."""
    pool = matrix.split.discovery_rows
    if config.source_mask is not None:
        pool = pool[config.source_mask.values[pool]]
    if pool.size == 0:
        raise ConfigError("source mask does not intersect the discovery split")
    rng = np.random.default_rng(config.seed)
    n = min(config.n_samples, pool.size)
    return np.sort(rng.choice(pool, size=n, replace=False))


def beam_search_from_row(row: int, matrix: FeatureMatrix,
                         config: DiscoveryConfig) -> dict[Rule, dict]:
    """All candidate rules evaluated by the beam search seeded at ``row``
    (a discovery-split row id), with their discovery-split stats."""
    engine = _Engine(matrix, config)
    local = int(np.searchsorted(matrix.split.discovery_rows, row))
    if local >= engine.n_disc or matrix.split.discovery_rows[local] != row:
        raise ConfigError(f"row {row} is not in the discovery split")
    raw = _search_row(engine, local, keep_per_level=None)
    out = {}
    for key, (size, sums) in raw.items():
        out[_rule_from_key(matrix, key)] = {
            "size": size,
            "size_fraction": size / engine.n_disc,
            "sums": sums,
        }
    return out


def _rule_from_key(matrix: FeatureMatrix, key) -> Rule:
    preds = []
    for f, code in key:
        col = matrix.features[f]
        preds.append((col.name, frozenset({col.vocabulary[code]})))
    return Rule(tuple(preds))


def discover(matrix: FeatureMatrix, config: DiscoveryConfig,
             keep_per_level: int | None = None) -> list[SubgroupResult]:
    """Run the sampled beam search and return ranked SubgroupResults.

    Deterministic for a fixed (matrix, config) regardless of worker count:
    per-row searches are independent and merged in sampled-row order.
    """
    engine = _Engine(matrix, config)
    source_rows = sample_source_rows(matrix, config)
    local_rows = np.searchsorted(matrix.split.discovery_rows, source_rows)
    if keep_per_level is None:
        keep_per_level = max(config.beam_width, 200)

    def job(local):
        return _search_row(engine, int(local), keep_per_level)

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            per_row = list(pool.map(job, local_rows))
    else:
        per_row = [job(local) for local in local_rows]

    # deterministic merge in sampled-row order, deduplicating by rule key
    pool_stats = {}
    provenance = {}
    for row_id, found in zip(source_rows.tolist(), per_row):
        for key, stat in found.items():
            if key not in pool_stats:
                pool_stats[key] = stat
                provenance[key] = [row_id]
            else:
                provenance[key].append(row_id)

    if not pool_stats:
        return []

    selected = _preliminary_rank(engine, pool_stats)
    n_eval_pool = max(_EVAL_POOL_FLOOR, 4 * config.max_results)
    selected = selected[:n_eval_pool]

    results = _attach_and_rank(matrix, config, selected, pool_stats, provenance)
    return results[: config.max_results]


def _preliminary_rank(engine: _Engine, pool_stats) -> list:
    """Order pool keys by discovery-split scores (min-max normalized weighted
    sum), used only to pick which candidates get evaluation-split metrics."""
    cfg = engine.config
    keys = sorted(pool_stats)
    sizes = np.array([pool_stats[k][0] for k in keys], dtype=np.float64)
    sums = {
        n: np.array([pool_stats[k][1].get(n, 0.0) for k in keys])
        for n in engine.guide_ys
    }
    lengths = np.array([len(k) for k in keys], dtype=np.float64)
    fractions = sizes / engine.n_disc

    total = np.zeros(len(keys))
    for spec in cfg.specs:
        if not spec.enabled:
            continue
        if spec.kind == "simple-rule":
            raws = 1.0 / (1.0 + np.log(np.maximum(lengths, 1)))
        elif spec.kind == "group-size":
            ideal = spec.params.get("ideal", 0.10)
            spread = spec.params.get("spread", 0.10)
            raws = np.exp(-((fractions - ideal) ** 2) / (2 * spread * spread))
        elif spec.kind == "interaction-effect":
            raws = _pool_interaction(engine, keys, pool_stats, spec, sizes, sums)
        else:
            best = {n: np.full(len(keys), 1.0) for n in engine.guide_ys}
            raws = engine.guide_scores(spec, np.maximum(sizes, 1), sums, best)
        lo, hi = raws.min(), raws.max()
        norm = np.full(len(keys), 0.5) if hi == lo else (raws - lo) / (hi - lo)
        total += spec.weight * norm

    order = np.lexsort((np.arange(len(keys)), -sizes, -total))
    return [keys[i] for i in order]


def _pool_interaction(engine, keys, pool_stats, spec, sizes, sums):
    """Approximate interaction effect over the pool using subset stats known
    from the pool itself, the univariate tables, and the base rate."""
    from itertools import combinations

    n = spec.outcome
    base = max(engine.y_means[n], 1e-12)
    out = np.empty(len(keys))
    for i, key in enumerate(keys):
        rate = sums[n][i] / max(sizes[i], 1)
        best = base
        for size_c in range(1, len(key)):
            for sub in combinations(key, size_c):
                if len(sub) == 1:
                    f, code = sub[0]
                    c = engine.uni_counts[f, code]
                    if c:
                        best = max(best, engine.uni_sums[n][f, code] / c)
                else:
                    st = pool_stats.get(sub)
                    if st and st[0]:
                        best = max(best, st[1].get(n, 0.0) / st[0])
        out[i] = rate / best
    return out


def _attach_and_rank(matrix, config, keys, pool_stats, provenance):
    eval_rows = matrix.split.evaluation_rows
    disc_rows = matrix.split.discovery_rows

    # per-split code columns sliced once per feature, value tests cached per
    # (feature, code): the pool shares most predicates, so this avoids
    # materializing a full-dataset mask per candidate
    def member_of(key, val_cache, feat_cache, rows):
        member = None
        for f, code in key:
            if (f, code) not in val_cache:
                if f not in feat_cache:
                    feat_cache[f] = matrix.features[f].codes[rows]
                val_cache[(f, code)] = feat_cache[f] == code
            v = val_cache[(f, code)]
            member = v.copy() if member is None else member.__iand__(v)
        return member

    feat_eval, feat_disc = {}, {}
    val_eval, val_disc = {}, {}
    info_eval = _split_outcome_info(matrix, eval_rows)
    info_disc = _split_outcome_info(matrix, disc_rows)
    results = []
    for key in keys:
        size_d, sums_d = pool_stats[key]
        if all(n in sums_d for n in info_disc):
            # beam search already counted this key on the discovery split
            disc = _metrics_from_sums(size_d, sums_d, len(disc_rows),
                                      info_disc)
        else:
            member_d = member_of(key, val_disc, feat_disc, disc_rows)
            disc = _fast_metrics(member_d, len(disc_rows), info_disc)
        member_e = member_of(key, val_eval, feat_eval, eval_rows)
        rule = _rule_from_key(matrix, key)
        res = SubgroupResult(
            rule=rule,
            discovery=disc,
            evaluation=_fast_metrics(member_e, len(eval_rows), info_eval),
            provenance=tuple(provenance[key]),
        )
        for spec in config.specs:
            if spec.enabled:
                res.scores.raw[spec.key] = _raw_from_metrics(
                    res, spec, info_eval, matrix, eval_rows)
        results.append(res)
    return combine_and_rank(results, list(config.specs))


def _split_outcome_info(matrix, rows):
    """(kind, y as float64, sum, mean) per outcome, restricted to ``rows``."""
    info = {}
    for name, out in matrix.outcomes.items():
        yf = np.asarray(out.values[rows], dtype=np.float64)
        info[name] = (out.kind, yf, float(yf.sum()), float(yf.mean()))
    return info


def _fast_metrics(member, n_rows, info) -> GroupMetrics:
    """compute_group_metrics from a precomputed per-split membership array
    and cached outcome sums; subgroup sums use a dot product, which is exact
    for the 0/1 outcomes these integer-coded splits carry."""
    size = int(member.sum())
    per_outcome = {}
    for name, (kind, yf, total, mean) in info.items():
        pos = float(member @ yf) if size else 0.0
        if kind == "binary":
            per_outcome[name] = {
                "rate": pos / size if size else None,
                "coverage": pos / total if total else None,
            }
        else:
            per_outcome[name] = {
                "mean": pos / size if size else None,
                "mean_difference": abs(pos / size - mean) if size else None,
            }
    return GroupMetrics(size=size, size_fraction=size / n_rows,
                        outcomes=per_outcome)


def _metrics_from_sums(size, sums, n_rows, info) -> GroupMetrics:
    """GroupMetrics from beam-search outcome sums (exact integer counts for
    the binary outcomes the search accumulates)."""
    per_outcome = {}
    for name, (kind, _, total, mean) in info.items():
        pos = float(sums.get(name, 0.0)) if size else 0.0
        if kind == "binary":
            per_outcome[name] = {
                "rate": pos / size if size else None,
                "coverage": pos / total if total else None,
            }
        else:
            per_outcome[name] = {
                "mean": pos / size if size else None,
                "mean_difference": abs(pos / size - mean) if size else None,
            }
    return GroupMetrics(size=size, size_fraction=size / n_rows,
                        outcomes=per_outcome)


def _raw_from_metrics(res, spec, info_eval, matrix, rows):
    """Evaluation-split raw score read off already-computed metrics;
    mirrors ranking.raw_score without touching full-dataset masks."""
    if spec.kind == "simple-rule":
        return simple_rule_score(res.rule)
    metrics = res.evaluation
    if spec.kind == "group-size":
        ideal = spec.params.get("ideal", 0.10)
        spread = spec.params.get("spread", 0.10)
        p = metrics.size / len(rows)
        return math.exp(-((p - ideal) ** 2) / (2.0 * spread * spread))
    if spec.kind == "interaction-effect":
        # needs subset masks; fall back to the generic path
        return raw_score(res, spec, matrix, rows)
    kind, _, _, mean = info_eval[spec.outcome]
    stats = metrics.outcomes[spec.outcome]
    if metrics.size == 0:
        return None
    if kind == "binary":
        rate = stats["rate"]
        if spec.kind in ("outcome-rate-high", "selection-score"):
            return rate
        if spec.kind == "outcome-rate-low":
            return 1.0 - rate
        if spec.kind == "outcome-coverage":
            return stats["coverage"]
        if spec.kind == "mean-difference":
            return abs(rate - mean)
    else:
        if spec.kind == "mean-difference":
            return stats["mean_difference"]
        if spec.kind in ("outcome-rate-high", "selection-score"):
            return stats["mean"]
        if spec.kind == "outcome-rate-low":
            return 1.0 - stats["mean"]
    return raw_score(res, spec, matrix, rows)


def attach_raw_scores(results, specs, matrix: FeatureMatrix, rows=None):
    """Compute and cache evaluation-split raw scores on each result."""
    if rows is None:
        rows = matrix.split.evaluation_rows
    for res in results:
        for spec in specs:
            if spec.enabled and spec.key not in res.scores.raw:
                res.scores.raw[spec.key] = raw_score(res, spec, matrix, rows)


def evaluate_rule(rule: Rule, matrix: FeatureMatrix,
                  specs=()) -> SubgroupResult:
    """Full metrics (both splits) for one rule, as used by custom rules and
    rule edits."""
    mask = evaluate_mask(rule, matrix)
    res = SubgroupResult(
        rule=rule,
        discovery=compute_group_metrics(mask, matrix, matrix.split.discovery_rows),
        evaluation=compute_group_metrics(mask, matrix, matrix.split.evaluation_rows),
    )
    res._mask = mask
    if specs:
        attach_raw_scores([res], specs, matrix)
    return res


SELECTION_OUTCOME = "__selection__"


def targeted_discover(matrix: FeatureMatrix, config: DiscoveryConfig,
                      selection: Mask) -> list[SubgroupResult]:
    """Discovery targeted at a user-selected row set: adds a selection-score
    ranking function (outcome = selection membership) and samples source rows
    from the selection."""
    if not isinstance(selection, Mask):
        selection = Mask.from_bool(np.asarray(selection, dtype=bool), matrix)
    if selection.population == 0:
        raise ConfigError("selection is empty")
    outcomes = dict(matrix.outcomes)
    outcomes[SELECTION_OUTCOME] = OutcomeVector(
        name=SELECTION_OUTCOME,
        values=selection.values.astype(np.float64),
        kind="binary",
    )
    target = FeatureMatrix(
        features=matrix.features,
        outcomes=outcomes,
        split=matrix.split,
        sparse_store=matrix.sparse_store,
    )
    specs = tuple(config.specs) + (
        RankingSpec(kind="selection-score", outcome=SELECTION_OUTCOME, weight=2),
    )
    # lasso selections over a map cover evaluation rows only; fall back to
    # unrestricted sampling then, the selection outcome still drives ranking
    disc_rows = matrix.split.discovery_rows
    if selection.values[disc_rows].any():
        sel_mask = Mask.from_bool(selection.values, target)
    else:
        sel_mask = None
    cfg = replace(config, specs=specs, source_mask=sel_mask)
    return discover(target, cfg)


def results_to_json(results, config: DiscoveryConfig) -> dict:
    return {
        "config": config.to_json_dict(),
        "results": [r.to_json_dict() for r in results],
    }
