"""Ranking functions and weighted score combination.

Each ranking function maps a subgroup to a non-negative raw score on a
given row split. :func:`combine_and_rank` min-max normalizes raw scores
across the candidate pool and orders candidates by the weighted sum of
normalized scores, so heterogeneous scales (rates, ratios, mean
differences) combine meaningfully.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dataset import FeatureMatrix
from .errors import ConfigError, UndefinedScoreError
from .rules import Mask, Rule, evaluate_mask, rule_subsets

OUTCOME_KINDS = {
    "outcome-rate-high",
    "outcome-rate-low",
    "outcome-coverage",
    "interaction-effect",
    "mean-difference",
    "selection-score",
}
STRUCTURE_KINDS = {"group-size", "simple-rule"}
ALL_KINDS = OUTCOME_KINDS | STRUCTURE_KINDS


@dataclass(frozen=True)
class RankingSpec:
    """A named scoring function instance. ``weight`` of 0 disables the spec;
    weights run in integer increments 0..4."""

    kind: str
    outcome: str | None = None
    weight: int = 1
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.kind not in ALL_KINDS:
            raise ConfigError(f"unknown ranking kind {self.kind!r}")
        if not (0 <= int(self.weight) <= 4):
            raise ConfigError("ranking weight must be an integer in 0..4")
        if self.kind in OUTCOME_KINDS and self.kind != "selection-score" and not self.outcome:
            raise ConfigError(f"ranking kind {self.kind!r} needs an outcome")
        if self.kind == "group-size":
            ideal = self.params.get("ideal", 0.10)
            spread = self.params.get("spread", 0.10)
            if not (0 < ideal <= 1) or spread <= 0:
                raise ConfigError("group-size needs ideal in (0,1] and spread > 0")

    @property
    def enabled(self) -> bool:
        return self.weight > 0

    @property
    def key(self) -> str:
        parts = [self.kind]
        if self.outcome:
            parts.append(self.outcome)
        if self.kind == "group-size":
            parts.append(f"ideal={self.params.get('ideal', 0.10):g}")
            parts.append(f"spread={self.params.get('spread', 0.10):g}")
        return ":".join(parts)

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "outcome": self.outcome,
            "weight": self.weight,
            "params": dict(self.params),
        }

    @classmethod
    def from_json_dict(cls, data) -> "RankingSpec":
        return cls(
            kind=data["kind"],
            outcome=data.get("outcome"),
            weight=int(data.get("weight", 1)),
            params=dict(data.get("params") or {}),
        )


@dataclass
class ScoreVector:
    """Raw and pool-normalized scores per spec key, plus the weighted total.

    ``raw`` values of ``None`` mean the score was undefined for this
    subgroup (e.g. empty within the split); they normalize to 0.
    """

    raw: dict = field(default_factory=dict)
    normalized: dict = field(default_factory=dict)
    total: float = 0.0


def _subgroup_values(mask, y, rows):
    values = mask.values if isinstance(mask, Mask) else np.asarray(mask, dtype=bool)
    sub = values[rows]
    return np.asarray(y, dtype=np.float64)[rows], sub


def outcome_rate(mask, y, rows) -> float:
    """Mean of a binary outcome inside the subgroup, restricted to ``rows``."""
    y_rows, sub = _subgroup_values(mask, y, rows)
    size = int(sub.sum())
    if size == 0:
        raise UndefinedScoreError("outcome rate undefined on empty subgroup")
    return float(y_rows[sub].sum() / size)


def outcome_rate_low(mask, y, rows) -> float:
    """1 - outcome rate: high for subgroups with below-average rates."""
    return 1.0 - outcome_rate(mask, y, rows)


def outcome_coverage(mask, y, rows) -> float:
    """Fraction of all positive-outcome rows captured by the subgroup."""
    y_rows, sub = _subgroup_values(mask, y, rows)
    total = float(y_rows.sum())
    if total == 0:
        raise UndefinedScoreError("coverage undefined: split has no positives")
    return float(y_rows[sub].sum() / total)


def mean_difference(mask, y, rows) -> float:
    """|mean(y) inside the subgroup - mean(y) over the split|."""
    y_rows, sub = _subgroup_values(mask, y, rows)
    size = int(sub.sum())
    if size == 0:
        raise UndefinedScoreError("mean difference undefined on empty subgroup")
    return float(abs(y_rows[sub].sum() / size - y_rows.mean()))


def group_size_score(mask, rows, ideal: float = 0.10, spread: float = 0.10) -> float:
    """Gaussian preference over the subgroup's size fraction within the
    split; equals 1 exactly when the fraction hits ``ideal``."""
    if spread <= 0:
        raise ConfigError("group-size spread must be positive")
    values = mask.values if isinstance(mask, Mask) else np.asarray(mask, dtype=bool)
    p = float(values[rows].sum() / len(rows))
    return math.exp(-((p - ideal) ** 2) / (2.0 * spread * spread))


def simple_rule_score(rule: Rule) -> float:
    """1 / (1 + ln k) for a k-predicate rule; the empty rule scores 1."""
    k = len(rule)
    if k == 0:
        return 1.0
    return 1.0 / (1.0 + math.log(k))


def interaction_effect(rule: Rule, y, matrix: FeatureMatrix, rows) -> float:
    """Outcome rate of the rule divided by the maximum rate over all
    proper-subset rules (including the empty rule / whole split).

    A value above 1 means every predicate contributes to the elevated rate.
    """
    if len(rule) == 0:
        raise UndefinedScoreError("interaction effect needs >= 1 predicate")
    rate = outcome_rate(evaluate_mask(rule, matrix), y, rows)
    best = 0.0
    for sub in rule_subsets(rule):
        best = max(best, outcome_rate(evaluate_mask(sub, matrix), y, rows))
    if best == 0:
        raise UndefinedScoreError("interaction effect undefined: zero subset rates")
    return rate / best


def raw_score(result, spec: RankingSpec, matrix: FeatureMatrix, rows) -> float | None:
    """Raw score of one SubgroupResult-like candidate; ``None`` when the
    score is undefined for this subgroup on the given rows."""
    try:
        if spec.kind == "simple-rule":
            return simple_rule_score(result.rule)
        mask = result.mask(matrix)
        if spec.kind == "group-size":
            return group_size_score(
                mask, rows,
                ideal=spec.params.get("ideal", 0.10),
                spread=spec.params.get("spread", 0.10),
            )
        y = matrix.outcomes[spec.outcome].values
        if spec.kind in ("outcome-rate-high", "selection-score"):
            return outcome_rate(mask, y, rows)
        if spec.kind == "outcome-rate-low":
            return outcome_rate_low(mask, y, rows)
        if spec.kind == "outcome-coverage":
            return outcome_coverage(mask, y, rows)
        if spec.kind == "mean-difference":
            return mean_difference(mask, y, rows)
        if spec.kind == "interaction-effect":
            return interaction_effect(result.rule, y, matrix, rows)
    except UndefinedScoreError:
        return None
    raise ConfigError(f"unknown ranking kind {spec.kind!r}")


def combine_and_rank(candidates: list, specs: list[RankingSpec]) -> list:
    """Order candidates by the weighted sum of pool-normalized raw scores.

    Raw scores must already be attached (``candidate.scores.raw[spec.key]``);
    this never touches masks, so re-ranking a cached pool is instant. Ties
    break toward larger evaluation-split size, then canonical rule text.
    """
    enabled = [s for s in specs if s.enabled]
    if not enabled:
        raise ConfigError("no enabled ranking specs")
    for spec in enabled:
        raws = [c.scores.raw.get(spec.key) for c in candidates]
        defined = [v for v in raws if v is not None]
        lo = min(defined) if defined else 0.0
        hi = max(defined) if defined else 0.0
        span = hi - lo
        for c, v in zip(candidates, raws):
            if v is None:
                norm = 0.0
            elif span == 0:
                norm = 0.5
            else:
                norm = (v - lo) / span
            c.scores.normalized[spec.key] = norm
    for c in candidates:
        c.scores.total = float(sum(
            s.weight * c.scores.normalized[s.key] for s in enabled
        ))
    return sorted(
        candidates,
        key=lambda c: (-c.scores.total, -c.evaluation_size, str(c.rule)),
    )
