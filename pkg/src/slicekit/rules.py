"""Conjunctive rules over coded feature columns.

A rule is a conjunction of (feature, allowed-value-set) predicates. Rules
are canonical (feature-name sorted, values sorted) and immutable, so they
can serve as dictionary keys for deduplication. Rule text is the wire
format used by the CLI, the HTTP API, and saved favorites::

    "marital-status" = "Married-civ-spouse" & "education" = "Some-college"

Multiple allowed values for one feature are separated by ``|``.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, field

import numpy as np

from .dataset import FeatureMatrix
from .errors import RuleSyntaxError, RuleValueError


@dataclass(frozen=True)
class Rule:
    """Canonical conjunction of predicates. ``predicates`` maps feature name
    to a frozenset of allowed value labels.

    ``dormant`` holds predicates toggled off via :func:`edit_rule`; they do
    not affect matching, equality, or the wire format, but let a toggle be
    undone without losing the prior value set.
    """

    predicates: tuple[tuple[str, frozenset[str]], ...]
    dormant: tuple[tuple[str, frozenset[str]], ...] = field(
        default=(), compare=False
    )

    def __post_init__(self):
        preds = tuple(sorted(
            (name, frozenset(values)) for name, values in self.predicates
        ))
        names = [name for name, _ in preds]
        if len(set(names)) != len(names):
            raise RuleValueError("duplicate feature in rule")
        for name, values in preds:
            if not values:
                raise RuleValueError(f"empty value set for feature {name!r}")
        object.__setattr__(self, "predicates", preds)
        object.__setattr__(self, "dormant", tuple(sorted(
            (n, frozenset(v)) for n, v in self.dormant
        )))

    def __len__(self):
        return len(self.predicates)

    def __str__(self):
        return format_rule(self)

    @property
    def feature_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.predicates)

    def values_for(self, name: str) -> frozenset[str] | None:
        for n, v in self.predicates:
            if n == name:
                return v
        return None

    def to_json_list(self) -> list[dict]:
        return [
            {"feature": name, "values": sorted(values)}
            for name, values in self.predicates
        ]

    @classmethod
    def from_json_list(cls, data, dormant=()) -> "Rule":
        return cls(
            tuple((d["feature"], frozenset(str(v) for v in d["values"]))
                  for d in data),
            dormant=tuple(
                (d["feature"], frozenset(str(v) for v in d["values"]))
                for d in dormant),
        )

    @classmethod
    def single(cls, feature: str, *values: str) -> "Rule":
        return cls(((feature, frozenset(values)),))


EMPTY_RULE = Rule(())


def format_rule(rule: Rule) -> str:
    """Canonical text form; the empty rule formats to the empty string."""
    parts = []
    for name, values in rule.predicates:
        vals = "|".join(f'"{v}"' for v in sorted(values))
        parts.append(f'"{name}" = {vals}')
    return " & ".join(parts)


_STRING = re.compile(r'"((?:[^"\\]|\\.)*)"')


def _tokens(text):
    pos = 0
    out = []
    while pos < len(text):
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if ch == '"':
            m = _STRING.match(text, pos)
            if m is None:
                raise RuleSyntaxError("unterminated quoted string", pos)
            out.append(("str", m.group(1).replace('\\"', '"'), pos))
            pos = m.end()
        elif ch in "=&|":
            out.append((ch, ch, pos))
            pos += 1
        else:
            raise RuleSyntaxError(f"unexpected character {ch!r}", pos)
    return out


def parse_rule(text: str, matrix: FeatureMatrix) -> Rule:
    """Parse rule text against a matrix's features and vocabularies.

    Raises :class:`RuleSyntaxError` with a character position on malformed
    input, and :class:`RuleValueError` for unknown features or values (with
    near-match suggestions).
    """
    toks = _tokens(text)
    if not toks:
        return EMPTY_RULE
    preds = []
    i = 0
    end = len(text)
    while True:
        if i >= len(toks) or toks[i][0] != "str":
            raise RuleSyntaxError("expected quoted feature name",
                                  toks[i][2] if i < len(toks) else end)
        fname, fpos = toks[i][1], toks[i][2]
        i += 1
        if i >= len(toks) or toks[i][0] != "=":
            raise RuleSyntaxError("expected '=' after feature name",
                                  toks[i][2] if i < len(toks) else end)
        i += 1
        values = []
        while True:
            if i >= len(toks) or toks[i][0] != "str":
                raise RuleSyntaxError("expected quoted value",
                                      toks[i][2] if i < len(toks) else end)
            values.append(toks[i][1])
            i += 1
            if i < len(toks) and toks[i][0] == "|":
                i += 1
                continue
            break
        _check_predicate(fname, values, matrix, fpos)
        if any(name == fname for name, _ in preds):
            raise RuleValueError(f"duplicate feature {fname!r} in rule")
        preds.append((fname, frozenset(values)))
        if i >= len(toks):
            break
        if toks[i][0] != "&":
            raise RuleSyntaxError("expected '&' between predicates", toks[i][2])
        i += 1
    return Rule(tuple(preds))


def _check_predicate(fname, values, matrix, pos):
    try:
        col = matrix.feature(fname)
    except KeyError:
        near = difflib.get_close_matches(fname, matrix.feature_names, n=3)
        hint = f"; did you mean {near}?" if near else ""
        raise RuleValueError(f"unknown feature {fname!r}{hint}") from None
    vocab = set(col.vocabulary)
    for v in values:
        if v not in vocab:
            near = difflib.get_close_matches(v, col.vocabulary, n=3)
            hint = f"; did you mean {near}?" if near else ""
            raise RuleValueError(
                f"unknown value {v!r} for feature {fname!r}{hint}"
            )


# -- masks -------------------------------------------------------------------

@dataclass(frozen=True)
class Mask:
    """Boolean membership vector over all rows, with cached per-split counts."""

    values: np.ndarray
    discovery_count: int
    evaluation_count: int

    @classmethod
    def from_bool(cls, values: np.ndarray, matrix: FeatureMatrix) -> "Mask":
        values = np.asarray(values, dtype=bool)
        return cls(
            values=values,
            discovery_count=int(values[matrix.split.discovery_rows].sum()),
            evaluation_count=int(values[matrix.split.evaluation_rows].sum()),
        )

    @property
    def population(self) -> int:
        return int(self.values.sum())

    def __len__(self):
        return int(self.values.shape[0])


def evaluate_mask(rule: Rule, matrix: FeatureMatrix) -> Mask:
    """Row i is set iff every predicate's value for row i is allowed.

    The empty rule yields the all-ones mask.
    """
    out = np.ones(matrix.n_rows, dtype=bool)
    for name, values in rule.predicates:
        try:
            col = matrix.feature(name)
        except KeyError:
            raise RuleValueError(f"unknown feature {name!r}") from None
        codes = [col.code_of(v) for v in values]
        if len(codes) == 1:
            out &= col.codes == codes[0]
        else:
            out &= np.isin(col.codes, codes)
    return Mask.from_bool(out, matrix)


def rule_subsets(rule: Rule) -> list[Rule]:
    """All 2^k - 1 proper-subset rules (including the empty rule), in
    canonical order (by size, then text)."""
    from itertools import combinations

    preds = rule.predicates
    out = []
    for size in range(len(preds)):
        for combo in combinations(preds, size):
            out.append(Rule(combo))
    return out


# -- edits -------------------------------------------------------------------

@dataclass(frozen=True)
class ToggleFeature:
    feature: str


@dataclass(frozen=True)
class SetValues:
    feature: str
    values: frozenset[str]


def edit_rule(rule: Rule, edit, matrix: FeatureMatrix) -> Rule:
    """Apply a toggle or value-substitution edit, returning a new Rule.

    Toggling an active feature moves its predicate to the dormant list;
    toggling a dormant feature restores the remembered value set.
    """
    if isinstance(edit, ToggleFeature):
        name = edit.feature
        active = dict(rule.predicates)
        dormant = dict(rule.dormant)
        if name in active:
            dormant[name] = active.pop(name)
        elif name in dormant:
            active[name] = dormant.pop(name)
        else:
            raise RuleValueError(f"feature {name!r} not present in rule")
        return Rule(tuple(active.items()), dormant=tuple(dormant.items()))
    if isinstance(edit, SetValues):
        name = edit.feature
        values = frozenset(edit.values)
        if not values:
            raise RuleValueError("value substitution needs a nonempty set")
        _check_predicate(name, sorted(values), matrix, 0)
        active = dict(rule.predicates)
        active[name] = values
        return Rule(tuple(active.items()), dormant=rule.dormant)
    raise TypeError(f"unknown edit {edit!r}")
