"""Deterministic synthetic datasets for tests, benchmarks, and demos.

Each generator is seeded and reproducible. The two survey-style fixtures
embed a known high-rate subgroup with exact published-style statistics so
end-to-end tests can assert sizes and rates against fixed targets.
"""

from __future__ import annotations

import json

import numpy as np
import pandas as pd

from .dataset import (
    FeatureMatrix,
    OutcomeVector,
    bin_continuous,
    encode_categorical,
    make_split,
    matrix_from_codes,
    matrix_from_sparse_binary,
)

AIRLINE_ROWS = 129_880
AIRLINE_POSITIVES = 73_512        # 56.600% base rate
AIRLINE_SUBGROUP = 7_403          # 5.700% of rows, rate 1.0

CENSUS_ROWS = 48_842
CENSUS_POSITIVES = 5_617          # 11.500% base rate
CENSUS_SUBGROUP = 781             # 1.599% of rows
CENSUS_SUBGROUP_POSITIVES = 247   # 31.626% rate inside the subgroup

_RATING_FEATURES = (
    "Inflight wifi service",
    "Departure/Arrival time convenient",
    "Ease of online booking",
    "Gate location",
    "Food and drink",
    "Online boarding",
    "Seat comfort",
    "Inflight entertainment",
    "On-board service",
    "Leg room service",
    "Baggage handling",
    "Checkin service",
    "Inflight service",
    "Cleanliness",
)
_RATING_LABELS = ("not satisfied", "neutral", "satisfied")
_RATING_EDGES = (2.5, 3.5)


def _assemble(features, outcomes, seed, stratify=None):
    n = len(features[0])
    outs = {
        name: o if isinstance(o, OutcomeVector) else OutcomeVector(
            name=name, values=np.asarray(o, dtype=np.float64),
            kind="binary" if set(np.unique(o)) <= {0, 1} else "continuous",
        )
        for name, o in outcomes.items()
    }
    if stratify is None:
        stratify = next((k for k, o in outs.items() if o.kind == "binary"), None)
    split = make_split(n, seed=seed, fraction=0.5,
                       stratify_on=outs[stratify].values if stratify else None,
                       stratify_name=stratify)
    return FeatureMatrix(features=tuple(features), outcomes=outs, split=split)


def airline_table(seed: int = 7) -> tuple[pd.DataFrame, dict]:
    """Passenger-survey style table: 129,880 rows, 22 feature columns, one
    binary outcome. Exactly 7,403 rows satisfy

        wifi in {1,2} and online booking in {1,2} and gate location = 3

    and every one of them is dissatisfied; no other row matches, so after
    3-level rating binning the planted rule has rate 1.0 and size 5.7%.
    """
    rng = np.random.default_rng(seed)
    n = AIRLINE_ROWS
    n_sub = AIRLINE_SUBGROUP

    ratings = {name: rng.integers(1, 6, size=n) for name in _RATING_FEATURES}

    wifi = ratings["Inflight wifi service"]
    booking = ratings["Ease of online booking"]
    gate = ratings["Gate location"]
    # plant the subgroup in a fixed block; rows get shuffled at the end
    wifi[:n_sub] = rng.integers(1, 3, size=n_sub)
    booking[:n_sub] = rng.integers(1, 3, size=n_sub)
    gate[:n_sub] = 3
    # resample any other row that collides with the planted combination
    while True:
        bad = np.flatnonzero((wifi <= 2) & (booking <= 2) & (gate == 3))
        bad = bad[bad >= n_sub]
        if bad.size == 0:
            break
        wifi[bad] = rng.integers(1, 6, size=bad.size)
        booking[bad] = rng.integers(1, 6, size=bad.size)
        gate[bad] = rng.integers(1, 6, size=bad.size)

    outcome = np.zeros(n, dtype=np.int64)
    outcome[:n_sub] = 1
    rest = rng.permutation(np.arange(n_sub, n))
    outcome[rest[: AIRLINE_POSITIVES - n_sub]] = 1

    delays = rng.geometric(1 / 12.0, size=n) - 1
    frame = pd.DataFrame({
        "Gender": rng.choice(["Female", "Male"], size=n),
        "Customer Type": rng.choice(
            ["Loyal Customer", "disloyal Customer"], size=n, p=[0.82, 0.18]),
        "Age": rng.integers(7, 86, size=n),
        "Type of Travel": rng.choice(
            ["Business travel", "Personal Travel"], size=n, p=[0.69, 0.31]),
        "Class": rng.choice(["Business", "Eco", "Eco Plus"], size=n,
                            p=[0.48, 0.45, 0.07]),
        "Flight Distance": rng.integers(31, 4984, size=n),
        **ratings,
        "Departure Delay in Minutes": delays,
        "Arrival Delay in Minutes": np.maximum(
            0, delays + rng.integers(-5, 6, size=n)),
        "dissatisfied": outcome,
    })
    frame = frame.iloc[rng.permutation(n)].reset_index(drop=True)

    schema = {
        "columns": [
            {"name": "Gender", "role": "feature", "type": "categorical"},
            {"name": "Customer Type", "role": "feature", "type": "categorical"},
            {"name": "Age", "role": "feature", "type": "continuous",
             "binning": {"strategy": "quantile", "bins": 5}},
            {"name": "Type of Travel", "role": "feature", "type": "categorical"},
            {"name": "Class", "role": "feature", "type": "categorical"},
            {"name": "Flight Distance", "role": "feature", "type": "continuous",
             "binning": {"strategy": "quantile", "bins": 5}},
            *[{"name": name, "role": "feature", "type": "continuous",
               "binning": {"strategy": "edges", "edges": list(_RATING_EDGES),
                           "labels": list(_RATING_LABELS)}}
              for name in _RATING_FEATURES],
            {"name": "Departure Delay in Minutes", "role": "feature",
             "type": "continuous",
             "binning": {"strategy": "quantile", "bins": 5}},
            {"name": "Arrival Delay in Minutes", "role": "feature",
             "type": "continuous",
             "binning": {"strategy": "quantile", "bins": 5}},
            {"name": "dissatisfied", "role": "outcome", "type": "binary"},
        ],
        "split": {"seed": seed, "fraction": 0.5, "stratify": "dissatisfied"},
    }
    return frame, schema


def airline_matrix(seed: int = 7) -> FeatureMatrix:
    """The airline fixture assembled in memory, skipping the CSV round trip."""
    frame, _ = airline_table(seed)
    features = []
    for name in frame.columns:
        if name == "dissatisfied":
            continue
        values = frame[name].to_numpy()
        if name in _RATING_FEATURES:
            features.append(bin_continuous(
                name, values.astype(np.float64), strategy="edges",
                edges=list(_RATING_EDGES), labels=list(_RATING_LABELS)))
        elif values.dtype.kind in "if":
            features.append(bin_continuous(
                name, values.astype(np.float64), strategy="quantile", k=5))
        else:
            features.append(encode_categorical(name, values))
    outcome = frame["dissatisfied"].to_numpy()
    return _assemble(features, {"dissatisfied": outcome}, seed=seed)


def write_airline_fixture(directory, seed: int = 7):
    """Write the airline fixture as fixture.csv + schema.json in a directory
    and return both paths."""
    import pathlib

    directory = pathlib.Path(directory)
    frame, schema = airline_table(seed)
    csv_path = directory / "fixture.csv"
    schema_path = directory / "schema.json"
    frame.to_csv(csv_path, index=False)
    schema_path.write_text(json.dumps(schema, indent=2))
    return csv_path, schema_path


def census_table(seed: int = 3) -> tuple[pd.DataFrame, dict]:
    """Census-style table: 48,842 rows, 12 feature columns, binary outcome
    "error" with base rate 11.5%. The planted subgroup

        relationship = Husband & education = Assoc-voc & capital-gain < 1

    covers 781 rows (1.6%) with outcome rate 31.6%.
    """
    rng = np.random.default_rng(seed)
    n = CENSUS_ROWS
    n_sub = CENSUS_SUBGROUP

    education_values = [
        "HS-grad", "Some-college", "Bachelors", "Masters", "Assoc-voc",
        "Assoc-acdm", "11th", "10th", "7th-8th", "Prof-school", "9th",
        "12th", "Doctorate", "5th-6th", "1st-4th", "Preschool",
    ]
    relationship_values = [
        "Husband", "Not-in-family", "Own-child", "Unmarried", "Wife",
        "Other-relative",
    ]
    education = rng.choice(education_values, size=n)
    relationship = rng.choice(relationship_values, size=n,
                              p=[0.40, 0.26, 0.16, 0.10, 0.05, 0.03])
    capital_gain = np.where(rng.random(n) < 0.92, 0,
                            rng.integers(1, 99_999, size=n))

    education[:n_sub] = "Assoc-voc"
    relationship[:n_sub] = "Husband"
    capital_gain[:n_sub] = 0
    while True:
        bad = np.flatnonzero((education == "Assoc-voc")
                             & (relationship == "Husband")
                             & (capital_gain < 1))
        bad = bad[bad >= n_sub]
        if bad.size == 0:
            break
        education[bad] = rng.choice(education_values, size=bad.size)

    outcome = np.zeros(n, dtype=np.int64)
    sub_pos = rng.permutation(np.arange(n_sub))[:CENSUS_SUBGROUP_POSITIVES]
    outcome[sub_pos] = 1
    rest = rng.permutation(np.arange(n_sub, n))
    outcome[rest[: CENSUS_POSITIVES - CENSUS_SUBGROUP_POSITIVES]] = 1

    frame = pd.DataFrame({
        "age": rng.integers(17, 91, size=n),
        "workclass": rng.choice(
            ["Private", "Self-emp-not-inc", "Local-gov", "State-gov",
             "Self-emp-inc", "Federal-gov", "Without-pay", "Never-worked"],
            size=n, p=[0.70, 0.08, 0.07, 0.05, 0.04, 0.03, 0.02, 0.01]),
        "education": education,
        "marital-status": rng.choice(
            ["Married-civ-spouse", "Never-married", "Divorced", "Separated",
             "Widowed", "Married-spouse-absent", "Married-AF-spouse"],
            size=n, p=[0.46, 0.33, 0.14, 0.03, 0.025, 0.013, 0.002]),
        "occupation": rng.choice(
            ["Prof-specialty", "Craft-repair", "Exec-managerial",
             "Adm-clerical", "Sales", "Other-service", "Machine-op-inspct",
             "Transport-moving", "Handlers-cleaners", "Farming-fishing",
             "Tech-support", "Protective-serv", "Priv-house-serv",
             "Armed-Forces"],
            size=n, p=[0.13, 0.13, 0.13, 0.12, 0.11, 0.10, 0.06, 0.05,
                       0.04, 0.04, 0.03, 0.03, 0.029, 0.001]),
        "relationship": relationship,
        "race": rng.choice(
            ["White", "Black", "Asian-Pac-Islander", "Amer-Indian-Eskimo",
             "Other"], size=n, p=[0.85, 0.10, 0.03, 0.01, 0.01]),
        "sex": rng.choice(["Male", "Female"], size=n, p=[0.67, 0.33]),
        "capital-gain": capital_gain,
        "capital-loss": np.where(rng.random(n) < 0.95, 0,
                                 rng.integers(1, 4357, size=n)),
        "hours-per-week": rng.integers(1, 100, size=n),
        "native-country": rng.choice(
            ["United-States", "Mexico", "Philippines", "Germany", "Canada",
             "Other"], size=n, p=[0.90, 0.02, 0.01, 0.01, 0.01, 0.05]),
        "error": outcome,
    })
    frame = frame.iloc[rng.permutation(n)].reset_index(drop=True)

    schema = {
        "columns": [
            {"name": "age", "role": "feature", "type": "continuous",
             "binning": {"strategy": "quantile", "bins": 5}},
            {"name": "workclass", "role": "feature", "type": "categorical"},
            {"name": "education", "role": "feature", "type": "categorical"},
            {"name": "marital-status", "role": "feature", "type": "categorical"},
            {"name": "occupation", "role": "feature", "type": "categorical"},
            {"name": "relationship", "role": "feature", "type": "categorical"},
            {"name": "race", "role": "feature", "type": "categorical"},
            {"name": "sex", "role": "feature", "type": "categorical"},
            {"name": "capital-gain", "role": "feature", "type": "continuous",
             "binning": {"strategy": "edges", "edges": [1],
                         "labels": ["<1", ">=1"]}},
            {"name": "capital-loss", "role": "feature", "type": "continuous",
             "binning": {"strategy": "edges", "edges": [1],
                         "labels": ["<1", ">=1"]}},
            {"name": "hours-per-week", "role": "feature", "type": "continuous",
             "binning": {"strategy": "quantile", "bins": 5}},
            {"name": "native-country", "role": "feature", "type": "categorical"},
            {"name": "error", "role": "outcome", "type": "binary"},
        ],
        "split": {"seed": seed, "fraction": 0.5, "stratify": "error"},
    }
    return frame, schema


def census_matrix(seed: int = 3) -> FeatureMatrix:
    """The census fixture assembled in memory."""
    frame, schema = census_table(seed)
    by_name = {c["name"]: c for c in schema["columns"]}
    features = []
    for name in frame.columns:
        spec = by_name[name]
        if spec["role"] != "feature":
            continue
        values = frame[name].to_numpy()
        if spec["type"] == "continuous":
            b = spec["binning"]
            if b["strategy"] == "edges":
                features.append(bin_continuous(
                    name, values.astype(np.float64), strategy="edges",
                    edges=b["edges"], labels=b.get("labels")))
            else:
                features.append(bin_continuous(
                    name, values.astype(np.float64),
                    strategy=b["strategy"], k=b["bins"]))
        else:
            features.append(encode_categorical(name, values))
    return _assemble(features, {"error": frame["error"].to_numpy()}, seed=seed)


def planted_matrix(n_rows: int = 20_000, n_features: int = 30,
                   n_planted: int = 5, seed: int = 0) -> FeatureMatrix:
    """Binary matrix with ``n_planted`` disjoint-feature 3-way conjunctions
    whose matching rows have a strongly elevated outcome rate (0.9 vs 0.05
    background). Rule i uses features 3i, 3i+1, 3i+2, all at value 1."""
    if 3 * n_planted > n_features:
        raise ValueError("need at least 3 features per planted rule")
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 2, size=(n_rows, n_features), dtype=np.int64)
    hit = np.zeros(n_rows, dtype=bool)
    for i in range(n_planted):
        hit |= codes[:, 3 * i: 3 * i + 3].all(axis=1)
    outcome = np.where(rng.random(n_rows) < np.where(hit, 0.9, 0.05), 1, 0)
    return matrix_from_codes(codes, outcomes={"target": outcome}, seed=seed)


def planted_rules(n_planted: int = 5):
    """Canonical rule texts of the conjunctions planted by planted_matrix."""
    from .rules import Rule

    return [
        Rule(tuple((f"f{3 * i + j}", frozenset({"1"})) for j in range(3)))
        for i in range(n_planted)
    ]


def random_binary_matrix(n_rows: int, n_features: int,
                         seed: int = 0) -> FeatureMatrix:
    """Dense random binary matrix with a weakly structured binary outcome,
    sized for throughput benchmarks."""
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 2, size=(n_rows, n_features), dtype=np.int64)
    p = 0.2 + 0.5 * (codes[:, 0] & codes[:, 1 % n_features])
    outcome = (rng.random(n_rows) < p).astype(np.int64)
    return matrix_from_codes(codes, outcomes={"target": outcome}, seed=seed)


def sparse_bow_matrix(n_rows: int = 75_000, n_features: int = 5_000,
                      seed: int = 0) -> FeatureMatrix:
    """Sparse bag-of-words style binary matrix with a power-law feature
    frequency profile and a rare binary outcome concentrated on rows that
    contain the two most frequent tokens together."""
    import scipy.sparse as sp

    rng = np.random.default_rng(seed)
    freq = np.minimum(0.3, 0.2 * (np.arange(1, n_features + 1) ** -0.4))
    cols, rows = [], []
    for j in range(n_features):
        count = rng.binomial(n_rows, freq[j])
        if count == 0:
            continue
        rows.append(rng.choice(n_rows, size=count, replace=False))
        cols.append(np.full(count, j, dtype=np.int64))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    csr = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.uint8), (rows, cols)),
        shape=(n_rows, n_features))
    csr.data[:] = 1
    both = np.asarray((csr[:, 0].toarray().ravel() > 0)
                      & (csr[:, 1].toarray().ravel() > 0))
    outcome = (rng.random(n_rows) < np.where(both, 0.10, 0.002)).astype(np.int64)
    return matrix_from_sparse_binary(csr, outcomes={"flagged": outcome},
                                     seed=seed)
