"""Tabular ingestion: discrete feature coding, binning, outcomes, and the
seeded discovery/evaluation split.

All downstream search and scoring operates on a :class:`FeatureMatrix`, an
immutable bundle of integer-coded feature columns, named outcome vectors,
and a reproducible two-way row split.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import ConfigError, IngestionError, SchemaError

MISSING_LABEL = "<missing>"


@dataclass(frozen=True)
class FeatureColumn:
    """A single discrete-coded feature: per-row category indices plus the
    ordered vocabulary that maps codes back to labels."""

    name: str
    codes: np.ndarray  # integer codes in [0, len(vocabulary))
    vocabulary: tuple[str, ...]
    origin: str = "categorical"  # "categorical" | "binned"
    bin_edges: tuple[float, ...] | None = None

    def __post_init__(self):
        codes = np.asarray(self.codes)
        object.__setattr__(self, "codes", codes)
        if len(self.vocabulary) < 1:
            raise IngestionError(f"feature {self.name!r} has an empty vocabulary")
        if codes.size and (codes.min() < 0 or codes.max() >= len(self.vocabulary)):
            raise IngestionError(f"feature {self.name!r} has out-of-range codes")
        if self.bin_edges is not None and len(self.bin_edges) > 1:
            edges = np.asarray(self.bin_edges)
            if not np.all(np.diff(edges) > 0):
                raise IngestionError(f"feature {self.name!r} bin edges not increasing")

    def __len__(self):
        return int(self.codes.shape[0])

    def code_of(self, label: str) -> int:
        try:
            return self.vocabulary.index(label)
        except ValueError:
            raise KeyError(label) from None


@dataclass(frozen=True)
class OutcomeVector:
    name: str
    values: np.ndarray
    kind: str = "binary"  # "binary" | "continuous"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if not np.all(np.isfinite(values)):
            raise IngestionError(f"outcome {self.name!r} contains non-finite values")
        if self.kind == "binary" and not np.all((values == 0) | (values == 1)):
            raise IngestionError(f"binary outcome {self.name!r} has values outside {{0,1}}")
        if self.kind not in ("binary", "continuous"):
            raise IngestionError(f"unknown outcome kind {self.kind!r}")

    def __len__(self):
        return int(self.values.shape[0])


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint, exhaustive partition of row indices, reproducible from
    (seed, fraction, stratify_on)."""

    discovery_rows: np.ndarray
    evaluation_rows: np.ndarray
    seed: int
    fraction: float
    stratify_on: str | None = None

    def __post_init__(self):
        disc = np.asarray(self.discovery_rows, dtype=np.int64)
        eva = np.asarray(self.evaluation_rows, dtype=np.int64)
        object.__setattr__(self, "discovery_rows", disc)
        object.__setattr__(self, "evaluation_rows", eva)
        n = disc.size + eva.size
        union = np.union1d(disc, eva)
        if union.size != n or (n and (union[0] != 0 or union[-1] != n - 1)):
            raise ConfigError("split is not a disjoint exhaustive partition")

    @property
    def n_rows(self):
        return int(self.discovery_rows.size + self.evaluation_rows.size)


def make_split(
    n_rows: int,
    seed: int,
    fraction: float = 0.5,
    stratify_on: np.ndarray | None = None,
    stratify_name: str | None = None,
) -> SplitAssignment:
    """Seeded partition of ``range(n_rows)`` into discovery/evaluation rows.

    ``|discovery| = round(fraction * n_rows)``. When ``stratify_on`` (a binary
    vector) is given, the positive proportion on each side stays within one
    row of the global proportion.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must be in (0, 1), got {fraction}")
    if n_rows < 2:
        raise ConfigError("need at least 2 rows to split")
    rng = np.random.default_rng(seed)
    n_disc = int(round(fraction * n_rows))
    n_disc = min(max(n_disc, 1), n_rows - 1)
    if stratify_on is None:
        perm = rng.permutation(n_rows)
        disc = np.sort(perm[:n_disc])
        eva = np.sort(perm[n_disc:])
    else:
        y = np.asarray(stratify_on)
        pos = np.flatnonzero(y == 1)
        neg = np.flatnonzero(y != 1)
        pos = rng.permutation(pos)
        neg = rng.permutation(neg)
        n_disc_pos = int(round(fraction * pos.size))
        n_disc_pos = min(n_disc_pos, n_disc)
        n_disc_neg = n_disc - n_disc_pos
        if n_disc_neg > neg.size:  # degenerate: nearly all rows positive
            n_disc_pos += n_disc_neg - neg.size
            n_disc_neg = neg.size
        disc = np.sort(np.concatenate([pos[:n_disc_pos], neg[:n_disc_neg]]))
        eva = np.sort(np.concatenate([pos[n_disc_pos:], neg[n_disc_neg:]]))
    return SplitAssignment(disc, eva, seed=seed, fraction=fraction,
                           stratify_on=stratify_name)


@dataclass(frozen=True)
class FeatureMatrix:
    """N x M discrete-coded feature table plus named outcomes and the split.

    Immutable after construction; safe to share across worker threads.
    """

    features: tuple[FeatureColumn, ...]
    outcomes: dict[str, OutcomeVector]
    split: SplitAssignment
    sparse_store: object | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        n = self.n_rows
        for col in self.features:
            if len(col) != n:
                raise IngestionError(f"feature {col.name!r} length != n_rows")
        for out in self.outcomes.values():
            if len(out) != n:
                raise IngestionError(f"outcome {out.name!r} length != n_rows")
        if self.split.n_rows != n:
            raise ConfigError("split does not cover all rows")
        object.__setattr__(
            self, "_by_name", {c.name: i for i, c in enumerate(self.features)}
        )

    @property
    def n_rows(self) -> int:
        return len(self.features[0]) if self.features else 0

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.features]

    def feature(self, name: str) -> FeatureColumn:
        idx = self._by_name.get(name)
        if idx is None:
            raise KeyError(name)
        return self.features[idx]

    def feature_index(self, name: str) -> int:
        idx = self._by_name.get(name)
        if idx is None:
            raise KeyError(name)
        return idx

    def first_binary_outcome(self) -> str | None:
        for name, out in self.outcomes.items():
            if out.kind == "binary":
                return name
        return None

    # -- export / import -------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "n_rows": self.n_rows,
            "features": [
                {
                    "name": c.name,
                    "vocabulary": list(c.vocabulary),
                    "origin": c.origin,
                    "bin_edges": list(c.bin_edges) if c.bin_edges else None,
                    "codes": c.codes.tolist(),
                }
                for c in self.features
            ],
            "outcomes": {
                name: {"kind": o.kind, "values": o.values.tolist()}
                for name, o in self.outcomes.items()
            },
            "split": {
                "seed": self.split.seed,
                "fraction": self.split.fraction,
                "stratify_on": self.split.stratify_on,
            },
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FeatureMatrix":
        features = tuple(
            FeatureColumn(
                name=f["name"],
                codes=np.asarray(f["codes"], dtype=np.int64),
                vocabulary=tuple(f["vocabulary"]),
                origin=f.get("origin", "categorical"),
                bin_edges=tuple(f["bin_edges"]) if f.get("bin_edges") else None,
            )
            for f in data["features"]
        )
        outcomes = {
            name: OutcomeVector(name=name, values=np.asarray(o["values"]), kind=o["kind"])
            for name, o in data["outcomes"].items()
        }
        sp = data["split"]
        stratify = sp.get("stratify_on")
        strat_vec = outcomes[stratify].values if stratify else None
        split = make_split(data["n_rows"], seed=sp["seed"], fraction=sp["fraction"],
                           stratify_on=strat_vec, stratify_name=stratify)
        return cls(features=features, outcomes=outcomes, split=split)

    def save_json(self, path):
        Path(path).write_text(json.dumps(self.to_json_dict()))

    @classmethod
    def load_json(cls, path) -> "FeatureMatrix":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


# -- binning ---------------------------------------------------------------

def bin_continuous(
    name: str,
    values,
    strategy: str = "quantile",
    k: int = 5,
    edges=None,
    labels=None,
) -> FeatureColumn:
    """Map a real-valued vector into a discrete FeatureColumn.

    ``strategy`` is one of ``equal-width`` / ``quantile`` (with ``k`` bins) or
    ``edges`` (explicit interior cut points). NaN values land in an explicit
    missing category; non-finite values (inf) are rejected. Custom ``labels``
    may override the default interval-bound labels.
    """
    arr = np.asarray(values, dtype=np.float64)
    missing = np.isnan(arr)
    if np.any(np.isinf(arr)):
        raise IngestionError(f"feature {name!r} contains non-finite values")
    finite = arr[~missing]
    if finite.size == 0:
        raise IngestionError(f"feature {name!r} has no finite values to bin")

    if strategy == "edges":
        if edges is None or len(edges) < 1:
            raise ConfigError("explicit-edges binning needs at least one edge")
        cuts = np.asarray(sorted(edges), dtype=np.float64)
    elif strategy == "equal-width":
        if k < 2:
            raise ConfigError("equal-width binning needs k >= 2")
        lo, hi = finite.min(), finite.max()
        if lo == hi:
            warnings.warn(f"feature {name!r} is constant; one bin produced")
            cuts = np.asarray([], dtype=np.float64)
        else:
            cuts = np.linspace(lo, hi, k + 1)[1:-1]
    elif strategy == "quantile":
        if k < 2:
            raise ConfigError("quantile binning needs k >= 2")
        qs = np.quantile(finite, np.linspace(0, 1, k + 1)[1:-1])
        cuts = np.unique(qs)
        # a constant or heavily-tied column can collapse to zero usable cuts
        cuts = cuts[(cuts > finite.min()) & (cuts <= finite.max())]
        if cuts.size < k - 1:
            warnings.warn(
                f"feature {name!r}: quantile binning produced {cuts.size + 1} "
                f"bin(s) instead of {k} due to ties"
            )
    else:
        raise ConfigError(f"unknown binning strategy {strategy!r}")

    if cuts.size and not np.all(np.diff(cuts) > 0):
        raise ConfigError("bin edges must be strictly increasing")

    codes = np.searchsorted(cuts, arr, side="right") if cuts.size else np.zeros(
        arr.shape, dtype=np.int64
    )
    n_bins = cuts.size + 1
    if labels is not None:
        if len(labels) != n_bins:
            raise ConfigError(
                f"feature {name!r}: {len(labels)} labels for {n_bins} bins"
            )
        vocab = [str(lb) for lb in labels]
    else:
        bounds = [-np.inf, *cuts.tolist(), np.inf]
        vocab = [
            _interval_label(bounds[i], bounds[i + 1]) for i in range(n_bins)
        ]
    codes = codes.astype(np.int64)
    if missing.any():
        codes[missing] = n_bins
        vocab = vocab + [MISSING_LABEL]
    return FeatureColumn(
        name=name,
        codes=codes,
        vocabulary=tuple(vocab),
        origin="binned",
        bin_edges=tuple(cuts.tolist()),
    )


def _interval_label(lo, hi):
    if lo == -np.inf and hi == np.inf:
        return "all"
    if lo == -np.inf:
        return f"<{hi:g}"
    if hi == np.inf:
        return f">={lo:g}"
    return f"[{lo:g}, {hi:g})"


class LazyBinaryColumn:
    """Feature column backed by one column of a sparse 0/1 matrix; codes are
    materialized (and cached) only when something actually reads them."""

    vocabulary = ("0", "1")
    origin = "categorical"
    bin_edges = None

    def __init__(self, name: str, csc, index: int):
        self.name = name
        self._csc = csc
        self._index = index
        self._codes = None

    def __len__(self):
        return int(self._csc.shape[0])

    @property
    def codes(self) -> np.ndarray:
        if self._codes is None:
            col = self._csc.indices[
                self._csc.indptr[self._index]: self._csc.indptr[self._index + 1]
            ]
            codes = np.zeros(self._csc.shape[0], dtype=np.int64)
            codes[col] = 1
            self._codes = codes
        return self._codes

    def code_of(self, label: str) -> int:
        try:
            return ("0", "1").index(label)
        except ValueError:
            raise KeyError(label) from None


def matrix_from_codes(codes, names=None, vocabularies=None, outcomes=None,
                      seed=0, fraction=0.5, stratify=None) -> "FeatureMatrix":
    """Build a FeatureMatrix straight from a 2-D integer code array (used by
    synthetic fixtures and tests)."""
    codes = np.asarray(codes)
    n, m = codes.shape
    if names is None:
        names = [f"f{j}" for j in range(m)]
    features = []
    for j in range(m):
        col = codes[:, j]
        if vocabularies is not None:
            vocab = tuple(vocabularies[j])
        else:
            vocab = tuple(str(v) for v in range(int(col.max()) + 1))
        features.append(FeatureColumn(name=names[j], codes=col.astype(np.int64),
                                      vocabulary=vocab))
    outcomes = {
        name: o if isinstance(o, OutcomeVector) else OutcomeVector(
            name=name, values=np.asarray(o, dtype=np.float64),
            kind="binary" if set(np.unique(o)) <= {0, 1} else "continuous",
        )
        for name, o in (outcomes or {}).items()
    }
    if stratify is None:
        stratify = next((n_ for n_, o in outcomes.items() if o.kind == "binary"), None)
    split = make_split(n, seed=seed, fraction=fraction,
                       stratify_on=outcomes[stratify].values if stratify else None,
                       stratify_name=stratify)
    return FeatureMatrix(features=tuple(features), outcomes=outcomes, split=split)


def matrix_from_sparse_binary(csr, names=None, outcomes=None, seed=0,
                              fraction=0.5, stratify=None) -> "FeatureMatrix":
    """FeatureMatrix over a sparse 0/1 CSR matrix; feature columns stay
    virtual so wide bag-of-words data never densifies."""
    import scipy.sparse as sp

    csr = sp.csr_matrix(csr)
    n, m = csr.shape
    csc = csr.tocsc()
    if names is None:
        names = [f"w{j}" for j in range(m)]
    features = tuple(LazyBinaryColumn(names[j], csc, j) for j in range(m))
    outcomes = {
        name: o if isinstance(o, OutcomeVector) else OutcomeVector(
            name=name, values=np.asarray(o, dtype=np.float64),
            kind="binary" if set(np.unique(o)) <= {0, 1} else "continuous",
        )
        for name, o in (outcomes or {}).items()
    }
    if stratify is None:
        stratify = next((n_ for n_, o in outcomes.items() if o.kind == "binary"), None)
    split = make_split(n, seed=seed, fraction=fraction,
                       stratify_on=outcomes[stratify].values if stratify else None,
                       stratify_name=stratify)
    return FeatureMatrix(features=features, outcomes=outcomes, split=split,
                         sparse_store=csr)


def encode_categorical(name: str, values) -> FeatureColumn:
    """Code string/object values in first-appearance order; missing values
    become an explicit category so rules can target missingness."""
    labels = []
    index = {}
    codes = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        if v is None or (isinstance(v, float) and np.isnan(v)):
            v = MISSING_LABEL
        else:
            v = str(v)
        code = index.get(v)
        if code is None:
            code = len(labels)
            index[v] = code
            labels.append(v)
        codes[i] = code
    return FeatureColumn(name=name, codes=codes, vocabulary=tuple(labels))


# -- schema + table loading --------------------------------------------------

def load_schema(path) -> dict:
    """Read a schema config from JSON or TOML."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ImportError:  # Python < 3.11
            import tomli as tomllib
        return tomllib.loads(text)
    return json.loads(text)


def load_table(source, schema) -> FeatureMatrix:
    """Ingest a CSV/TSV file (or DataFrame) under a schema config.

    The schema maps each column to a role (feature / outcome / ignored), a
    type, and optional binning. See README for the exact shape.
    """
    if isinstance(schema, (str, Path)):
        schema = load_schema(schema)
    if isinstance(source, pd.DataFrame):
        df = source
    else:
        sep = "\t" if str(source).endswith((".tsv", ".tab")) else ","
        df = pd.read_csv(source, sep=sep)
    if len(df) == 0:
        raise IngestionError("input table has no rows")

    columns = schema.get("columns")
    if not columns:
        raise SchemaError("schema has no 'columns' section")
    # accept either a list of {"name": ..., ...} entries or a name-keyed dict
    if isinstance(columns, list):
        try:
            columns = {c["name"]: c for c in columns}
        except (TypeError, KeyError):
            raise SchemaError("each schema column entry needs a 'name'") from None

    features = []
    outcomes = {}
    for name, cfg in columns.items():
        role = cfg.get("role", "feature")
        if role == "ignored":
            continue
        if name not in df.columns:
            raise SchemaError(f"schema column {name!r} not present in table")
        series = df[name]
        if role == "outcome":
            kind = cfg.get("type", "binary")
            vals = pd.to_numeric(series, errors="coerce").to_numpy(dtype=np.float64)
            bad = np.flatnonzero(~np.isfinite(vals))
            if bad.size:
                raise IngestionError(
                    f"outcome {name!r}: non-numeric value at row {int(bad[0])}"
                )
            outcomes[name] = OutcomeVector(name=name, values=vals, kind=kind)
        elif role == "feature":
            ftype = cfg.get("type", "categorical")
            if ftype == "categorical":
                features.append(encode_categorical(name, series.tolist()))
            elif ftype == "continuous":
                vals = pd.to_numeric(series, errors="coerce").to_numpy(dtype=np.float64)
                raw_missing = series.isna().to_numpy()
                bad = np.flatnonzero(~np.isfinite(vals) & ~raw_missing)
                if bad.size:
                    raise IngestionError(
                        f"feature {name!r}: non-numeric value at row {int(bad[0])}"
                    )
                b = cfg.get("binning", {})
                features.append(
                    bin_continuous(
                        name,
                        vals,
                        strategy=b.get("strategy", "quantile"),
                        k=b.get("bins", b.get("k", 5)),
                        edges=b.get("edges"),
                        labels=b.get("labels"),
                    )
                )
            else:
                raise SchemaError(f"feature {name!r}: unknown type {ftype!r}")
        else:
            raise SchemaError(f"column {name!r}: unknown role {role!r}")

    if not features:
        raise SchemaError("schema declares no feature columns")

    split_cfg = schema.get("split", {})
    stratify = split_cfg.get("stratify")
    if stratify is None:
        stratify = next(
            (n for n, o in outcomes.items() if o.kind == "binary"), None
        )
    strat_vec = outcomes[stratify].values if stratify else None
    split = make_split(
        len(df),
        seed=split_cfg.get("seed", 0),
        fraction=split_cfg.get("fraction", 0.5),
        stratify_on=strat_vec,
        stratify_name=stratify,
    )
    return FeatureMatrix(features=tuple(features), outcomes=outcomes, split=split)
