"""Subgroup Map computation: 2-D embedding of the evaluation split,
property-aware bubble aggregation, overlap removal, subgroup overlays,
intersection summaries, and the distinguishing-feature readout.

Everything here produces plain data (positions, radii, counts, signatures)
for any renderer; no drawing happens in this module.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .dataset import FeatureMatrix
from .errors import ConfigError
from .rules import Mask, Rule, evaluate_mask

MAX_OVERLAY_SUBGROUPS = 8
DEFAULT_THRESHOLD = 1.0 / 60.0  # merge radius as a fraction of the extent diagonal
MAX_RELAX_SWEEPS = 50
EMBED_SUBSAMPLE_CAP = 50_000
_TSNE_MAX_ROWS = 5000  # above this, fall back to the linear projection


@dataclass(frozen=True)
class Bubble:
    x: float
    y: float
    radius: float
    count: int
    outcome: float | None
    signature: tuple[int, ...]
    members: np.ndarray = field(compare=False)  # evaluation-split row ids


@dataclass
class BubbleLayout:
    bubbles: list[Bubble]
    extent: tuple[float, float, float, float]
    seed: int
    threshold: float

    @property
    def diagonal(self) -> float:
        x0, y0, x1, y1 = self.extent
        return float(np.hypot(x1 - x0, y1 - y0))

    def to_json_dict(self) -> dict:
        arcs = []
        for b in self.bubbles:
            arcs.append({
                "x": b.x, "y": b.y, "r": b.radius, "count": b.count,
                "outcome": b.outcome, "signature": list(b.signature),
            })
        return {"bubbles": arcs, "extent": list(self.extent)}


def _one_hot(matrix: FeatureMatrix, rows) -> csr_matrix:
    n = len(rows)
    offsets = np.concatenate([
        [0], np.cumsum([len(c.vocabulary) for c in matrix.features])
    ])
    cols = np.concatenate([
        col.codes[rows] + offsets[j] for j, col in enumerate(matrix.features)
    ])
    rows_idx = np.tile(np.arange(n), matrix.n_features)
    data = np.ones(cols.size, dtype=np.float32)
    return coo_matrix((data, (rows_idx, cols)), shape=(n, offsets[-1])).tocsr()


def embed(matrix: FeatureMatrix, seed: int = 0, method: str = "auto",
          rows=None) -> np.ndarray:
    """2-D coordinates for the evaluation-split rows.

    One-hot features are linearly projected to <= 50 dimensions and then
    embedded with a neighbor-preserving method (t-SNE for moderate sizes,
    the first two projected components beyond that). Deterministic for a
    fixed seed.
    """
    if rows is None:
        rows = matrix.split.evaluation_rows
    n = len(rows)
    if n == 0:
        raise ConfigError("evaluation split is empty")
    if n == 1:
        return np.zeros((1, 2))

    onehot = _one_hot(matrix, rows)
    n_components = min(50, onehot.shape[1] - 1, n - 1)
    if n_components < 2:
        # a single feature dimension: spread along x
        coords = np.zeros((n, 2))
        coords[:, 0] = np.asarray(onehot[:, 0].todense()).ravel()
        return coords

    from sklearn.decomposition import TruncatedSVD

    svd = TruncatedSVD(n_components=n_components, random_state=seed)
    reduced = svd.fit_transform(onehot)

    if method == "auto":
        method = "tsne" if n <= _TSNE_MAX_ROWS else "pca"
    if method == "pca":
        return np.ascontiguousarray(reduced[:, :2], dtype=np.float64)
    if method != "tsne":
        raise ConfigError(f"unknown embedding method {method!r}")

    from sklearn.manifold import TSNE

    perplexity = min(30.0, max(2.0, (n - 1) / 3.0))
    tsne = TSNE(
        n_components=2, random_state=seed, perplexity=perplexity,
        init="pca", n_jobs=1,
    )
    return tsne.fit_transform(reduced).astype(np.float64)


def _extent(coords):
    x0, y0 = coords.min(axis=0)
    x1, y1 = coords.max(axis=0)
    if x0 == x1:
        x1 = x0 + 1.0
    if y0 == y1:
        y1 = y0 + 1.0
    return (float(x0), float(y0), float(x1), float(y1))


def aggregate_bubbles(coords: np.ndarray, properties, row_ids=None,
                      threshold: float = DEFAULT_THRESHOLD,
                      outcome_values=None, seed: int = 0) -> BubbleLayout:
    """Merge points into bubbles by single-linkage within a threshold
    distance (a fraction of the extent diagonal), never across differing
    properties. Bubble position is the member centroid; radius scales with
    the square root of the member count.
    """
    if threshold <= 0:
        raise ConfigError("merge threshold must be positive")
    coords = np.asarray(coords, dtype=np.float64)
    n = coords.shape[0]
    if row_ids is None:
        row_ids = np.arange(n)
    extent = _extent(coords)
    diag = float(np.hypot(extent[2] - extent[0], extent[3] - extent[1]))
    radius = threshold * diag

    labels = np.full(n, -1, dtype=np.int64)
    next_label = 0
    group_ids = {}
    prop_idx = np.empty(n, dtype=np.int64)
    for i, p in enumerate(properties):
        prop_idx[i] = group_ids.setdefault(p, len(group_ids))
    for key in range(len(group_ids)):
        idx = np.flatnonzero(prop_idx == key)
        if idx.size == 1:
            labels[idx] = next_label
            next_label += 1
            continue
        # coincident points (common with discrete features) are merged up
        # front so the pair query runs on unique coordinates only
        uniq, inverse = np.unique(coords[idx], axis=0, return_inverse=True)
        if uniq.shape[0] == 1:
            comp_u = np.zeros(1, dtype=np.int64)
        else:
            tree = cKDTree(uniq)
            pairs = tree.query_pairs(radius, output_type="ndarray")
            if pairs.size:
                adj = coo_matrix(
                    (np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])),
                    shape=(uniq.shape[0], uniq.shape[0]),
                )
                _, comp_u = connected_components(adj, directed=False)
            else:
                comp_u = np.arange(uniq.shape[0])
        comp = comp_u[inverse]
        labels[idx] = comp + next_label
        next_label += comp.max() + 1

    bubbles = []
    base_r = radius * 0.5
    prop_list = list(properties)
    for label in range(next_label):
        idx = np.flatnonzero(labels == label)
        if idx.size == 0:
            continue
        center = coords[idx].mean(axis=0)
        outcome, signature = prop_list[idx[0]]
        bubbles.append(Bubble(
            x=float(center[0]), y=float(center[1]),
            radius=base_r * float(np.sqrt(idx.size)),
            count=int(idx.size),
            outcome=outcome,
            signature=signature,
            members=np.asarray(row_ids)[idx],
        ))
    # canonical ordering keeps layouts reproducible
    bubbles.sort(key=lambda b: (b.x, b.y, b.count))
    return BubbleLayout(bubbles=bubbles, extent=extent, seed=seed,
                        threshold=threshold)


def relax_overlaps(layout: BubbleLayout,
                   max_sweeps: int = MAX_RELAX_SWEEPS) -> BubbleLayout:
    """Short force-directed relaxation: overlapping bubble pairs are pushed
    apart symmetrically along their center line until all pairs satisfy
    center distance >= r_i + r_j (within a 1e-6-diagonal epsilon).

    Returns a new layout; the input is unchanged. Deterministic.
    """
    if not layout.bubbles:
        return layout
    pos = np.array([[b.x, b.y] for b in layout.bubbles])
    radii = np.array([b.radius for b in layout.bubbles])
    diag = max(layout.diagonal, 1e-12)
    eps = 1e-6 * diag
    margin = 0.25 * eps

    n = len(radii)
    for _ in range(max_sweeps):
        tree = cKDTree(pos)
        pairs = tree.query_pairs(float(2 * radii.max()), output_type="ndarray")
        moved = False
        for i, j in sorted(map(tuple, pairs)):
            target = radii[i] + radii[j]
            delta = pos[j] - pos[i]
            dist = float(np.hypot(*delta))
            if dist >= target - 0.5 * eps:
                continue
            if dist < 1e-12:
                # coincident centers: deterministic separation direction
                angle = 2 * np.pi * ((i * 31 + j * 17) % 360) / 360.0
                delta = np.array([np.cos(angle), np.sin(angle)])
                dist = 1.0
            shift = (target + margin - dist) / 2.0
            unit = delta / dist
            pos[i] -= unit * shift
            pos[j] += unit * shift
            moved = True
        if not moved:
            break
    else:
        # sweeps did not converge: scale all centers about their mean by the
        # worst remaining overlap ratio, which separates every pair at once
        tree = cKDTree(pos)
        pairs = tree.query_pairs(float(2 * radii.max()), output_type="ndarray")
        worst = 1.0
        for i, j in map(tuple, pairs):
            dist = float(np.hypot(*(pos[j] - pos[i])))
            target = radii[i] + radii[j] + margin
            if 0 < dist < target:
                worst = max(worst, target / dist)
        if worst > 1.0:
            center = pos.mean(axis=0)
            pos = center + (pos - center) * worst

    bubbles = [
        replace(b, x=float(p[0]), y=float(p[1]))
        for b, p in zip(layout.bubbles, pos)
    ]
    xs = pos[:, 0]
    ys = pos[:, 1]
    extent = (
        float(xs.min() - radii.max()), float(ys.min() - radii.max()),
        float(xs.max() + radii.max()), float(ys.max() + radii.max()),
    )
    return BubbleLayout(bubbles=bubbles, extent=extent, seed=layout.seed,
                        threshold=layout.threshold)


def row_signatures(matrix: FeatureMatrix, subgroups, rows) -> np.ndarray:
    """Per-row bitmask of subgroup membership over ``rows``."""
    if len(subgroups) > MAX_OVERLAY_SUBGROUPS:
        raise ConfigError(
            f"at most {MAX_OVERLAY_SUBGROUPS} subgroups can be overlaid"
        )
    sig = np.zeros(len(rows), dtype=np.int64)
    for i, sg in enumerate(subgroups):
        if isinstance(sg, Rule):
            mask = evaluate_mask(sg, matrix)
        elif hasattr(sg, "mask"):
            mask = sg.mask(matrix)
        else:
            mask = sg
        values = mask.values if isinstance(mask, Mask) else np.asarray(mask)
        sig |= values[rows].astype(np.int64) << i
    return sig


def _signature_tuple(bits: int) -> tuple[int, ...]:
    return tuple(i for i in range(MAX_OVERLAY_SUBGROUPS) if bits >> i & 1)


def build_layout(matrix: FeatureMatrix, seed: int = 0, subgroups=(),
                 outcome: str | None = None,
                 threshold: float = DEFAULT_THRESHOLD,
                 method: str = "auto", coords=None) -> BubbleLayout:
    """Full Subgroup Map pipeline: embed (or reuse) coordinates, group rows by
    (outcome value, membership signature), aggregate, and relax overlaps.

    For evaluation splits beyond the subsample cap, a seeded subsample is
    embedded and the remaining rows adopt the coordinates of their nearest
    same-property embedded neighbor.
    """
    eval_rows = matrix.split.evaluation_rows
    if outcome is None:
        outcome = matrix.first_binary_outcome()
    out_vals = (
        matrix.outcomes[outcome].values[eval_rows]
        if outcome is not None else np.zeros(len(eval_rows))
    )
    sig = row_signatures(matrix, subgroups, eval_rows)

    if coords is None:
        if len(eval_rows) > EMBED_SUBSAMPLE_CAP:
            coords = _embed_with_subsample(matrix, seed, method, eval_rows,
                                           out_vals, sig)
        else:
            coords = embed(matrix, seed=seed, method=method, rows=eval_rows)

    properties = [
        (float(o), _signature_tuple(int(s))) for o, s in zip(out_vals, sig)
    ]
    layout = aggregate_bubbles(coords, properties, row_ids=eval_rows,
                               threshold=threshold, seed=seed)
    return relax_overlaps(layout)


def _embed_with_subsample(matrix, seed, method, eval_rows, out_vals, sig):
    rng = np.random.default_rng(seed)
    pick = np.sort(rng.choice(len(eval_rows), size=EMBED_SUBSAMPLE_CAP,
                              replace=False))
    coords_sub = embed(matrix, seed=seed, method=method, rows=eval_rows[pick])

    from sklearn.neighbors import NearestNeighbors

    onehot = _one_hot(matrix, eval_rows)
    coords = np.zeros((len(eval_rows), 2))
    coords[pick] = coords_sub
    rest = np.setdiff1d(np.arange(len(eval_rows)), pick)
    if rest.size:
        # nearest embedded neighbor, preferring identical-property rows
        props = out_vals.astype(np.int64) * (1 << MAX_OVERLAY_SUBGROUPS) + sig
        for prop in np.unique(props[rest]):
            targets = pick[props[pick] == prop]
            sources = rest[props[rest] == prop]
            if targets.size == 0:
                targets = pick  # no embedded row shares the property
            nn = NearestNeighbors(n_neighbors=1).fit(onehot[targets])
            _, nearest = nn.kneighbors(onehot[sources])
            coords[sources] = coords[targets[nearest.ravel()]]
    return coords


def overlay_subgroups(layout: BubbleLayout, n_subgroups: int) -> list[dict]:
    """Per-bubble membership signature and equal-length arc fractions for the
    renderer. Requires the layout to have been built with the subgroup
    signature as a grouping property."""
    if n_subgroups > MAX_OVERLAY_SUBGROUPS:
        raise ConfigError(
            f"at most {MAX_OVERLAY_SUBGROUPS} subgroups can be overlaid"
        )
    out = []
    for b in layout.bubbles:
        sig = [i for i in b.signature if i < n_subgroups]
        arc = 1.0 / len(sig) if sig else 0.0
        out.append({"signature": sig, "arc_fraction": arc})
    return out


@dataclass
class IntersectionSummary:
    """Size and outcome rate of every nonempty membership combination over
    the evaluation split; sizes (including the no-membership remainder) sum
    to the split size."""

    entries: list[dict]
    unassigned: int
    split_size: int

    def to_json_dict(self):
        return {
            "entries": self.entries,
            "unassigned": self.unassigned,
            "split_size": self.split_size,
        }


def intersection_summary(matrix: FeatureMatrix, subgroups,
                         outcome: str | None = None) -> IntersectionSummary:
    if not subgroups:
        raise ConfigError("intersection summary needs at least one subgroup")
    eval_rows = matrix.split.evaluation_rows
    if outcome is None:
        outcome = matrix.first_binary_outcome()
    y = (matrix.outcomes[outcome].values[eval_rows]
         if outcome is not None else np.zeros(len(eval_rows)))
    sig = row_signatures(matrix, subgroups, eval_rows)
    entries = []
    unassigned = 0
    for bits in np.unique(sig):
        members = sig == bits
        size = int(members.sum())
        if bits == 0:
            unassigned = size
            continue
        entries.append({
            "signature": list(_signature_tuple(int(bits))),
            "size": size,
            "outcome_rate": float(y[members].mean()),
        })
    return IntersectionSummary(entries=entries, unassigned=unassigned,
                               split_size=len(eval_rows))


def distinguishing_feature(selection: Mask, matrix: FeatureMatrix,
                           rows=None) -> tuple[str, str, float, float]:
    """The (feature, value) pair most unique to a selection: the maximizer of
    the harmonic mean of P(value | selection) and P(selection | value).

    Returns (feature, value, precision, recall) where precision is
    P(value | selection) and recall is P(selection | value). Ties break by
    precision, then feature/value name.
    """
    if rows is None:
        rows = matrix.split.evaluation_rows
    sel = selection.values[rows]
    n_sel = int(sel.sum())
    if n_sel == 0:
        raise ConfigError("selection is empty within the rows")

    best = None  # (feature, value, precision, recall, f1)
    for col in matrix.features:
        codes = col.codes[rows]
        in_sel = np.bincount(codes[sel], minlength=len(col.vocabulary))
        overall = np.bincount(codes, minlength=len(col.vocabulary))
        for code, label in enumerate(col.vocabulary):
            if overall[code] == 0:
                continue
            precision = in_sel[code] / n_sel
            recall = in_sel[code] / overall[code]
            if precision + recall == 0:
                continue
            f1 = 2 * precision * recall / (precision + recall)
            if best is None:
                better = True
            elif f1 != best[4]:
                better = f1 > best[4]
            elif precision != best[2]:
                better = precision > best[2]
            else:
                better = (col.name, label) < (best[0], best[1])
            if better:
                best = (col.name, label, precision, recall, f1)
    return (best[0], best[1], float(best[2]), float(best[3]))


def bubbles_matching(layout: BubbleLayout, mask: Mask) -> list[int]:
    """Indices of bubbles containing at least one row of the mask (the hover
    highlight set)."""
    out = []
    for i, b in enumerate(layout.bubbles):
        if mask.values[b.members].any():
            out.append(i)
    return out
