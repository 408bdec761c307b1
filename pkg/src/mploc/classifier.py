"""Reflection-order classification: CART decision trees with bootstrap aggregation.

Trees are grown greedily on the Gini criterion with candidate thresholds at
midpoints between consecutive distinct sorted feature values. The ensemble
combines a fixed number of trees (14 by default), each trained on a
with-replacement resample of the training set, by majority vote.

Determinism: tree growth is entirely data-driven (ties resolved toward the
lowest feature index and lowest threshold), bootstrap resamples come from
substreams keyed by (master_seed, tree index), and vote ties resolve toward
the lowest class index. Training twice with the same seed yields bit-identical
serialized models.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, DataError
from .channel import Measurement

FEATURE_NAMES = ("toa_s", "aoa_deg", "aod_deg", "rss_dbm")

_LEAF = -1


@dataclass(frozen=True)
class TreeParams:
    """Growth limits for a single tree. max_depth=None means unbounded."""

    max_depth: Optional[int] = 20
    min_leaf_size: int = 5

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0 or None")
        if self.min_leaf_size < 1:
            raise ConfigError("min_leaf_size must be >= 1")


@dataclass
class DecisionTree:
    """A binary classification tree in flat-array form.

    feature[i] is the split feature of node i (-1 for leaves), threshold[i]
    the split value (go left when x <= threshold), left/right the child ids,
    and counts[i] the training class histogram (populated at leaves).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray
    n_classes: int

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node id for every row of X."""
        X = np.asarray(X, dtype=np.float64)
        idx = np.zeros(len(X), dtype=np.int32)
        while True:
            rows = np.nonzero(self.feature[idx] >= 0)[0]
            if rows.size == 0:
                return idx
            node = idx[rows]
            go_left = X[rows, self.feature[node]] <= self.threshold[node]
            idx[rows] = np.where(go_left, self.left[node], self.right[node])

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Leaf-majority class per row; count ties go to the lower class."""
        leaf_class = self.counts.argmax(axis=1)
        return leaf_class[self.apply(X)]

    def predict_one(self, x: Sequence[float]) -> int:
        i = 0
        while self.feature[i] >= 0:
            i = self.left[i] if x[self.feature[i]] <= self.threshold[i] else self.right[i]
        return int(self.counts[i].argmax())


@dataclass
class Ensemble:
    """A bagged set of trees plus the metadata needed to reproduce it."""

    trees: list[DecisionTree]
    n_classes: int
    feature_names: tuple[str, ...] = FEATURE_NAMES
    master_seed: int = 0
    params: TreeParams = field(default_factory=TreeParams)
    meta: dict = field(default_factory=dict)

    @property
    def n_trees(self) -> int:
        return len(self.trees)


@dataclass
class ConfusionMatrix:
    """Row = true class, column = predicted class."""

    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return len(self.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def accuracy(self) -> float:
        return float(np.trace(self.counts)) / self.total

    def format(self) -> str:
        width = max(5, len(str(int(self.counts.max(initial=0)))))
        header = "true\\pred " + " ".join(f"{c:>{width}}" for c in range(self.n_classes))
        lines = [header]
        for r in range(self.n_classes):
            lines.append(f"{r:>9} " + " ".join(f"{int(v):>{width}}" for v in self.counts[r]))
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# dataset plumbing
# ---------------------------------------------------------------------------

def feature_matrix(measurements: Sequence[Measurement]) -> np.ndarray:
    """Stack observations into the (n, 4) feature matrix used by the trees."""
    return np.array(
        [[m.toa, m.aoa.degrees, m.aod.degrees, m.rss] for m in measurements],
        dtype=np.float64,
    ).reshape(len(measurements), len(FEATURE_NAMES))


def label_vector(measurements: Sequence[Measurement]) -> np.ndarray:
    labels = [m.label for m in measurements]
    if any(v is None for v in labels):
        raise DataError("dataset contains unlabeled rows")
    return np.asarray(labels, dtype=np.int64)


def _check_rows(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) == 0:
        raise DataError("feature matrix must be non-empty and 2D")
    if len(y) != len(X):
        raise DataError("feature/label length mismatch")
    if np.issubdtype(y.dtype, np.floating):
        if np.isnan(y.astype(np.float64)).any():
            raise DataError("dataset contains unlabeled rows")
        y = y.astype(np.int64)
    y = y.astype(np.int64)
    if not np.isfinite(X).all():
        raise DataError("features contain non-finite values")
    if (y < 0).any():
        raise DataError("labels must be non-negative")
    return X, y


def split_dataset(X, y, fractions: tuple[float, float, float] = (0.6, 0.2, 0.2), seed: int = 0):
    """Shuffle and partition rows into (train, validation, test) arrays.

    Sizes land within one row of the exact fractions; the partition is a
    disjoint cover of the input and is fully determined by `seed`.
    """
    X, y = _check_rows(X, y)
    if abs(sum(fractions) - 1.0) > 1e-9 or min(fractions) < 0:
        raise ConfigError(f"fractions must be non-negative and sum to 1, got {fractions}")
    n = len(y)
    perm = np.random.default_rng(np.random.SeedSequence((seed, 0x51))).permutation(n)
    n_train = min(int(n * fractions[0] + 0.5), n)
    n_val = min(int(n * fractions[1] + 0.5), n - n_train)
    i_train = perm[:n_train]
    i_val = perm[n_train:n_train + n_val]
    i_test = perm[n_train + n_val:]
    return (X[i_train], y[i_train]), (X[i_val], y[i_val]), (X[i_test], y[i_test])


# ---------------------------------------------------------------------------
# CART growth
# ---------------------------------------------------------------------------

def _best_split(X: np.ndarray, idx: np.ndarray, yn: np.ndarray,
                parent_counts: np.ndarray, min_leaf: int):
    """Best (feature, threshold, weighted Gini) over midpoint candidates.

    Ties resolve toward the lowest feature index, then the lowest threshold.
    Returns None when no candidate satisfies the leaf-size floor.
    """
    n = idx.size
    n_classes = len(parent_counts)
    best_impurity = math.inf
    best = None
    for f in range(X.shape[1]):
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        sv = v[order]
        sy = yn[order]
        cut = np.nonzero(sv[1:] != sv[:-1])[0]
        if cut.size == 0:
            continue
        nl = cut + 1
        keep = (nl >= min_leaf) & (n - nl >= min_leaf)
        cut, nl = cut[keep], nl[keep]
        if cut.size == 0:
            continue
        onehot = np.zeros((n, n_classes), dtype=np.float64)
        onehot[np.arange(n), sy] = 1.0
        cum = np.cumsum(onehot, axis=0)
        lc = cum[cut]
        rc = parent_counts.astype(np.float64) - lc
        nr = (n - nl).astype(np.float64)
        nlf = nl.astype(np.float64)
        gini_l = 1.0 - ((lc / nlf[:, None]) ** 2).sum(axis=1)
        gini_r = 1.0 - ((rc / nr[:, None]) ** 2).sum(axis=1)
        weighted = (nlf * gini_l + nr * gini_r) / n
        j = int(np.argmin(weighted))
        if weighted[j] < best_impurity:
            best_impurity = float(weighted[j])
            i = cut[j]
            best = (f, (sv[i] + sv[i + 1]) / 2.0, best_impurity)
    return best


def train_tree(X, y, params: TreeParams = TreeParams(), n_classes: Optional[int] = None) -> DecisionTree:
    """Grow one CART tree.

    Splitting stops at a pure node, at max_depth, or when no split leaves
    min_leaf_size rows on each side. Zero-gain splits are allowed, so
    checkerboard label patterns are still separable at depth 2.
    """
    X, y = _check_rows(X, y)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    elif y.max() >= n_classes:
        raise DataError(f"label {int(y.max())} >= n_classes {n_classes}")

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    def new_node() -> int:
        feature.append(_LEAF)
        threshold.append(0.0)
        left.append(_LEAF)
        right.append(_LEAF)
        counts.append(np.zeros(n_classes, dtype=np.int64))
        return len(feature) - 1

    max_depth = math.inf if params.max_depth is None else params.max_depth
    stack = [(np.arange(len(y)), 0, new_node())]
    while stack:
        idx, depth, ni = stack.pop()
        yn = y[idx]
        cnt = np.bincount(yn, minlength=n_classes)
        split = None
        if depth < max_depth and idx.size >= 2 * params.min_leaf_size and (cnt > 0).sum() > 1:
            split = _best_split(X, idx, yn, cnt, params.min_leaf_size)
        if split is None:
            counts[ni] = cnt
            continue
        f, thr, _ = split
        go_left = X[idx, f] <= thr
        li, ri = new_node(), new_node()
        feature[ni], threshold[ni], left[ni], right[ni] = f, thr, li, ri
        stack.append((idx[go_left], depth + 1, li))
        stack.append((idx[~go_left], depth + 1, ri))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int32),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int32),
        right=np.asarray(right, dtype=np.int32),
        counts=np.vstack(counts),
        n_classes=n_classes,
    )


def train_bagged(X, y, n_trees: int = 14, params: TreeParams = TreeParams(),
                 master_seed: int = 0, *, bootstrap: bool = True,
                 n_classes: Optional[int] = None,
                 feature_names: tuple[str, ...] = FEATURE_NAMES) -> Ensemble:
    """Train the bagged ensemble.

    Tree t is trained on len(X) rows drawn with replacement from the substream
    (master_seed, t); with bootstrap=False every tree sees the full sample and
    the ensemble degenerates to identical copies of the single tree.
    """
    if n_trees < 1:
        raise ConfigError(f"n_trees must be >= 1, got {n_trees}")
    X, y = _check_rows(X, y)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    trees = []
    n = len(y)
    for t in range(n_trees):
        if bootstrap:
            rng = np.random.default_rng(np.random.SeedSequence((master_seed, t)))
            take = np.sort(rng.integers(0, n, size=n))
            trees.append(train_tree(X[take], y[take], params, n_classes=n_classes))
        else:
            trees.append(train_tree(X, y, params, n_classes=n_classes))
    return Ensemble(
        trees=trees,
        n_classes=n_classes,
        feature_names=tuple(feature_names),
        master_seed=master_seed,
        params=params,
        meta={"bootstrap": bootstrap, "n_train": n},
    )


# ---------------------------------------------------------------------------
# prediction and scoring
# ---------------------------------------------------------------------------

def predict_batch(ensemble: Ensemble, X) -> tuple[np.ndarray, np.ndarray]:
    """Majority-vote classes and winning vote fractions for each row of X."""
    X = np.asarray(X, dtype=np.float64)
    votes = np.zeros((len(X), ensemble.n_classes), dtype=np.int64)
    rows = np.arange(len(X))
    for tree in ensemble.trees:
        votes[rows, tree.predict(X)] += 1
    classes = votes.argmax(axis=1)  # argmax breaks ties toward the lower class
    fractions = votes[rows, classes] / ensemble.n_trees
    return classes, fractions


def predict(ensemble: Ensemble, features: Sequence[float]) -> tuple[int, float]:
    """Classify one feature vector; returns (class, vote fraction)."""
    if len(features) != len(ensemble.feature_names):
        raise DataError(f"expected {len(ensemble.feature_names)} features, got {len(features)}")
    votes = np.zeros(ensemble.n_classes, dtype=np.int64)
    for tree in ensemble.trees:
        votes[tree.predict_one(features)] += 1
    cls = int(votes.argmax())
    return cls, float(votes[cls]) / ensemble.n_trees


def accuracy_score(ensemble: Ensemble, X, y) -> float:
    X, y = _check_rows(X, y)
    classes, _ = predict_batch(ensemble, X)
    return float(np.mean(classes == y))


def confusion(ensemble: Ensemble, X, y) -> ConfusionMatrix:
    """Confusion counts (rows true, columns predicted) over labeled rows."""
    X, y = _check_rows(X, y)
    if y.max() >= ensemble.n_classes:
        raise DataError("labels exceed the ensemble's class count")
    pred, _ = predict_batch(ensemble, X)
    k = ensemble.n_classes
    counts = np.bincount(y * k + pred, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts=counts)


def cross_validate(X, y, k: int = 5, n_trees: int = 14,
                   params: TreeParams = TreeParams(), seed: int = 0,
                   *, n_classes: Optional[int] = None) -> np.ndarray:
    """k-fold cross-validation accuracies of the bagged ensemble.

    Fold sizes differ by at most one row; each fold is scored by an ensemble
    trained on the remaining folds. Deterministic given `seed`.
    """
    X, y = _check_rows(X, y)
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if k > len(y):
        raise DataError(f"k={k} exceeds the {len(y)} available rows")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    perm = np.random.default_rng(np.random.SeedSequence((seed, 0xCF))).permutation(len(y))
    folds = np.array_split(perm, k)
    accs = np.empty(k, dtype=np.float64)
    for i, fold in enumerate(folds):
        train_idx = np.concatenate([f for j, f in enumerate(folds) if j != i])
        fold_seed = int(np.random.SeedSequence((seed, 0xF0, i)).generate_state(1)[0])
        ens = train_bagged(X[train_idx], y[train_idx], n_trees, params,
                           master_seed=fold_seed, n_classes=n_classes)
        accs[i] = accuracy_score(ens, X[fold], y[fold])
    return accs


def baseline_rss_filter(measurements: Sequence[Measurement], threshold_db: float) -> list[Measurement]:
    """Keep only measurements within threshold_db of the strongest signal."""
    if not measurements:
        raise DataError("empty epoch")
    top = max(m.rss for m in measurements)
    return [m for m in measurements if m.rss >= top - threshold_db]


# ---------------------------------------------------------------------------
# model file format (versioned text, bit-exact round trip)
# ---------------------------------------------------------------------------

_FORMAT_VERSION = 1


def serialize_ensemble(ensemble: Ensemble) -> str:
    header = {
        "version": _FORMAT_VERSION,
        "kind": "bagged-cart",
        "n_trees": ensemble.n_trees,
        "n_classes": ensemble.n_classes,
        "feature_names": list(ensemble.feature_names),
        "master_seed": ensemble.master_seed,
        "params": {
            "max_depth": ensemble.params.max_depth,
            "min_leaf_size": ensemble.params.min_leaf_size,
        },
        "meta": ensemble.meta,
    }
    lines = [json.dumps(header, sort_keys=True)]
    for ti, tree in enumerate(ensemble.trees):
        lines.append(f"TREE {ti} {tree.n_nodes}")
        for i in range(tree.n_nodes):
            if tree.feature[i] >= 0:
                lines.append(
                    f"{i},I,{int(tree.feature[i])},{float(tree.threshold[i])!r},"
                    f"{int(tree.left[i])},{int(tree.right[i])}"
                )
            else:
                cnt = ",".join(str(int(c)) for c in tree.counts[i])
                lines.append(f"{i},L,-1,0.0,-1,-1,{cnt}")
    return "\n".join(lines) + "\n"


def deserialize_ensemble(text: str) -> Ensemble:
    lines = text.splitlines()
    if not lines:
        raise DataError("empty model file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise DataError(f"model header parse error: {e.msg}") from e
    if header.get("version") != _FORMAT_VERSION:
        raise DataError(f"unsupported model version {header.get('version')}")
    n_classes = int(header["n_classes"])
    params = TreeParams(max_depth=header["params"]["max_depth"],
                        min_leaf_size=int(header["params"]["min_leaf_size"]))
    trees: list[DecisionTree] = []
    pos = 1
    for ti in range(int(header["n_trees"])):
        if pos >= len(lines) or not lines[pos].startswith("TREE "):
            raise DataError(f"model file truncated before tree {ti}")
        _, idx_s, n_nodes_s = lines[pos].split()
        if int(idx_s) != ti:
            raise DataError(f"tree index mismatch: expected {ti}, got {idx_s}")
        n_nodes = int(n_nodes_s)
        pos += 1
        feature = np.empty(n_nodes, dtype=np.int32)
        threshold = np.zeros(n_nodes, dtype=np.float64)
        left = np.full(n_nodes, _LEAF, dtype=np.int32)
        right = np.full(n_nodes, _LEAF, dtype=np.int32)
        counts = np.zeros((n_nodes, n_classes), dtype=np.int64)
        for j in range(n_nodes):
            parts = lines[pos + j].split(",")
            i, kind = int(parts[0]), parts[1]
            if i != j:
                raise DataError(f"tree {ti}: node id mismatch at line offset {j}")
            if kind == "I":
                feature[i] = int(parts[2])
                threshold[i] = float(parts[3])
                left[i] = int(parts[4])
                right[i] = int(parts[5])
            elif kind == "L":
                feature[i] = _LEAF
                counts[i] = [int(c) for c in parts[6:6 + n_classes]]
            else:
                raise DataError(f"tree {ti}: unknown node kind {kind!r}")
        pos += n_nodes
        trees.append(DecisionTree(feature=feature, threshold=threshold, left=left,
                                  right=right, counts=counts, n_classes=n_classes))
    return Ensemble(
        trees=trees,
        n_classes=n_classes,
        feature_names=tuple(header["feature_names"]),
        master_seed=int(header["master_seed"]),
        params=params,
        meta=dict(header.get("meta", {})),
    )


def save_ensemble(ensemble: Ensemble, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize_ensemble(ensemble))


def load_ensemble(path) -> Ensemble:
    with open(path, "r", encoding="utf-8") as f:
        return deserialize_ensemble(f.read())
