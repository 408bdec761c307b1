import itertools

import numpy as np
import pytest

from mploc.channel import Measurement, NoiseModel, RadioConfig, generate_dataset
from mploc.classifier import (
    FEATURE_NAMES,
    DecisionTree,
    Ensemble,
    TreeParams,
    accuracy_score,
    baseline_rss_filter,
    confusion,
    cross_validate,
    deserialize_ensemble,
    feature_matrix,
    label_vector,
    predict,
    predict_batch,
    serialize_ensemble,
    split_dataset,
    train_bagged,
    train_tree,
)
from mploc.errors import ConfigError, DataError
from mploc.geometry import Bearing


def make_rows(n, n_classes, seed=0, informative=True):
    """Synthetic 4-feature rows; informative=True makes classes separable."""
    rng = np.random.default_rng(seed)
    y = rng.integers(0, n_classes, size=n)
    X = rng.normal(size=(n, 4))
    if informative:
        X[:, 0] += 10.0 * y
        X[:, 3] -= 5.0 * y
    return X, y.astype(np.int64)


class TestSplitDataset:
    def test_ten_rows_split_622(self):
        X, y = make_rows(10, 2)
        (Xa, ya), (Xb, yb), (Xc, yc) = split_dataset(X, y, seed=0)
        assert (len(ya), len(yb), len(yc)) == (6, 2, 2)

    def test_paper_scale_ratio(self):
        # 3.6M rows at 60/20/20 must land exactly on 2.16M/720k/720k
        n = 3_600_000
        X = np.zeros((n, 1))
        y = np.zeros(n, dtype=np.int64)
        (Xa, ya), (Xb, yb), (Xc, yc) = split_dataset(X, y, seed=1)
        assert (len(ya), len(yb), len(yc)) == (2_160_000, 720_000, 720_000)

    def test_disjoint_cover(self):
        X = np.arange(101, dtype=np.float64).reshape(-1, 1)
        y = np.zeros(101, dtype=np.int64)
        parts = split_dataset(X, y, seed=3)
        seen = np.concatenate([p[0].ravel() for p in parts])
        assert sorted(seen.tolist()) == list(range(101))

    def test_deterministic(self):
        X, y = make_rows(50, 3)
        a = split_dataset(X, y, seed=9)
        b = split_dataset(X, y, seed=9)
        for (Xa, ya), (Xb, yb) in zip(a, b):
            assert np.array_equal(Xa, Xb) and np.array_equal(ya, yb)

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            split_dataset(np.zeros((0, 4)), np.zeros(0), seed=0)

    def test_bad_fractions_rejected(self):
        X, y = make_rows(10, 2)
        with pytest.raises(ConfigError):
            split_dataset(X, y, fractions=(0.5, 0.2, 0.2), seed=0)


class TestTrainTree:
    def test_linearly_separable_stump(self):
        # toa below 1us means class 0, else class 1
        X = np.zeros((20, 4))
        X[:, 0] = np.concatenate([np.full(10, 0.5e-6), np.full(10, 1.5e-6)])
        y = np.array([0] * 10 + [1] * 10, dtype=np.int64)
        tree = train_tree(X, y, TreeParams(max_depth=1, min_leaf_size=1))
        assert tree.n_nodes == 3
        assert np.mean(tree.predict(X) == y) == 1.0

    def test_single_class_single_leaf(self):
        X, _ = make_rows(30, 2)
        y = np.full(30, 1, dtype=np.int64)
        tree = train_tree(X, y, n_classes=3)
        assert tree.n_nodes == 1
        assert tree.predict_one(X[0]) == 1

    def test_xor_needs_depth_two(self):
        # checkerboard labels on (aoa, aod); depth-1 stumps cannot beat 50%
        X = np.zeros((40, 4))
        pattern = [(0.0, 0.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1), (1.0, 1.0, 0)]
        y = np.zeros(40, dtype=np.int64)
        for i in range(40):
            a, b, lab = pattern[i % 4]
            X[i, 1], X[i, 2] = a, b
            y[i] = lab

        # brute-force oracle over every depth-1 stump
        best_stump = 0.0
        for f in range(4):
            vals = np.unique(X[:, f])
            for lo, hi in zip(vals, vals[1:]):
                thr = (lo + hi) / 2
                mask = X[:, f] <= thr
                for left_cls, right_cls in itertools.product((0, 1), repeat=2):
                    pred = np.where(mask, left_cls, right_cls)
                    best_stump = max(best_stump, float(np.mean(pred == y)))
        assert best_stump == pytest.approx(0.5)

        deep = train_tree(X, y, TreeParams(max_depth=2, min_leaf_size=1))
        assert np.mean(deep.predict(X) == y) == 1.0

    def test_unlimited_depth_fits_duplicate_free_data(self):
        rng = np.random.default_rng(4)
        X = rng.normal(size=(300, 4))
        y = rng.integers(0, 4, size=300).astype(np.int64)
        tree = train_tree(X, y, TreeParams(max_depth=None, min_leaf_size=1))
        assert np.mean(tree.predict(X) == y) == 1.0

    def test_gini_never_worsens_at_any_split(self):
        X, y = make_rows(500, 3, seed=2, informative=False)
        y = ((X[:, 0] > 0) & (X[:, 1] > 0)).astype(np.int64)
        tree = train_tree(X, y, TreeParams(max_depth=8, min_leaf_size=5))

        totals = np.zeros_like(tree.counts)

        def fill(i):
            if tree.feature[i] < 0:
                totals[i] = tree.counts[i]
            else:
                fill(tree.left[i])
                fill(tree.right[i])
                totals[i] = totals[tree.left[i]] + totals[tree.right[i]]

        def gini(c):
            n = c.sum()
            return 1.0 - ((c / n) ** 2).sum()

        fill(0)
        for i in range(tree.n_nodes):
            if tree.feature[i] < 0:
                continue
            n = totals[i].sum()
            nl = totals[tree.left[i]].sum()
            nr = totals[tree.right[i]].sum()
            child = (nl * gini(totals[tree.left[i]]) + nr * gini(totals[tree.right[i]])) / n
            assert child <= gini(totals[i]) + 1e-12

    def test_row_permutation_invariance(self):
        X, y = make_rows(200, 3, seed=5)
        perm = np.random.default_rng(0).permutation(200)
        a = train_tree(X, y)
        b = train_tree(X[perm], y[perm])
        for field in ("feature", "threshold", "left", "right", "counts"):
            assert np.array_equal(getattr(a, field), getattr(b, field))

    def test_monotone_power_of_two_scaling(self):
        X, y = make_rows(300, 3, seed=6)
        X2 = X.copy()
        X2[:, 0] *= 4.0  # exact in binary floating point
        a = train_tree(X, y)
        b = train_tree(X2, y)
        assert np.array_equal(a.feature, b.feature)
        mask = a.feature == 0
        assert np.array_equal(b.threshold[mask], 4.0 * a.threshold[mask])
        assert np.array_equal(a.predict(X), b.predict(X2))


def leaf_tree(cls, n_classes):
    counts = np.zeros((1, n_classes), dtype=np.int64)
    counts[0, cls] = 10
    return DecisionTree(
        feature=np.array([-1], dtype=np.int32),
        threshold=np.zeros(1),
        left=np.array([-1], dtype=np.int32),
        right=np.array([-1], dtype=np.int32),
        counts=counts,
        n_classes=n_classes,
    )


class TestEnsemble:
    def test_unanimous_vote(self):
        ens = Ensemble(trees=[leaf_tree(1, 3) for _ in range(14)], n_classes=3)
        assert predict(ens, [0, 0, 0, 0]) == (1, 1.0)

    def test_tie_breaks_toward_lower_class(self):
        ens = Ensemble(trees=[leaf_tree(2, 3) for _ in range(7)]
                             + [leaf_tree(0, 3) for _ in range(7)], n_classes=3)
        assert predict(ens, [0, 0, 0, 0]) == (0, 0.5)

    def test_no_bootstrap_single_tree_matches_train_tree(self):
        X, y = make_rows(100, 2, seed=7)
        ens = train_bagged(X, y, n_trees=1, master_seed=0, bootstrap=False)
        solo = train_tree(X, y)
        for field in ("feature", "threshold", "left", "right", "counts"):
            assert np.array_equal(getattr(ens.trees[0], field), getattr(solo, field))

    def test_same_seed_bit_identical_serialization(self):
        X, y = make_rows(200, 3, seed=8)
        a = serialize_ensemble(train_bagged(X, y, n_trees=5, master_seed=11))
        b = serialize_ensemble(train_bagged(X, y, n_trees=5, master_seed=11))
        assert a == b

    def test_pure_labels_give_single_leaf_trees(self):
        X, _ = make_rows(50, 2, seed=9)
        y = np.zeros(50, dtype=np.int64)
        ens = train_bagged(X, y, n_trees=4, master_seed=2, n_classes=2)
        assert all(t.n_nodes == 1 for t in ens.trees)

    def test_holdout_generalization_on_separable_data(self):
        X, y = make_rows(2000, 4, seed=10)
        (Xtr, ytr), _, (Xte, yte) = split_dataset(X, y, seed=1)
        ens = train_bagged(Xtr, ytr, n_trees=7, master_seed=3)
        assert accuracy_score(ens, Xte, yte) == 1.0

    def test_tree_order_does_not_change_argmax(self):
        X, y = make_rows(400, 3, seed=12, informative=False)
        ens = train_bagged(X, y, n_trees=9, master_seed=4)
        flipped = Ensemble(trees=list(reversed(ens.trees)), n_classes=ens.n_classes,
                           master_seed=ens.master_seed, params=ens.params)
        Xq, _ = make_rows(200, 3, seed=13, informative=False)
        a, fa = predict_batch(ens, Xq)
        b, fb = predict_batch(flipped, Xq)
        assert np.array_equal(a, b)
        assert np.array_equal(fa, fb)

    def test_n_trees_guard(self):
        X, y = make_rows(10, 2)
        with pytest.raises(ConfigError):
            train_bagged(X, y, n_trees=0)


class TestCrossValidate:
    def test_deterministic_labels_all_ones(self):
        X, y = make_rows(300, 3, seed=14)
        accs = cross_validate(X, y, k=5, n_trees=3, seed=0)
        assert np.allclose(accs, 1.0)

    def test_fold_sizes_101_rows(self):
        X = np.arange(101, dtype=np.float64).reshape(-1, 1)
        y = (X.ravel() > 50).astype(np.int64)
        perm = np.random.default_rng(np.random.SeedSequence((7, 0xCF))).permutation(101)
        folds = np.array_split(perm, 5)
        assert sorted(len(f) for f in folds) == [20, 20, 20, 20, 21]
        accs = cross_validate(X, y, k=5, n_trees=1, seed=7)
        assert len(accs) == 5

    def test_random_labels_near_chance(self):
        rng = np.random.default_rng(15)
        X = rng.normal(size=(10_000, 4))
        y = rng.integers(0, 3, size=10_000).astype(np.int64)
        accs = cross_validate(X, y, k=5, n_trees=3,
                              params=TreeParams(max_depth=8, min_leaf_size=25), seed=1)
        # independent chance baseline: a random guesser on the same labels
        guess = rng.integers(0, 3, size=10_000)
        baseline = float(np.mean(guess == y))
        assert abs(accs.mean() - 1.0 / 3.0) < 0.05
        assert abs(baseline - 1.0 / 3.0) < 0.05

    def test_k_exceeding_rows_rejected(self):
        X, y = make_rows(4, 2)
        with pytest.raises(DataError):
            cross_validate(X, y, k=5, n_trees=1)


class TestConfusion:
    def test_perfect_predictor_is_diagonal(self):
        X, y = make_rows(600, 3, seed=16)
        ens = train_bagged(X, y, n_trees=5, master_seed=1)
        cm = confusion(ens, X, y)
        assert cm.counts.sum() == 600
        assert np.trace(cm.counts) == 600
        assert cm.accuracy == 1.0

    def test_constant_predictor_single_column(self):
        X, _ = make_rows(90, 3, seed=17)
        y_train = np.zeros(90, dtype=np.int64)
        ens = train_bagged(X, y_train, n_trees=3, master_seed=0, n_classes=3)
        y_eval = np.random.default_rng(1).integers(0, 3, size=90).astype(np.int64)
        cm = confusion(ens, X, y_eval)
        assert cm.counts[:, 1:].sum() == 0
        assert cm.counts[:, 0].sum() == 90

    def test_accuracy_equals_trace_over_total(self):
        X, y = make_rows(500, 4, seed=18, informative=False)
        ens = train_bagged(X, y, n_trees=3, master_seed=2,
                           params=TreeParams(max_depth=3, min_leaf_size=10))
        cm = confusion(ens, X, y)
        pred, _ = predict_batch(ens, X)
        assert cm.accuracy == pytest.approx(float(np.mean(pred == y)))

    def test_unlabeled_rows_rejected(self):
        X, y = make_rows(10, 2)
        bad = y.astype(np.float64)
        bad[3] = np.nan
        ens = train_bagged(X, y, n_trees=1, master_seed=0)
        with pytest.raises(DataError):
            confusion(ens, X, bad)


def _meas(rss):
    return Measurement(toa=1e-7, aoa=Bearing(0), aod=Bearing(0), rss=rss,
                       label=None, gnb_id=0, t=0.0)


class TestBaselineRssFilter:
    def test_zero_threshold_keeps_only_strongest(self):
        ms = [_meas(-70.0), _meas(-75.0), _meas(-90.0)]
        assert baseline_rss_filter(ms, 0.0) == [ms[0]]

    def test_infinite_threshold_keeps_all(self):
        ms = [_meas(-70.0), _meas(-75.0), _meas(-90.0)]
        assert baseline_rss_filter(ms, float("inf")) == ms

    def test_ten_db_window(self):
        ms = [_meas(-70.0), _meas(-75.0), _meas(-90.0)]
        assert baseline_rss_filter(ms, 10.0) == ms[:2]

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            baseline_rss_filter([], 10.0)


class TestSerialization:
    def test_round_trip_preserves_predictions(self):
        X, y = make_rows(800, 4, seed=19, informative=False)
        ens = train_bagged(X, y, n_trees=6, master_seed=21,
                           params=TreeParams(max_depth=10, min_leaf_size=3))
        text = serialize_ensemble(ens)
        back = deserialize_ensemble(text)
        Xq = np.random.default_rng(3).normal(size=(5000, 4))
        a, fa = predict_batch(ens, Xq)
        b, fb = predict_batch(back, Xq)
        assert np.array_equal(a, b)
        assert np.array_equal(fa, fb)
        assert serialize_ensemble(back) == text

    def test_header_metadata(self):
        X, y = make_rows(50, 2, seed=20)
        ens = train_bagged(X, y, n_trees=2, master_seed=33)
        back = deserialize_ensemble(serialize_ensemble(ens))
        assert back.n_trees == 2
        assert back.n_classes == ens.n_classes
        assert back.master_seed == 33
        assert back.feature_names == FEATURE_NAMES
        assert back.params == ens.params

    def test_version_check(self):
        with pytest.raises(DataError, match="version"):
            deserialize_ensemble('{"version": 99}\n')


class TestMeasurementPlumbing:
    def test_feature_matrix_column_order(self):
        m = Measurement(toa=2e-7, aoa=Bearing(10), aod=Bearing(20), rss=-60.0,
                        label=1, gnb_id=0, t=0.0)
        X = feature_matrix([m])
        assert X.shape == (1, 4)
        assert X[0].tolist() == [2e-7, 10.0, 20.0, -60.0]

    def test_label_vector_requires_labels(self):
        m = Measurement(toa=2e-7, aoa=Bearing(10), aod=Bearing(20), rss=-60.0,
                        label=None, gnb_id=0, t=0.0)
        with pytest.raises(DataError):
            label_vector([m])
