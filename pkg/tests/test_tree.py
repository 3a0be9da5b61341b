from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riverforest import (
    Dataset,
    LabeledSample,
    PollutionLevel,
    TreeConfig,
    best_split,
    bootstrap_sample,
    candidate_thresholds,
    generate_synthetic,
    gini_impurity,
    grow_tree,
    tree_predict,
)
from riverforest.errors import EmptyCounts
from riverforest.tree import Internal, Leaf

from .conftest import GREEN, ORANGE, RED, YELLOW, make_dataset, make_sample


def rng_from(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


# -- independent brute-force split oracle ---------------------------------------

def oracle_best_split(samples, features):
    """Exhaustive search over all (feature, midpoint) pairs in exact rationals.

    Enumerates features ascending and thresholds ascending, keeps a candidate
    only when strictly better than the current best, and only returns splits
    strictly below the parent impurity. Entirely independent of the sweep
    implementation: partitions are recomputed per candidate.
    """

    def frac_gini(labels):
        total = len(labels)
        impurity = Fraction(1)
        for level in set(labels):
            impurity -= Fraction(labels.count(level), total) ** 2
        return impurity

    labels = [row.level for row in samples]
    parent = frac_gini(labels)
    n = len(samples)
    best = None  # (feature, threshold, weighted impurity)
    for feature in sorted(features):
        values = [row.sample.features()[feature] for row in samples]
        for threshold in candidate_thresholds(values):
            left = [row.level for row in samples if row.sample.features()[feature] <= threshold]
            right = [row.level for row in samples if row.sample.features()[feature] > threshold]
            weighted = Fraction(len(left), n) * frac_gini(left) + Fraction(
                len(right), n
            ) * frac_gini(right)
            if weighted >= parent:
                continue
            if best is None or weighted < best[2]:
                best = (feature, threshold, weighted)
    return best


def random_dataset(rng, n, n_classes, gridded):
    """Small random dataset; gridded values force duplicate features and ties."""
    levels = list(PollutionLevel)[:n_classes]
    rows = []
    for _ in range(n):
        if gridded:
            do, bod = (float(rng.integers(0, 5)), float(rng.integers(0, 4)))
            ph, tss = (float(rng.integers(5, 10)), float(rng.integers(0, 4) * 10))
        else:
            do = float(np.round(rng.uniform(0, 12), 3))
            ph = float(np.round(rng.uniform(2, 12), 3))
            bod = float(np.round(rng.uniform(0, 30), 3))
            tss = float(np.round(rng.uniform(0, 200), 3))
        rows.append((do, ph, bod, tss, levels[int(rng.integers(0, n_classes))]))
    return make_dataset(rows)


class TestGini:
    def test_pure(self):
        assert gini_impurity({RED: 10}) == 0.0

    def test_two_class_uniform(self):
        assert gini_impurity({RED: 5, YELLOW: 5}) == 0.5

    def test_three_class_hand_computed(self):
        # 1 - (9 + 4 + 1) / 36 = 22/36
        assert gini_impurity({RED: 3, YELLOW: 2, ORANGE: 1}) == pytest.approx(22 / 36, abs=1e-12)

    def test_empty(self):
        with pytest.raises(EmptyCounts):
            gini_impurity({})
        with pytest.raises(EmptyCounts):
            gini_impurity({RED: 0})

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            gini_impurity({RED: -1, YELLOW: 2})

    @given(counts=st.lists(st.integers(0, 50), min_size=4, max_size=4))
    def test_properties(self, counts):
        total = sum(counts)
        if total == 0:
            return
        mapping = dict(zip(PollutionLevel, counts))
        value = gini_impurity(mapping)
        assert 0.0 <= value <= 0.75 + 1e-12
        assert (value == 0.0) == (max(counts) == total)
        # invariant under permuting class identities
        shuffled = dict(zip(PollutionLevel, counts[::-1]))
        assert gini_impurity(shuffled) == pytest.approx(value, abs=1e-12)

    def test_uniform_is_maximal(self):
        uniform = gini_impurity({lvl: 5 for lvl in PollutionLevel})
        assert uniform == pytest.approx(0.75, abs=1e-12)


class TestCandidateThresholds:
    def test_single_midpoint(self):
        assert candidate_thresholds([1, 3]) == [2]

    def test_constant(self):
        assert candidate_thresholds([5, 5, 5]) == []

    def test_dedup_and_sort(self):
        assert candidate_thresholds([1, 2, 2, 4]) == [1.5, 3]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            candidate_thresholds([])

    @given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=20))
    def test_between_distinct_values(self, values):
        thresholds = candidate_thresholds(values)
        distinct = sorted(set(values))
        assert len(thresholds) <= len(distinct) - 1 if len(distinct) > 1 else thresholds == []
        assert thresholds == sorted(thresholds)
        for t in thresholds:
            assert distinct[0] < t or t == distinct[0]  # midpoint may collapse onto tiny gaps
            assert t <= distinct[-1]


class TestBestSplit:
    def test_forced_separation(self):
        ds = make_dataset([(2, 7, 3, 30, RED), (8, 7, 3, 30, YELLOW)])
        found = best_split(ds.samples, [0])
        assert found is not None
        assert found.feature == 0
        assert found.threshold == 5.0
        assert found.weighted_impurity == 0.0

    def test_pure_parent_returns_none(self):
        ds = make_dataset([(2, 7, 3, 30, RED), (8, 7, 3, 30, RED)])
        assert best_split(ds.samples, [0, 1, 2, 3]) is None

    def test_constant_features_return_none(self):
        ds = make_dataset([(5, 7, 3, 30, RED), (5, 7, 3, 30, YELLOW)])
        assert best_split(ds.samples, [0, 1, 2, 3]) is None

    def test_no_improvement_returns_none(self):
        # Both sides of the only candidate keep the same class proportions.
        ds = make_dataset(
            [(1, 7, 3, 30, RED), (1, 7, 3, 30, YELLOW), (2, 7, 3, 30, RED), (2, 7, 3, 30, YELLOW)]
        )
        assert best_split(ds.samples, [0]) is None

    def test_six_sample_case_matches_oracle(self):
        ds = make_dataset(
            [
                (1, 7, 10, 30, RED),
                (2, 7, 9, 30, RED),
                (3, 7, 1, 30, YELLOW),
                (4, 7, 2, 30, YELLOW),
                (5, 7, 8, 30, RED),
                (6, 7, 3, 30, YELLOW),
            ]
        )
        expected = oracle_best_split(ds.samples, [0, 2])
        found = best_split(ds.samples, [0, 2])
        assert (found.feature, found.threshold) == (expected[0], expected[1])
        assert found.weighted_impurity == pytest.approx(float(expected[2]), abs=1e-12)

    @pytest.mark.parametrize("gridded", [True, False])
    def test_oracle_equivalence_randomized(self, gridded):
        rng = rng_from(2024 + gridded)
        for _ in range(60):
            n = int(rng.integers(2, 30))
            n_classes = int(rng.integers(2, 5))
            ds = random_dataset(rng, n, n_classes, gridded)
            n_feats = int(rng.integers(1, 5))
            features = sorted(int(f) for f in rng.choice(4, size=n_feats, replace=False))
            expected = oracle_best_split(ds.samples, features)
            found = best_split(ds.samples, features)
            if expected is None:
                assert found is None
            else:
                assert found is not None
                assert (found.feature, found.threshold) == (expected[0], expected[1])
                assert found.weighted_impurity == pytest.approx(float(expected[2]), abs=1e-12)

    def test_split_never_increases_impurity(self):
        rng = rng_from(99)
        for _ in range(40):
            ds = random_dataset(rng, int(rng.integers(2, 40)), 3, gridded=False)
            found = best_split(ds.samples, [0, 1, 2, 3])
            if found is None:
                continue
            counts = {}
            for row in ds:
                counts[row.level] = counts.get(row.level, 0) + 1
            assert found.weighted_impurity <= gini_impurity(counts) + 1e-12

    def test_preconditions(self):
        ds = make_dataset([(1, 7, 3, 30, RED)])
        with pytest.raises(ValueError):
            best_split(ds.samples, [0])
        ds2 = make_dataset([(1, 7, 3, 30, RED), (2, 7, 3, 30, YELLOW)])
        with pytest.raises(ValueError):
            best_split(ds2.samples, [])


class TestBootstrap:
    def test_single_row(self):
        ds = make_dataset([(7, 7, 3, 30, RED)])
        out = bootstrap_sample(ds, rng_from(0))
        assert out.samples == ds.samples

    def test_size_preserved(self):
        ds = generate_synthetic(37, seed=0)
        out = bootstrap_sample(ds, rng_from(1))
        assert len(out) == 37

    def test_deterministic(self):
        ds = generate_synthetic(20, seed=0)
        assert bootstrap_sample(ds, rng_from(5)) == bootstrap_sample(ds, rng_from(5))

    def test_distinct_fraction_statistic(self):
        ds = generate_synthetic(100, seed=0)
        rng = rng_from(7)
        fractions = []
        for _ in range(1000):
            out = bootstrap_sample(ds, rng)
            fractions.append(len({row.sample.features() for row in out}) / 100)
        assert abs(np.mean(fractions) - (1 - (1 - 1 / 100) ** 100)) < 0.03


def path_constraints_hold(node, sample):
    """Check the sample's routing satisfies every ancestor predicate."""
    features = sample.features()
    while isinstance(node, Internal):
        if features[node.feature] <= node.threshold:
            assert features[node.feature] <= node.threshold
            node = node.left
        else:
            assert features[node.feature] > node.threshold
            node = node.right
    return node


class TestGrowTree:
    def test_single_sample_leaf(self):
        ds = make_dataset([(7, 7, 3, 30, ORANGE)])
        tree = grow_tree(ds, TreeConfig(), rng_from(0))
        assert isinstance(tree, Leaf)
        assert tree.class_counts == {ORANGE: 1}

    def test_max_depth_zero_is_leaf(self):
        ds = generate_synthetic(50, seed=0)
        tree = grow_tree(ds, TreeConfig(max_depth=0), rng_from(0))
        assert isinstance(tree, Leaf)

    def test_min_samples_split(self):
        ds = make_dataset([(1, 7, 3, 30, RED), (5, 7, 3, 30, YELLOW), (9, 7, 3, 30, RED)])
        tree = grow_tree(ds, TreeConfig(min_samples_split=4), rng_from(0))
        assert isinstance(tree, Leaf)

    def test_interpolates_consistent_data(self):
        ds = generate_synthetic(120, seed=21, noise_rate=0.0)
        tree = grow_tree(ds, TreeConfig(features_per_split=4), rng_from(3))
        hits = sum(tree_predict(tree, row.sample) == row.level for row in ds)
        assert hits == len(ds)

    def test_deterministic(self):
        ds = generate_synthetic(80, seed=4)
        a = grow_tree(ds, TreeConfig(), rng_from(11))
        b = grow_tree(ds, TreeConfig(), rng_from(11))
        assert a == b

    def test_depth_cap_respected(self):
        ds = generate_synthetic(200, seed=5)
        tree = grow_tree(ds, TreeConfig(max_depth=2), rng_from(0))

        def depth(node):
            if isinstance(node, Leaf):
                return 0
            return 1 + max(depth(node.left), depth(node.right))

        assert depth(tree) <= 2

    def test_routing_satisfies_ancestor_predicates(self):
        ds = generate_synthetic(150, seed=6)
        tree = grow_tree(ds, TreeConfig(), rng_from(2))
        for row in ds:
            leaf = path_constraints_hold(tree, row.sample)
            assert isinstance(leaf, Leaf)


class TestTreePredict:
    def test_single_leaf(self):
        leaf = Leaf({RED: 3})
        assert tree_predict(leaf, make_sample()) is RED

    def test_tie_breaks_to_higher_severity(self):
        assert Leaf({RED: 2, ORANGE: 2}).prediction is RED
        assert Leaf({GREEN: 4, YELLOW: 4}).prediction is YELLOW

    def test_majority_wins(self):
        assert Leaf({RED: 1, YELLOW: 5}).prediction is YELLOW

    def test_leaf_requires_positive_count(self):
        with pytest.raises(ValueError):
            Leaf({})
        with pytest.raises(ValueError):
            Leaf({RED: 0})

    def test_routing(self):
        tree = Internal(
            feature=0,
            threshold=5.0,
            left=Leaf({RED: 1}),
            right=Leaf({GREEN: 1}),
        )
        assert tree_predict(tree, make_sample(do=4.0)) is RED
        assert tree_predict(tree, make_sample(do=5.0)) is RED  # boundary routes left
        assert tree_predict(tree, make_sample(do=6.0)) is GREEN
