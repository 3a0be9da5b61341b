"""CART-style decision trees: Gini impurity, random feature subsets, unpruned growth.

Split selection is exact: candidates are compared through integer
cross-multiplication rather than floating-point impurities, so the chosen
split (including tie-breaks: lowest feature index, then lowest threshold)
is identical on every platform and matches a brute-force enumeration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from .data import FEATURE_NAMES, Dataset, LabeledSample, PollutionLevel, WaterSample
from .errors import EmptyCounts

FEATURE_COUNT = len(FEATURE_NAMES)
_N_LEVELS = len(PollutionLevel)


@dataclass(frozen=True)
class TreeConfig:
    """Growth parameters: features tried per node, split floor, depth cap."""

    features_per_split: int = 2
    min_samples_split: int = 2
    max_depth: Optional[int] = None

    def __post_init__(self) -> None:
        if not 1 <= self.features_per_split <= FEATURE_COUNT:
            raise ValueError(
                f"features_per_split must be in [1, {FEATURE_COUNT}], got {self.features_per_split}"
            )
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be at least 2")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be non-negative or None")


@dataclass(frozen=True)
class SplitCandidate:
    feature: int
    threshold: float
    weighted_impurity: float


@dataclass(frozen=True)
class Leaf:
    """Terminal node holding the training class counts that reached it."""

    class_counts: Mapping[PollutionLevel, int]
    prediction: PollutionLevel = field(init=False, compare=False)

    def __post_init__(self) -> None:
        counts = {level: int(c) for level, c in self.class_counts.items() if c > 0}
        if not counts or any(c < 0 for c in self.class_counts.values()):
            raise ValueError("a leaf needs at least one positive class count")
        object.__setattr__(self, "class_counts", counts)
        # Majority class; ties go to the higher severity.
        best = max(counts, key=lambda level: (counts[level], int(level)))
        object.__setattr__(self, "prediction", best)


@dataclass(frozen=True)
class Internal:
    """Binary split: samples with feature value <= threshold go left."""

    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Internal]


def gini_impurity(class_counts: Mapping[PollutionLevel, int]) -> float:
    """1 - sum((n_c / n)^2); 0 for a pure node, at most 1 - 1/k for k classes."""
    total = 0
    for count in class_counts.values():
        if count < 0:
            raise ValueError("class counts must be non-negative")
        total += count
    if total == 0:
        raise EmptyCounts("cannot compute impurity of an empty node")
    return 1.0 - sum((count / total) ** 2 for count in class_counts.values())


def candidate_thresholds(values: Sequence[float]) -> list[float]:
    """Midpoints between consecutive distinct sorted values, ascending."""
    if len(values) == 0:
        raise ValueError("values must be non-empty")
    distinct = sorted(set(float(v) for v in values))
    return [(a + b) / 2.0 for a, b in zip(distinct, distinct[1:])]


def _sum_sq(counts) -> int:
    return int(sum(int(c) * int(c) for c in counts))


def _best_split_arrays(X: np.ndarray, y: np.ndarray, features: Sequence[int]):
    """Exact best split over `features`; returns (feature, threshold, num, den) or None.

    For a left/right partition with class counts l_c, r_c and sizes nl, nr,
    minimizing weighted Gini is equivalent to maximizing
        S = sum(l_c^2)/nl + sum(r_c^2)/nr = num / den,
    with num = sum(l_c^2)*nr + sum(r_c^2)*nl and den = nl*nr, all integers.
    A split is kept only when it strictly improves on the parent:
        num * n > sum(c^2) * den.
    Candidates are compared by exact cross-multiplication, so ties resolve
    purely by enumeration order (lowest feature, then lowest threshold).
    """
    n = X.shape[0]
    total = np.zeros(_N_LEVELS, dtype=np.int64)
    np.add.at(total, y, 1)
    parent_sum_sq = _sum_sq(total)

    # int64 is safe up to roughly n = 3e4 for the num*n product below.
    exact_dtype = np.int64 if n <= 30_000 else object

    best: Optional[tuple[int, float, int, int]] = None  # feature, threshold, num, den
    for f in sorted(int(f) for f in features):
        column = X[:, f]
        order = np.argsort(column, kind="stable")
        sv = column[order]
        sy = y[order]
        boundaries = np.nonzero(sv[:-1] < sv[1:])[0]
        if boundaries.size == 0:
            continue

        onehot = np.zeros((n, _N_LEVELS), dtype=exact_dtype)
        onehot[np.arange(n), sy] = 1
        cum = np.cumsum(onehot, axis=0)

        left = cum[boundaries]
        right = total[None, :] - left
        nl = (boundaries + 1).astype(exact_dtype)
        nr = n - nl
        num = (left * left).sum(axis=1) * nr + (right * right).sum(axis=1) * nl
        den = nl * nr

        improving = np.nonzero(num * n > parent_sum_sq * den)[0]
        if improving.size == 0:
            continue

        # Float prefilter, then exact integer refinement among float-ties.
        scores = num[improving].astype(np.float64) / den[improving].astype(np.float64)
        top = float(scores.max())
        tied = improving[np.nonzero(scores == top)[0]]
        best_pos = int(tied[0])
        for candidate in (int(c) for c in tied[1:]):
            if int(num[candidate]) * int(den[best_pos]) > int(num[best_pos]) * int(den[candidate]):
                best_pos = candidate
        b = int(boundaries[best_pos])
        threshold = (float(sv[b]) + float(sv[b + 1])) / 2.0
        cand = (f, threshold, int(num[best_pos]), int(den[best_pos]))

        if best is None or cand[2] * best[3] > best[2] * cand[3]:
            best = cand
    return best


def best_split(
    samples: Sequence[LabeledSample], features: Sequence[int]
) -> Optional[SplitCandidate]:
    """Best (feature, threshold) by weighted Gini over midpoint candidates.

    Returns None when every selected feature is constant or no candidate
    strictly reduces impurity below the parent's.
    """
    if len(samples) < 2:
        raise ValueError("best_split needs at least two samples")
    if not features:
        raise ValueError("features must be non-empty")
    X = np.array([row.sample.features() for row in samples], dtype=np.float64)
    y = np.fromiter((int(row.level) for row in samples), dtype=np.int64, count=len(samples))
    found = _best_split_arrays(X, y, features)
    if found is None:
        return None
    f, threshold, num, den = found
    weighted = 1.0 - num / (den * len(samples))
    return SplitCandidate(feature=f, threshold=threshold, weighted_impurity=weighted)


def bootstrap_sample(dataset: Dataset, rng: np.random.Generator) -> Dataset:
    """N uniform draws with replacement from an N-row dataset."""
    n = len(dataset)
    if n == 0:
        raise ValueError("cannot bootstrap an empty dataset")
    indices = rng.integers(0, n, size=n)
    return dataset.subset([int(i) for i in indices])


def _leaf_from_counts(counts: np.ndarray) -> Leaf:
    return Leaf({PollutionLevel(i): int(c) for i, c in enumerate(counts) if c > 0})


def _grow(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    depth: int,
    config: TreeConfig,
    rng: np.random.Generator,
) -> TreeNode:
    counts = np.bincount(y[idx], minlength=_N_LEVELS)
    pure = int(np.count_nonzero(counts)) == 1
    if (
        pure
        or idx.size < config.min_samples_split
        or (config.max_depth is not None and depth >= config.max_depth)
    ):
        return _leaf_from_counts(counts)

    features = rng.choice(FEATURE_COUNT, size=config.features_per_split, replace=False)
    found = _best_split_arrays(X[idx], y[idx], [int(f) for f in features])
    if found is None:
        return _leaf_from_counts(counts)
    f, threshold, _, _ = found

    mask = X[idx, f] <= threshold
    left_idx = idx[mask]
    right_idx = idx[~mask]
    if left_idx.size == 0 or right_idx.size == 0:
        # Adjacent-float degeneracy: the midpoint equals one of its endpoints.
        return _leaf_from_counts(counts)
    left = _grow(X, y, left_idx, depth + 1, config, rng)
    right = _grow(X, y, right_idx, depth + 1, config, rng)
    return Internal(feature=f, threshold=threshold, left=left, right=right)


def grow_tree(bootstrap: Dataset, config: TreeConfig, rng: np.random.Generator) -> TreeNode:
    """Grow one unpruned tree from the given (typically bootstrapped) data.

    At each node, `features_per_split` features are drawn without replacement
    and the best of their candidate splits is applied. Growth stops at pure
    nodes, nodes below min_samples_split, the depth cap, or when no split
    improves impurity. Deterministic given the rng state.
    """
    bootstrap.require_labels()
    X = bootstrap.feature_matrix()
    y = bootstrap.label_codes()
    return _grow(X, y, np.arange(len(bootstrap)), 0, config, rng)


def tree_predict(root: TreeNode, sample: WaterSample) -> PollutionLevel:
    """Route the sample to a leaf (left when value <= threshold) and return its majority class."""
    features = sample.features()
    node = root
    while isinstance(node, Internal):
        node = node.left if features[node.feature] <= node.threshold else node.right
    return node.prediction
