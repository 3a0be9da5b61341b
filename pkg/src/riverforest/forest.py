"""Bootstrap-aggregated tree ensembles: training, voting, JSON persistence."""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Union

import numpy as np

from .data import FEATURE_NAMES, Dataset, PollutionLevel, WaterSample
from .errors import CorruptModel, FormatVersionMismatch, SingleClassDataset
from .tree import Internal, Leaf, TreeConfig, TreeNode, _grow, tree_predict

FORMAT_VERSION = 1

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def derive_seed(master: int, index: int) -> int:
    """Mix (master seed, task index) into an independent 64-bit seed.

    SplitMix64-style avalanche over master XOR golden-ratio-scaled index;
    gives order- and thread-independent per-tree / per-fold streams.
    """
    z = ((master & _MASK64) ^ ((index * _GOLDEN) & _MASK64)) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class ForestConfig:
    """Ensemble size, per-tree growth parameters, and the master seed."""

    n_trees: int = 100
    tree: TreeConfig = TreeConfig()
    seed: int = 42

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be at least 1")
        if not isinstance(self.tree, TreeConfig):
            raise ValueError("tree must be a TreeConfig")


@dataclass(frozen=True)
class ForestModel:
    """Trained ensemble plus the configuration and class list it was built with."""

    trees: tuple[TreeNode, ...]
    config: ForestConfig
    class_list: tuple[PollutionLevel, ...]
    format_version: int = FORMAT_VERSION

    def __post_init__(self) -> None:
        if not self.trees:
            raise ValueError("a model needs at least one tree")
        object.__setattr__(self, "trees", tuple(self.trees))
        object.__setattr__(self, "class_list", tuple(self.class_list))


def train_forest(dataset: Dataset, config: ForestConfig, n_jobs: int = 1) -> ForestModel:
    """Train n_trees unpruned trees, one bootstrap sample each.

    Tree i (1-based) uses an rng seeded with derive_seed(config.seed, i) for
    both its bootstrap draw and its per-node feature subsets, so the model is
    identical for identical inputs no matter how many workers run the loop.
    """
    dataset.require_labels()
    classes = dataset.class_list
    if len(classes) < 2:
        only = classes[0].label if classes else "none"
        raise SingleClassDataset(
            f"training data contains a single class ({only}); nothing to learn"
        )
    X = dataset.feature_matrix()
    y = dataset.label_codes()
    n = len(dataset)

    def build(i: int) -> TreeNode:
        rng = np.random.Generator(np.random.PCG64(derive_seed(config.seed, i)))
        idx = rng.integers(0, n, size=n)
        return _grow(X, y, idx, 0, config.tree, rng)

    indices = range(1, config.n_trees + 1)
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = tuple(pool.map(build, indices))
    else:
        trees = tuple(build(i) for i in indices)
    return ForestModel(trees=trees, config=config, class_list=classes)


def _argmax_level(distribution: Mapping[PollutionLevel, float]) -> PollutionLevel:
    """Highest-probability level; ties resolve toward higher severity."""
    return max(distribution, key=lambda level: (distribution[level], int(level)))


def forest_predict_proba(model: ForestModel, sample: WaterSample) -> dict[PollutionLevel, float]:
    """Fraction of trees voting for each level (all four levels, zeros included)."""
    votes = {level: 0 for level in PollutionLevel}
    for tree in model.trees:
        votes[tree_predict(tree, sample)] += 1
    b = len(model.trees)
    return {level: count / b for level, count in votes.items()}


def forest_predict(model: ForestModel, sample: WaterSample) -> PollutionLevel:
    """Majority vote over the ensemble; ties resolve toward higher severity."""
    return _argmax_level(forest_predict_proba(model, sample))


# -- persistence ---------------------------------------------------------------

def _node_to_obj(node: TreeNode, class_order: tuple[PollutionLevel, ...]):
    if isinstance(node, Leaf):
        counts = {
            level.label: node.class_counts[level]
            for level in class_order
            if level in node.class_counts
        }
        return {"leaf": counts}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "left": _node_to_obj(node.left, class_order),
        "right": _node_to_obj(node.right, class_order),
    }


def serialize_model(model: ForestModel) -> bytes:
    """Deterministic UTF-8 JSON for the model; thresholds keep full precision."""
    doc = {
        "format_version": model.format_version,
        "config": {
            "n_trees": model.config.n_trees,
            "seed": model.config.seed,
            "tree": {
                "features_per_split": model.config.tree.features_per_split,
                "min_samples_split": model.config.tree.min_samples_split,
                "max_depth": model.config.tree.max_depth,
            },
        },
        "classes": [level.label for level in model.class_list],
        "features": list(FEATURE_NAMES),
        "trees": [_node_to_obj(tree, model.class_list) for tree in model.trees],
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise CorruptModel(message)


def _node_from_obj(obj, classes: frozenset[PollutionLevel]) -> TreeNode:
    _require(isinstance(obj, dict), "tree node must be an object")
    if "leaf" in obj:
        _require(set(obj) == {"leaf"}, f"leaf node has extra keys: {sorted(obj)}")
        raw = obj["leaf"]
        _require(isinstance(raw, dict) and raw, "leaf must carry a non-empty count map")
        counts: dict[PollutionLevel, int] = {}
        for name, count in raw.items():
            try:
                level = PollutionLevel.parse(str(name))
            except Exception:
                raise CorruptModel(f"leaf references unknown class {name!r}") from None
            _require(level in classes, f"leaf class {name!r} not in the model class list")
            _require(
                isinstance(count, int) and not isinstance(count, bool) and count >= 0,
                f"leaf count for {name!r} must be a non-negative integer",
            )
            counts[level] = count
        _require(any(c > 0 for c in counts.values()), "leaf has no positive count")
        return Leaf({level: c for level, c in counts.items() if c > 0})

    _require(
        set(obj) == {"feature", "threshold", "left", "right"},
        f"internal node must have feature/threshold/left/right, got {sorted(obj)}",
    )
    feature = obj["feature"]
    _require(
        isinstance(feature, int) and not isinstance(feature, bool) and 0 <= feature < len(FEATURE_NAMES),
        f"feature index out of range: {feature!r}",
    )
    threshold = obj["threshold"]
    _require(
        isinstance(threshold, (int, float)) and not isinstance(threshold, bool) and math.isfinite(threshold),
        f"threshold must be a finite number: {threshold!r}",
    )
    left = _node_from_obj(obj["left"], classes)
    right = _node_from_obj(obj["right"], classes)
    return Internal(feature=feature, threshold=float(threshold), left=left, right=right)


def deserialize_model(data: Union[bytes, str]) -> ForestModel:
    """Parse and validate a serialized model; inverse of serialize_model.

    Raises FormatVersionMismatch for an unsupported format_version and
    CorruptModel for anything structurally wrong (truncated data, dangling
    nodes, negative counts, unknown classes, mismatched tree count).
    """
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptModel(f"model is not valid JSON: {exc}") from None
    _require(isinstance(doc, dict), "model document must be a JSON object")

    version = doc.get("format_version")
    _require(version is not None, "model lacks format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"unsupported format_version {version!r}; this build reads {FORMAT_VERSION}"
        )

    _require(doc.get("features") == list(FEATURE_NAMES), "unexpected feature list")

    raw_classes = doc.get("classes")
    _require(
        isinstance(raw_classes, list) and raw_classes, "model lacks a class list"
    )
    try:
        class_list = tuple(PollutionLevel.parse(str(name)) for name in raw_classes)
    except Exception:
        raise CorruptModel(f"unknown class name in {raw_classes!r}") from None
    _require(
        list(class_list) == sorted(set(class_list)),
        "class list must be distinct and in severity order",
    )

    raw_config = doc.get("config")
    _require(isinstance(raw_config, dict), "model lacks a config object")
    raw_tree = raw_config.get("tree")
    _require(isinstance(raw_tree, dict), "config lacks a tree object")
    try:
        config = ForestConfig(
            n_trees=raw_config["n_trees"],
            seed=raw_config["seed"],
            tree=TreeConfig(
                features_per_split=raw_tree["features_per_split"],
                min_samples_split=raw_tree["min_samples_split"],
                max_depth=raw_tree["max_depth"],
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"invalid config: {exc}") from None

    raw_trees = doc.get("trees")
    _require(isinstance(raw_trees, list), "model lacks a tree list")
    _require(
        len(raw_trees) == config.n_trees,
        f"config says {config.n_trees} trees but document has {len(raw_trees)}",
    )
    allowed = frozenset(class_list)
    trees = tuple(_node_from_obj(node, allowed) for node in raw_trees)
    return ForestModel(trees=trees, config=config, class_list=class_list)
