from __future__ import annotations

import json

import numpy as np
import pytest

from riverforest import (
    ForestConfig,
    ForestModel,
    TreeConfig,
    derive_seed,
    deserialize_model,
    forest_predict,
    forest_predict_proba,
    generate_synthetic,
    serialize_model,
    train_forest,
    tree_predict,
)
from riverforest.errors import CorruptModel, FormatVersionMismatch, SingleClassDataset
from riverforest.forest import _argmax_level
from riverforest.tree import Internal, Leaf

from .conftest import GREEN, ORANGE, RED, YELLOW, leaf_model, make_dataset, make_sample


class TestDeriveSeed:
    def test_deterministic_and_distinct(self):
        seeds = [derive_seed(42, i) for i in range(1, 200)]
        assert seeds == [derive_seed(42, i) for i in range(1, 200)]
        assert len(set(seeds)) == len(seeds)

    def test_range(self):
        for value in (derive_seed(0, 0), derive_seed(-5, 3), derive_seed(2**63, 10**6)):
            assert 0 <= value < 2**64

    def test_master_seed_matters(self):
        assert derive_seed(1, 1) != derive_seed(2, 1)


class TestTrainForest:
    def test_rejects_single_class(self):
        ds = make_dataset([(4, 7, 3, 30, RED)] * 5)
        with pytest.raises(SingleClassDataset):
            train_forest(ds, ForestConfig(n_trees=3))

    def test_deterministic_serialization(self):
        ds = generate_synthetic(80, seed=1)
        config = ForestConfig(n_trees=8, seed=42)
        assert serialize_model(train_forest(ds, config)) == serialize_model(
            train_forest(ds, config)
        )

    def test_seed_changes_model(self):
        ds = generate_synthetic(80, seed=1)
        a = train_forest(ds, ForestConfig(n_trees=8, seed=1))
        b = train_forest(ds, ForestConfig(n_trees=8, seed=2))
        assert serialize_model(a) != serialize_model(b)

    def test_ensemble_of_one_equals_its_tree(self):
        ds = generate_synthetic(60, seed=3)
        model = train_forest(ds, ForestConfig(n_trees=1, seed=9))
        for row in generate_synthetic(40, seed=4):
            assert forest_predict(model, row.sample) is tree_predict(model.trees[0], row.sample)

    def test_bootstrap_draws_have_input_size(self):
        # Replay the documented per-tree derivation: tree i draws N indices
        # from an rng seeded with derive_seed(config.seed, i).
        ds = generate_synthetic(73, seed=5)
        config = ForestConfig(n_trees=10, seed=42)
        model = train_forest(ds, config)
        assert len(model.trees) == 10
        for i in range(1, 11):
            rng = np.random.Generator(np.random.PCG64(derive_seed(config.seed, i)))
            idx = rng.integers(0, len(ds), size=len(ds))
            assert idx.size == len(ds)

    def test_thread_count_does_not_change_model(self):
        ds = generate_synthetic(100, seed=6)
        config = ForestConfig(n_trees=12, seed=7)
        reference = serialize_model(train_forest(ds, config, n_jobs=1))
        assert serialize_model(train_forest(ds, config, n_jobs=4)) == reference

    def test_class_list_recorded(self):
        ds = generate_synthetic(100, seed=8)
        model = train_forest(ds, ForestConfig(n_trees=2))
        assert model.class_list == ds.class_list

    def test_config_validation(self):
        with pytest.raises(ValueError):
            ForestConfig(n_trees=0)
        with pytest.raises(ValueError):
            TreeConfig(features_per_split=5)
        with pytest.raises(ValueError):
            TreeConfig(min_samples_split=1)


class TestVoting:
    def test_single_tree_distribution(self):
        model = leaf_model([RED])
        dist = forest_predict_proba(model, make_sample())
        assert dist[RED] == 1.0
        assert sum(dist.values()) == 1.0

    def test_hand_counted_votes(self):
        model = leaf_model([RED, RED, ORANGE, YELLOW])
        dist = forest_predict_proba(model, make_sample())
        assert dist == {RED: 0.5, ORANGE: 0.25, YELLOW: 0.25, GREEN: 0.0}

    def test_unanimous(self):
        model = leaf_model([ORANGE, ORANGE, ORANGE])
        dist = forest_predict_proba(model, make_sample())
        assert dist[ORANGE] == 1.0

    def test_tie_breaks_to_higher_severity(self):
        model = leaf_model([RED, ORANGE])
        assert forest_predict(model, make_sample()) is RED
        model2 = leaf_model([GREEN, YELLOW])
        assert forest_predict(model2, make_sample()) is YELLOW

    def test_prediction_attains_max_probability(self):
        ds = generate_synthetic(120, seed=10)
        model = train_forest(ds, ForestConfig(n_trees=25, seed=3))
        for row in generate_synthetic(60, seed=11):
            dist = forest_predict_proba(model, row.sample)
            predicted = forest_predict(model, row.sample)
            assert dist[predicted] == max(dist.values())

    def test_vote_conservation(self):
        ds = generate_synthetic(120, seed=12)
        model = train_forest(ds, ForestConfig(n_trees=25, seed=4))
        for row in generate_synthetic(40, seed=13):
            dist = forest_predict_proba(model, row.sample)
            assert sum(dist.values()) == pytest.approx(1.0, abs=1e-9)
            for value in dist.values():
                assert round(value * 25) == pytest.approx(value * 25, abs=1e-9)

    def test_duplicate_trees_leave_predictions_unchanged(self):
        ds = generate_synthetic(90, seed=14)
        model = train_forest(ds, ForestConfig(n_trees=9, seed=5))
        doubled = ForestModel(
            trees=model.trees * 2, config=model.config, class_list=model.class_list
        )
        for row in generate_synthetic(50, seed=15):
            assert forest_predict(model, row.sample) is forest_predict(doubled, row.sample)
            a = forest_predict_proba(model, row.sample)
            b = forest_predict_proba(doubled, row.sample)
            for level in a:
                assert a[level] == pytest.approx(b[level], abs=1e-12)

    def test_argmax_level_tie_break(self):
        assert _argmax_level({GREEN: 0.5, YELLOW: 0.5, ORANGE: 0.0, RED: 0.0}) is YELLOW
        assert _argmax_level({GREEN: 0.25, YELLOW: 0.25, ORANGE: 0.25, RED: 0.25}) is RED


class TestSerialization:
    def test_round_trip_predictions(self):
        ds = generate_synthetic(100, seed=20)
        model = train_forest(ds, ForestConfig(n_trees=5, seed=1))
        restored = deserialize_model(serialize_model(model))
        for row in generate_synthetic(100, seed=21):
            assert forest_predict(model, row.sample) is forest_predict(restored, row.sample)

    def test_round_trip_is_byte_identical(self):
        ds = generate_synthetic(150, seed=22)
        model = train_forest(ds, ForestConfig(n_trees=10, seed=42))
        payload = serialize_model(model)
        assert serialize_model(deserialize_model(payload)) == payload

    def test_round_trip_structural_equality(self):
        ds = generate_synthetic(60, seed=23)
        model = train_forest(ds, ForestConfig(n_trees=3, seed=2))
        restored = deserialize_model(serialize_model(model))
        assert restored.trees == model.trees
        assert restored.config == model.config
        assert restored.class_list == model.class_list

    def test_schema_shape(self):
        model = leaf_model([RED, YELLOW], seed=7)
        doc = json.loads(serialize_model(model))
        assert doc["format_version"] == 1
        assert doc["features"] == ["do_mg_l", "ph", "bod_mg_l", "tss_mg_l"]
        assert doc["classes"] == ["yellow", "red"]
        assert doc["config"]["n_trees"] == 2
        assert doc["config"]["tree"]["features_per_split"] == 2
        assert doc["trees"][0] == {"leaf": {"red": 1}}

    def test_internal_node_schema(self):
        tree = Internal(feature=2, threshold=7.5, left=Leaf({RED: 12}), right=Leaf({YELLOW: 3}))
        model = ForestModel(
            trees=(tree,),
            config=ForestConfig(n_trees=1),
            class_list=(YELLOW, RED),
        )
        doc = json.loads(serialize_model(model))
        assert doc["trees"][0] == {
            "feature": 2,
            "threshold": 7.5,
            "left": {"leaf": {"red": 12}},
            "right": {"leaf": {"yellow": 3}},
        }

    def test_truncated_payload(self):
        payload = serialize_model(leaf_model([RED, YELLOW]))
        with pytest.raises(CorruptModel):
            deserialize_model(payload[: len(payload) // 2])

    def test_version_mismatch(self):
        doc = json.loads(serialize_model(leaf_model([RED, YELLOW])))
        doc["format_version"] = 99
        with pytest.raises(FormatVersionMismatch):
            deserialize_model(json.dumps(doc))

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d["trees"][0]["leaf"].update({"red": -1}),
            lambda d: d["trees"][0]["leaf"].update({"purple": 1}),
            lambda d: d["trees"][0]["leaf"].clear(),
            lambda d: d.update(features=["a", "b"]),
            lambda d: d.update(classes=["red", "yellow"]),  # wrong severity order
            lambda d: d.update(trees=d["trees"] + [{"leaf": {"red": 1}}]),  # count mismatch
            lambda d: d["trees"].__setitem__(0, {"feature": 9, "threshold": 1.0, "left": {"leaf": {"red": 1}}, "right": {"leaf": {"red": 1}}}),
            lambda d: d["trees"].__setitem__(0, {"feature": 1, "threshold": 1.0, "left": {"leaf": {"red": 1}}}),
            lambda d: d.pop("format_version"),
        ],
    )
    def test_structural_corruption(self, mutate):
        doc = json.loads(serialize_model(leaf_model([RED, YELLOW])))
        mutate(doc)
        with pytest.raises(CorruptModel):
            deserialize_model(json.dumps(doc))

    def test_model_needs_trees(self):
        with pytest.raises(ValueError):
            ForestModel(trees=(), config=ForestConfig(), class_list=(RED, YELLOW))
