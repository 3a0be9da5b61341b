from __future__ import annotations

import pytest

from riverforest import (
    ConfusionMatrix,
    Dataset,
    ForestConfig,
    ForestModel,
    LabeledSample,
    Leaf,
    PollutionLevel,
    TreeConfig,
    WaterSample,
)

GREEN = PollutionLevel.GREEN
YELLOW = PollutionLevel.YELLOW
ORANGE = PollutionLevel.ORANGE
RED = PollutionLevel.RED

#: Reference confusion grid used throughout: rows/cols ordered red, yellow, orange.
FIXTURE_CLASSES = (RED, YELLOW, ORANGE)
FIXTURE_COUNTS = ((324, 5, 6), (8, 50, 1), (18, 1, 60))


@pytest.fixture
def fixture_matrix() -> ConfusionMatrix:
    return ConfusionMatrix(classes=FIXTURE_CLASSES, counts=FIXTURE_COUNTS)


def make_sample(do=7.0, ph=7.0, bod=3.0, tss=30.0, date=None) -> WaterSample:
    return WaterSample(do_mg_l=do, ph=ph, bod_mg_l=bod, tss_mg_l=tss, date=date)


def make_dataset(rows) -> Dataset:
    """rows: iterable of (do, ph, bod, tss, level)."""
    return Dataset(
        tuple(
            LabeledSample(make_sample(do, ph, bod, tss), level)
            for do, ph, bod, tss, level in rows
        )
    )


def leaf_model(levels, **config_kwargs) -> ForestModel:
    """Forest whose trees are single leaves voting for the given levels."""
    trees = tuple(Leaf({level: 1}) for level in levels)
    config = ForestConfig(n_trees=len(trees), tree=TreeConfig(), **config_kwargs)
    return ForestModel(trees=trees, config=config, class_list=tuple(sorted(set(levels))))


def fixture_label_pairs():
    """Expand the reference grid into 473 (truth, prediction) pairs."""
    truths, preds = [], []
    for i, true_level in enumerate(FIXTURE_CLASSES):
        for j, pred_level in enumerate(FIXTURE_CLASSES):
            count = FIXTURE_COUNTS[i][j]
            truths.extend([true_level] * count)
            preds.extend([pred_level] * count)
    return truths, preds
