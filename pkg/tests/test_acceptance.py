"""
Orderings on the default factorized task (K=4, σ=0.25, 2000/2000 rows).

Each test trains full-size models; run with ``pytest --runslow``.
"""
import numpy as np
import pytest

from cife.core.types import LAMBDA_C_GRID, FeatureKind, TrainConfig, Variant
from cife.data.generators import FactorizedTaskSpec, gen_factorized
from cife.models.networks import build_model
from cife.probes import a_distance, adaptability, extract_features, feature_probe, lambda_c_sweep
from cife.probes import read_sweep_csv, write_sweep_csv
from cife.training.trainer import final_target_accuracy, train

pytestmark = pytest.mark.slow

SEEDS = (0, 1, 2)
VARIANTS = (Variant.SOURCE_ONLY, Variant.DANN, Variant.CIFE_DANN)


@pytest.fixture(scope="module")
def default_task():
    return gen_factorized(FactorizedTaskSpec())


@pytest.fixture(scope="module")
def runs(default_task):
    """variant -> [(model, target accuracy)] over SEEDS."""
    results = {}
    for variant in VARIANTS:
        results[variant] = []
        for seed in SEEDS:
            cfg = TrainConfig(variant=variant, seed=seed)
            model = build_model(variant, default_task.input_dim, default_task.num_classes, seed=seed)
            model, _ = train(model, default_task, cfg)
            results[variant].append((model, final_target_accuracy(model, default_task, cfg)))
    return results


def mean_accuracy(runs, variant):
    return float(np.mean([accuracy for _, accuracy in runs[variant]]))


def test_improvement_ordering(runs):
    source_only = mean_accuracy(runs, Variant.SOURCE_ONLY)
    dann = mean_accuracy(runs, Variant.DANN)
    cife = mean_accuracy(runs, Variant.CIFE_DANN)
    assert cife >= dann >= source_only
    assert cife - source_only >= 0.03


def test_a_distance_ordering(runs, default_task):
    def d_a(variant):
        model = runs[variant][0][0]
        fs = extract_features(model, default_task.source.features, FeatureKind.INVARIANT)
        ft = extract_features(model, default_task.target_train.features, FeatureKind.INVARIANT)
        return a_distance(fs, ft, seed=0)[1]

    dann, cife = d_a(Variant.DANN), d_a(Variant.CIFE_DANN)
    assert dann < d_a(Variant.SOURCE_ONLY)
    assert abs(cife - dann) < 0.4


def test_adaptability_ordering(runs, default_task):
    def joint_error(variant):
        sums = []
        for model, _ in runs[variant]:
            fs = extract_features(model, default_task.source.features, FeatureKind.CLASSIFIER_INPUT)
            ft = extract_features(model, default_task.target_train.features, FeatureKind.CLASSIFIER_INPUT)
            sums.append(adaptability(
                fs, default_task.source.labels, ft, default_task.withheld_target_labels, default_task.num_classes,
            )[2])
        return float(np.mean(sums))

    assert joint_error(Variant.CIFE_DANN) < joint_error(Variant.DANN)


def test_specific_features_carry_less_category(runs, default_task):
    model = runs[Variant.CIFE_DANN][0][0]
    chance = 1.0 / default_task.num_classes
    x, y = default_task.source.features, default_task.source.labels
    on_specific = feature_probe(extract_features(model, x, FeatureKind.SPECIFIC), y)
    on_invariant = feature_probe(extract_features(model, x, FeatureKind.INVARIANT), y)
    assert abs(on_specific - chance) + 0.1 <= abs(on_invariant - chance)


def test_lambda_c_sweep(default_task, tmp_path):
    rows = lambda_c_sweep(default_task, TrainConfig(variant=Variant.CIFE_DANN), LAMBDA_C_GRID, n_runs=1)
    path = write_sweep_csv(rows, tmp_path / "sweep.csv")
    assert read_sweep_csv(path) == rows
    assert [row.lambda_c for row in rows] == list(LAMBDA_C_GRID)
    smallest = next(row for row in rows if row.lambda_c == 0.0001)
    assert max(row.mean_acc for row in rows) >= smallest.mean_acc
