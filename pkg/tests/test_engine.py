import pytest

from cife.core.config import parse_config_text
from cife.core.errors import ConfigError, ProbeError
from cife.core.types import ProbeKind, Variant
from cife.data.generators import FactorizedTaskSpec, MoonsShiftSpec
from cife.data.io import save_dataset
from cife.engine import ExperimentEngine
from cife.models.checkpoint import save_checkpoint

TINY = """
dataset.num_classes=3
dataset.input_dim=6
dataset.class_dim=2
dataset.nuisance_dim=2
dataset.n_source=48
dataset.n_target=40
dataset.n_test=24
model.extractor_hidden=8
model.invariant_dim=4
model.specific_dim=3
model.head_hidden=5
train.epochs=1
train.batch_size=16
probes.hidden=8
probes.epochs=3
probes.batch_size=16
"""


@pytest.fixture
def engine():
    return ExperimentEngine(parse_config_text(TINY))


class TestDataset:
    def test_spec_from_config(self, engine):
        spec = engine.dataset_spec()
        assert isinstance(spec, FactorizedTaskSpec)
        assert (spec.num_classes, spec.input_dim, spec.n_source) == (3, 6, 48)

    def test_moons_spec(self):
        spec = ExperimentEngine(parse_config_text("dataset.kind=moons\ndataset.angle=15")).dataset_spec()
        assert isinstance(spec, MoonsShiftSpec)
        assert spec.angle == 15.0

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            ExperimentEngine(parse_config_text("dataset.kind=spirals")).dataset_spec()

    def test_generated_when_no_path(self, engine):
        assert engine.dataset().equals(engine.generate()[0])

    def test_loaded_from_file(self, engine, tmp_path):
        ds = engine.generate()[0]
        path = save_dataset(tmp_path / "task.cds", ds)
        assert engine.dataset(path).equals(ds)


class TestPipeline:
    def test_train_and_predict(self, engine):
        ds = engine.generate()[0]
        model, metrics = engine.train(ds)
        assert model.variant is Variant.CIFE_DANN
        assert len(metrics) == 1
        labels, accuracy = engine.predict(model, ds)
        assert labels.shape == (24,)
        assert 0.0 <= accuracy <= 1.0

    def test_probe_reuses_cached_features(self, engine, tmp_path):
        ds = engine.generate()[0]
        data_path = save_dataset(tmp_path / "task.cds", ds)
        model, _ = engine.train(ds)
        checkpoint = save_checkpoint(tmp_path / "checkpoint.json", model, engine.config.train_config())
        first = engine.probe(checkpoint, data_path, [ProbeKind.A_DISTANCE])
        misses = engine.cache_stats()["misses"]
        second = engine.probe(checkpoint, data_path, [ProbeKind.A_DISTANCE])
        assert engine.cache_stats()["misses"] == misses
        assert engine.cache_stats()["hits"] >= 2
        assert first.epsilon == second.epsilon

    def test_feature_cache_is_per_dataset(self, engine, tmp_path):
        ds = engine.generate()[0]
        other = ExperimentEngine(parse_config_text(TINY + "dataset.seed=5\n")).generate()[0]
        first_path = save_dataset(tmp_path / "first.cds", ds)
        other_path = save_dataset(tmp_path / "other.cds", other)
        model, _ = engine.train(ds)
        checkpoint = save_checkpoint(tmp_path / "checkpoint.json", model, engine.config.train_config())
        engine.probe(checkpoint, first_path, [ProbeKind.A_DISTANCE])
        misses = engine.cache_stats()["misses"]
        engine.probe(checkpoint, other_path, [ProbeKind.A_DISTANCE])
        assert engine.cache_stats()["misses"] == misses + 2
        assert engine.cache_stats()["hits"] == 0

    def test_dimension_mismatch(self, engine):
        ds = engine.generate()[0]
        model, _ = engine.train(ds)
        wide = ExperimentEngine(parse_config_text(TINY + "dataset.input_dim=8\n")).generate()[0]
        with pytest.raises(ProbeError, match="6.*8"):
            engine.predict(model, wide)

    def test_compare_shares_seeds(self, engine):
        ds = engine.generate()[0]
        results = engine.compare(ds, [Variant.SOURCE_ONLY, Variant.DANN])
        assert list(results) == [Variant.SOURCE_ONLY, Variant.DANN]
        assert results[Variant.SOURCE_ONLY].seeds == results[Variant.DANN].seeds == (0, 1, 2)

    def test_sweep_report_carries_table(self, engine):
        ds = engine.generate()[0]
        report = engine.sweep(ds, [0.1, 0.001])
        assert [row.lambda_c for row in report.lambda_c_table] == [0.001, 0.1]
        assert report.epsilon is None
        assert set(report.to_record()) == {"lambda_c_table"}

    def test_manifest(self, engine):
        record = engine.manifest(kind="a-distance")
        assert record["config_hash"] == engine.config_hash
        assert record["seed"] == 0
        assert record["kind"] == "a-distance"
        assert parse_config_text(record["config"]) == engine.config
