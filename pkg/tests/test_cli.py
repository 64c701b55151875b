import json

import numpy as np
import pandas as pd
import pytest
from click.testing import CliRunner

from cife.cli.main import cli
from cife.core.types import Variant
from cife.models.checkpoint import load_checkpoint
from cife.models.networks import ModelSpec, build_model


def settings(**extra):
    values = {
        "dataset.num_classes": 3, "dataset.input_dim": 6, "dataset.class_dim": 2, "dataset.nuisance_dim": 2,
        "dataset.noise": 0.2, "dataset.n_source": 48, "dataset.n_target": 40, "dataset.n_test": 24,
        "model.extractor_hidden": 8, "model.invariant_dim": 4, "model.specific_dim": 3, "model.head_hidden": 5,
        "train.epochs": 2, "train.batch_size": 16,
        "probes.hidden": 8, "probes.epochs": 3, "probes.batch_size": 16,
    }
    values.update(extra)
    args = []
    for key, value in values.items():
        args += ["--set", f"{key}={value}"]
    return args


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def dataset(runner, tmp_path):
    path = tmp_path / "data" / "task.cds"
    result = runner.invoke(cli, ["generate", "-o", str(path), *settings()])
    assert result.exit_code == 0, result.output
    return path


@pytest.fixture
def trained(runner, tmp_path, dataset):
    out = tmp_path / "run"
    result = runner.invoke(cli, ["train", "-d", str(dataset), "-o", str(out), *settings()])
    assert result.exit_code == 0, result.output
    return out


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


class TestGenerate:
    def test_writes_dataset_and_manifest(self, dataset):
        manifest = json.loads(dataset.with_name("task.cds.manifest.json").read_text())
        assert manifest["dataset_file"] == "task.cds"
        assert manifest["spec"]["kind"] == "factorized"
        assert len(manifest["config_hash"]) == 16
        assert manifest["seed"] == 0

    def test_reruns_are_byte_identical(self, runner, tmp_path):
        paths = [tmp_path / name / "task.cds" for name in ("a", "b")]
        for path in paths:
            assert runner.invoke(cli, ["generate", "-o", str(path), *settings()]).exit_code == 0
        assert paths[0].read_bytes() == paths[1].read_bytes()
        manifests = [p.with_name("task.cds.manifest.json").read_bytes() for p in paths]
        assert manifests[0] == manifests[1]

    def test_moons(self, runner, tmp_path):
        path = tmp_path / "moons.cds"
        result = runner.invoke(cli, ["generate", "-o", str(path), "--kind", "moons", "--set", "dataset.angle=45"])
        assert result.exit_code == 0, result.output
        assert json.loads(path.with_name("moons.cds.manifest.json").read_text())["spec"]["angle"] == 45.0

    def test_missing_out_is_usage_error(self, runner):
        assert runner.invoke(cli, ["generate"]).exit_code == 2

    def test_unknown_key_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(cli, ["generate", "-o", str(tmp_path / "x.cds"), "--set", "train.nope=1"])
        assert result.exit_code == 2
        assert "train.nope" in result.output

    def test_invalid_spec_is_usage_error(self, runner, tmp_path):
        result = runner.invoke(cli, ["generate", "-o", str(tmp_path / "x.cds"), "--set", "dataset.noise=-1"])
        assert result.exit_code == 2


class TestTrain:
    def test_outputs(self, trained):
        records = read_jsonl(trained / "metrics.jsonl")
        assert [r["event"] for r in records] == ["epoch", "epoch", "final"]
        assert [r["epoch"] for r in records[:2]] == [0, 1]
        assert len({r["config_hash"] for r in records}) == 1
        assert all(r["seed"] == 0 for r in records)
        assert 0.0 <= records[-1]["target_accuracy"] <= 1.0
        model, meta = load_checkpoint(trained / "checkpoint.json")
        assert model.variant is Variant.CIFE_DANN
        assert meta["config_hash"] == records[0]["config_hash"]

    def test_accepts_manifest(self, runner, tmp_path, dataset):
        out = tmp_path / "via-manifest"
        manifest = dataset.with_name("task.cds.manifest.json")
        result = runner.invoke(cli, ["train", "-d", str(manifest), "-o", str(out), *settings()])
        assert result.exit_code == 0, result.output

    def test_tampered_manifest_checksum(self, runner, tmp_path, dataset):
        manifest = dataset.with_name("task.cds.manifest.json")
        record = json.loads(manifest.read_text())
        record["dataset_checksum"] = "0" * 64
        manifest.write_text(json.dumps(record))
        result = runner.invoke(cli, ["train", "-d", str(manifest), "-o", str(tmp_path / "r"), *settings()])
        assert result.exit_code == 1

    def test_rerun_is_byte_identical(self, runner, dataset, trained):
        metrics = (trained / "metrics.jsonl").read_bytes()
        checkpoint = (trained / "checkpoint.json").read_bytes()
        result = runner.invoke(cli, ["train", "-d", str(dataset), "-o", str(trained), *settings()])
        assert result.exit_code == 0, result.output
        assert (trained / "metrics.jsonl").read_bytes() == metrics
        assert (trained / "checkpoint.json").read_bytes() == checkpoint

    def test_zero_epochs_saves_initialization(self, runner, tmp_path, dataset):
        out = tmp_path / "init"
        result = runner.invoke(cli, ["train", "-d", str(dataset), "-o", str(out), "--epochs", "0", *settings()])
        assert result.exit_code == 0, result.output
        model, _ = load_checkpoint(out / "checkpoint.json")
        spec = ModelSpec(extractor_hidden=(8,), invariant_dim=4, specific_dim=3, head_hidden=5)
        assert model.checksum() == build_model(Variant.CIFE_DANN, 6, 3, spec, seed=0).checksum()
        assert [r["event"] for r in read_jsonl(out / "metrics.jsonl")] == ["final"]

    def test_flags_override_settings(self, runner, tmp_path, dataset):
        out = tmp_path / "dann"
        args = ["train", "-d", str(dataset), "-o", str(out), *settings(), "--variant", "dann", "--seed", "5"]
        assert runner.invoke(cli, args).exit_code == 0
        model, meta = load_checkpoint(out / "checkpoint.json")
        assert model.variant is Variant.DANN
        assert meta["seed"] == 5

    def test_off_grid_lambda_is_usage_error(self, runner, tmp_path, dataset):
        args = ["train", "-d", str(dataset), "-o", str(tmp_path / "r"), *settings(), "--lambda-c", "0.5"]
        assert runner.invoke(cli, args).exit_code == 2


class TestPredict:
    def test_predictions(self, runner, tmp_path, dataset, trained):
        out = tmp_path / "pred.csv"
        args = ["predict", "-k", str(trained / "checkpoint.json"), "-d", str(dataset), "-o", str(out)]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["index", "label", "prediction"]
        assert len(frame) == 24
        manifest = json.loads(out.with_name("pred.csv.manifest.json").read_text())
        assert manifest["accuracy"] == pytest.approx(np.mean(frame["label"] == frame["prediction"]))
        assert manifest["seed"] == 0
        assert manifest["accuracy"] == read_jsonl(trained / "metrics.jsonl")[-1]["target_accuracy"]

    def test_repeatable(self, runner, tmp_path, dataset, trained):
        outputs = []
        for name in ("a.csv", "b.csv"):
            out = tmp_path / name
            runner.invoke(cli, ["predict", "-k", str(trained / "checkpoint.json"), "-d", str(dataset), "-o", str(out)])
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


class TestProbe:
    def test_a_distance(self, runner, tmp_path, dataset, trained):
        checkpoint = trained / "checkpoint.json"
        before = checkpoint.read_bytes()
        out = tmp_path / "a.json"
        args = ["probe", "-k", str(checkpoint), "-d", str(dataset), "--kind", "a-distance", "-o", str(out), *settings()]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())["report"]
        assert 0.0 <= report["d_a"] <= 2.0
        assert report["d_a"] == pytest.approx(2.0 * (1.0 - 2.0 * report["epsilon"]))
        assert "d_A" in result.output
        assert checkpoint.read_bytes() == before

    def test_adaptability(self, runner, tmp_path, dataset, trained):
        out = tmp_path / "adapt.json"
        args = ["probe", "-k", str(trained / "checkpoint.json"), "-d", str(dataset),
                "--kind", "adaptability", "-o", str(out), *settings()]
        assert runner.invoke(cli, args).exit_code == 0
        report = json.loads(out.read_text())["report"]
        assert set(report) == {"joint_error_source", "joint_error_target", "joint_error_sum"}

    def test_all(self, runner, tmp_path, dataset, trained):
        out = tmp_path / "all.json"
        args = ["probe", "-k", str(trained / "checkpoint.json"), "-d", str(dataset), "--kind", "all",
                "-o", str(out), *settings()]
        assert runner.invoke(cli, args).exit_code == 0
        report = json.loads(out.read_text())["report"]
        for key in ("epsilon", "d_a", "joint_error_sum", "category_on_specific", "domain_on_invariant"):
            assert key in report

    def test_kind_defaults_to_configured_kinds(self, runner, tmp_path, dataset, trained):
        out = tmp_path / "configured.json"
        args = ["probe", "-k", str(trained / "checkpoint.json"), "-d", str(dataset), "-o", str(out),
                *settings(**{"probes.kinds": "adaptability"})]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        written = json.loads(out.read_text())
        assert set(written["report"]) == {"joint_error_source", "joint_error_target", "joint_error_sum"}
        assert written["kind"] == "adaptability"

    def test_kind_option_overrides_config(self, runner, tmp_path, dataset, trained):
        out = tmp_path / "explicit.json"
        args = ["probe", "-k", str(trained / "checkpoint.json"), "-d", str(dataset), "--kind", "a-distance",
                "-o", str(out), *settings(**{"probes.kinds": "adaptability"})]
        assert runner.invoke(cli, args).exit_code == 0
        assert set(json.loads(out.read_text())["report"]) == {"epsilon", "d_a"}

    def test_dimension_mismatch(self, runner, tmp_path, trained):
        wide = tmp_path / "wide.cds"
        assert runner.invoke(cli, ["generate", "-o", str(wide), *settings(**{"dataset.input_dim": 8})]).exit_code == 0
        args = ["probe", "-k", str(trained / "checkpoint.json"), "-d", str(wide), "-o", str(tmp_path / "p.json")]
        result = runner.invoke(cli, args)
        assert result.exit_code == 1
        assert "width 6" in result.output and "width 8" in result.output


class TestSweep:
    def test_default_grid(self, runner, tmp_path, dataset):
        out = tmp_path / "sweep.csv"
        args = ["sweep", "-d", str(dataset), "--runs", "1", "-o", str(out), *settings(**{"train.epochs": 1})]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        lines = out.read_text().splitlines()
        assert lines[0] == "lambda_c,mean_acc,std_acc"
        frame = pd.read_csv(out)
        assert frame["lambda_c"].tolist() == pytest.approx([0.0001, 0.001, 0.01, 0.1, 1.0])
        assert (frame["std_acc"] == 0.0).all()
        manifest = json.loads(out.with_name("sweep.csv.manifest.json").read_text())
        assert len(manifest["config_hash"]) == 16
        table = manifest["report"]["lambda_c_table"]
        assert [row["lambda_c"] for row in table] == frame["lambda_c"].tolist()
        assert [row["mean_acc"] for row in table] == pytest.approx(frame["mean_acc"].tolist())

    def test_off_grid_value_needs_opt_in(self, runner, tmp_path, dataset):
        args = ["sweep", "-d", str(dataset), "--grid", "0.5", "-o", str(tmp_path / "s.csv"), *settings()]
        assert runner.invoke(cli, args).exit_code == 2

    def test_malformed_grid(self, runner, tmp_path, dataset):
        args = ["sweep", "-d", str(dataset), "--grid", "0.1,abc", "-o", str(tmp_path / "s.csv")]
        assert runner.invoke(cli, args).exit_code == 2


class TestCompare:
    def test_rows_share_dataset(self, runner, tmp_path, dataset):
        out = tmp_path / "compare.json"
        args = ["compare", "-d", str(dataset), "--variants", "source-only,dann", "--runs", "1", "-o", str(out),
                *settings(**{"train.epochs": 1})]
        result = runner.invoke(cli, args)
        assert result.exit_code == 0, result.output
        record = json.loads(out.read_text())
        assert [row["variant"] for row in record["rows"]] == ["source-only", "dann"]
        assert {row["dataset_checksum"] for row in record["rows"]} == {record["dataset_checksum"]}
        assert all(row["std"] == 0.0 and len(row["seeds"]) == 1 for row in record["rows"])

    def test_unknown_variant(self, runner, tmp_path, dataset):
        args = ["compare", "-d", str(dataset), "--variants", "dann,resnet", "-o", str(tmp_path / "c.json")]
        assert runner.invoke(cli, args).exit_code == 2


def test_version(runner):
    result = runner.invoke(cli, ["--version"])
    assert result.exit_code == 0
    assert "0.1.0" in result.output
