"""Experiment pipeline orchestration."""
import json
import logging
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from cife.cache.feature_cache import FeatureCache
from cife.core.config import ExperimentConfig
from cife.core.errors import ConfigError, DatasetValidationError, ProbeError
from cife.core.types import (
    LAMBDA_C_GRID,
    EpochMetrics,
    FeatureKind,
    ProbeKind,
    ProbeReport,
    ReplicateSummary,
    Variant,
)
from cife.data.dataset import DomainDataset
from cife.data.generators import FactorizedTaskSpec, MoonsShiftSpec, gen_factorized, gen_moons_shift
from cife.data.io import load_dataset
from cife.models.checkpoint import load_checkpoint
from cife.models.networks import AdaptationModel, ModelSpec, build_model
from cife.probes.adaptability import adaptability
from cife.probes.common import ProbeSettings, extract_features
from cife.probes.divergence import a_distance
from cife.probes.feature_probe import feature_probe
from cife.probes.sweep import lambda_c_sweep
from cife.training.prediction import evaluate_accuracy, predict_target
from cife.training.replicates import run_replicates
from cife.training.trainer import final_eval_seed, train

logger = logging.getLogger(__name__)

DatasetSpec = Union[FactorizedTaskSpec, MoonsShiftSpec]


class ExperimentEngine:
    """
    Runs experiments described by an ExperimentConfig.

    Orchestrates the pipeline:
    Dataset (load or generate) → Build model → Train → Predict → Probe
    """

    def __init__(self, config: ExperimentConfig = ExperimentConfig(), cache_size: int = 32):
        """
        Initialize engine.

        Args:
            config: Experiment configuration
            cache_size: Maximum number of cached feature matrices
        """
        self.config = config
        self.cache = FeatureCache(max_size=cache_size)

    @property
    def config_hash(self) -> str:
        return self.config.config_hash()

    def dataset_spec(self) -> DatasetSpec:
        """Generator spec built from the dataset section."""
        d = self.config.dataset
        try:
            if d.kind == "factorized":
                return FactorizedTaskSpec(
                    num_classes=d.num_classes, input_dim=d.input_dim, class_dim=d.class_dim,
                    nuisance_dim=d.nuisance_dim, noise=d.noise, n_source=d.n_source,
                    n_target=d.n_target, n_test=d.n_test, shift_strength=d.shift_strength,
                    nuisance_offset=d.nuisance_offset, seed=d.seed,
                )
            if d.kind == "moons":
                return MoonsShiftSpec(
                    angle=d.angle, noise=d.noise, n_source=d.n_source, n_target=d.n_target,
                    n_test=d.n_test, seed=d.seed,
                )
        except ValueError as e:
            raise ConfigError(f"invalid dataset spec: {e}") from e
        raise ConfigError(f"unknown dataset kind '{d.kind}' (expected factorized or moons)")

    def generate(self) -> Tuple[DomainDataset, DatasetSpec]:
        spec = self.dataset_spec()
        dataset = gen_factorized(spec) if isinstance(spec, FactorizedTaskSpec) else gen_moons_shift(spec)
        return dataset, spec

    def dataset(self, path: Optional[Union[str, Path]] = None) -> DomainDataset:
        """
        Dataset from ``path``, the configured path, or the configured generator.

        ``path`` may name a dataset file or the JSON manifest written next
        to it by the generate command.
        """
        path = path or self.config.dataset.path
        if not path:
            return self.generate()[0]
        path = Path(path)
        if path.suffix != ".json":
            return load_dataset(path)
        manifest = json.loads(path.read_text())
        ds = load_dataset(path.parent / manifest["dataset_file"])
        if ds.checksum() != manifest.get("dataset_checksum"):
            raise DatasetValidationError(f"dataset checksum does not match manifest {path}")
        return ds

    def model_spec(self) -> ModelSpec:
        m = self.config.model
        try:
            return ModelSpec(
                extractor_hidden=m.extractor_hidden, invariant_dim=m.invariant_dim,
                specific_dim=m.specific_dim, head_hidden=m.head_hidden,
            )
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def build_model(self, ds: DomainDataset) -> AdaptationModel:
        cfg = self.config.train_config()
        return build_model(cfg.variant, ds.input_dim, ds.num_classes, self.model_spec(), seed=cfg.seed)

    def train(
        self,
        ds: DomainDataset,
        on_epoch: Optional[Callable[[EpochMetrics], None]] = None,
    ) -> Tuple[AdaptationModel, List[EpochMetrics]]:
        """Build a fresh model and train it on ``ds``."""
        cfg = self.config.train_config()
        model = self.build_model(ds)
        logger.info("Training %s for %d epochs (config %s)", cfg.variant.value, cfg.epochs, self.config_hash)
        return train(model, ds, cfg, on_epoch)

    def predict(self, model: AdaptationModel, ds: DomainDataset) -> Tuple[np.ndarray, float]:
        """
        Predicted target-test labels and their accuracy.

        Draws use the same seed as the final accuracy recorded by training
        with this configuration.
        """
        cfg = self.config.train_config()
        self._check_dims(model, ds)
        labels = predict_target(
            model, ds.source.features, ds.target_test.features, cfg.prediction_draws, final_eval_seed(cfg),
        )
        return labels, evaluate_accuracy(labels, ds.target_test.labels)

    def probe_settings(self) -> ProbeSettings:
        p = self.config.probes
        try:
            return ProbeSettings(hidden=p.hidden, epochs=p.epochs, batch_size=p.batch_size)
        except ValueError as e:
            raise ConfigError(str(e)) from e

    def probe(
        self,
        checkpoint: Union[str, Path],
        dataset_path: Union[str, Path],
        kinds: Sequence[ProbeKind] = (ProbeKind.ALL,),
    ) -> ProbeReport:
        """
        Run probes on a saved model without modifying it.

        Feature matrices are served from the feature cache, so a probe run
        with several kinds extracts each matrix once.

        Raises:
            ProbeError: If the checkpoint and dataset widths differ
        """
        model, _ = load_checkpoint(checkpoint)
        ds = self.dataset(dataset_path)
        self._check_dims(model, ds)
        kinds = set(kinds)
        if ProbeKind.ALL in kinds:
            kinds = {ProbeKind.A_DISTANCE, ProbeKind.ADAPTABILITY, ProbeKind.FEATURES}

        sources = [str(checkpoint), str(dataset_path)]

        def features(kind: FeatureKind, split: str) -> np.ndarray:
            x = {
                "source": ds.source.features,
                "target": ds.target_train.features,
                "test": ds.target_test.features,
            }[split]
            return self.cache.get_or_compute(
                str(checkpoint), str(dataset_path), kind.value, split,
                lambda: extract_features(model, x, kind), sources,
            )

        settings = self.probe_settings()
        seed = self.config.probes.seed
        report = ProbeReport()
        if ProbeKind.A_DISTANCE in kinds:
            epsilon, _ = a_distance(
                features(FeatureKind.INVARIANT, "source"), features(FeatureKind.INVARIANT, "target"),
                seed, settings,
            )
            report = report.merge(ProbeReport(epsilon=epsilon))
        if ProbeKind.ADAPTABILITY in kinds:
            if ds.withheld_target_labels is not None:
                target_split, target_labels = "target", ds.withheld_target_labels
            else:
                target_split, target_labels = "test", ds.target_test.labels
            err_s, err_t, _ = adaptability(
                features(FeatureKind.CLASSIFIER_INPUT, "source"), ds.source.labels,
                features(FeatureKind.CLASSIFIER_INPUT, target_split), target_labels,
                ds.num_classes, seed, settings,
            )
            report = report.merge(ProbeReport(
                joint_error_source=err_s, joint_error_target=err_t, joint_error_sum=err_s + err_t,
            ))
        if ProbeKind.FEATURES in kinds:
            report = report.merge(self._feature_probes(model, ds, features, seed, settings))
        logger.info("Probe report for %s: %s", checkpoint, report.to_record())
        return report

    def _feature_probes(self, model, ds, features, seed, settings) -> ProbeReport:
        invariant_s = features(FeatureKind.INVARIANT, "source")
        invariant_t = features(FeatureKind.INVARIANT, "target")
        domains = np.concatenate([np.zeros(len(invariant_s), dtype=np.int64), np.ones(len(invariant_t), dtype=np.int64)])
        category_on_specific = None
        if model.has_specific_features:
            category_on_specific = feature_probe(features(FeatureKind.SPECIFIC, "source"), ds.source.labels, seed, settings)
        return ProbeReport(
            category_on_specific=category_on_specific,
            category_on_invariant=feature_probe(invariant_s, ds.source.labels, seed, settings),
            domain_on_invariant=feature_probe(np.concatenate([invariant_s, invariant_t]), domains, seed, settings),
        )

    def sweep(self, ds: DomainDataset, grid: Sequence[float] = LAMBDA_C_GRID) -> ProbeReport:
        """λ_c sensitivity of the configured variant as a report carrying the per-λ_c table."""
        t = self.config.train
        rows = lambda_c_sweep(ds, self.config.train_config(), grid, t.n_runs, self.model_spec(), t.workers)
        return ProbeReport(lambda_c_table=rows)

    def compare(self, ds: DomainDataset, variants: Sequence[Variant]) -> Dict[Variant, ReplicateSummary]:
        """Replicate runs of each variant on one shared dataset."""
        base = self.config.train_config()
        t = self.config.train
        results = {}
        for variant in variants:
            results[variant] = run_replicates(base.with_variant(variant), ds, t.n_runs, self.model_spec(), t.workers)
            logger.info("%s: %s", variant.value, results[variant].summary())
        return results

    def manifest(self, **extra) -> Dict:
        """Record embedded in every output: config hash, seed and full config."""
        record = {
            "config_hash": self.config_hash,
            "seed": self.config.train.seed,
            "config": self.config.to_text(),
        }
        record.update(extra)
        return record

    def cache_stats(self) -> Dict:
        return self.cache.stats()

    @staticmethod
    def _check_dims(model: AdaptationModel, ds: DomainDataset):
        if model.input_dim != ds.input_dim:
            raise ProbeError(f"model input width {model.input_dim} does not match dataset width {ds.input_dim}")
        if model.num_classes != ds.num_classes:
            raise ProbeError(f"model predicts {model.num_classes} classes but dataset has {ds.num_classes}")
