import numpy as np
import pytest

from cife.autodiff import ops
from cife.autodiff.tensor import Tape, Tensor, backward
from cife.core.errors import DomainError, ShapeError, TrainingDivergedError
from cife.core.types import TrainConfig, UpdateMode, Variant
from cife.data.generators import FactorizedTaskSpec, gen_factorized
from cife.data.sampling import batch_iter
from cife.models.networks import build_model
from cife.models.objectives import Coupling, forward_predict_concat, loss_domain
from cife.nn.schedules import lambda_d_schedule, lr_schedule
from cife.training import trainer as trainer_module
from cife.training.prediction import evaluate_accuracy, predict_proba_target, predict_target
from cife.training.replicates import run_replicates, summarize
from cife.training.trainer import Trainer, final_target_accuracy, train


def quick_config(variant=Variant.CIFE_DANN, **overrides):
    values = {"variant": variant, "epochs": 2, "batch_size": 16, "seed": 0}
    values.update(overrides)
    return TrainConfig(**values)


def snapshot(model):
    return {name: p.data.copy() for name, p in model.named_parameters().items()}


class TestTraining:
    def test_zero_epochs_leaves_model_untouched(self, make_model, tiny_dataset):
        model = make_model()
        before = model.checksum()
        model, metrics = train(model, tiny_dataset, quick_config(epochs=0))
        assert metrics == []
        assert model.checksum() == before

    @pytest.mark.parametrize("mode", list(UpdateMode))
    def test_same_seed_same_run(self, make_model, tiny_dataset, mode):
        cfg = quick_config(update_mode=mode)
        a, metrics_a = train(make_model(), tiny_dataset, cfg)
        b, metrics_b = train(make_model(), tiny_dataset, cfg)
        assert metrics_a == metrics_b
        assert a.checksum() == b.checksum()

    def test_schedules_advance_per_batch(self, make_model, tiny_dataset):
        # 40 target rows at N=16 give two batches per epoch
        _, metrics = train(make_model(), tiny_dataset, quick_config(epochs=3))
        assert [m.epoch for m in metrics] == [0, 1, 2]
        for m in metrics:
            p = (2 * m.epoch + 1) / 6
            assert m.lr == lr_schedule(p)
            assert m.lambda_d == lambda_d_schedule(p)

    def test_source_only_has_no_adversarial_terms(self, make_model, tiny_dataset):
        _, metrics = train(make_model(Variant.SOURCE_ONLY), tiny_dataset, quick_config(Variant.SOURCE_ONLY))
        assert all(m.lambda_d == 0.0 and m.l_d == 0.0 and m.l_dc == 0.0 for m in metrics)

    def test_dann_has_no_category_term(self, make_model, tiny_dataset):
        _, metrics = train(make_model(Variant.DANN), tiny_dataset, quick_config(Variant.DANN))
        assert all(m.l_dc == 0.0 and m.l_d > 0.0 for m in metrics)

    def test_on_epoch_sees_every_epoch(self, make_model, tiny_dataset):
        seen = []
        _, metrics = train(make_model(), tiny_dataset, quick_config(epochs=3), on_epoch=seen.append)
        assert seen == metrics

    def test_training_changes_parameters(self, make_model, tiny_dataset):
        model = make_model()
        before = model.checksum()
        train(model, tiny_dataset, quick_config(epochs=1))
        assert model.checksum() != before

    def test_variant_mismatch(self, make_model):
        with pytest.raises(ValueError):
            Trainer(make_model(Variant.DANN), quick_config(Variant.CIFE_DANN))

    @pytest.mark.parametrize("mode", list(UpdateMode))
    @pytest.mark.parametrize("variant", [Variant.CIFE_DANN, Variant.CIFE_CDAN])
    def test_zero_weights_freeze_discriminators(self, make_model, tiny_dataset, mode, variant):
        model = make_model(variant)
        cfg = quick_config(variant, lambda_c=0.0, allow_off_grid=True, update_mode=mode)
        before = snapshot(model)
        batch = next(batch_iter(tiny_dataset, 16, seed=0, epoch=0))
        Trainer(model, cfg).step(batch, 0.01, 0.0)
        after = snapshot(model)
        for name, value in before.items():
            if name.startswith(("D_d.", "D_t.")):
                np.testing.assert_array_equal(after[name], value, err_msg=name)
        for component in ("F_s.", "F_d.", "C."):
            assert any(
                not np.array_equal(after[name], value) for name, value in before.items() if name.startswith(component)
            ), component

    @pytest.mark.parametrize("mode", list(UpdateMode))
    def test_played_discriminator_steps_on_its_unweighted_loss(self, make_model, tiny_dataset, mode):
        model = make_model(Variant.DANN)
        batch = next(batch_iter(tiny_dataset, 16, seed=0, epoch=0))
        reference = model.clone()
        with Tape() as tape:
            l_d = loss_domain(reference, batch.xs, batch.xt, 0.3, Coupling.PLAIN)
        backward(l_d, tape)
        Trainer(model, quick_config(Variant.DANN, update_mode=mode)).step(batch, 0.01, 0.3)
        for before, after in zip(reference.d.parameters(), model.d.parameters()):
            np.testing.assert_allclose(after.data, before.data - 0.01 * before.grad, rtol=0, atol=1e-12)

    def test_divergence_is_reported(self, make_model, tiny_dataset, monkeypatch):
        real = trainer_module.total_objective

        def poisoned(*args, **kwargs):
            bundle = real(*args, **kwargs)
            bundle.l_d = float("nan")
            return bundle

        monkeypatch.setattr(trainer_module, "total_objective", poisoned)
        model = make_model()
        before = model.checksum()
        with pytest.raises(TrainingDivergedError) as excinfo:
            train(model, tiny_dataset, quick_config())
        assert excinfo.value.term == "l_d"
        assert excinfo.value.iteration == 0
        assert model.checksum() == before

    def test_final_accuracy_in_range(self, make_model, tiny_dataset):
        cfg = quick_config()
        model, _ = train(make_model(), tiny_dataset, cfg)
        assert 0.0 <= final_target_accuracy(model, tiny_dataset, cfg) <= 1.0

    @pytest.mark.slow
    def test_source_only_fits_noiseless_source_but_not_shifted_target(self):
        spec = FactorizedTaskSpec(
            num_classes=3, input_dim=8, class_dim=2, nuisance_dim=2, noise=0.0, shift_strength=1.0,
            prototype_scale=3.0, n_source=192, n_target=192, n_test=64, seed=4,
        )
        ds = gen_factorized(spec)
        cfg = TrainConfig(variant=Variant.SOURCE_ONLY, epochs=60, batch_size=32)
        model = build_model(Variant.SOURCE_ONLY, ds.input_dim, ds.num_classes, seed=0)
        _, metrics = train(model, ds, cfg)
        assert metrics[-1].source_accuracy == 1.0
        assert final_target_accuracy(model, ds, cfg) < 1.0


class TestPrediction:
    def test_single_row_pool(self, make_model, rng):
        model = make_model()
        pool, xt = rng.standard_normal((1, 6)), rng.standard_normal((5, 6))
        fd = model.specific_features(Tensor(pool)).data
        expected = forward_predict_concat(model, np.repeat(fd, 5, axis=0), xt)
        np.testing.assert_allclose(predict_proba_target(model, pool, xt, k_pred=4), expected, atol=1e-12)

    def test_identical_pool_rows_match_one_draw(self, make_model, rng):
        model = make_model()
        pool, xt = np.tile(rng.standard_normal((1, 6)), (6, 1)), rng.standard_normal((4, 6))
        many = predict_proba_target(model, pool, xt, k_pred=3, seed=1)
        one = predict_proba_target(model, pool, xt, k_pred=1, seed=2)
        np.testing.assert_allclose(many, one, atol=1e-12)

    def test_small_pool_is_enumerated(self, make_model, rng):
        model = make_model()
        pool, xt = rng.standard_normal((5, 6)), rng.standard_normal((3, 6))
        fd = model.specific_features(Tensor(pool)).data
        expected = np.mean(
            [forward_predict_concat(model, np.repeat(fd[j:j + 1], 3, axis=0), xt) for j in range(5)], axis=0
        )
        a = predict_proba_target(model, pool, xt, k_pred=8, seed=0)
        b = predict_proba_target(model, pool, xt, k_pred=8, seed=99)
        np.testing.assert_allclose(a, expected, atol=1e-12)
        np.testing.assert_array_equal(a, b)

    def test_probabilities_sum_to_one(self, make_model, rng):
        probs = predict_proba_target(make_model(), rng.standard_normal((20, 6)), rng.standard_normal((7, 6)))
        assert probs.shape == (7, 3)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)

    def test_seeded_draws_are_reproducible(self, make_model, rng):
        model = make_model()
        pool, xt = rng.standard_normal((20, 6)), rng.standard_normal((7, 6))
        np.testing.assert_array_equal(
            predict_target(model, pool, xt, k_pred=3, seed=[0, 1, 2]),
            predict_target(model, pool, xt, k_pred=3, seed=[0, 1, 2]),
        )

    def test_single_extractor_variants_ignore_pool(self, make_model, rng):
        model = make_model(Variant.DANN)
        xt = rng.standard_normal((4, 6))
        expected = ops.stable_softmax(model.c(model.f(Tensor(xt))).data)
        a = predict_proba_target(model, rng.standard_normal((3, 6)), xt, seed=0)
        b = predict_proba_target(model, rng.standard_normal((9, 6)), xt, k_pred=2, seed=5)
        np.testing.assert_allclose(a, expected, atol=1e-12)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("variant", list(Variant))
    def test_empty_pool_rejected(self, make_model, rng, variant):
        with pytest.raises(DomainError, match="non-empty source pool"):
            predict_target(make_model(variant), np.zeros((0, 6)), rng.standard_normal((2, 6)))

    def test_draw_count_must_be_positive(self, make_model, rng):
        with pytest.raises(DomainError):
            predict_target(make_model(), rng.standard_normal((3, 6)), rng.standard_normal((2, 6)), k_pred=0)


class TestEvaluateAccuracy:
    def test_values(self):
        assert evaluate_accuracy([0, 1, 2], [0, 1, 2]) == 1.0
        assert evaluate_accuracy([1, 2, 0], [0, 1, 2]) == 0.0
        assert evaluate_accuracy([0, 1, 0, 1], [0, 1, 1, 0]) == 0.5

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            evaluate_accuracy([0, 1], [0, 1, 2])

    def test_empty(self):
        with pytest.raises(ValueError):
            evaluate_accuracy([], [])


class TestReplicates:
    def test_constant_accuracies(self):
        summary = summarize([0.9, 0.9, 0.9], [0, 1, 2])
        assert summary.mean == pytest.approx(0.9)
        assert summary.std == pytest.approx(0.0, abs=1e-15)
        assert summary.summary() == "90.0±0.0"

    def test_population_std(self):
        summary = summarize([0.8, 0.9, 1.0], [0, 1, 2])
        assert summary.mean == pytest.approx(0.9)
        assert summary.std == pytest.approx(0.0816, abs=1e-4)
        assert summary.seeds == (0, 1, 2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            summarize([], [])

    def test_single_run(self, tiny_dataset, tiny_model_spec):
        summary = run_replicates(quick_config(epochs=1, seed=4), tiny_dataset, 1, tiny_model_spec)
        assert summary.std == 0.0
        assert summary.seeds == (4,)
        assert summary.mean == summary.accuracies[0]

    def test_workers_match_sequential(self, tiny_dataset, tiny_model_spec):
        cfg = quick_config(epochs=1)
        sequential = run_replicates(cfg, tiny_dataset, 2, tiny_model_spec, workers=1)
        parallel = run_replicates(cfg, tiny_dataset, 2, tiny_model_spec, workers=2)
        assert parallel == sequential
        assert sequential.seeds == (0, 1)

    def test_needs_a_run(self, tiny_dataset):
        with pytest.raises(ValueError):
            run_replicates(quick_config(), tiny_dataset, 0)
