import math

import numpy as np
import pytest

from trustscore.data import Dataset, SyntheticSpec, gen_microclusters
from trustscore.nn import (
    MlpConfig,
    forward,
    init_mlp,
    load_checkpoint,
    parameters,
    save_checkpoint,
)
from trustscore.training import TrainConfig, evaluate, logitnorm_loss, train


def xor_free_dataset():
    """Four linearly separable points in two classes."""
    feats = np.array([[0.0, 1.0], [0.2, 0.8], [1.0, 0.0], [0.8, 0.2]])
    labels = np.array([0, 0, 1, 1])
    return Dataset(features=feats, labels=labels, name="tiny", num_classes=2)


class TestTrain:
    def test_overfits_separable_points(self):
        data = xor_free_dataset()
        model = init_mlp(MlpConfig(layer_dims=(2, 8, 2), seed=0))
        cfg = TrainConfig(epochs=200, batch_size=4, lr=0.01, seed=0)
        model, history = train(model, data, cfg)
        assert history.accuracies[-1] == 1.0
        assert len(history.losses) == cfg.epochs

    def test_zero_lr_changes_nothing(self):
        data = xor_free_dataset()
        model = init_mlp(MlpConfig(layer_dims=(2, 4, 2), seed=1))
        before = [p.copy() for p in parameters(model)]
        model, history = train(model, data, TrainConfig(epochs=5, lr=0.0, seed=1))
        for b, p in zip(before, parameters(model)):
            assert np.array_equal(b, p)
        assert all(l == history.losses[0] for l in history.losses)

    def test_microclusters_reach_95_percent(self):
        spec = SyntheticSpec(d=64, k=4, modes_per_class=2, cluster_std=0.05,
                             samples_per_mode=50, seed=7)
        train_set, _ = gen_microclusters(spec)
        model = init_mlp(MlpConfig(layer_dims=(64, 32, 16, 4), seed=7))
        model, history = train(model, train_set, TrainConfig(epochs=40, seed=7))
        assert history.accuracies[-1] >= 0.95

    def test_bit_reproducible_given_seed(self):
        spec = SyntheticSpec(d=8, k=2, modes_per_class=1, cluster_std=0.1,
                             samples_per_mode=20, seed=3)
        data_set, _ = gen_microclusters(spec)
        runs = []
        for _ in range(2):
            model = init_mlp(MlpConfig(layer_dims=(8, 6, 2), dropout_rate=0.2, seed=5))
            model, history = train(model, data_set, TrainConfig(epochs=3, seed=5))
            runs.append(([p.copy() for p in parameters(model)], history.losses[:]))
        for a, b in zip(runs[0][0], runs[1][0]):
            assert np.array_equal(a, b)
        assert runs[0][1] == runs[1][1]

    def test_empty_dataset_rejected(self):
        empty = Dataset(features=np.zeros((0, 2)), labels=np.zeros(0, dtype=int),
                        name="empty", num_classes=2)
        model = init_mlp(MlpConfig(layer_dims=(2, 4, 2), seed=0))
        with pytest.raises(ValueError):
            train(model, empty, TrainConfig(epochs=1))

    def test_dimension_mismatch_rejected(self):
        data = xor_free_dataset()
        model = init_mlp(MlpConfig(layer_dims=(3, 4, 2), seed=0))
        with pytest.raises(ValueError):
            train(model, data, TrainConfig(epochs=1))


class TestLogitNorm:
    def test_uniform_after_normalization(self):
        assert logitnorm_loss(np.array([1.0, 1.0]), 0, 0.7) == pytest.approx(math.log(2))

    def test_scale_invariance(self):
        assert logitnorm_loss(np.array([3.0, 0.0]), 0, 0.5) == pytest.approx(
            logitnorm_loss(np.array([30.0, 0.0]), 0, 0.5), abs=1e-12
        )
        rng = np.random.default_rng(0)
        for _ in range(10):
            logits = rng.normal(size=4)
            c = float(rng.uniform(0.1, 100))
            assert logitnorm_loss(c * logits, 2, 0.04) == pytest.approx(
                logitnorm_loss(logits, 2, 0.04), abs=1e-12
            )

    def test_closed_form_value(self):
        assert logitnorm_loss(np.array([3.0, 4.0]), 1, 1.0) == pytest.approx(
            0.598139, abs=1e-6
        )

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            logitnorm_loss(np.zeros(3), 0, 1.0)

    def test_training_with_logitnorm_learns(self):
        data = xor_free_dataset()
        model = init_mlp(MlpConfig(layer_dims=(2, 8, 2), seed=2))
        cfg = TrainConfig(loss_kind="logitnorm", logitnorm_tau=0.04,
                          epochs=200, batch_size=4, lr=0.01, seed=2)
        model, history = train(model, data, cfg)
        assert history.accuracies[-1] == 1.0


class TestEvaluate:
    def test_constant_predictor_on_its_class(self):
        model = init_mlp(MlpConfig(layer_dims=(2, 3, 2), seed=0))
        for w in model.weights:
            w[:] = 0.0
        model.biases[-1][:] = np.array([5.0, 0.0])
        ones = Dataset(features=np.random.default_rng(0).normal(size=(10, 2)),
                       labels=np.zeros(10, dtype=int), name="x", num_classes=2)
        assert evaluate(model, ones) == 1.0

    def test_adversarial_labels_score_zero(self):
        data = xor_free_dataset()
        model = init_mlp(MlpConfig(layer_dims=(2, 8, 2), seed=0))
        model, _ = train(model, data, TrainConfig(epochs=200, batch_size=4, lr=0.01, seed=0))
        flipped = Dataset(features=data.features, labels=1 - data.labels,
                          name="flipped", num_classes=2)
        assert evaluate(model, flipped) == 0.0

    def test_matches_per_sample_recount(self):
        spec = SyntheticSpec(d=8, k=3, modes_per_class=1, cluster_std=0.3,
                             samples_per_mode=30, seed=11)
        data_set, _ = gen_microclusters(spec)
        model = init_mlp(MlpConfig(layer_dims=(8, 6, 3), seed=4))
        hits = 0
        for i in range(len(data_set)):
            logits, _ = forward(model, data_set.features[i])
            hits += int(np.argmax(logits)) == int(data_set.labels[i])
        assert evaluate(model, data_set) == hits / len(data_set)


class TestHistoryAndCheckpoint:
    def test_history_csv_format(self, tmp_path):
        data = xor_free_dataset()
        model = init_mlp(MlpConfig(layer_dims=(2, 4, 2), seed=0))
        _, history = train(model, data, TrainConfig(epochs=3, seed=0))
        path = tmp_path / "history.csv"
        history.write_csv(str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "epoch,train_loss,train_accuracy"
        assert len(lines) == 4
        epoch, loss, acc = lines[1].split(",")
        assert epoch == "1"
        assert float(loss) == history.losses[0]
        assert float(acc) == history.accuracies[0]

    def test_checkpoint_round_trip_preserves_behavior(self, tmp_path):
        data = xor_free_dataset()
        model = init_mlp(MlpConfig(layer_dims=(2, 6, 2), seed=9))
        model, _ = train(model, data, TrainConfig(epochs=20, batch_size=2, seed=9))
        path = tmp_path / "ckpt.mlp"
        save_checkpoint(model, str(path))
        loaded = load_checkpoint(str(path))
        assert evaluate(loaded, data) == evaluate(model, data)
        for i in range(len(data)):
            a, _ = forward(model, data.features[i])
            b, _ = forward(loaded, data.features[i])
            assert np.array_equal(a, b)


class TestConfigValidation:
    def test_bad_loss_kind(self):
        with pytest.raises(ValueError):
            TrainConfig(loss_kind="hinge")

    def test_bad_counts(self):
        with pytest.raises(ValueError):
            TrainConfig(epochs=0)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(logitnorm_tau=0.0)
