import numpy as np
import pytest

from trustscore.data import SyntheticSpec, gen_microclusters, gen_ood
from trustscore.nn import MlpConfig, forward, init_mlp, softmax_t
from trustscore.scoring import (
    TrustConfig,
    batch_trust_scores,
    cosine_similarity,
    trust_score,
)
from trustscore.training import TrainConfig, train


@pytest.fixture(scope="module")
def small_benchmark():
    """Quickly trained model on a small well-separated cluster layout."""
    spec = SyntheticSpec(d=16, k=2, modes_per_class=1, cluster_std=0.05,
                         samples_per_mode=60, seed=13)
    train_set, test_set = gen_microclusters(spec)
    model = init_mlp(MlpConfig(layer_dims=(16, 16, 8, 2), seed=13))
    model, history = train(model, train_set, TrainConfig(epochs=60, seed=13))
    assert history.accuracies[-1] >= 0.95
    return spec, model, train_set, test_set


class TestCosineSimilarity:
    def test_self_similarity_is_one(self):
        v = np.array([0.3, -2.0, 5.0])
        assert cosine_similarity(v, v) == 1.0

    def test_orthogonal_is_zero(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_closed_form(self):
        assert cosine_similarity([1.0, 2.0], [2.0, 1.0]) == pytest.approx(0.8)

    def test_zero_vector_rejected(self):
        with pytest.raises(ValueError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])

    def test_scale_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            a, b = rng.normal(size=6), rng.normal(size=6)
            c = float(rng.uniform(0.01, 100))
            assert cosine_similarity(c * a, b) == pytest.approx(
                cosine_similarity(a, b), abs=1e-12
            )


class TestTrustScore:
    def test_huge_penalty_freezes_perturbation(self, small_benchmark):
        _, model, _, test_set = small_benchmark
        cfg = TrustConfig(lam=1e6, max_iters=300)
        res = trust_score(model, test_set.features[0], cfg)
        assert res.score == 1.0
        assert res.final_loss <= res.initial_loss

    def test_sample_already_at_mode_keeps_high_score(self, small_benchmark):
        _, model, train_set, _ = small_benchmark
        # pick the training sample the model is most confident about
        best_idx, best_prob = 0, -1.0
        for i in range(len(train_set)):
            logits, _ = forward(model, train_set.features[i])
            p = float(softmax_t(logits, 1.0).max())
            if p > best_prob:
                best_idx, best_prob = i, p
        res = trust_score(model, train_set.features[best_idx], TrustConfig(max_iters=2000))
        assert res.score >= 0.999

    def test_zero_iterations_scores_one(self, small_benchmark):
        _, model, _, test_set = small_benchmark
        res = trust_score(model, test_set.features[3], TrustConfig(max_iters=0))
        assert res.score == 1.0
        assert res.iterations_run == 0
        assert np.all(res.delta_x == 0.0)

    def test_loss_never_increases_overall(self, small_benchmark):
        _, model, _, test_set = small_benchmark
        cfg = TrustConfig(max_iters=1500)
        for i in range(6):
            res = trust_score(model, test_set.features[i], cfg)
            assert np.isfinite(res.final_loss)
            assert res.final_loss <= res.initial_loss + cfg.tol
            assert -1.0 <= res.score <= 1.0
            assert res.iterations_run <= cfg.max_iters

    def test_plateau_stops_early(self, small_benchmark):
        _, model, _, test_set = small_benchmark
        res = trust_score(model, test_set.features[0], TrustConfig(max_iters=10000))
        assert res.iterations_run < 10000

    def test_deterministic(self, small_benchmark):
        _, model, _, test_set = small_benchmark
        cfg = TrustConfig(max_iters=400)
        a = trust_score(model, test_set.features[1], cfg)
        b = trust_score(model, test_set.features[1], cfg)
        assert a.score == b.score
        assert np.array_equal(a.delta_x, b.delta_x)

    def test_proximal_mode_yields_exact_zeros(self, small_benchmark):
        _, model, _, test_set = small_benchmark
        x = test_set.features[2]
        prox = trust_score(model, x, TrustConfig(l1_mode="proximal", lam=0.01, max_iters=500))
        sub = trust_score(model, x, TrustConfig(l1_mode="subgradient", lam=0.01, max_iters=500))
        assert np.sum(prox.delta_x == 0.0) > np.sum(sub.delta_x == 0.0)

    def test_ood_scores_below_in_distribution(self, small_benchmark):
        spec, model, _, test_set = small_benchmark
        cfg = TrustConfig(max_iters=1500)
        ood = gen_ood(20, spec.d, spec.radius, seed=99, num_classes=spec.k)
        id_scores = [trust_score(model, x, cfg).score for x in test_set.features[:20]]
        ood_scores = [trust_score(model, x, cfg).score for x in ood.features]
        assert np.mean(ood_scores) < np.mean(id_scores)

    def test_predicted_label_matches_deterministic_argmax(self, small_benchmark):
        _, model, _, test_set = small_benchmark
        for i in range(5):
            logits, _ = forward(model, test_set.features[i])
            res = trust_score(model, test_set.features[i], TrustConfig(max_iters=50))
            assert res.predicted_label == int(np.argmax(logits))


class TestBatch:
    def test_empty_input(self, small_benchmark):
        _, model, _, _ = small_benchmark
        assert batch_trust_scores(model, [], TrustConfig()) == []

    def test_singleton_equals_single_call(self, small_benchmark):
        _, model, _, test_set = small_benchmark
        cfg = TrustConfig(max_iters=300)
        single = trust_score(model, test_set.features[0], cfg)
        batch = batch_trust_scores(model, [test_set.features[0]], cfg)
        assert len(batch) == 1
        assert batch[0].score == single.score
        assert np.array_equal(batch[0].delta_x, single.delta_x)

    def test_worker_count_does_not_change_results(self, small_benchmark):
        _, model, _, test_set = small_benchmark
        cfg = TrustConfig(max_iters=200)
        xs = list(test_set.features[:6])
        serial = batch_trust_scores(model, xs, cfg, workers=1)
        threaded = batch_trust_scores(model, xs, cfg, workers=4)
        for a, b in zip(serial, threaded):
            assert a.score == b.score
            assert a.iterations_run == b.iterations_run
            assert np.array_equal(a.delta_x, b.delta_x)

    def test_errors_carry_sample_index(self, small_benchmark):
        _, model, _, test_set = small_benchmark
        xs = [test_set.features[0], np.zeros(3)]
        with pytest.raises(Exception, match="sample 1"):
            batch_trust_scores(model, xs, TrustConfig(max_iters=10))


class TestTrustConfig:
    def test_json_round_trip_uses_lambda_key(self):
        cfg = TrustConfig(T=9.0, lam=0.01)
        blob = cfg.to_dict()
        assert blob["lambda"] == 0.01
        assert "lam" not in blob
        assert TrustConfig.from_dict(blob) == cfg

    def test_validation(self):
        with pytest.raises(ValueError):
            TrustConfig(T=0.0)
        with pytest.raises(ValueError):
            TrustConfig(lam=-1.0)
        with pytest.raises(ValueError):
            TrustConfig(l1_mode="none")
        with pytest.raises(ValueError):
            TrustConfig(window=0)
