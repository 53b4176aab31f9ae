from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from algen import featurize
from algen.corpus import Taxonomy
from algen.learner import (
    LearnerError,
    NativeLearnerParams,
    ProtocolError,
    RemoteConfig,
    RemoteLearner,
    fit_native,
    loss_and_gradient,
    softmax,
    validate_probability_rows,
)
from algen.testing import MockModelServer

from conftest import make_labeled, make_unlabeled

TAX6 = Taxonomy(["Self-Harm", "Medical-Advice", "Legal-Advice", "Financial-Advice", "Emergency-Situation", "Not-Harmful"])
TAX2 = Taxonomy(["pos", "neg"])


def separable_pool():
    # Two disjoint vocabularies: trivially separable.
    items = [(f"alpha bright day {i}", "pos") for i in range(6)]
    items += [(f"omega dark night {i}", "neg") for i in range(6)]
    return make_labeled(items)


class TestNativeLearner:
    def test_zero_weight_model_is_uniform(self):
        pool = make_labeled([("anything at all", "Self-Harm")])
        vocab = featurize.fit(pool)
        learner = fit_native(pool, vocab, TAX6, NativeLearnerParams(epochs=1, learning_rate=1e-12))
        probs = learner.predict_proba_texts(["completely new words"])[0]
        assert np.allclose(probs, np.full(6, 1 / 6), atol=1e-9)

    def test_softmax_shift_invariance(self):
        logits = np.array([0.3, -1.2, 4.0])
        assert np.allclose(softmax(logits), softmax(logits + 17.5), atol=1e-12)

    def test_argmax_of_probs_equals_argmax_of_logits(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            logits = rng.normal(size=6)
            assert int(np.argmax(softmax(logits))) == int(np.argmax(logits))

    def test_separable_toy_set_reaches_full_accuracy(self):
        pool = separable_pool()
        vocab = featurize.fit(pool)
        learner = fit_native(pool, vocab, TAX2, NativeLearnerParams(learning_rate=0.5, epochs=200, l2_lambda=0.0))
        probs = learner.predict_proba_texts([inst.text for inst in pool])
        predicted = [TAX2.classes[i] for i in np.argmax(probs, axis=1)]
        assert predicted == [inst.label for inst in pool]

    def test_huge_l2_shrinks_to_near_uniform(self):
        # Gradient descent is stable only for lr * lambda < 2, so the huge-lambda
        # case uses a correspondingly small step.
        pool = separable_pool()
        vocab = featurize.fit(pool)
        strong = fit_native(pool, vocab, TAX2, NativeLearnerParams(learning_rate=1e-7, epochs=100, l2_lambda=1e6))
        weak = fit_native(pool, vocab, TAX2, NativeLearnerParams(learning_rate=0.5, epochs=100, l2_lambda=0.0))
        assert float(np.abs(strong.weights).max()) < 1e-3
        assert float(np.abs(strong.weights).max()) < 0.01 * float(np.abs(weak.weights).max())
        probs = strong.predict_proba_texts(["alpha bright day 0"])[0]
        assert np.allclose(probs, 0.5, atol=1e-3)

    def test_rows_sum_to_one(self):
        pool = separable_pool()
        vocab = featurize.fit(pool)
        learner = fit_native(pool, vocab, TAX2)
        probs = learner.predict_proba_texts(["alpha omega", "", "day night bright dark"])
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)

    def test_fit_is_deterministic(self):
        pool = separable_pool()
        vocab = featurize.fit(pool)
        a = fit_native(pool, vocab, TAX2)
        b = fit_native(pool, vocab, TAX2)
        assert np.array_equal(a.weights, b.weights)
        assert np.array_equal(a.bias, b.bias)

    def test_empty_pool_errors(self):
        pool = separable_pool()
        vocab = featurize.fit(pool)
        from algen.corpus import Pool

        with pytest.raises(LearnerError):
            fit_native(Pool("L"), vocab, TAX2)

    def test_dimension_mismatch_errors(self):
        pool = separable_pool()
        vocab = featurize.fit(pool)
        learner = fit_native(pool, vocab, TAX2)
        other_vocab = featurize.fit(make_unlabeled(["a b c"]))
        with pytest.raises(LearnerError):
            learner.predict_proba(featurize.transform(other_vocab, "a"))

    def test_training_loss_non_increasing_at_small_lr(self):
        pool = separable_pool()
        vocab = featurize.fit(pool)
        x = featurize.matrix(vocab, [inst.text for inst in pool])
        y = np.array([TAX2.index(inst.label) for inst in pool])
        weights = np.zeros((2, x.shape[1]))
        bias = np.zeros(2)
        losses = []
        for _ in range(60):
            loss, grad_w, grad_b = loss_and_gradient(weights, bias, x, y, 1e-4)
            losses.append(loss)
            weights -= 0.01 * grad_w
            bias -= 0.01 * grad_b
        assert all(a >= b - 1e-12 for a, b in zip(losses, losses[1:]))


class TestLossAndGradient:
    def test_gradient_matches_central_finite_differences(self):
        rng = np.random.default_rng(0)
        for trial in range(5):
            n, features, classes = 8, 5, 3
            x = rng.normal(size=(n, features))
            y = rng.integers(0, classes, size=n)
            weights = rng.normal(scale=0.5, size=(classes, features))
            bias = rng.normal(scale=0.5, size=classes)
            lam = 0.1
            _, grad_w, grad_b = loss_and_gradient(weights, bias, x, y, lam)
            eps = 1e-6

            def loss_at(w, b):
                return loss_and_gradient(w, b, x, y, lam)[0]

            for idx in np.ndindex(weights.shape):
                w_plus, w_minus = weights.copy(), weights.copy()
                w_plus[idx] += eps
                w_minus[idx] -= eps
                numeric = (loss_at(w_plus, bias) - loss_at(w_minus, bias)) / (2 * eps)
                denom = max(abs(numeric), abs(grad_w[idx]), 1e-8)
                assert abs(numeric - grad_w[idx]) / denom < 1e-4
            for j in range(classes):
                b_plus, b_minus = bias.copy(), bias.copy()
                b_plus[j] += eps
                b_minus[j] -= eps
                numeric = (loss_at(weights, b_plus) - loss_at(weights, b_minus)) / (2 * eps)
                denom = max(abs(numeric), abs(grad_b[j]), 1e-8)
                assert abs(numeric - grad_b[j]) / denom < 1e-4

    def test_perfect_prediction_leaves_only_l2_term(self):
        # One example, one feature; huge weight makes p(correct) -> 1.
        x = np.array([[1.0]])
        y = np.array([0])
        weights = np.array([[50.0], [-50.0]])
        bias = np.zeros(2)
        lam = 0.01
        loss, _, _ = loss_and_gradient(weights, bias, x, y, lam)
        assert loss == pytest.approx(0.5 * lam * float(np.sum(weights**2)), abs=1e-9)

    def test_loss_non_negative(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            x = rng.normal(size=(4, 3))
            y = rng.integers(0, 2, size=4)
            weights = rng.normal(size=(2, 3))
            loss, _, _ = loss_and_gradient(weights, np.zeros(2), x, y, 0.0)
            assert loss >= 0.0

    def test_empty_batch_errors(self):
        with pytest.raises(LearnerError):
            loss_and_gradient(np.zeros((2, 3)), np.zeros(2), np.zeros((0, 3)), np.zeros(0, dtype=int), 0.0)


class TestSimplexProperty:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
    def test_predictions_are_simplex(self, logits):
        probs = softmax(np.asarray(logits))
        assert np.all(probs >= 0)
        assert float(probs.sum()) == pytest.approx(1.0, abs=1e-9)


class TestValidateProbabilityRows:
    def test_exact_one_hots_accepted(self):
        rows = validate_probability_rows([[1.0, 0.0], [0.0, 1.0]], 2)
        assert np.allclose(rows, [[1, 0], [0, 1]])

    def test_drifted_row_renormalized(self):
        rows = validate_probability_rows([[0.5000004, 0.4999999]], 2)
        assert rows[0].sum() == pytest.approx(1.0, abs=0.0)

    def test_sum_violation_rejected(self):
        with pytest.raises(ProtocolError, match="invalid distribution"):
            validate_probability_rows([[0.5, 0.5, 0.1]], 3)

    def test_negative_entry_rejected(self):
        with pytest.raises(ProtocolError):
            validate_probability_rows([[1.2, -0.2]], 2)


class TestRemoteLearner:
    def test_train_then_predict_contract(self):
        with MockModelServer() as server:
            learner = RemoteLearner(server.url, TAX2, backoff_base=0.01)
            learner.train(make_labeled([("alpha alpha", "pos"), ("omega omega", "neg")]))
            probs = learner.predict_proba_texts(["alpha", "omega", "alpha omega"])
        assert probs.shape == (3, 2)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
        assert probs[0, 0] > probs[0, 1]
        assert probs[1, 1] > probs[1, 0]

    def test_empty_train_payload_is_a_400(self):
        from algen.corpus import Pool

        with MockModelServer() as server:
            learner = RemoteLearner(server.url, TAX2, backoff_base=0.01)
            with pytest.raises(ProtocolError, match="400"):
                learner.train(Pool("L"))

    def test_default_config_sent_explicitly(self):
        with MockModelServer() as server:
            learner = RemoteLearner(server.url, TAX2, backoff_base=0.01)
            learner.train(make_labeled([("x", "pos")]))
            config = server.train_requests[0]["config"]
        assert config["learning_rate"] == pytest.approx(2e-5)
        assert config["batch_size"] == 16
        assert config["max_length"] == 50
        assert "seed" in config

    def test_row_count_mismatch_rejected(self):
        with MockModelServer() as server:
            learner = RemoteLearner(server.url, TAX2, backoff_base=0.01)
            learner.train(make_labeled([("x", "pos")]))
            server.canned_probs = [[0.5, 0.5]]
            with pytest.raises(ProtocolError, match="count mismatch"):
                learner.predict_proba_texts(["a", "b", "c"])

    def test_invalid_distribution_rejected(self):
        with MockModelServer() as server:
            learner = RemoteLearner(server.url, TAX2, backoff_base=0.01)
            learner.train(make_labeled([("x", "pos")]))
            server.canned_probs = [[0.7, 0.7]]
            with pytest.raises(ProtocolError, match="invalid distribution"):
                learner.predict_proba_texts(["a"])

    def test_predict_before_train_is_conflict(self):
        with MockModelServer() as server:
            learner = RemoteLearner(server.url, TAX2, backoff_base=0.01)
            with pytest.raises(ProtocolError, match="409"):
                learner.predict_proba_texts(["a"])

    def test_retries_through_transient_500(self):
        with MockModelServer() as server:
            server.fail_next = [500]
            learner = RemoteLearner(server.url, TAX2, max_retries=2, backoff_base=0.01)
            learner.train(make_labeled([("x", "pos")]))
        assert server.model is not None

    def test_reset_restores_untrained_state(self):
        with MockModelServer() as server:
            learner = RemoteLearner(server.url, TAX2, backoff_base=0.01)
            learner.train(make_labeled([("x", "pos")]))
            learner.reset()
            with pytest.raises(ProtocolError, match="409"):
                learner.predict_proba_texts(["a"])

    def test_remote_config_defaults_match_protocol(self):
        config = RemoteConfig()
        assert config.learning_rate == pytest.approx(2e-5)
        assert config.batch_size == 16
        assert config.max_length == 50
