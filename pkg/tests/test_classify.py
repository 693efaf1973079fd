"""Classifier tests: worked softmax examples, gradient checking, properties."""

import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greenloop.classify import (
    FEATURES,
    NormStats,
    SoftmaxModel,
    TrainConfig,
    evaluate_accuracy,
    featurize,
    fit_norm_stats,
    initial_weights,
    model_from_dict,
    model_to_dict,
    predict,
    rule_classify,
    train_classifier,
    _loss_and_grad,
)
from greenloop.errors import (
    DimensionMismatch,
    EmptyDataset,
    MissingFeature,
    NonFiniteLoss,
    SingleClassData,
    ZeroVariance,
)


def raw_record(**overrides):
    base = {f: 1.0 for f in FEATURES}
    base.update(overrides)
    return base


def identity_stats(n=len(FEATURES)):
    return NormStats(means=(0.0,) * n, stds=(1.0,) * n)


class TestFeaturize:
    def test_record_at_means_is_zero_vector(self):
        stats = NormStats(means=(1.0,) * 6, stds=(2.0,) * 6)
        vec = featurize(raw_record(), stats)
        assert np.allclose(vec, 0.0)

    def test_zscore_arithmetic(self):
        stats = NormStats(means=(0.0,) * 6, stds=(2.0,) * 6)
        vec = featurize(raw_record(weight_kg=4.0), stats)
        assert vec[FEATURES.index("weight_kg")] == pytest.approx(2.0)

    def test_round_trip_recovers_raw(self):
        stats = NormStats(means=(0.3, 1.1, -0.2, 0.9, 2.0, 5.0), stds=(0.5, 2.0, 1.5, 0.1, 3.0, 4.0))
        raw = raw_record(weight_kg=0.7, metal_response=3.3, moisture=0.4,
                         opacity=0.6, rigidity=1.9, volume_l=2.5)
        vec = featurize(raw, stats)
        back = {f: vec[i] * stats.stds[i] + stats.means[i] for i, f in enumerate(FEATURES)}
        for f in FEATURES:
            assert back[f] == pytest.approx(raw[f], abs=1e-12)

    def test_missing_feature_names_token(self):
        raw = {f: 1.0 for f in FEATURES if f != "opacity"}
        with pytest.raises(MissingFeature, match="opacity"):
            featurize(raw, identity_stats())

    def test_zero_variance_rejected_at_stats_construction(self):
        records = [raw_record(), raw_record()]
        with pytest.raises(ZeroVariance):
            fit_norm_stats(records)

    def test_fit_norm_stats(self):
        records = [raw_record(weight_kg=0.0), raw_record(weight_kg=2.0)]
        records[0]["moisture"] = 0.0
        records[1]["moisture"] = 4.0
        for i, r in enumerate(records):
            for f in FEATURES:
                if f not in ("weight_kg", "moisture"):
                    r[f] = float(i * 2)
        stats = fit_norm_stats(records)
        assert stats.means[FEATURES.index("weight_kg")] == pytest.approx(1.0)
        assert stats.stds[FEATURES.index("moisture")] == pytest.approx(2.0)


class TestPredict:
    def make_model(self, weights, biases, labels):
        return SoftmaxModel(
            weights=np.array(weights, dtype=float),
            biases=np.array(biases, dtype=float),
            class_labels=labels,
            norm_stats=NormStats(means=(0.0,) * len(weights[0]), stds=(1.0,) * len(weights[0])),
        )

    def test_zero_model_uniform_and_first_label(self):
        m = self.make_model([[0.0] * 6] * 4, [0.0] * 4, ("a", "b", "c", "d"))
        label, probs = predict(m, np.zeros(6))
        assert label == "a"
        assert np.allclose(probs, 0.25)

    def test_logit_shift_invariance(self):
        m1 = self.make_model([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.5], ("a", "b"))
        m2 = self.make_model([[1.0, 0.0], [0.0, 1.0]], [7.0, 7.5], ("a", "b"))
        x = np.array([0.3, -1.2])
        _, p1 = predict(m1, x)
        _, p2 = predict(m2, x)
        assert np.allclose(p1, p2, atol=1e-12)

    def test_closed_form_two_class(self):
        # logits (ln 3, 0) -> probabilities (0.75, 0.25)
        m = self.make_model([[0.0], [0.0]], [np.log(3.0), 0.0], ("a", "b"))
        label, probs = predict(m, np.zeros(1))
        assert label == "a"
        assert probs[0] == pytest.approx(0.75)
        assert probs[1] == pytest.approx(0.25)

    def test_extreme_logits_do_not_overflow(self):
        m = self.make_model([[1000.0], [-1000.0]], [0.0, 0.0], ("a", "b"))
        label, probs = predict(m, np.array([5.0]))
        assert label == "a"
        assert np.isfinite(probs).all()
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_dimension_mismatch(self):
        m = self.make_model([[0.0, 0.0], [0.0, 0.0]], [0.0, 0.0], ("a", "b"))
        with pytest.raises(DimensionMismatch):
            predict(m, np.zeros(3))


class TestTraining:
    def separable_data(self, n=40):
        # one feature cleanly separates the two classes
        data = []
        for i in range(n):
            x = np.zeros(6)
            x[0] = 1.0 if i % 2 == 0 else -1.0
            x[1] = (i % 7) * 0.01
            data.append((x, "pos" if i % 2 == 0 else "neg"))
        return data

    def test_separable_data_reaches_full_accuracy(self):
        data = self.separable_data()
        model = train_classifier(data, TrainConfig())
        assert evaluate_accuracy(model, data) == 1.0

    def test_duplicated_data_trains_identical_model(self):
        # mean-loss convention: doubling the batch changes only summation order
        data = self.separable_data(20)
        m1 = train_classifier(data, TrainConfig(rng_seed=3))
        m2 = train_classifier(data + data, TrainConfig(rng_seed=3))
        assert np.allclose(m1.weights, m2.weights, rtol=1e-12, atol=1e-12)
        assert np.allclose(m1.biases, m2.biases, rtol=1e-12, atol=1e-12)

    def test_same_seed_bit_identical(self):
        data = self.separable_data(30)
        m1 = train_classifier(data, TrainConfig(rng_seed=9))
        m2 = train_classifier(data, TrainConfig(rng_seed=9))
        assert np.array_equal(m1.weights, m2.weights)
        assert np.array_equal(m1.biases, m2.biases)

    def test_single_class_rejected(self):
        data = [(np.zeros(6), "only")] * 5
        with pytest.raises(SingleClassData):
            train_classifier(data, TrainConfig())

    def test_empty_rejected(self):
        with pytest.raises(EmptyDataset):
            train_classifier([], TrainConfig())

    def test_divergence_raises(self):
        # l2 term amplifies weights geometrically at this rate until overflow
        rng = np.random.default_rng(0)
        data = [(rng.normal(size=6) * 50, "a" if i % 2 else "b") for i in range(20)]
        with pytest.raises(NonFiniteLoss):
            train_classifier(
                data, TrainConfig(learning_rate=1e6, l2_penalty=1.0, epochs=400)
            )

    def test_rising_loss_logs_warning(self, caplog):
        rng = np.random.default_rng(1)
        data = [(rng.normal(size=6) * 30, "a" if i % 2 else "b") for i in range(16)]
        with caplog.at_level(logging.WARNING, logger="greenloop.classify"):
            try:
                train_classifier(data, TrainConfig(learning_rate=500.0, epochs=60))
            except NonFiniteLoss:
                pass
        assert any("loss rose" in r.message for r in caplog.records)

    def test_loss_nonincreasing_at_small_rate(self, caplog):
        data = self.separable_data(30)
        with caplog.at_level(logging.WARNING, logger="greenloop.classify"):
            train_classifier(data, TrainConfig(learning_rate=0.01, epochs=300))
        assert not [r for r in caplog.records if "loss rose" in r.message]


class TestGradientCheck:
    def numeric_grad(self, weights, biases, x, y_idx, l2, h=1e-6):
        gw = np.zeros_like(weights)
        gb = np.zeros_like(biases)
        for idx in np.ndindex(weights.shape):
            wp, wm = weights.copy(), weights.copy()
            wp[idx] += h
            wm[idx] -= h
            lp, _, _ = _loss_and_grad(wp, biases, x, y_idx, l2)
            lm, _, _ = _loss_and_grad(wm, biases, x, y_idx, l2)
            gw[idx] = (lp - lm) / (2 * h)
        for i in range(len(biases)):
            bp, bm = biases.copy(), biases.copy()
            bp[i] += h
            bm[i] -= h
            lp, _, _ = _loss_and_grad(weights, bp, x, y_idx, l2)
            lm, _, _ = _loss_and_grad(weights, bm, x, y_idx, l2)
            gb[i] = (lp - lm) / (2 * h)
        return gw, gb

    def test_analytic_gradient_matches_central_differences(self):
        """Twenty-five random (model, batch) pairs within 1e-5 relative."""
        rng = np.random.default_rng(20240917)
        for trial in range(25):
            n_classes = int(rng.integers(2, 5))
            n_features = int(rng.integers(2, 7))
            n_samples = int(rng.integers(3, 12))
            weights = rng.normal(size=(n_classes, n_features))
            biases = rng.normal(size=n_classes)
            x = rng.normal(size=(n_samples, n_features))
            y = rng.integers(0, n_classes, size=n_samples)
            l2 = float(rng.choice([0.0, 0.001, 0.01]))
            _, gw, gb = _loss_and_grad(weights, biases, x, y, l2)
            nw, nb = self.numeric_grad(weights, biases, x, y, l2)
            scale_w = max(1e-8, float(np.abs(nw).max()))
            scale_b = max(1e-8, float(np.abs(nb).max()))
            assert np.abs(gw - nw).max() / scale_w < 1e-5
            assert np.abs(gb - nb).max() / scale_b < 1e-5


class TestEvaluate:
    def test_constant_model_on_single_label_data(self):
        m = SoftmaxModel(
            weights=np.zeros((2, 6)),
            biases=np.array([5.0, 0.0]),
            class_labels=("always", "never"),
            norm_stats=identity_stats(),
        )
        data = [(np.zeros(6), "always")] * 8
        assert evaluate_accuracy(m, data) == 1.0

    def test_three_of_four_correct(self):
        m = SoftmaxModel(
            weights=np.array([[1.0] + [0.0] * 5, [-1.0] + [0.0] * 5]),
            biases=np.zeros(2),
            class_labels=("hi", "lo"),
            norm_stats=identity_stats(),
        )
        ex = lambda v: np.array([v] + [0.0] * 5)
        data = [(ex(1.0), "hi"), (ex(2.0), "hi"), (ex(-1.0), "lo"), (ex(3.0), "lo")]
        assert evaluate_accuracy(m, data) == 0.75

    def test_empty_rejected(self):
        m = SoftmaxModel(
            weights=np.zeros((2, 6)), biases=np.zeros(2),
            class_labels=("a", "b"), norm_stats=identity_stats(),
        )
        with pytest.raises(EmptyDataset):
            evaluate_accuracy(m, [])


class TestRuleBaseline:
    def test_weight_bands(self):
        assert rule_classify(raw_record(weight_kg=0.2)) == "plastic"
        assert rule_classify(raw_record(weight_kg=0.7)) == "metal"
        assert rule_classify(raw_record(weight_kg=1.1)) == "glass"
        assert rule_classify(raw_record(weight_kg=2.0)) == "organic"

    def test_only_weight_matters(self):
        a = raw_record(weight_kg=0.7, moisture=0.9, opacity=0.1)
        b = raw_record(weight_kg=0.7, moisture=0.1, opacity=0.9)
        assert rule_classify(a) == rule_classify(b)


class TestProperties:
    @settings(deadline=None, max_examples=25)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_probabilities_on_simplex(self, seed):
        rng = np.random.default_rng(seed)
        n_classes = int(rng.integers(2, 6))
        n_features = int(rng.integers(1, 7))
        m = SoftmaxModel(
            weights=rng.normal(size=(n_classes, n_features)) * 10,
            biases=rng.normal(size=n_classes) * 10,
            class_labels=tuple(f"c{i}" for i in range(n_classes)),
            norm_stats=NormStats(means=(0.0,) * n_features, stds=(1.0,) * n_features),
        )
        _, probs = predict(m, rng.normal(size=n_features) * 5)
        assert (probs >= 0).all()
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_label_permutation_equivariance(self):
        rng = np.random.default_rng(4)
        data = []
        for i in range(60):
            x = rng.normal(size=6)
            label = ("aa", "bb", "cc")[i % 3]
            x[0] += {"aa": -2.0, "bb": 0.0, "cc": 2.0}[label]
            data.append((x, label))
        cfg = TrainConfig(epochs=200, rng_seed=5)
        base = train_classifier(data, cfg)

        rename = {"aa": "zz", "bb": "aa", "cc": "mm"}  # sorted: aa, mm, zz
        renamed = [(x, rename[lb]) for x, lb in data]
        init = initial_weights(cfg, 3, 6)
        # sorted renamed labels (aa, mm, zz) correspond to original (bb, cc, aa)
        perm_init = init[[1, 2, 0], :]
        permuted = train_classifier(renamed, cfg, init_weights=perm_init)

        for x, _ in data[:10]:
            lb_base, p_base = predict(base, x)
            lb_perm, p_perm = predict(permuted, x)
            assert lb_perm == rename[lb_base]
            order = [permuted.class_labels.index(rename[lb]) for lb in base.class_labels]
            assert np.allclose(p_base, p_perm[order], atol=1e-10)


class TestPersistence:
    def test_round_trip(self):
        rng = np.random.default_rng(2)
        data = [(rng.normal(size=6), "a" if i % 2 else "b") for i in range(30)]
        model = train_classifier(data, TrainConfig(epochs=50))
        doc = model_to_dict(model)
        assert doc["version"] == 1
        back = model_from_dict(doc)
        assert np.allclose(back.weights, model.weights)
        assert back.class_labels == model.class_labels
        x = rng.normal(size=6)
        assert predict(back, x)[0] == predict(model, x)[0]
