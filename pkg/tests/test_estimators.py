import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from skdlab.datasets import gen_blobs, gen_spirals
from skdlab.estimators import DistillationClassifier, MLPClassifier
from skdlab.exceptions import ConfigError, RunError
from skdlab.optim import AdamConfig, SGDConfig
from skdlab.sampling import SamplingDistribution


@pytest.fixture(scope="module")
def blob_data():
    train = gen_blobs(3, 60, 5.0, seed=0)
    test = gen_blobs(3, 60, 5.0, seed=1, split="test")
    return train, test


@pytest.fixture(scope="module")
def blob_teachers(blob_data):
    train, _ = blob_data
    teachers = []
    for i, width in enumerate((8, 16, 24)):
        t = MLPClassifier(hidden_dims=(width,), epochs=40, batch_size=32, seed=100 + i)
        t.fit(train.features, train.labels)
        teachers.append(t)
    return teachers


class TestMLPClassifier:
    def test_get_set_params_round_trip(self):
        clf = MLPClassifier(hidden_dims=(4,), epochs=10, seed=3)
        params = clf.get_params()
        assert params["hidden_dims"] == (4,) and params["seed"] == 3
        clf.set_params(epochs=20)
        assert clf.epochs == 20

    def test_sklearn_clone(self):
        clf = MLPClassifier(hidden_dims=(4,), optimizer=SGDConfig(lr=0.01))
        cloned = clone(clf)
        assert cloned.optimizer == clf.optimizer
        assert cloned is not clf

    def test_fit_predict_blobs(self, blob_data):
        train, test = blob_data
        clf = MLPClassifier(hidden_dims=(16,), epochs=40, batch_size=32, seed=0)
        clf.fit(train.features, train.labels)
        acc = float(np.mean(clf.predict(test.features) == test.labels))
        assert acc > 0.95
        assert clf.n_features_in_ == 2
        assert np.array_equal(clf.classes_, [0, 1, 2])

    def test_predict_proba_rows_sum_to_one(self, blob_data):
        train, _ = blob_data
        clf = MLPClassifier(hidden_dims=(8,), epochs=10, seed=0)
        clf.fit(train.features, train.labels)
        proba = clf.predict_proba(train.features[:10])
        np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)

    def test_not_fitted_error(self):
        with pytest.raises(NotFittedError):
            MLPClassifier().predict(np.zeros((1, 2)))

    def test_determinism(self, blob_data):
        train, _ = blob_data
        a = MLPClassifier(hidden_dims=(8,), epochs=15, seed=7)
        b = MLPClassifier(hidden_dims=(8,), epochs=15, seed=7)
        a.fit(train.features, train.labels)
        b.fit(train.features, train.labels)
        assert a.step_losses_ == b.step_losses_
        for wa, wb in zip(a.model_.weights, b.model_.weights):
            assert np.array_equal(wa, wb)

    def test_epoch_history_matches_configured_epochs(self, blob_data):
        train, test = blob_data
        clf = MLPClassifier(hidden_dims=(4,), epochs=12, seed=0)
        clf.fit(train.features, train.labels, eval_set=(test.features, test.labels))
        assert len(clf.history_) == 12
        assert all("test_accuracy" in h for h in clf.history_)

    def test_zero_epochs_keeps_initialization(self, blob_data):
        train, _ = blob_data
        clf = MLPClassifier(hidden_dims=(4,), epochs=0, seed=5)
        clf.fit(train.features, train.labels)
        from skdlab.estimators import INIT_STREAM
        from skdlab.network import MLP
        from skdlab.sampling import derive_seed

        init = MLP.glorot_init([2, 4, 3], "relu", derive_seed(5, INIT_STREAM))
        for wa, wb in zip(clf.model_.weights, init.weights):
            assert np.array_equal(wa, wb)

    def test_noncontiguous_labels_are_mapped(self, blob_data):
        train, _ = blob_data
        y = np.array([10, 20, 30])[train.labels]
        clf = MLPClassifier(hidden_dims=(8,), epochs=20, seed=0)
        clf.fit(train.features, y)
        preds = clf.predict(train.features)
        assert set(np.unique(preds)) <= {10, 20, 30}
        assert float(np.mean(preds == y)) > 0.9

    def test_single_class_rejected(self):
        with pytest.raises(ConfigError):
            MLPClassifier().fit(np.zeros((4, 2)), np.zeros(4, dtype=int))

    def test_adam_optimizer_trains(self, blob_data):
        train, _ = blob_data
        clf = MLPClassifier(hidden_dims=(8,), epochs=30, seed=0,
                            optimizer=AdamConfig(peak_lr=0.05))
        clf.fit(train.features, train.labels)
        assert float(np.mean(clf.predict(train.features) == train.labels)) > 0.9

    def test_divergence_raises_run_error(self, blob_data):
        train, _ = blob_data
        clf = MLPClassifier(hidden_dims=(8,), epochs=50, seed=0,
                            optimizer=SGDConfig(lr=1e9, momentum=0.0, milestones=()))
        with np.errstate(over="ignore"), pytest.raises(RunError):
            clf.fit(train.features, train.labels)


class TestDistillationClassifier:
    def test_invalid_regime(self, blob_teachers, blob_data):
        train, _ = blob_data
        clf = DistillationClassifier(teachers=blob_teachers, regime="none")
        with pytest.raises(ConfigError):
            clf.fit(train.features, train.labels)

    def test_vanilla_requires_single_teacher(self, blob_teachers, blob_data):
        train, _ = blob_data
        clf = DistillationClassifier(teachers=blob_teachers, regime="vanilla_kd")
        with pytest.raises(ConfigError):
            clf.fit(train.features, train.labels)

    def test_distribution_size_mismatch(self, blob_teachers, blob_data):
        train, _ = blob_data
        clf = DistillationClassifier(teachers=blob_teachers, regime="skd",
                                     distribution=SamplingDistribution.uniform(2))
        with pytest.raises(ConfigError):
            clf.fit(train.features, train.labels)

    def test_teacher_feature_mismatch(self, blob_teachers):
        clf = DistillationClassifier(teachers=blob_teachers, regime="skd", epochs=1)
        X = np.zeros((6, 5))
        y = np.array([0, 1, 2, 0, 1, 2])
        with pytest.raises(ConfigError):
            clf.fit(X, y)

    def test_forward_counts_per_regime(self, blob_teachers, blob_data):
        train, test = blob_data
        n = len(blob_teachers)
        counts = {}
        for regime in ("vanilla_kd", "avg_ensemble", "mtbert", "skd"):
            teachers = blob_teachers[:1] if regime == "vanilla_kd" else blob_teachers
            clf = DistillationClassifier(teachers=teachers, regime=regime,
                                         epochs=5, batch_size=32, seed=0)
            clf.fit(train.features, train.labels)
            counts[regime] = (clf.teacher_forward_count_, clf.iterations_)
        assert counts["vanilla_kd"][0] == counts["vanilla_kd"][1]
        assert counts["skd"][0] == counts["skd"][1]
        assert counts["avg_ensemble"][0] == n * counts["avg_ensemble"][1]
        assert counts["mtbert"][0] == n * counts["mtbert"][1]

    def test_skd_sample_counts_sum_to_iterations(self, blob_teachers, blob_data):
        train, _ = blob_data
        clf = DistillationClassifier(teachers=blob_teachers, regime="skd",
                                     epochs=8, batch_size=32, seed=1)
        clf.fit(train.features, train.labels)
        assert clf.sample_counts_.sum() == clf.iterations_

    def test_skd_singleton_team_matches_vanilla(self, blob_teachers, blob_data):
        train, _ = blob_data
        teacher = blob_teachers[:1]
        kwargs = dict(temperature=2.0, alpha=1.0, beta=1.0, hidden_dims=(8,),
                      epochs=10, batch_size=32, seed=4)
        vanilla = DistillationClassifier(teachers=teacher, regime="vanilla_kd", **kwargs)
        skd = DistillationClassifier(teachers=teacher, regime="skd", **kwargs)
        vanilla.fit(train.features, train.labels)
        skd.fit(train.features, train.labels)
        assert vanilla.step_losses_ == skd.step_losses_
        for wa, wb in zip(vanilla.model_.weights, skd.model_.weights):
            assert np.array_equal(wa, wb)

    def test_skd_point_mass_matches_vanilla_on_that_teacher(self, blob_teachers, blob_data):
        train, _ = blob_data
        kwargs = dict(temperature=2.0, hidden_dims=(8,), epochs=10, batch_size=32, seed=5)
        vanilla = DistillationClassifier(teachers=[blob_teachers[2]],
                                         regime="vanilla_kd", **kwargs)
        point = DistillationClassifier(
            teachers=blob_teachers, regime="skd",
            distribution=SamplingDistribution.explicit([0.0, 0.0, 1.0]), **kwargs)
        vanilla.fit(train.features, train.labels)
        point.fit(train.features, train.labels)
        assert vanilla.step_losses_ == point.step_losses_
        assert point.sample_counts_[0] == 0 and point.sample_counts_[1] == 0

    def test_epoch_resampling_blocks(self, blob_teachers, blob_data):
        train, _ = blob_data
        epochs, batch = 6, 32
        clf = DistillationClassifier(teachers=blob_teachers, regime="skd",
                                     resample_every="epoch", epochs=epochs,
                                     batch_size=batch, seed=2)
        clf.fit(train.features, train.labels)
        per_epoch = -(-train.n_examples // batch)
        assert clf.sample_counts_.sum() == clf.iterations_ == epochs * per_epoch
        # one teacher per epoch: every count is a multiple of the epoch length
        assert all(c % per_epoch == 0 for c in clf.sample_counts_)

    def test_distillation_learns(self, blob_teachers, blob_data):
        train, test = blob_data
        clf = DistillationClassifier(teachers=blob_teachers, regime="avg_ensemble",
                                     hidden_dims=(8,), epochs=40, batch_size=32, seed=0)
        clf.fit(train.features, train.labels, eval_set=(test.features, test.labels))
        acc = float(np.mean(clf.predict(test.features) == test.labels))
        assert acc > 0.95
        assert len(clf.history_) == 40

    def test_mtbert_regime_trains(self, blob_teachers, blob_data):
        train, _ = blob_data
        clf = DistillationClassifier(teachers=blob_teachers, regime="mtbert",
                                     epochs=20, batch_size=32, seed=0)
        clf.fit(train.features, train.labels)
        assert float(np.mean(clf.predict(train.features) == train.labels)) > 0.9

    def test_accepts_raw_mlp_models(self, blob_teachers, blob_data):
        train, _ = blob_data
        raw = [t.model_ for t in blob_teachers]
        clf = DistillationClassifier(teachers=raw, regime="skd", epochs=3, seed=0)
        clf.fit(train.features, train.labels)
        assert clf.teacher_forward_count_ == clf.iterations_

    def test_eval_set_with_unseen_label(self, blob_teachers, blob_data):
        train, test = blob_data
        clf = DistillationClassifier(teachers=blob_teachers, regime="skd",
                                     epochs=1, seed=0)
        bad_labels = test.labels.copy()
        bad_labels[0] = 99
        with pytest.raises(ConfigError):
            clf.fit(train.features, train.labels,
                    eval_set=(test.features, bad_labels))

    def test_clone_preserves_params(self, blob_teachers):
        clf = DistillationClassifier(teachers=blob_teachers, regime="mtbert",
                                     temperature=3.0, weight_temperature=2.0)
        cloned = clone(clf)
        assert cloned.temperature == 3.0 and cloned.weight_temperature == 2.0

    def test_mtbert_perfect_single_teacher_reduces_to_vanilla(self):
        # hand-built linear teacher with huge margins: its prediction is
        # exactly one-hot on every training point, so its quality weight is
        # exactly 1 and the weighted loss collapses to the vanilla distill
        # term (alpha=1, beta=0)
        from skdlab.network import MLP

        train = gen_blobs(3, 40, 10.0, seed=0)  # wide margins, no stragglers
        centers = np.stack([train.features[train.labels == c].mean(axis=0)
                            for c in range(3)])
        teacher = MLP([2, 3], "relu", [1e4 * centers], [np.zeros(3)])
        from skdlab.losses import soft_targets

        hard = soft_targets(teacher.forward(train.features), 1.0)
        assert np.all(hard[np.arange(train.n_examples), train.labels] == 1.0)

        kwargs = dict(temperature=2.0, alpha=1.0, beta=0.0, hidden_dims=(8,),
                      epochs=8, batch_size=32, seed=3)
        mt = DistillationClassifier(teachers=[teacher], regime="mtbert", **kwargs)
        vanilla = DistillationClassifier(teachers=[teacher], regime="vanilla_kd",
                                         **kwargs)
        mt.fit(train.features, train.labels)
        vanilla.fit(train.features, train.labels)
        assert mt.step_losses_ == vanilla.step_losses_
