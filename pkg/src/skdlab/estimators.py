"""Scikit-learn style estimators wrapping the training loops.

``MLPClassifier`` trains a softmax classifier with plain cross-entropy (the
no-distillation baseline, also used to produce teachers).
``DistillationClassifier`` trains a student against a frozen teacher team
under one of four regimes:

- ``vanilla_kd``: one teacher's tempered soft target.
- ``avg_ensemble``: soft target of the teachers' averaged logits.
- ``mtbert``: per-teacher distillation terms weighted by 1/(1 + CE against
  the ground truth).
- ``skd``: one teacher sampled per iteration from a categorical
  distribution; only the sampled teacher is forwarded, which is the entire
  compute saving of the regime.

Both estimators expose ``get_params``/``set_params`` via ``BaseEstimator``
and validate inputs on fit, so they compose with the usual sklearn tooling.

Determinism: all randomness derives from the ``seed`` parameter. The data
shuffle stream uses the seed directly; the student init uses
``derive_seed(seed, INIT_STREAM)``; the teacher-selection stream uses
``derive_seed(seed, TEACHER_PICK_STREAM)`` and is only consumed by the skd
regime, so runs that differ only in regime see identical shuffles and inits.
"""

import dataclasses

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.exceptions import NotFittedError

from . import losses
from .exceptions import ConfigError, RunError
from .network import MLP
from .optim import AdamConfig, OptimizerState, SGDConfig, adam_step, default_optimizer, sgd_step
from .sampling import SamplerState, SamplingDistribution, derive_seed, resolve, sample_teacher
from .validation import as_float_matrix

REGIMES = ("none", "vanilla_kd", "avg_ensemble", "mtbert", "skd")

# seed-splitting stream tags (XORed with the run seed)
INIT_STREAM = 0x1217
TEACHER_PICK_STREAM = 0x7EAC


def _as_mlp(obj) -> MLP:
    if isinstance(obj, MLP):
        return obj
    model = getattr(obj, "model_", None)
    if isinstance(model, MLP):
        return model
    raise ConfigError(f"expected an MLP or a fitted estimator, got {type(obj).__name__}")


def _check_fitted(est, attr: str = "model_"):
    if not hasattr(est, attr):
        raise NotFittedError(
            f"This {type(est).__name__} instance is not fitted yet; call fit first."
        )


def _encode_labels(classes: np.ndarray, y) -> np.ndarray:
    y = np.asarray(y)
    if y.size and not np.isin(y, classes).all():
        raise ConfigError("eval labels contain classes unseen during fit")
    return np.searchsorted(classes, y)


def _optimizer_step_fn(cfg):
    if isinstance(cfg, SGDConfig):
        return sgd_step
    if isinstance(cfg, AdamConfig):
        return adam_step
    raise ConfigError(f"unknown optimizer config {type(cfg).__name__}")


def _train(
    model: MLP,
    X: np.ndarray,
    y_idx: np.ndarray,
    *,
    upstream_fn,
    optimizer_cfg,
    epochs: int,
    batch_size: int,
    shuffle_seed: int,
    eval_sets: dict,
    run_name: str,
):
    """Mini-batch training loop shared by both estimators.

    ``upstream_fn(Xb, yb, logits)`` returns (per-example losses, per-example
    logit gradients); the loop handles shuffling, stepping, divergence
    detection, and per-epoch accuracy bookkeeping.
    """
    if epochs < 0:
        raise ConfigError("epochs must be nonnegative")
    if batch_size < 1:
        raise ConfigError("batch_size must be positive")
    n = X.shape[0]
    n_batches = max(1, -(-n // batch_size))
    if isinstance(optimizer_cfg, AdamConfig):
        optimizer_cfg = dataclasses.replace(
            optimizer_cfg, total_steps=max(1, epochs * n_batches)
        )
    step = _optimizer_step_fn(optimizer_cfg)
    state = OptimizerState.for_model(model, optimizer_cfg)
    rng = np.random.Generator(np.random.PCG64(shuffle_seed))
    step_losses: list[float] = []
    history: list[dict] = []
    for epoch in range(epochs):
        state.epoch = epoch
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            batch = order[start : start + batch_size]
            Xb, yb = X[batch], y_idx[batch]
            logits = model.forward(Xb)
            if not np.all(np.isfinite(logits)):
                raise RunError(f"{run_name}: diverged (non-finite logits) at epoch {epoch}")
            losses_b, upstream = upstream_fn(Xb, yb, logits)
            mean_loss = float(np.mean(losses_b))
            if not np.isfinite(mean_loss):
                raise RunError(f"{run_name}: non-finite loss at epoch {epoch}")
            tape = model.backward(upstream)
            step(model, tape, state, optimizer_cfg)
            step_losses.append(mean_loss)
        entry = {"epoch": epoch, "mean_loss": float(np.mean(step_losses[-n_batches:]))}
        for tag, (Xe, ye) in eval_sets.items():
            preds = np.argmax(model.forward(Xe), axis=1)
            entry[f"{tag}_accuracy"] = float(np.mean(preds == ye))
        history.append(entry)
    return state, step_losses, history


class MLPClassifier(ClassifierMixin, BaseEstimator):
    """Softmax MLP classifier trained with plain cross-entropy.

    Parameters
    ----------
    hidden_dims : tuple of int, hidden layer widths (empty for a linear model).
    activation : "relu" or "tanh".
    optimizer : SGDConfig or AdamConfig; None means the desk-scale default
        (SGD, lr 0.2, milestone decay).
        For AdamConfig, total_steps is rebound to the actual run length so
        the warmup/decay schedule spans the run.
    epochs, batch_size, seed : training loop controls.

    Attributes (after fit)
    ----------------------
    model_ : the underlying MLP.
    classes_ : sorted unique labels.
    loss_curve_ : per-epoch mean training loss.
    history_ : per-epoch dicts with mean_loss and accuracies.
    """

    def __init__(self, hidden_dims=(16,), activation="relu", optimizer=None,
                 epochs=200, batch_size=32, seed=0):
        self.hidden_dims = hidden_dims
        self.activation = activation
        self.optimizer = optimizer
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def fit(self, X, y, eval_set=None):
        X = as_float_matrix(X)
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ConfigError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.shape[0] < 2:
            raise ConfigError("need at least 2 classes")
        self.n_features_in_ = X.shape[1]
        dims = [X.shape[1], *self.hidden_dims, self.classes_.shape[0]]
        self.model_ = MLP.glorot_init(dims, self.activation, derive_seed(self.seed, INIT_STREAM))
        cfg = self.optimizer if self.optimizer is not None else default_optimizer()

        def upstream(Xb, yb, logits):
            p = losses.soft_targets(logits, 1.0)
            return losses.student_loss(yb, p), p - losses.one_hot(yb, p.shape[-1])

        eval_sets = {"train": (X, y_idx)}
        if eval_set is not None:
            Xe = as_float_matrix(eval_set[0], "eval X")
            eval_sets["test"] = (Xe, _encode_labels(self.classes_, eval_set[1]))
        self.state_, self.step_losses_, self.history_ = _train(
            self.model_, X, y_idx,
            upstream_fn=upstream, optimizer_cfg=cfg,
            epochs=self.epochs, batch_size=self.batch_size,
            shuffle_seed=self.seed, eval_sets=eval_sets,
            run_name="MLPClassifier",
        )
        self.loss_curve_ = [h["mean_loss"] for h in self.history_]
        return self

    def decision_function(self, X):
        _check_fitted(self)
        X = as_float_matrix(X)
        return self.model_.forward(X)

    def predict_proba(self, X):
        return losses.soft_targets(self.decision_function(X), 1.0)

    def predict(self, X):
        logits = self.decision_function(X)
        return self.classes_[np.argmax(logits, axis=1)]


class DistillationClassifier(ClassifierMixin, BaseEstimator):
    """Student classifier distilled from a frozen teacher team.

    The per-example loss is ``alpha * D + beta * CE(y, p(z_s, T))`` where D
    is the regime's distillation term and both cross-entropies use the
    temperature-T student soft target. Teachers are never updated.

    Parameters
    ----------
    teachers : sequence of MLP or fitted MLPClassifier (frozen).
    regime : "vanilla_kd", "avg_ensemble", "mtbert", or "skd".
    temperature, alpha, beta : KD loss controls.
    distribution : SamplingDistribution for skd; None means uniform.
    weight_temperature : temperature of the mtbert quality weights.
    resample_every : "batch" (default) or "epoch"; how often skd redraws
        its teacher.
    hidden_dims, activation, optimizer, epochs, batch_size, seed : as in
        MLPClassifier.

    Attributes (after fit)
    ----------------------
    model_, classes_, loss_curve_, history_ : as in MLPClassifier.
    step_losses_ : per-iteration mean batch loss.
    sample_counts_ : draws per teacher (skd; zeros otherwise).
    teacher_forward_count_ : total teacher forward passes taken.
    iterations_ : total optimization steps taken.
    """

    def __init__(self, teachers=None, regime="skd", temperature=2.0, alpha=1.0,
                 beta=1.0, distribution=None, weight_temperature=1.0,
                 resample_every="batch", hidden_dims=(8,), activation="relu",
                 optimizer=None, epochs=200, batch_size=32, seed=0):
        self.teachers = teachers
        self.regime = regime
        self.temperature = temperature
        self.alpha = alpha
        self.beta = beta
        self.distribution = distribution
        self.weight_temperature = weight_temperature
        self.resample_every = resample_every
        self.hidden_dims = hidden_dims
        self.activation = activation
        self.optimizer = optimizer
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def _teacher_models(self) -> list[MLP]:
        if not self.teachers:
            raise ConfigError("DistillationClassifier needs at least one teacher")
        return [_as_mlp(t) for t in self.teachers]

    def fit(self, X, y, eval_set=None):
        if self.regime not in REGIMES or self.regime == "none":
            raise ConfigError(
                f"regime must be one of {[r for r in REGIMES if r != 'none']}, got {self.regime!r}"
            )
        if self.resample_every not in ("batch", "epoch"):
            raise ConfigError("resample_every must be 'batch' or 'epoch'")
        teachers = self._teacher_models()
        n_teachers = len(teachers)
        if self.regime == "vanilla_kd" and n_teachers != 1:
            raise ConfigError("vanilla_kd requires exactly one teacher")
        kd = losses.KDConfig(self.temperature, self.alpha, self.beta)

        X = as_float_matrix(X)
        y = np.asarray(y)
        if y.shape[0] != X.shape[0]:
            raise ConfigError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        n_classes = self.classes_.shape[0]
        for i, t in enumerate(teachers):
            if t.output_dim != n_classes:
                raise ConfigError(
                    f"teacher {i} has output dim {t.output_dim}, data has {n_classes} classes"
                )
            if t.input_dim != X.shape[1]:
                raise ConfigError(
                    f"teacher {i} expects {t.input_dim} features, data has {X.shape[1]}"
                )
        self.n_features_in_ = X.shape[1]
        dims = [X.shape[1], *self.hidden_dims, n_classes]
        self.model_ = MLP.glorot_init(dims, self.activation, derive_seed(self.seed, INIT_STREAM))
        cfg = self.optimizer if self.optimizer is not None else default_optimizer()

        T = kd.temperature
        forward_count = 0
        sample_counts = np.zeros(n_teachers, dtype=np.int64)
        picker = SamplerState(derive_seed(self.seed, TEACHER_PICK_STREAM))
        if self.regime == "skd":
            dist = self.distribution or SamplingDistribution.uniform(n_teachers)
            if dist.size != n_teachers:
                raise ConfigError(
                    f"distribution covers {dist.size} teachers, team has {n_teachers}"
                )
            probs = resolve(dist)
        current_pick: list[int | None] = [None]  # per-epoch resample slot

        def teacher_target(Xb):
            """Tempered teacher soft target for this batch, counting forwards."""
            nonlocal forward_count
            if self.regime == "vanilla_kd":
                forward_count += 1
                return losses.soft_targets(teachers[0].forward(Xb), T)
            if self.regime == "avg_ensemble":
                forward_count += n_teachers
                zt = [t.forward(Xb) for t in teachers]
                return losses.avg_ensemble_soft_target(zt, T)
            # skd: counts record which teacher served each iteration
            if self.resample_every == "batch" or current_pick[0] is None:
                current_pick[0] = sample_teacher(probs, picker)
            n = current_pick[0]
            sample_counts[n] += 1
            forward_count += 1
            return losses.soft_targets(teachers[n].forward(Xb), T)

        def upstream(Xb, yb, logits):
            nonlocal forward_count
            p_s = losses.soft_targets(logits, T)
            y_hot = losses.one_hot(yb, n_classes)
            if self.regime == "mtbert":
                forward_count += n_teachers
                zt = [t.forward(Xb) for t in teachers]
                dist_term = losses.mtbert_loss(zt, logits, yb, T, self.weight_temperature)
                dist_grad = losses.mtbert_grad_wrt_student_logits(
                    zt, logits, yb, T, self.weight_temperature
                )
            else:
                p_t = teacher_target(Xb)
                dist_term = losses.distilled_loss(p_t, p_s)
                dist_grad = (p_s - p_t) / T
            loss = kd.alpha * dist_term + kd.beta * losses.student_loss(yb, p_s)
            grad = kd.alpha * dist_grad + kd.beta * (p_s - y_hot) / T
            return loss, grad

        eval_sets = {"train": (X, y_idx)}
        if eval_set is not None:
            Xe = as_float_matrix(eval_set[0], "eval X")
            eval_sets["test"] = (Xe, _encode_labels(self.classes_, eval_set[1]))

        n = X.shape[0]
        orig_upstream = upstream
        if self.regime == "skd" and self.resample_every == "epoch":
            epoch_len = max(1, -(-n // self.batch_size))
            calls = [0]

            def upstream(Xb, yb, logits):  # noqa: F811 - epoch resample wrapper
                if calls[0] % epoch_len == 0:
                    current_pick[0] = None
                calls[0] += 1
                return orig_upstream(Xb, yb, logits)

        self.state_, self.step_losses_, self.history_ = _train(
            self.model_, X, y_idx,
            upstream_fn=upstream, optimizer_cfg=cfg,
            epochs=self.epochs, batch_size=self.batch_size,
            shuffle_seed=self.seed, eval_sets=eval_sets,
            run_name=f"DistillationClassifier[{self.regime}]",
        )
        self.loss_curve_ = [h["mean_loss"] for h in self.history_]
        self.sample_counts_ = sample_counts
        self.teacher_forward_count_ = forward_count
        self.iterations_ = len(self.step_losses_)
        return self

    def decision_function(self, X):
        _check_fitted(self)
        X = as_float_matrix(X)
        return self.model_.forward(X)

    def predict_proba(self, X):
        return losses.soft_targets(self.decision_function(X), 1.0)

    def predict(self, X):
        logits = self.decision_function(X)
        return self.classes_[np.argmax(logits, axis=1)]
