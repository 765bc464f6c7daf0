"""Distillation losses, soft targets, and their exact logit gradients.

Every function operates on the last axis, so a single logit vector of length
C and a batch of shape (B, C) are both accepted; scalar-valued losses return
a scalar for 1-D input and a length-B vector for 2-D input. Reduction over a
batch (the arithmetic mean) is left to the caller.

Probabilities are clamped to ``PROB_FLOOR`` before any log so that exactly
one-hot targets (a legal input) stay finite.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, ShapeError
from .validation import as_logits, check_positive, check_same_last_dim

PROB_FLOOR = 1e-300


@dataclass(frozen=True)
class KDConfig:
    """Temperature and loss weights for distillation.

    ``temperature`` scales both the teacher and the student soft targets;
    ``alpha`` weights the distillation term and ``beta`` the ground-truth
    term of the total loss.
    """

    temperature: float = 4.0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        check_positive(self.temperature, "temperature")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be nonnegative")
        if self.alpha + self.beta <= 0:
            raise ConfigError("alpha + beta must be positive")


def soft_targets(z, temperature: float) -> np.ndarray:
    """Temperature softmax: p_i = exp(z_i/T) / sum_j exp(z_j/T).

    Computed with max-subtraction for stability; each row sums to 1 within
    1e-12 and the result is shift-invariant in z.
    """
    check_positive(temperature, "temperature")
    z = as_logits(z)
    # max-subtract before tempering so shift invariance is exact
    shifted = (z - z.max(axis=-1, keepdims=True)) / temperature
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def one_hot(labels, n_classes: int) -> np.ndarray:
    """One-hot encode an int label or a vector of int labels."""
    labels = np.asarray(labels)
    scalar = labels.ndim == 0
    idx = np.atleast_1d(labels).astype(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= n_classes):
        raise ShapeError(f"labels outside [0, {n_classes})")
    out = np.zeros((idx.shape[0], n_classes))
    out[np.arange(idx.shape[0]), idx] = 1.0
    return out[0] if scalar else out


def _safe_log(p: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(p, PROB_FLOOR))


def distilled_loss(p_t, p_s):
    """Cross-entropy from teacher soft target to student soft target.

    Returns sum_i -p_t[i] * ln(p_s[i]), per row for batched input.
    """
    p_t = np.asarray(p_t, dtype=np.float64)
    p_s = np.asarray(p_s, dtype=np.float64)
    if p_t.shape[-1] != p_s.shape[-1]:
        raise ShapeError(f"class counts differ: {p_t.shape[-1]} vs {p_s.shape[-1]}")
    return np.sum(-p_t * _safe_log(p_s), axis=-1)


def student_loss(labels, p_s):
    """Cross-entropy from the one-hot ground truth: equals -ln(p_s[label])."""
    p_s = np.asarray(p_s, dtype=np.float64)
    y = one_hot(labels, p_s.shape[-1])
    if p_s.ndim == 2 and y.ndim == 1:
        raise ShapeError("batched p_s needs one label per row")
    return np.sum(-y * _safe_log(p_s), axis=-1)


def total_loss(z_t, z_s, labels, cfg: KDConfig):
    """alpha * distilled + beta * ground-truth loss, both at temperature T.

    The ground-truth term also uses the temperature-T student soft target.
    """
    z_t, z_s = as_logits(z_t, "z_t"), as_logits(z_s, "z_s")
    check_same_last_dim(z_t, z_s, "z_t and z_s")
    p_s = soft_targets(z_s, cfg.temperature)
    p_t = soft_targets(z_t, cfg.temperature)
    return cfg.alpha * distilled_loss(p_t, p_s) + cfg.beta * student_loss(labels, p_s)


def grad_distilled_wrt_student_logits(z_t, z_s, temperature: float) -> np.ndarray:
    """Exact gradient of the distilled loss w.r.t. the student logits.

    The closed form is (p(z_s, T) - p(z_t, T)) / T; its components sum to
    zero because softmax gradients live in the zero-sum hyperplane.
    """
    z_t, z_s = as_logits(z_t, "z_t"), as_logits(z_s, "z_s")
    check_same_last_dim(z_t, z_s, "z_t and z_s")
    return (soft_targets(z_s, temperature) - soft_targets(z_t, temperature)) / temperature


def grad_total_wrt_student_logits(z_t, z_s, labels, cfg: KDConfig) -> np.ndarray:
    """Gradient of total_loss w.r.t. the student logits.

    alpha * (p_s - p_t)/T + beta * (p_s - onehot(y))/T.
    """
    z_t, z_s = as_logits(z_t, "z_t"), as_logits(z_s, "z_s")
    check_same_last_dim(z_t, z_s, "z_t and z_s")
    T = cfg.temperature
    p_s = soft_targets(z_s, T)
    y = one_hot(labels, z_s.shape[-1])
    grad = cfg.alpha * (p_s - soft_targets(z_t, T)) / T
    return grad + cfg.beta * (p_s - y) / T


def avg_ensemble_logits(teacher_logits) -> np.ndarray:
    """Elementwise mean of N teacher logit vectors (or N stacked batches)."""
    stack = _stack_teachers(teacher_logits)
    return stack.mean(axis=0)


def avg_ensemble_soft_target(teacher_logits, temperature: float) -> np.ndarray:
    """Soft target of the averaged ensemble logits.

    Note this is generally NOT the mean of the per-teacher soft targets:
    softmax of a mean differs from the mean of softmaxes whenever the
    teachers disagree (the Jensen gap).
    """
    return soft_targets(avg_ensemble_logits(teacher_logits), temperature)


def single_teacher_soft_target(teacher_logits, index: int, temperature: float) -> np.ndarray:
    """Soft target of one sampled teacher's logits."""
    stack = _stack_teachers(teacher_logits)
    n = stack.shape[0]
    if not 0 <= index < n:
        raise IndexError(f"teacher index {index} out of range for team of {n}")
    return soft_targets(stack[index], temperature)


def mtbert_teacher_weights(teacher_logits, labels, weight_temperature: float = 1.0) -> np.ndarray:
    """Quality weight per teacher: 1 / (1 + CE(ground truth, teacher prediction)).

    The cross-entropy is taken against the teacher's soft target at
    ``weight_temperature`` (default 1, i.e. the plain prediction), so a
    teacher that nails the label gets weight 1 and the weight strictly
    decreases as its ground-truth cross-entropy grows.

    Returns shape (N,) for vector logits, (N, B) for batched logits.
    """
    stack = _stack_teachers(teacher_logits)
    ces = np.stack(
        [student_loss(labels, soft_targets(stack[i], weight_temperature)) for i in range(stack.shape[0])]
    )
    return 1.0 / (1.0 + ces)


def mtbert_loss(teacher_logits, z_s, labels, temperature: float, weight_temperature: float = 1.0):
    """CE-weighted multi-teacher distillation loss.

    sum_i CE(p(z_ti, T), p(z_s, T)) / (1 + CE(y, p(z_ti, weight_temperature))).
    """
    stack = _stack_teachers(teacher_logits)
    z_s = as_logits(z_s, "z_s")
    check_same_last_dim(stack, z_s, "teacher logits and z_s")
    p_s = soft_targets(z_s, temperature)
    w = mtbert_teacher_weights(stack, labels, weight_temperature)
    out = 0.0
    for i in range(stack.shape[0]):
        out = out + w[i] * distilled_loss(soft_targets(stack[i], temperature), p_s)
    return out


def mtbert_grad_wrt_student_logits(
    teacher_logits, z_s, labels, temperature: float, weight_temperature: float = 1.0
) -> np.ndarray:
    """Gradient of mtbert_loss w.r.t. the student logits.

    sum_i w_i * (p(z_s, T) - p(z_ti, T)) / T with the same weights as the
    loss; components sum to zero.
    """
    stack = _stack_teachers(teacher_logits)
    z_s = as_logits(z_s, "z_s")
    check_same_last_dim(stack, z_s, "teacher logits and z_s")
    T = check_positive(temperature, "temperature")
    p_s = soft_targets(z_s, T)
    w = mtbert_teacher_weights(stack, labels, weight_temperature)
    grad = np.zeros_like(p_s)
    for i in range(stack.shape[0]):
        wi = w[i] if np.ndim(w[i]) == 0 else w[i][:, None]
        grad = grad + wi * (p_s - soft_targets(stack[i], T)) / T
    return grad


def _stack_teachers(teacher_logits) -> np.ndarray:
    """Stack a nonempty sequence of logit arrays along a new leading axis."""
    if isinstance(teacher_logits, np.ndarray) and teacher_logits.ndim >= 2:
        stack = teacher_logits.astype(np.float64)
    else:
        seq = list(teacher_logits)
        if not seq:
            raise ConfigError("teacher team is empty")
        stack = np.stack([np.asarray(t, dtype=np.float64) for t in seq])
    if stack.shape[0] == 0:
        raise ConfigError("teacher team is empty")
    if stack.shape[-1] < 2:
        raise ShapeError("teacher logits need at least 2 classes")
    return stack
