"""Numerical study of averaged-ensemble vs. sampled-teacher gradient amounts.

Over L iterations with a fixed teacher team, the accumulated per-class update
amount of average-ensemble distillation is

    g_avg[i] = sum_l (ln p(z_s^(l), T)_i - a_i) / T

where a = soft target of the averaged teacher logits, while sampling one
teacher per iteration accumulates

    g_skd[i] = sum_l (ln p(z_s^(l), T)_i - b_i^(l)) / T

with b^(l) the soft target of the teacher drawn at iteration l. The two
differ only through a vs. b: a is the deterministic full-team target (the
batch-gradient analog) and b is a one-sample estimate whose expectation is
the probability-weighted mean of the per-teacher soft targets (the
stochastic-gradient analog). Note E[b] != a in general: that difference is
the Jensen gap of softmax across teachers.

Both ledgers keep the ln term above verbatim; a ``corrected`` pair replacing
ln p with p (the softmax-gradient form) is accumulated side by side. The
shared student term cancels in every a-vs-b comparison either way.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ShapeError
from .losses import (
    PROB_FLOOR,
    avg_ensemble_soft_target,
    single_teacher_soft_target,
    soft_targets,
    _stack_teachers,
)
from .sampling import SamplerState, SamplingDistribution, resolve, sample_teachers
from .validation import check_positive


def avg_target_term(teacher_logits, temperature: float) -> np.ndarray:
    """The deterministic target term: soft target of the mean teacher logits."""
    return avg_ensemble_soft_target(teacher_logits, temperature)


def sampled_target_term(teacher_logits, index: int, temperature: float) -> np.ndarray:
    """The stochastic target term: soft target of one sampled teacher."""
    return single_teacher_soft_target(teacher_logits, index, temperature)


def _weighted_mean_rows(probs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """sum_n probs[n] * rows[n], accumulated in index order."""
    out = np.zeros(rows.shape[-1])
    for n in range(rows.shape[0]):
        out += probs[n] * rows[n]
    return out


def expected_sampled_target(teacher_logits, probs, temperature: float) -> np.ndarray:
    """Closed-form expectation of the sampled target term under ``probs``.

    Exactly sum_n P(n) * soft_targets(z_t^(n), T), accumulated in teacher
    order.
    """
    stack = _stack_teachers(teacher_logits)
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape[0] != stack.shape[0]:
        raise ShapeError(f"{probs.shape[0]} probabilities for {stack.shape[0]} teachers")
    soft = np.stack([soft_targets(stack[n], temperature) for n in range(stack.shape[0])])
    return _weighted_mean_rows(probs, soft)


@dataclass
class GradientLedger:
    """Accumulated update amounts plus the per-iteration decomposition."""

    temperature: float
    iterations: int
    resolved_probs: np.ndarray  # (N,)
    teacher_soft_targets: np.ndarray  # (N, C)
    avg_target: np.ndarray  # (C,) constant across iterations
    sampled_indices: np.ndarray  # (L,)
    sampled_targets: np.ndarray  # (L, C)
    g_avg: np.ndarray  # (C,)
    g_skd: np.ndarray  # (C,)
    g_avg_corrected: np.ndarray  # (C,)
    g_skd_corrected: np.ndarray  # (C,)

    @property
    def num_classes(self) -> int:
        return self.avg_target.shape[0]

    @property
    def sample_counts(self) -> np.ndarray:
        return np.bincount(self.sampled_indices, minlength=self.resolved_probs.shape[0])


def simulate_ledger(
    teacher_logits,
    student_trajectory,
    distribution: SamplingDistribution,
    temperature: float,
    seed: int,
) -> GradientLedger:
    """Accumulate both update ledgers over a fixed student logit trajectory.

    One teacher is drawn independently per iteration from ``distribution``;
    the student logits z_s^(l) are replayed as given, not co-evolved.
    """
    T = check_positive(temperature, "temperature")
    stack = _stack_teachers(teacher_logits)
    traj = np.asarray(student_trajectory, dtype=np.float64)
    if traj.ndim != 2:
        raise ShapeError("student_trajectory must be L x C")
    if traj.shape[1] != stack.shape[-1]:
        raise ShapeError(
            f"trajectory has {traj.shape[1]} classes, teachers have {stack.shape[-1]}"
        )
    if traj.shape[0] < 1:
        raise ShapeError("need at least one iteration")
    probs = resolve(distribution)
    if probs.shape[0] != stack.shape[0]:
        raise ShapeError(f"distribution covers {probs.shape[0]} of {stack.shape[0]} teachers")

    teacher_soft = np.stack([soft_targets(stack[n], T) for n in range(stack.shape[0])])
    a = avg_target_term(stack, T)
    state = SamplerState(seed)
    L, _ = traj.shape
    p_s = soft_targets(traj, T)  # (L, C), one row per iteration
    ln_ps = np.log(np.maximum(p_s, PROB_FLOOR))
    indices = sample_teachers(probs, state, L)
    sampled = teacher_soft[indices]
    g_avg = ((ln_ps - a) / T).sum(axis=0)
    g_skd = ((ln_ps - sampled) / T).sum(axis=0)
    g_avg_c = ((p_s - a) / T).sum(axis=0)
    g_skd_c = ((p_s - sampled) / T).sum(axis=0)
    return GradientLedger(
        temperature=T,
        iterations=L,
        resolved_probs=probs,
        teacher_soft_targets=teacher_soft,
        avg_target=a,
        sampled_indices=indices,
        sampled_targets=sampled,
        g_avg=g_avg,
        g_skd=g_skd,
        g_avg_corrected=g_avg_c,
        g_skd_corrected=g_skd_c,
    )


@dataclass
class LedgerReport:
    """Per-class summary of one ledger run."""

    avg_target: np.ndarray  # the deterministic (batch-analog) term, variance 0
    sampled_mean: np.ndarray  # Monte-Carlo mean of the sampled term
    sampled_var: np.ndarray  # per-class sample variance (the SGD-noise analog)
    expected_sampled: np.ndarray  # closed-form expectation
    jensen_gap: np.ndarray  # avg_target - expected_sampled
    g_avg: np.ndarray
    g_skd: np.ndarray
    g_avg_corrected: np.ndarray
    g_skd_corrected: np.ndarray
    iterations: int
    temperature: float
    sample_counts: np.ndarray

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "temperature": self.temperature,
            "avg_target": self.avg_target.tolist(),
            "sampled_mean": self.sampled_mean.tolist(),
            "sampled_var": self.sampled_var.tolist(),
            "expected_sampled": self.expected_sampled.tolist(),
            "jensen_gap": self.jensen_gap.tolist(),
            "g_avg": self.g_avg.tolist(),
            "g_skd": self.g_skd.tolist(),
            "g_avg_corrected": self.g_avg_corrected.tolist(),
            "g_skd_corrected": self.g_skd_corrected.tolist(),
            "sample_counts": self.sample_counts.tolist(),
        }


def ledger_report(ledger: GradientLedger) -> LedgerReport:
    """Summarize a ledger: sampling moments, Jensen gap, and both g pairs."""
    e_b = _weighted_mean_rows(ledger.resolved_probs, ledger.teacher_soft_targets)
    degenerate = bool(np.all(ledger.sampled_targets == ledger.sampled_targets[0]))
    if degenerate:
        # every draw hit the same target: moments are exact, not fp-averaged
        mean = ledger.sampled_targets[0].copy()
        var = np.zeros(ledger.num_classes)
    else:
        mean = ledger.sampled_targets.mean(axis=0)
        var = ledger.sampled_targets.var(axis=0, ddof=1)
    return LedgerReport(
        avg_target=ledger.avg_target,
        sampled_mean=mean,
        sampled_var=var,
        expected_sampled=e_b,
        jensen_gap=ledger.avg_target - e_b,
        g_avg=ledger.g_avg,
        g_skd=ledger.g_skd,
        g_avg_corrected=ledger.g_avg_corrected,
        g_skd_corrected=ledger.g_skd_corrected,
        iterations=ledger.iterations,
        temperature=ledger.temperature,
        sample_counts=ledger.sample_counts,
    )
