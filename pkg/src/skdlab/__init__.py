"""skdlab: a desk-scale stochastic knowledge-distillation laboratory.

Single-teacher, averaged-ensemble, quality-weighted multi-teacher, and
sampled-teacher distillation with exact analytic gradients, reproducible
categorical teacher sampling, and an experiment harness that verifies the
numerics against independent oracles.
"""

from .convergence import (
    GradientLedger,
    LedgerReport,
    avg_target_term,
    expected_sampled_target,
    ledger_report,
    sampled_target_term,
    simulate_ledger,
)
from .datasets import CSVSchema, Dataset, gen_blobs, gen_spirals, load_csv, write_csv
from .estimators import REGIMES, DistillationClassifier, MLPClassifier
from .exceptions import (
    ConfigError,
    MetricUndefinedError,
    ParseError,
    RunError,
    ShapeError,
    SkdlabError,
    StateError,
)
from .losses import (
    KDConfig,
    avg_ensemble_logits,
    avg_ensemble_soft_target,
    distilled_loss,
    grad_distilled_wrt_student_logits,
    grad_total_wrt_student_logits,
    mtbert_grad_wrt_student_logits,
    mtbert_loss,
    mtbert_teacher_weights,
    one_hot,
    single_teacher_soft_target,
    soft_targets,
    student_loss,
    total_loss,
)
from .metrics import MetricReport, accuracy, f1_macro, pearson, spearman
from .network import MLP, MODEL_FORMAT, GradientTape, load_mlp, save_mlp
from .optim import AdamConfig, OptimizerState, SGDConfig, adam_step, lr_at, sgd_step
from .sampling import (
    SamplerState,
    SamplingDistribution,
    TeacherTeam,
    derive_seed,
    empirical_frequencies,
    resolve,
    sample_teacher,
    sample_teachers,
)

__version__ = "0.1.0"

__all__ = [
    "AdamConfig",
    "ConfigError",
    "CSVSchema",
    "Dataset",
    "DistillationClassifier",
    "GradientLedger",
    "GradientTape",
    "KDConfig",
    "LedgerReport",
    "MetricReport",
    "MetricUndefinedError",
    "MLP",
    "MLPClassifier",
    "MODEL_FORMAT",
    "OptimizerState",
    "ParseError",
    "REGIMES",
    "RunError",
    "SamplerState",
    "SamplingDistribution",
    "SGDConfig",
    "ShapeError",
    "SkdlabError",
    "StateError",
    "TeacherTeam",
    "accuracy",
    "adam_step",
    "avg_ensemble_logits",
    "avg_ensemble_soft_target",
    "avg_target_term",
    "derive_seed",
    "distilled_loss",
    "empirical_frequencies",
    "expected_sampled_target",
    "f1_macro",
    "gen_blobs",
    "gen_spirals",
    "grad_distilled_wrt_student_logits",
    "grad_total_wrt_student_logits",
    "ledger_report",
    "load_csv",
    "load_mlp",
    "lr_at",
    "mtbert_grad_wrt_student_logits",
    "mtbert_loss",
    "mtbert_teacher_weights",
    "one_hot",
    "pearson",
    "resolve",
    "sample_teacher",
    "sample_teachers",
    "sampled_target_term",
    "save_mlp",
    "sgd_step",
    "simulate_ledger",
    "single_teacher_soft_target",
    "soft_targets",
    "spearman",
    "student_loss",
    "total_loss",
    "write_csv",
]
