"""Shared fixtures. The spirals distillation protocol is expensive (35 full
training runs) so it is trained once per session and reused by the harness
tests and the acceptance suite."""

import numpy as np
import pytest

from skdlab.config import DatasetSpec, ExperimentConfig, TeacherSpec
from skdlab.harness import build_datasets, distill_with_teachers, fit_teacher
from skdlab.sampling import SamplingDistribution

TEACHER_WIDTHS = (4, 8, 16, 32, 64)
PROTOCOL_SEEDS = (0, 1, 2, 3, 4)


def arrows_config() -> ExperimentConfig:
    """The 5-teacher uniform-skd protocol on spirals(3, 200/class, noise 0.1)."""
    return ExperimentConfig(
        dataset=DatasetSpec(kind="spirals", classes=3, points_per_class=200,
                            noise_sd=0.1, seed=0),
        student_hidden_dims=(8,),
        teachers=tuple(TeacherSpec(hidden_dims=(w,)) for w in TEACHER_WIDTHS),
        regime="skd",
        distribution=SamplingDistribution.uniform(len(TEACHER_WIDTHS)),
        epochs=200, teacher_epochs=200, batch_size=32,
        seeds=PROTOCOL_SEEDS,
    )


@pytest.fixture(scope="session")
def arrows_runs():
    """Teachers, no-KD baselines, and skd students for every protocol seed."""
    cfg = arrows_config()
    train, test = build_datasets(cfg)
    runs = {"config": cfg, "train": train, "test": test,
            "teacher_reports": {}, "teacher_models": {},
            "baseline_reports": {}, "skd_reports": {}}
    for seed in cfg.seeds:
        estimators = [fit_teacher(cfg, i, seed, train, test) for i in range(len(cfg.teachers))]
        runs["teacher_models"][seed] = [est.model_ for est, _ in estimators]
        runs["teacher_reports"][seed] = [rep for _, rep in estimators]
        runs["baseline_reports"][seed] = distill_with_teachers(
            cfg, seed, [], train, test, regime="none")
        runs["skd_reports"][seed] = distill_with_teachers(
            cfg, seed, runs["teacher_models"][seed], train, test, regime="skd")
    return runs


def mean_test_accuracy(reports: dict) -> float:
    return float(np.mean([r.final["test"]["accuracy"] for r in reports.values()]))
