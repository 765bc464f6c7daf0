"""Experiment orchestration: teacher training, distillation runs, verification
sweeps, and machine-readable reports.

Seed conventions (all XOR-derived from the run seed via ``derive_seed``):
teacher i trains with ``derive_seed(seed, TEACHER_SEED_BASE + i)``; the
generated test split uses ``derive_seed(dataset.seed, TEST_DATA_STREAM)``;
simulate-gradients ledger s uses ``derive_seed(sim.seed, SIM_SAMPLER_BASE + s)``.
"""

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats as scipy_stats

from . import losses
from .config import ExperimentConfig, SimSpec, config_hash
from .convergence import ledger_report, simulate_ledger
from .datasets import CSVSchema, Dataset, gen_blobs, gen_spirals, load_csv
from .estimators import DistillationClassifier, MLPClassifier
from .exceptions import ConfigError, RunError
from .metrics import classification_report
from .network import MLP, load_mlp, save_mlp
from .sampling import (
    SamplerState,
    SamplingDistribution,
    derive_seed,
    resolve,
    sample_teachers,
)

TEACHER_SEED_BASE = 0x7C00
TEST_DATA_STREAM = 0x0D07
SIM_SAMPLER_BASE = 0x51B0

GRADCHECK_TOLERANCE = 1e-6
GRADCHECK_CLASS_RANGE = range(2, 11)
GRADCHECK_TEMPERATURES = (0.5, 1.0, 2.0, 4.0, 8.0)


def build_datasets(cfg: ExperimentConfig) -> tuple[Dataset, Dataset]:
    """Materialize the train and test splits from the dataset spec."""
    ds = cfg.dataset
    test_n = ds.test_points_per_class or ds.points_per_class
    test_seed = derive_seed(ds.seed, TEST_DATA_STREAM)
    if ds.kind == "spirals":
        train = gen_spirals(ds.classes, ds.points_per_class, ds.noise_sd, ds.seed)
        test = gen_spirals(ds.classes, test_n, ds.noise_sd, test_seed, split="test")
    elif ds.kind == "blobs":
        train = gen_blobs(ds.classes, ds.points_per_class, ds.separation, ds.seed)
        test = gen_blobs(ds.classes, test_n, ds.separation, test_seed, split="test")
    else:
        schema = CSVSchema(n_features=ds.n_features, n_classes=ds.classes)
        train = load_csv(ds.train_path, schema)
        test = load_csv(ds.test_path, schema, split="test")
    return train, test


def teacher_name(cfg: ExperimentConfig, index: int) -> str:
    return cfg.teachers[index].name or f"T{index + 1:02d}"


def checkpoint_path(out_dir, seed: int, name: str) -> Path:
    return Path(out_dir) / "teachers" / f"seed{seed}" / f"{name}.skdm"


@dataclass
class RunReport:
    """One training run's record; metrics are deterministic per (config, seed)."""

    regime: str
    seed: int
    config_hash: str
    team_name: str
    epochs: list[dict] = field(default_factory=list)
    final: dict = field(default_factory=dict)
    best: dict = field(default_factory=dict)
    wall_clock_s: float = 0.0
    sample_counts: list[int] = field(default_factory=list)
    teacher_forward_count: int = 0
    iterations: int = 0
    step_losses: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "team_name": self.team_name,
            "epochs": self.epochs,
            "final": self.final,
            "best": self.best,
            "wall_clock_s": self.wall_clock_s,
            "sample_counts": self.sample_counts,
            "teacher_forward_count": self.teacher_forward_count,
            "iterations": self.iterations,
            "step_losses": self.step_losses,
        }


def _finalize_report(report: RunReport, est, train: Dataset, test: Dataset) -> RunReport:
    train_preds = est.predict(train.features)
    test_preds = est.predict(test.features)
    report.final = {
        "train": classification_report(train_preds, train.labels).to_dict(),
        "test": classification_report(test_preds, test.labels).to_dict(),
    }
    history = getattr(est, "history_", [])
    report.epochs = history
    if history and "test_accuracy" in history[0]:
        best = max(history, key=lambda h: h["test_accuracy"])
        report.best = {"epoch": best["epoch"], "test_accuracy": best["test_accuracy"]}
    else:
        report.best = {"epoch": None, "test_accuracy": report.final["test"]["accuracy"]}
    report.step_losses = [float(v) for v in getattr(est, "step_losses_", [])]
    report.iterations = len(report.step_losses)
    return report


def fit_teacher(cfg: ExperimentConfig, index: int, seed: int,
                train: Dataset, test: Dataset) -> tuple[MLPClassifier, RunReport]:
    """Train one teacher independently on the train split."""
    spec = cfg.teachers[index]
    name = teacher_name(cfg, index)
    est = MLPClassifier(
        hidden_dims=spec.hidden_dims, activation=spec.activation,
        optimizer=cfg.optimizer, epochs=cfg.teacher_epochs,
        batch_size=cfg.batch_size, seed=derive_seed(seed, TEACHER_SEED_BASE + index),
    )
    started = time.perf_counter()
    try:
        est.fit(train.features, train.labels, eval_set=(test.features, test.labels))
    except RunError as exc:
        raise RunError(f"teacher {name}: {exc}") from exc
    report = RunReport(regime="none", seed=seed, config_hash=config_hash(cfg),
                       team_name=name)
    _finalize_report(report, est, train, test)
    report.wall_clock_s = time.perf_counter() - started
    return est, report


def train_teachers(cfg: ExperimentConfig):
    """Train every teacher for every seed; persist checkpoints.

    Returns (paths, reports): paths maps (seed, teacher name) to the written
    checkpoint file.
    """
    if not cfg.teachers:
        raise ConfigError("no teachers configured")
    train, test = build_datasets(cfg)
    paths: dict[tuple[int, str], Path] = {}
    reports: list[RunReport] = []
    for seed in cfg.seeds:
        for i in range(len(cfg.teachers)):
            est, report = fit_teacher(cfg, i, seed, train, test)
            name = teacher_name(cfg, i)
            path = checkpoint_path(cfg.out_dir, seed, name)
            try:
                path.parent.mkdir(parents=True, exist_ok=True)
                save_mlp(est.model_, path)
            except OSError as exc:
                raise RunError(f"cannot write checkpoint {path}: {exc}") from exc
            paths[(seed, name)] = path
            reports.append(report)
    return paths, reports


def load_team_models(cfg: ExperimentConfig, seed: int) -> list[MLP]:
    """Load the teacher checkpoints for one seed (explicit paths win)."""
    models = []
    for i, spec in enumerate(cfg.teachers):
        path = Path(spec.checkpoint) if spec.checkpoint else checkpoint_path(
            cfg.out_dir, seed, teacher_name(cfg, i)
        )
        if not path.exists():
            raise RunError(f"missing teacher checkpoint: {path}")
        models.append(load_mlp(path))
    return models


def distill_with_teachers(cfg: ExperimentConfig, seed: int, teachers: list[MLP],
                          train: Dataset, test: Dataset,
                          regime: str | None = None) -> RunReport:
    """Run one distillation (or baseline) cell against in-memory teachers."""
    regime = regime or cfg.regime
    started = time.perf_counter()
    if regime == "none":
        est = MLPClassifier(
            hidden_dims=cfg.student_hidden_dims, activation=cfg.student_activation,
            optimizer=cfg.optimizer, epochs=cfg.epochs,
            batch_size=cfg.batch_size, seed=seed,
        )
    else:
        est = DistillationClassifier(
            teachers=teachers, regime=regime, temperature=cfg.temperature,
            alpha=cfg.alpha, beta=cfg.beta, distribution=cfg.distribution,
            weight_temperature=cfg.weight_temperature,
            resample_every=cfg.resample_every,
            hidden_dims=cfg.student_hidden_dims, activation=cfg.student_activation,
            optimizer=cfg.optimizer, epochs=cfg.epochs,
            batch_size=cfg.batch_size, seed=seed,
        )
    est.fit(train.features, train.labels, eval_set=(test.features, test.labels))
    report = RunReport(regime=regime, seed=seed, config_hash=config_hash(cfg),
                       team_name=cfg.team_name)
    _finalize_report(report, est, train, test)
    report.sample_counts = [int(c) for c in getattr(est, "sample_counts_", [])]
    report.teacher_forward_count = int(getattr(est, "teacher_forward_count_", 0))
    report.wall_clock_s = time.perf_counter() - started
    return report


def distill(cfg: ExperimentConfig, seed: int | None = None) -> RunReport:
    """Distill the student for one seed; teacher checkpoints must exist."""
    seed = cfg.seeds[0] if seed is None else seed
    train, test = build_datasets(cfg)
    if cfg.regime == "none":
        teachers: list[MLP] = []
    else:
        teachers = load_team_models(cfg, seed)
        for i, t in enumerate(teachers):
            if t.output_dim != train.num_classes:
                raise RunError(
                    f"teacher {teacher_name(cfg, i)} outputs {t.output_dim} classes, "
                    f"dataset has {train.num_classes}"
                )
    return distill_with_teachers(cfg, seed, teachers, train, test)


@dataclass
class GradcheckReport:
    max_rel_err: dict[str, float]
    instances_per_family: int
    tolerance: float = GRADCHECK_TOLERANCE
    runtime_s: float = 0.0

    @property
    def passed(self) -> bool:
        return all(v < self.tolerance for v in self.max_rel_err.values())

    def to_dict(self) -> dict:
        return {
            "max_rel_err": self.max_rel_err,
            "instances_per_family": self.instances_per_family,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "runtime_s": self.runtime_s,
        }


def _fd_grad(f, z: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function of a logit vector."""
    g = np.zeros_like(z)
    for i in range(z.size):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        g[i] = (f(zp) - f(zm)) / (2.0 * h)
    return g


def _rel_err(analytic: np.ndarray, fd: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(fd))), 1e-12)
    return float(np.max(np.abs(analytic - fd)) / scale)


def gradcheck(instances: int = 1000, seed: int = 0, h: float = 1e-5,
              spread: float = 2.0) -> GradcheckReport:
    """Verify analytic logit gradients of all three loss families against
    central finite differences over random instances."""
    rng = np.random.Generator(np.random.PCG64(seed))
    started = time.perf_counter()
    worst = {"distilled": 0.0, "total": 0.0, "mtbert": 0.0}
    temps = GRADCHECK_TEMPERATURES
    for _ in range(instances):
        C = int(rng.integers(GRADCHECK_CLASS_RANGE.start, GRADCHECK_CLASS_RANGE.stop))
        T = float(temps[rng.integers(len(temps))])
        y = int(rng.integers(C))
        z_t = rng.normal(0.0, spread, C)
        z_s = rng.normal(0.0, spread, C)
        kd = losses.KDConfig(temperature=T, alpha=float(rng.uniform(0.1, 2.0)),
                             beta=float(rng.uniform(0.1, 2.0)))
        n_teachers = int(rng.integers(1, 6))
        team = rng.normal(0.0, spread, (n_teachers, C))

        g = losses.grad_distilled_wrt_student_logits(z_t, z_s, T)
        fd = _fd_grad(lambda z: losses.distilled_loss(
            losses.soft_targets(z_t, T), losses.soft_targets(z, T)), z_s, h)
        worst["distilled"] = max(worst["distilled"], _rel_err(g, fd))

        g = losses.grad_total_wrt_student_logits(z_t, z_s, y, kd)
        fd = _fd_grad(lambda z: losses.total_loss(z_t, z, y, kd), z_s, h)
        worst["total"] = max(worst["total"], _rel_err(g, fd))

        g = losses.mtbert_grad_wrt_student_logits(team, z_s, y, T)
        fd = _fd_grad(lambda z: losses.mtbert_loss(team, z, y, T), z_s, h)
        worst["mtbert"] = max(worst["mtbert"], _rel_err(g, fd))
    return GradcheckReport(
        max_rel_err=worst, instances_per_family=instances,
        runtime_s=time.perf_counter() - started,
    )


def sample_stats(dist: SamplingDistribution, draws: int, seed: int) -> dict:
    """Empirical frequencies plus a chi-square goodness-of-fit p-value."""
    if draws < 1:
        raise ConfigError("draws must be positive")
    probs = resolve(dist)
    state = SamplerState(seed)
    idx = sample_teachers(probs, state, draws)
    counts = np.bincount(idx, minlength=len(probs))
    positive = probs > 0
    if int(positive.sum()) < 2:
        chi2, p_value = 0.0, 1.0
    else:
        expected = probs[positive] * draws
        chi2, p_value = scipy_stats.chisquare(counts[positive], expected)
    return {
        "draws": int(draws),
        "seed": int(seed),
        "probabilities": probs.tolist(),
        "counts": counts.tolist(),
        "frequencies": (counts / draws).tolist(),
        "chi_square": float(chi2),
        "p_value": float(p_value),
    }


def _mean_sd(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def compare_regimes(cfg: ExperimentConfig) -> list[dict]:
    """Run every configured regime over all seeds and tabulate against the
    no-distillation baseline (one row per regime, improvement arrow included)."""
    train, test = build_datasets(cfg)
    teacher_cache: dict[int, list[MLP]] = {}

    def teachers_for(seed: int) -> list[MLP]:
        if seed not in teacher_cache:
            teacher_cache[seed] = [
                fit_teacher(cfg, i, seed, train, test)[0].model_
                for i in range(len(cfg.teachers))
            ]
        return teacher_cache[seed]

    def run_cells(regime: str) -> list[RunReport]:
        reports = []
        for seed in cfg.seeds:
            team = [] if regime == "none" else teachers_for(seed)
            reports.append(distill_with_teachers(cfg, seed, team, train, test, regime=regime))
        return reports

    baseline = run_cells("none")
    baseline_mean, _ = _mean_sd([r.final["test"]["accuracy"] for r in baseline])
    rows = []
    for regime in cfg.compare_regimes:
        reports = baseline if regime == "none" else run_cells(regime)
        acc_last = [r.final["test"]["accuracy"] for r in reports]
        acc_best = [r.best["test_accuracy"] for r in reports]
        f1_last = [r.final["test"]["f1_macro"] for r in reports]
        acc_mean, acc_sd = _mean_sd(acc_last)
        best_mean, best_sd = _mean_sd(acc_best)
        f1_mean, f1_sd = _mean_sd(f1_last)
        delta = acc_mean - baseline_mean
        rows.append({
            "regime": regime,
            "team": cfg.team_name,
            "seeds": len(cfg.seeds),
            "acc_last_mean": acc_mean,
            "acc_last_sd": acc_sd,
            "acc_best_mean": best_mean,
            "acc_best_sd": best_sd,
            "f1_last_mean": f1_mean,
            "f1_last_sd": f1_sd,
            "delta_acc_vs_none": delta,
            "arrow": "=" if delta == 0 else ("↑" if delta > 0 else "↓"),
        })
    return rows


SIM_CSV_COLUMNS = ("class", "a", "E_b_closed", "E_b_mc", "gap", "var_b",
                   "g_avg", "g_skd_mean", "g_skd_var", "corrected")


def simulate_gradients(sim: SimSpec, distribution: SamplingDistribution | None = None) -> list[dict]:
    """Multi-seed ledger simulation; one output row per class per ledger variant."""
    rng = np.random.Generator(np.random.PCG64(sim.seed))
    if sim.teacher_logits_csv:
        teacher_logits = np.loadtxt(sim.teacher_logits_csv, delimiter=",", ndmin=2)
    else:
        teacher_logits = rng.normal(0.0, sim.logit_spread, (sim.teachers, sim.classes))
    if sim.trajectory_csv:
        trajectory = np.loadtxt(sim.trajectory_csv, delimiter=",", ndmin=2)
    else:
        trajectory = rng.normal(0.0, sim.logit_spread, (sim.iterations, sim.classes))
    dist = distribution or SamplingDistribution.uniform(teacher_logits.shape[0])

    reports = []
    for s in range(sim.num_seeds):
        ledger = simulate_ledger(
            teacher_logits, trajectory, dist, sim.temperature,
            derive_seed(sim.seed, SIM_SAMPLER_BASE + s),
        )
        reports.append((ledger, ledger_report(ledger)))

    first = reports[0][1]
    pooled_b = np.concatenate([ledger.sampled_targets for ledger, _ in reports])
    e_b_mc = pooled_b.mean(axis=0)
    var_b = pooled_b.var(axis=0, ddof=1) if pooled_b.shape[0] > 1 else np.zeros_like(e_b_mc)
    rows = []
    for corrected in (False, True):
        g_avg = first.g_avg_corrected if corrected else first.g_avg
        g_skds = np.stack([
            (rep.g_skd_corrected if corrected else rep.g_skd) for _, rep in reports
        ])
        g_mean = g_skds.mean(axis=0)
        g_var = g_skds.var(axis=0, ddof=1) if len(reports) > 1 else np.zeros_like(g_mean)
        for i in range(first.avg_target.shape[0]):
            rows.append({
                "class": i,
                "a": float(first.avg_target[i]),
                "E_b_closed": float(first.expected_sampled[i]),
                "E_b_mc": float(e_b_mc[i]),
                "gap": float(first.jensen_gap[i]),
                "var_b": float(var_b[i]),
                "g_avg": float(g_avg[i]),
                "g_skd_mean": float(g_mean[i]),
                "g_skd_var": float(g_var[i]),
                "corrected": corrected,
            })
    return rows
