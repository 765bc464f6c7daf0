"""Experiment configuration: TOML schema, presets, and config hashing.

A config file is one TOML document with flat, documented key paths:

    preset = "cifar-analog"          # optional; applied under the file's keys

    [dataset]
    kind = "spirals"                 # spirals | blobs | csv
    classes = 3
    points_per_class = 200
    noise_sd = 0.1                   # spirals
    separation = 6.0                 # blobs
    seed = 0                         # dataset seed, independent of run seeds
    test_points_per_class = 200      # generated test split size
    train_path = "train.csv"         # csv kind only
    test_path = "test.csv"
    n_features = 2                   # csv kind only

    [student]
    hidden_dims = [8]
    activation = "relu"

    [[teachers]]                     # one block per teacher (or checkpoint)
    hidden_dims = [4]
    activation = "relu"
    name = "T01"                     # optional
    checkpoint = "teachers/T01.skdm" # optional: load instead of training

    [kd]
    regime = "skd"                   # none | vanilla_kd | avg_ensemble | mtbert | skd
    temperature = 2.0
    alpha = 1.0
    beta = 1.0
    weight_temperature = 1.0         # mtbert quality-weight temperature
    resample_every = "batch"         # batch | epoch
    distribution = { kind = "uniform" }   # uniform | explicit | score_proportional | rank_softmax
                                          # with weights / scores / rank_temperature as needed
                                          # (also accepted as a top-level key)

    [optimizer]
    kind = "sgd"                     # sgd | adam
    lr = 0.2                         # desk-scale default; cifar-analog preset uses 0.05
    momentum = 0.9
    weight_decay = 5e-4
    milestones = [150, 180, 210]
    decay_factor = 0.1
    # adam keys: peak_lr, eps, beta1, beta2, weight_decay, warmup_fraction
    # (total_steps is derived from the run length)

    [run]
    epochs = 200
    teacher_epochs = 200
    batch_size = 32
    seeds = [0, 1, 2, 3, 4]
    out_dir = "runs"

    [compare]                        # compare-regimes only
    regimes = ["none", "avg_ensemble", "mtbert", "skd"]
    team_name = "team"

    [sim]                            # simulate-gradients only
    classes = 4
    teachers = 3
    iterations = 1000
    temperature = 2.0
    num_seeds = 16
    seed = 0
    logit_spread = 2.0
    teacher_logits_csv = ""          # optional: N x C logits, no header
    trajectory_csv = ""              # optional: L x C student logits, no header

Unknown keys are rejected. ``--preset``, ``--seed``, and ``--out`` CLI flags
override the file.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .estimators import REGIMES
from .exceptions import ConfigError
from .optim import AdamConfig, SGDConfig, default_optimizer
from .sampling import SamplingDistribution

PRESETS = {
    # 240-epoch SGD protocol: batch 64, lr 0.05 decayed 10x at 150/180/210, wd 5e-4
    "cifar-analog": {
        "optimizer": {
            "kind": "sgd", "lr": 0.05, "momentum": 0.9, "weight_decay": 5e-4,
            "milestones": [150, 180, 210], "decay_factor": 0.1,
        },
        "run": {"epochs": 240, "teacher_epochs": 240, "batch_size": 64},
    },
    # short fine-tuning protocol: Adam with linear warmup/decay
    "glue-analog": {
        "optimizer": {
            "kind": "adam", "peak_lr": 2e-5, "eps": 1e-6, "beta1": 0.9,
            "beta2": 0.999, "weight_decay": 1e-4, "warmup_fraction": 0.1,
        },
        "run": {"epochs": 10, "teacher_epochs": 10, "batch_size": 32},
    },
}


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "spirals"
    classes: int = 3
    points_per_class: int = 200
    noise_sd: float = 0.1
    separation: float = 6.0
    seed: int = 0
    test_points_per_class: int | None = None
    train_path: str | None = None
    test_path: str | None = None
    n_features: int | None = None

    def __post_init__(self):
        if self.kind not in ("spirals", "blobs", "csv"):
            raise ConfigError(f"dataset.kind must be spirals, blobs, or csv, got {self.kind!r}")
        if self.kind == "csv":
            if not self.train_path or not self.test_path:
                raise ConfigError("csv dataset needs train_path and test_path")
            if not self.n_features:
                raise ConfigError("csv dataset needs n_features")


@dataclass(frozen=True)
class TeacherSpec:
    hidden_dims: tuple[int, ...] = (16,)
    activation: str = "relu"
    name: str | None = None
    checkpoint: str | None = None


@dataclass(frozen=True)
class SimSpec:
    classes: int = 4
    teachers: int = 3
    iterations: int = 1000
    temperature: float = 2.0
    num_seeds: int = 16
    seed: int = 0
    logit_spread: float = 2.0
    teacher_logits_csv: str | None = None
    trajectory_csv: str | None = None

    def __post_init__(self):
        if self.classes < 2:
            raise ConfigError("sim.classes must be >= 2")
        if self.teachers < 1 or self.iterations < 1 or self.num_seeds < 1:
            raise ConfigError("sim.teachers, sim.iterations, sim.num_seeds must be >= 1")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = DatasetSpec()
    student_hidden_dims: tuple[int, ...] = (8,)
    student_activation: str = "relu"
    teachers: tuple[TeacherSpec, ...] = ()
    regime: str = "none"
    temperature: float = 2.0
    alpha: float = 1.0
    beta: float = 1.0
    weight_temperature: float = 1.0
    resample_every: str = "batch"
    distribution: SamplingDistribution | None = None
    optimizer: SGDConfig | AdamConfig = field(default_factory=default_optimizer)
    epochs: int = 200
    teacher_epochs: int = 200
    batch_size: int = 32
    seeds: tuple[int, ...] = (0,)
    out_dir: str = "runs"
    compare_regimes: tuple[str, ...] = ("none", "avg_ensemble", "mtbert", "skd")
    team_name: str = "team"
    sim: SimSpec = SimSpec()

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ConfigError(f"kd.regime must be one of {REGIMES}, got {self.regime!r}")
        if self.regime == "vanilla_kd" and len(self.teachers) != 1:
            raise ConfigError("vanilla_kd requires exactly one teacher")
        if self.regime == "skd" and self.distribution is None:
            raise ConfigError("skd requires a distribution")
        if self.regime != "none" and not self.teachers:
            raise ConfigError(f"regime {self.regime!r} needs at least one teacher")
        for r in self.compare_regimes:
            if r not in REGIMES:
                raise ConfigError(f"compare.regimes entry {r!r} not one of {REGIMES}")
        if not self.seeds:
            raise ConfigError("run.seeds must not be empty")
        if self.distribution is not None and self.teachers:
            if self.distribution.size != len(self.teachers):
                raise ConfigError(
                    f"distribution covers {self.distribution.size} teachers, "
                    f"config lists {len(self.teachers)}"
                )


def _take(table: dict, allowed: dict, section: str) -> dict:
    """Pop known keys, mapping names; reject leftovers."""
    out = {}
    for key, target in allowed.items():
        if key in table:
            out[target] = table.pop(key)
    if table:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(table)}")
    return out


def _parse_distribution(table: dict, default_n: int | None = None) -> SamplingDistribution:
    kw = _take(
        dict(table),
        {"kind": "kind", "n": "n", "weights": "weights", "scores": "scores",
         "rank_temperature": "rank_temperature"},
        "distribution",
    )
    if "weights" in kw:
        kw["weights"] = tuple(kw["weights"])
    if "scores" in kw:
        kw["scores"] = tuple(kw["scores"])
    if kw.get("kind") == "uniform" and "n" not in kw and default_n:
        kw["n"] = default_n
    return SamplingDistribution(**kw)


def _parse_optimizer(table: dict):
    table = dict(table)
    kind = table.pop("kind", "sgd")
    if kind == "sgd":
        kw = _take(table, {k: k for k in
                           ("lr", "momentum", "weight_decay", "milestones", "decay_factor")},
                   "optimizer")
        if "milestones" in kw:
            kw["milestones"] = tuple(kw["milestones"])
        return SGDConfig(**kw)
    if kind == "adam":
        kw = _take(table, {k: k for k in
                           ("peak_lr", "eps", "beta1", "beta2", "weight_decay",
                            "warmup_fraction", "total_steps", "decay")},
                   "optimizer")
        return AdamConfig(**kw)
    raise ConfigError(f"optimizer.kind must be sgd or adam, got {kind!r}")


def _merge(base: dict, overlay: dict) -> dict:
    out = dict(base)
    for key, val in overlay.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def config_from_dict(doc: dict) -> ExperimentConfig:
    doc = dict(doc)
    preset_name = doc.pop("preset", None)
    if preset_name is not None:
        if preset_name not in PRESETS:
            raise ConfigError(f"unknown preset {preset_name!r}, have {sorted(PRESETS)}")
        doc = _merge(PRESETS[preset_name], doc)

    kw: dict = {}
    if "dataset" in doc:
        ds = _take(dict(doc.pop("dataset")),
                   {k: k for k in ("kind", "classes", "points_per_class", "noise_sd",
                                   "separation", "seed", "test_points_per_class",
                                   "train_path", "test_path", "n_features")},
                   "dataset")
        kw["dataset"] = DatasetSpec(**ds)
    if "student" in doc:
        st = _take(dict(doc.pop("student")),
                   {"hidden_dims": "hidden_dims", "activation": "activation"}, "student")
        if "hidden_dims" in st:
            kw["student_hidden_dims"] = tuple(st["hidden_dims"])
        if "activation" in st:
            kw["student_activation"] = st["activation"]
    if "teachers" in doc:
        specs = []
        for i, t in enumerate(doc.pop("teachers")):
            tt = _take(dict(t),
                       {k: k for k in ("hidden_dims", "activation", "name", "checkpoint")},
                       f"teachers[{i}]")
            if "hidden_dims" in tt:
                tt["hidden_dims"] = tuple(tt["hidden_dims"])
            specs.append(TeacherSpec(**tt))
        kw["teachers"] = tuple(specs)
    dist_table = doc.pop("distribution", None)
    if "kd" in doc:
        kd_table = dict(doc.pop("kd"))
        dist_table = kd_table.pop("distribution", dist_table)
        kd = _take(kd_table,
                   {"regime": "regime", "temperature": "temperature", "alpha": "alpha",
                    "beta": "beta", "weight_temperature": "weight_temperature",
                    "resample_every": "resample_every"},
                   "kd")
        kw.update(kd)
    if dist_table is not None:
        kw["distribution"] = _parse_distribution(
            dist_table, default_n=len(kw.get("teachers", ())) or None
        )
    if "optimizer" in doc:
        kw["optimizer"] = _parse_optimizer(doc.pop("optimizer"))
    if "run" in doc:
        run = _take(dict(doc.pop("run")),
                    {k: k for k in ("epochs", "teacher_epochs", "batch_size", "seeds",
                                    "out_dir")},
                    "run")
        if "seeds" in run:
            run["seeds"] = tuple(run["seeds"])
        kw.update(run)
    if "compare" in doc:
        cmp_ = _take(dict(doc.pop("compare")),
                     {"regimes": "compare_regimes", "team_name": "team_name"}, "compare")
        if "compare_regimes" in cmp_:
            cmp_["compare_regimes"] = tuple(cmp_["compare_regimes"])
        kw.update(cmp_)
    if "sim" in doc:
        sim = _take(dict(doc.pop("sim")),
                    {k: k for k in ("classes", "teachers", "iterations", "temperature",
                                    "num_seeds", "seed", "logit_spread",
                                    "teacher_logits_csv", "trajectory_csv")},
                    "sim")
        kw["sim"] = SimSpec(**{k: (v or None) if k.endswith("_csv") else v
                               for k, v in sim.items()})
    if doc:
        raise ConfigError(f"unknown top-level config keys: {sorted(doc)}")

    return ExperimentConfig(**kw)


def load_config(path, preset: str | None = None, seed: int | None = None,
                out: str | None = None) -> ExperimentConfig:
    """Load a TOML config, then apply CLI overrides (preset, seed, out)."""
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"no such config file: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    if preset is not None:
        doc["preset"] = preset
    cfg = config_from_dict(doc)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(int(seed),))
    if out is not None:
        cfg = dataclasses.replace(cfg, out_dir=str(out))
    return cfg


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {"__type__": type(obj).__name__,
                **{f.name: _jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in sorted(obj.items())}
    return obj


def config_hash(cfg: ExperimentConfig) -> str:
    """Stable SHA-256 over the canonical JSON form of the config."""
    blob = json.dumps(_jsonable(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
