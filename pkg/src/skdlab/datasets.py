"""Synthetic dataset generators and CSV ingestion.

CSV format: UTF-8 text, LF line endings, header ``f0,f1,...,fD-1,label``,
decimal point floats written with ``repr`` (shortest round-trip form, at most
17 significant digits) so a write/load round trip is bit-exact.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, ParseError, ShapeError


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    split: str = "train"

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ShapeError("features must be a 2-D matrix")
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 1 or self.labels.shape[0] != self.features.shape[0]:
            raise ShapeError(
                f"labels length {self.labels.shape} does not match {self.features.shape[0]} rows"
            )

    @property
    def n_examples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def is_classification(self) -> bool:
        return np.issubdtype(self.labels.dtype, np.integer)

    @property
    def num_classes(self) -> int:
        if not self.is_classification:
            raise ConfigError("num_classes undefined for real-valued labels")
        return int(self.labels.max()) + 1 if self.n_examples else 0


@dataclass(frozen=True)
class CSVSchema:
    """Expected CSV layout: ``n_features`` feature columns then one label.

    ``n_classes`` of None means real-valued labels (regression-style task).
    """

    n_features: int
    n_classes: int | None = None


def gen_spirals(classes: int, points_per_class: int, noise_sd: float, seed: int,
                split: str = "train") -> Dataset:
    """Interleaved 2-D spirals, one arm per class, with Gaussian coordinate noise.

    Rows are class-major and deterministic per seed. Arm c sweeps 4 radians
    starting at angle 2*pi*c/C while the radius grows 0 -> 1.
    """
    if classes < 2:
        raise ConfigError("spirals need at least 2 classes")
    if points_per_class < 0:
        raise ConfigError("points_per_class must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = classes * points_per_class
    features = np.zeros((n, 2))
    labels = np.zeros(n, dtype=np.int64)
    for c in range(classes):
        t = (np.arange(points_per_class) + 0.5) / max(points_per_class, 1)
        theta = 2.0 * np.pi * c / classes + 4.0 * t
        r = t
        block = slice(c * points_per_class, (c + 1) * points_per_class)
        features[block, 0] = r * np.cos(theta)
        features[block, 1] = r * np.sin(theta)
        features[block] += rng.normal(0.0, noise_sd, size=(points_per_class, 2))
        labels[block] = c
    return Dataset(features, labels, split)


def gen_blobs(classes: int, points_per_class: int, separation: float, seed: int,
              split: str = "train") -> Dataset:
    """Unit-variance Gaussian clusters on a circle, adjacent centers ``separation`` apart."""
    if classes < 1:
        raise ConfigError("blobs need at least 1 class")
    if points_per_class < 0:
        raise ConfigError("points_per_class must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(seed))
    if classes == 1:
        centers = np.zeros((1, 2))
    else:
        radius = separation / (2.0 * np.sin(np.pi / classes))
        angles = 2.0 * np.pi * np.arange(classes) / classes
        centers = radius * np.column_stack([np.cos(angles), np.sin(angles)])
    n = classes * points_per_class
    features = np.zeros((n, 2))
    labels = np.zeros(n, dtype=np.int64)
    for c in range(classes):
        block = slice(c * points_per_class, (c + 1) * points_per_class)
        features[block] = centers[c] + rng.normal(0.0, 1.0, size=(points_per_class, 2))
        labels[block] = c
    return Dataset(features, labels, split)


def _expected_header(n_features: int) -> list[str]:
    return [f"f{i}" for i in range(n_features)] + ["label"]


def load_csv(path, schema: CSVSchema, split: str = "train") -> Dataset:
    """Parse a dataset CSV; malformed rows raise ParseError with the line number."""
    expected = _expected_header(schema.n_features)
    features, labels = [], []
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except FileNotFoundError as exc:
        raise ParseError(f"no such file: {path}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file, expected a header row", line=1) from None
        if header != expected:
            raise ParseError(f"header {header} != expected {expected}", line=1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(expected):
                raise ParseError(f"expected {len(expected)} fields, got {len(row)}", line=lineno)
            try:
                feats = [float(v) for v in row[:-1]]
            except ValueError as exc:
                raise ParseError(f"bad feature value: {exc}", line=lineno) from exc
            if schema.n_classes is None:
                try:
                    label = float(row[-1])
                except ValueError as exc:
                    raise ParseError(f"bad label value: {exc}", line=lineno) from exc
            else:
                try:
                    label = int(row[-1])
                except ValueError as exc:
                    raise ParseError(f"bad label value: {exc}", line=lineno) from exc
                if not 0 <= label < schema.n_classes:
                    raise ParseError(
                        f"label {label} outside [0, {schema.n_classes})", line=lineno
                    )
            features.append(feats)
            labels.append(label)
    feat_arr = np.array(features, dtype=np.float64).reshape(len(features), schema.n_features)
    if schema.n_classes is None:
        label_arr = np.array(labels, dtype=np.float64)
    else:
        label_arr = np.array(labels, dtype=np.int64)
    return Dataset(feat_arr, label_arr, split)


def write_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the load_csv format (bit-exact round trip)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(_expected_header(dataset.n_features)) + "\n")
        for row, label in zip(dataset.features, dataset.labels):
            cells = [repr(float(v)) for v in row]
            cells.append(str(int(label)) if dataset.is_classification else repr(float(label)))
            fh.write(",".join(cells) + "\n")
