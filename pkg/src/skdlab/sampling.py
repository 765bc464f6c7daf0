"""Categorical sampling distributions over a teacher team.

Randomness is drawn from numpy's PCG64 (the permuted congruential generator
PCG XSL RR 128/64, O'Neill 2014) wrapped in ``numpy.random.Generator``; each
double consumes exactly one 64-bit output, so draw sequences are reproducible
bit-for-bit from a seed, and ports in other languages can reproduce them from
the published PCG64 reference implementation. Teacher selection is inverse-CDF
over the resolved probabilities with half-open intervals
[cum_{n-1}, cum_n), so a teacher with probability exactly 0 has an empty
interval and can never be drawn.

Seed-splitting convention: independent streams are derived from a master seed
as ``derive_seed(master, index) = master XOR index`` (with documented stream
tags for in-run streams), so parallel experiment cells never share a stream.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError
from .losses import soft_targets
from .validation import check_positive

KINDS = ("uniform", "explicit", "score_proportional", "rank_softmax")

# additive floor after min-shift, so score ties at the minimum keep nonzero mass
SCORE_EPSILON = 1e-6

_SEED_MASK = (1 << 64) - 1


def derive_seed(master_seed: int, index: int) -> int:
    """Split a master seed into an independent stream seed (master XOR index)."""
    return (int(master_seed) ^ int(index)) & _SEED_MASK


@dataclass(frozen=True)
class SamplingDistribution:
    """A categorical distribution spec over N teachers.

    kind:
      - ``uniform``: equal mass 1/N over ``n`` teachers.
      - ``explicit``: ``weights`` normalized to sum 1 (zeros allowed).
      - ``score_proportional``: mass proportional to score_i - min(score) + eps.
      - ``rank_softmax``: softmax(score_i / rank_temperature).
    """

    kind: str
    n: int | None = None
    weights: tuple[float, ...] | None = None
    scores: tuple[float, ...] | None = None
    rank_temperature: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown distribution kind {self.kind!r}, expected one of {KINDS}")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if self.scores is not None:
            object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if self.kind == "uniform":
            if self.n is None or int(self.n) < 1:
                raise ConfigError("uniform distribution needs n >= 1")
            object.__setattr__(self, "n", int(self.n))
        elif self.kind == "explicit":
            if not self.weights:
                raise ConfigError("explicit distribution needs weights")
            if any(w < 0 for w in self.weights):
                raise ConfigError("explicit weights must be nonnegative")
            if sum(self.weights) <= 0:
                raise ConfigError("explicit weights must not all be zero")
        elif self.kind == "score_proportional":
            if not self.scores:
                raise ConfigError("score_proportional distribution needs scores")
        elif self.kind == "rank_softmax":
            if not self.scores:
                raise ConfigError("rank_softmax distribution needs scores")
            if self.rank_temperature is None:
                raise ConfigError("rank_softmax distribution needs rank_temperature")
            check_positive(self.rank_temperature, "rank_temperature")

    @property
    def size(self) -> int:
        if self.kind == "uniform":
            return self.n
        return len(self.weights if self.kind == "explicit" else self.scores)

    @classmethod
    def uniform(cls, n: int) -> "SamplingDistribution":
        return cls(kind="uniform", n=n)

    @classmethod
    def explicit(cls, weights) -> "SamplingDistribution":
        return cls(kind="explicit", weights=tuple(weights))

    @classmethod
    def from_scores(cls, scores) -> "SamplingDistribution":
        return cls(kind="score_proportional", scores=tuple(scores))

    @classmethod
    def softmax_of_scores(cls, scores, rank_temperature: float) -> "SamplingDistribution":
        return cls(kind="rank_softmax", scores=tuple(scores), rank_temperature=rank_temperature)


def resolve(dist: SamplingDistribution) -> np.ndarray:
    """Resolve a distribution spec to a probability vector of length N."""
    if dist.kind == "uniform":
        return np.full(dist.n, 1.0 / dist.n)
    if dist.kind == "explicit":
        w = np.asarray(dist.weights, dtype=np.float64)
        return w / w.sum()
    if dist.kind == "score_proportional":
        s = np.asarray(dist.scores, dtype=np.float64)
        shifted = s - s.min() + SCORE_EPSILON
        return shifted / shifted.sum()
    # rank_softmax: scores at rank_temperature behave exactly like logits
    if len(dist.scores) == 1:
        return np.ones(1)
    return soft_targets(np.asarray(dist.scores, dtype=np.float64), dist.rank_temperature)


@dataclass
class SamplerState:
    """Deterministic draw stream: a seed plus a count of draws taken."""

    seed: int
    draws: int = 0
    _generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._generator = np.random.Generator(np.random.PCG64(self.seed))
        if self.draws:
            self._generator.random(self.draws)  # replay to the recorded position


@dataclass
class TeacherTeam:
    """N frozen teacher models plus the categorical distribution over them."""

    teachers: list
    distribution: SamplingDistribution
    names: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.teachers) < 1:
            raise ConfigError("teacher team needs at least one teacher")
        dims = {t.output_dim for t in self.teachers}
        if len(dims) > 1:
            raise ConfigError(f"teachers disagree on output dim: {sorted(dims)}")
        if self.distribution.size != len(self.teachers):
            raise ConfigError(
                f"distribution covers {self.distribution.size} teachers, team has {len(self.teachers)}"
            )
        if not self.names:
            self.names = [f"T{i + 1:02d}" for i in range(len(self.teachers))]
        elif len(self.names) != len(self.teachers):
            raise ConfigError("need one name per teacher")

    @property
    def size(self) -> int:
        return len(self.teachers)

    @property
    def output_dim(self) -> int:
        return self.teachers[0].output_dim


def _resolved(team_or_dist) -> np.ndarray:
    if isinstance(team_or_dist, TeacherTeam):
        return resolve(team_or_dist.distribution)
    if isinstance(team_or_dist, SamplingDistribution):
        return resolve(team_or_dist)
    return np.asarray(team_or_dist, dtype=np.float64)


def _cumulative(probs: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs)
    cum[-1] = 1.0  # guard against float cumsum landing below a possible draw
    return cum


def sample_teacher(team_or_dist, state: SamplerState) -> int:
    """Draw one teacher index by inverse CDF; advances the state by one draw."""
    cum = _cumulative(_resolved(team_or_dist))
    u = state._generator.random()
    state.draws += 1
    return int(np.searchsorted(cum, u, side="right"))


def sample_teachers(team_or_dist, state: SamplerState, size: int) -> np.ndarray:
    """Draw ``size`` indices at once; consumes the identical stream as
    ``size`` successive sample_teacher calls."""
    cum = _cumulative(_resolved(team_or_dist))
    u = state._generator.random(int(size))
    state.draws += int(size)
    return np.searchsorted(cum, u, side="right").astype(np.int64)


def empirical_frequencies(team_or_dist, state: SamplerState, draws: int) -> np.ndarray:
    """Normalized histogram of ``draws`` samples; sums to 1."""
    if draws <= 0:
        raise ConfigError(f"draws must be positive, got {draws}")
    probs = _resolved(team_or_dist)
    idx = sample_teachers(probs, state, draws)
    return np.bincount(idx, minlength=len(probs)) / draws
