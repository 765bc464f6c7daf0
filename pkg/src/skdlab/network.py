"""Dense feed-forward networks with exact forward/backward passes.

Models are plain numpy: a list of weight matrices and bias vectors, an
activation applied to every hidden layer, and a linear output layer that
produces logits. Backward returns gradients of a scalar loss that is the
*mean* of per-example losses, so loss scale is independent of batch size.

Checkpoint format (``SKDLAB-MODEL-v1``): a binary file starting with the
ASCII header line ``SKDLAB-MODEL-v1``, followed by one JSON metadata line
``{"layer_dims": [...], "activation": "..."}``, followed by the raw
little-endian float64 bytes of each layer's weight matrix (row-major) and
bias vector, in layer order.
"""

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, ParseError, ShapeError, StateError

ACTIVATIONS = ("relu", "tanh")

MODEL_FORMAT = "SKDLAB-MODEL-v1"
_MODEL_HEADER = (MODEL_FORMAT + "\n").encode("ascii")


@dataclass
class GradientTape:
    """Per-parameter gradients, shape-congruent with the owning model."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, model: "MLP") -> "GradientTape":
        return cls(
            d_weights=[np.zeros_like(w) for w in model.weights],
            d_biases=[np.zeros_like(b) for b in model.biases],
        )

    def reset(self) -> None:
        """Zero all gradient arrays in place."""
        for dw in self.d_weights:
            dw[...] = 0.0
        for db in self.d_biases:
            db[...] = 0.0


class MLP:
    """Multi-layer perceptron used for both teachers and students.

    ``weights[l]`` has shape ``(layer_dims[l+1], layer_dims[l])`` and
    ``biases[l]`` has length ``layer_dims[l+1]``. Hidden layers apply
    ``activation``; the final layer is linear.
    """

    def __init__(self, layer_dims, activation, weights, biases):
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2:
            raise ConfigError("layer_dims needs at least input and output dims")
        if any(d <= 0 for d in layer_dims):
            raise ConfigError(f"layer_dims must be positive, got {layer_dims}")
        if activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}, got {activation!r}")
        if len(weights) != len(layer_dims) - 1 or len(biases) != len(layer_dims) - 1:
            raise ShapeError("need one weight matrix and bias vector per layer")
        for l, (w, b) in enumerate(zip(weights, biases)):
            expect = (layer_dims[l + 1], layer_dims[l])
            if w.shape != expect:
                raise ShapeError(f"weights[{l}] shape {w.shape} != {expect}")
            if b.shape != (layer_dims[l + 1],):
                raise ShapeError(f"biases[{l}] shape {b.shape} != {(layer_dims[l + 1],)}")
        self.layer_dims = layer_dims
        self.activation = activation
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self._cache: dict | None = None

    @classmethod
    def glorot_init(cls, layer_dims, activation: str = "relu", seed: int = 0) -> "MLP":
        """Glorot-uniform weights, zero biases, deterministic per seed.

        Each weight matrix is drawn from uniform(-s, s) with
        s = sqrt(6 / (fan_in + fan_out)).
        """
        layer_dims = [int(d) for d in layer_dims]
        if len(layer_dims) < 2:
            raise ConfigError("layer_dims needs at least input and output dims")
        rng = np.random.Generator(np.random.PCG64(seed))
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
            s = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-s, s, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(layer_dims, activation, weights, biases)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "MLP":
        return MLP(
            list(self.layer_dims),
            self.activation,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    def _act(self, z: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return np.maximum(z, 0.0)
        return np.tanh(z)

    def _act_grad(self, z: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return np.where(z > 0, 1.0, 0.0)
        return 1.0 - np.tanh(z) ** 2

    def forward(self, batch) -> np.ndarray:
        """Run the network on a (B, input_dim) batch; returns (B, output_dim) logits.

        Caches layer inputs and pre-activations for a subsequent backward call.
        """
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim != 2:
            raise ShapeError(f"batch must be 2-D, got ndim={batch.ndim}")
        if batch.shape[1] != self.input_dim:
            raise ShapeError(
                f"batch has {batch.shape[1]} features, model expects {self.input_dim}"
            )
        inputs = []  # input to each affine layer
        preacts = []  # pre-activation of each hidden layer
        a = batch
        for l in range(self.n_layers):
            inputs.append(a)
            z = a @ self.weights[l].T + self.biases[l]
            if l < self.n_layers - 1:
                preacts.append(z)
                a = self._act(z)
            else:
                a = z
        self._cache = {"inputs": inputs, "preacts": preacts, "batch_size": batch.shape[0]}
        return a

    def backward(self, upstream) -> GradientTape:
        """Backpropagate per-example logit gradients into parameter gradients.

        ``upstream`` is (B, output_dim) with row b holding the gradient of
        example b's loss w.r.t. its logits. The returned tape holds the
        gradients of the batch-mean loss.
        """
        if self._cache is None:
            raise StateError("backward called before forward")
        upstream = np.asarray(upstream, dtype=np.float64)
        cache = self._cache
        if upstream.shape != (cache["batch_size"], self.output_dim):
            raise ShapeError(
                f"upstream shape {upstream.shape} != "
                f"{(cache['batch_size'], self.output_dim)}"
            )
        d_weights = [None] * self.n_layers
        d_biases = [None] * self.n_layers
        delta = upstream / cache["batch_size"]
        for l in range(self.n_layers - 1, -1, -1):
            d_weights[l] = delta.T @ cache["inputs"][l]
            d_biases[l] = delta.sum(axis=0)
            if l > 0:
                delta = (delta @ self.weights[l]) * self._act_grad(cache["preacts"][l - 1])
        return GradientTape(d_weights=d_weights, d_biases=d_biases)


def save_mlp(model: MLP, path) -> None:
    """Write a model in the SKDLAB-MODEL-v1 checkpoint format."""
    meta = {"layer_dims": model.layer_dims, "activation": model.activation}
    with open(path, "wb") as fh:
        fh.write(_MODEL_HEADER)
        fh.write((json.dumps(meta) + "\n").encode("utf-8"))
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_mlp(path) -> MLP:
    """Read a SKDLAB-MODEL-v1 checkpoint back into an MLP, bit-exact."""
    with open(path, "rb") as fh:
        header = fh.readline()
        if header != _MODEL_HEADER:
            raise ParseError(f"bad checkpoint header {header!r}, expected {MODEL_FORMAT}", line=1)
        try:
            meta = json.loads(fh.readline().decode("utf-8"))
            layer_dims = [int(d) for d in meta["layer_dims"]]
            activation = meta["activation"]
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"bad checkpoint metadata: {exc}", line=2) from exc
        blob = fh.read()
    weights, biases = [], []
    offset = 0
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        n_w, n_b = fan_out * fan_in, fan_out
        need = (n_w + n_b) * 8
        if offset + need > len(blob):
            raise ParseError("checkpoint truncated: not enough weight bytes")
        w = np.frombuffer(blob, dtype="<f8", count=n_w, offset=offset).reshape(fan_out, fan_in)
        offset += n_w * 8
        b = np.frombuffer(blob, dtype="<f8", count=n_b, offset=offset)
        offset += n_b * 8
        weights.append(w.astype(np.float64))
        biases.append(b.astype(np.float64))
    if offset != len(blob):
        raise ParseError("checkpoint has trailing bytes")
    return MLP(layer_dims, activation, weights, biases)
