"""Small dense ReLU networks with exact backpropagation, in float64.

A model is a list of :class:`Layer` objects.  Hidden layers use ReLU, the
last layer is linear and produces class logits.  Weight matrices are stored
``(out, in)`` so a batch ``x`` of shape ``(rows, in)`` maps to
``x @ W.T + b``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, FormatError, NumericError, ShapeError, UsageError

ACTIVATIONS = ("relu", "identity")

MAGIC = b"STDW"
FORMAT_VERSION = 1


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


@dataclass
class Model:
    layers: list[Layer]

    def __post_init__(self):
        if not self.layers:
            raise ConfigError("model needs at least one layer")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise ShapeError(
                    f"layer {i} outputs {a.out_dim} features but layer {i + 1} expects {b.in_dim}"
                )
        for i, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ConfigError(f"layer {i}: unknown activation {layer.activation!r}")
            if layer.bias.shape != (layer.out_dim,):
                raise ShapeError(f"layer {i}: bias shape {layer.bias.shape} != ({layer.out_dim},)")

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def class_count(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def copy(self) -> "Model":
        return Model([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])


def init_model(arch, class_count, seed) -> Model:
    """He-initialised network.

    ``arch`` lists the input width followed by hidden widths, so
    ``init_model([2, 8], 2, seed)`` builds 2 -> 8 (ReLU) -> 2.
    """
    arch = [int(w) for w in arch]
    if not arch:
        raise ConfigError("arch must list at least the input width")
    if any(w < 1 for w in arch):
        raise ConfigError(f"layer widths must be >= 1, got {arch}")
    if class_count < 2:
        raise ConfigError(f"class_count must be >= 2, got {class_count}")
    rng = np.random.default_rng(seed)
    widths = arch + [int(class_count)]
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(widths, widths[1:])):
        w = rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in)
        act = "identity" if i == len(widths) - 2 else "relu"
        layers.append(Layer(w, np.zeros(fan_out), act))
    return Model(layers)


def _as_batch(model: Model, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ShapeError(f"batch shape {x.shape} does not match input dim {model.input_dim}")
    return x


def _forward_cache(model: Model, x: np.ndarray):
    # activations[i] is the input of layer i; pre[i] its pre-activation
    activations, pre = [x], []
    h = x
    for layer in model.layers:
        z = h @ layer.weight.T + layer.bias
        pre.append(z)
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
        activations.append(h)
    return activations, pre


def forward(model: Model, batch) -> np.ndarray:
    x = _as_batch(model, batch)
    return _forward_cache(model, x)[0][-1]


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    m = z.max(axis=1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=1, keepdims=True))


def ce_loss_and_grad(logits, labels, weights=None):
    """Weighted softmax cross-entropy and its gradient w.r.t. the logits.

    The loss is ``sum_i w_i * CE_i / sum_i w_i``; with ``weights=None`` every
    sample gets weight 1 (plain batch mean).
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] == 0:
        raise UsageError("cross-entropy needs a non-empty 2-D batch of logits")
    if not np.all(np.isfinite(z)):
        raise NumericError("non-finite logits")
    y = np.asarray(labels, dtype=np.int64)
    n, k = z.shape
    if y.shape != (n,):
        raise ShapeError(f"labels shape {y.shape} != ({n},)")
    if np.any(y < 0) or np.any(y >= k):
        raise UsageError(f"labels must lie in [0, {k})")
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=np.float64)
    if w.shape != (n,):
        raise ShapeError(f"weights shape {w.shape} != ({n},)")
    if np.any(w < 0):
        raise UsageError("sample weights must be non-negative")
    total = w.sum()
    if not total > 0:
        raise UsageError("at least one sample weight must be positive")

    logp = log_softmax(z)
    rows = np.arange(n)
    per_sample = -logp[rows, y]
    loss = float(np.dot(w, per_sample) / total)
    grad = np.exp(logp)
    grad[rows, y] -= 1.0
    grad *= (w / total)[:, None]
    return loss, grad


def backprop(model: Model, batch, dlogits) -> list[np.ndarray]:
    """Parameter gradients (same order as ``Model.parameters``) for upstream ``dlogits``."""
    x = _as_batch(model, batch)
    g = np.asarray(dlogits, dtype=np.float64)
    if g.shape != (x.shape[0], model.class_count):
        raise ShapeError(f"dlogits shape {g.shape} != ({x.shape[0]}, {model.class_count})")
    activations, pre = _forward_cache(model, x)
    grads: list[np.ndarray] = [None] * (2 * len(model.layers))  # type: ignore[list-item]
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        if layer.activation == "relu":
            g = g * (pre[i] > 0)
        dw = g.T @ activations[i]
        db = g.sum(axis=0)
        if not (np.all(np.isfinite(dw)) and np.all(np.isfinite(db))):
            raise NumericError(f"non-finite gradient in layer {i}", layer=i)
        grads[2 * i], grads[2 * i + 1] = dw, db
        if i:
            g = g @ layer.weight
    return grads


@dataclass
class OptimState:
    """Optimizer hyperparameters plus running Adam moments.

    The moments are updated in place by :func:`backward_apply`.
    """

    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first: list = field(default_factory=list)
    second: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer {self.kind!r}")
        # zero is allowed: it freezes the model
        if not self.learning_rate >= 0:
            raise ConfigError(f"learning rate must be non-negative, got {self.learning_rate}")


def apply_gradients(model: Model, grads, opt: OptimState) -> Model:
    """Return a new model after one optimizer step."""
    params = model.parameters()
    if opt.kind == "sgd":
        new = [p - opt.learning_rate * g for p, g in zip(params, grads)]
    else:
        if not opt.first:
            opt.first = [np.zeros_like(p) for p in params]
            opt.second = [np.zeros_like(p) for p in params]
        opt.step += 1
        b1, b2 = opt.beta1, opt.beta2
        c1 = 1.0 - b1**opt.step
        c2 = 1.0 - b2**opt.step
        new = []
        for j, (p, g) in enumerate(zip(params, grads)):
            opt.first[j] = b1 * opt.first[j] + (1.0 - b1) * g
            opt.second[j] = b2 * opt.second[j] + (1.0 - b2) * g * g
            mhat = opt.first[j] / c1
            vhat = opt.second[j] / c2
            new.append(p - opt.learning_rate * mhat / (np.sqrt(vhat) + opt.epsilon))
    layers = [
        Layer(new[2 * i], new[2 * i + 1], layer.activation) for i, layer in enumerate(model.layers)
    ]
    for i, layer in enumerate(layers):
        if not (np.all(np.isfinite(layer.weight)) and np.all(np.isfinite(layer.bias))):
            raise NumericError(f"non-finite parameters after update in layer {i}", layer=i)
    return Model(layers)


def backward_apply(model: Model, batch, dlogits, opt: OptimState) -> Model:
    return apply_gradients(model, backprop(model, batch, dlogits), opt)


def loss_gradients(model: Model, batch, labels, weights=None):
    logits = forward(model, batch)
    loss, dlogits = ce_loss_and_grad(logits, labels, weights)
    return loss, backprop(model, batch, dlogits)


def gradient_check(model: Model, batch, labels, weights=None, h=1e-5, grads=None) -> float:
    """Largest relative disagreement between analytic and central-difference gradients.

    ``grads`` overrides the analytic gradients, which lets callers check a
    gradient produced elsewhere.
    """
    if not 0 < h <= 1e-2:
        raise UsageError(f"step h must lie in (0, 1e-2], got {h}")
    if grads is None:
        _, grads = loss_gradients(model, batch, labels, weights)
    probe = model.copy()
    worst = 0.0
    for p, g in zip(probe.parameters(), grads):
        flat_p, flat_g = p.reshape(-1), np.asarray(g).reshape(-1)
        for j in range(flat_p.size):
            orig = flat_p[j]
            flat_p[j] = orig + h
            up = ce_loss_and_grad(forward(probe, batch), labels, weights)[0]
            flat_p[j] = orig - h
            down = ce_loss_and_grad(forward(probe, batch), labels, weights)[0]
            flat_p[j] = orig
            cd = (up - down) / (2 * h)
            err = abs(flat_g[j] - cd) / (abs(flat_g[j]) + abs(cd) + 1e-12)
            worst = max(worst, err)
    return worst


# -- serialization ---------------------------------------------------------

_ACT_CODE = {"relu": 0, "identity": 1}


def model_to_bytes(model: Model) -> bytes:
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(model.layers))]
    for layer in model.layers:
        parts.append(struct.pack("<III", layer.in_dim, layer.out_dim, _ACT_CODE[layer.activation]))
        parts.append(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    return b"".join(parts)


def model_from_bytes(data: bytes) -> Model:
    if data[:4] != MAGIC:
        raise FormatError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported model format version {version}")
    codes = {v: k for k, v in _ACT_CODE.items()}
    offset = 12
    layers = []
    try:
        for _ in range(count):
            in_dim, out_dim, code = struct.unpack_from("<III", data, offset)
            offset += 12
            nw = in_dim * out_dim
            w = np.frombuffer(data, dtype="<f8", count=nw, offset=offset).reshape(out_dim, in_dim)
            offset += 8 * nw
            b = np.frombuffer(data, dtype="<f8", count=out_dim, offset=offset)
            offset += 8 * out_dim
            layers.append(Layer(w.astype(np.float64), b.astype(np.float64), codes[code]))
    except (struct.error, ValueError, KeyError) as exc:
        raise FormatError(f"corrupt model payload near byte {offset}: {exc}") from exc
    return Model(layers)


def save_model(model: Model, path) -> None:
    with open(path, "wb") as f:
        f.write(model_to_bytes(model))


def load_model(path) -> Model:
    with open(path, "rb") as f:
        return model_from_bytes(f.read())


def model_to_json(model: Model) -> str:
    """Human-readable dump for debugging; not meant for exact round-trips."""
    return json.dumps(
        {
            "format": "STDW",
            "version": FORMAT_VERSION,
            "input_dim": model.input_dim,
            "class_count": model.class_count,
            "layers": [
                {
                    "activation": l.activation,
                    "weight": l.weight.tolist(),
                    "bias": l.bias.tolist(),
                }
                for l in model.layers
            ],
        },
        indent=1,
    )
