"""Tied-weight stacked autoencoders and a softmax head, trained with plain SGD.

Shapes follow the row-vector convention: a batch ``x`` of shape (n, in_dim)
is encoded as ``g(x @ W + b1)`` and decoded as ``h(d @ W.T + b2)``.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import RandomSource
from .errors import SchemaError, TrainingError

ACTIVATIONS = ("relu", "linear")
DECODER_ACTIVATIONS = ("auto", "relu", "linear")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    init_scale: float = 6.0  # weights ~ U(-sqrt(init_scale/fan_in), +sqrt(init_scale/fan_in))

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0 or int(self.epochs) != self.epochs:
            raise ValueError("epochs must be a non-negative integer")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")


@dataclass
class DenseLayerParams:
    weight: np.ndarray  # (in_dim, out_dim)
    bias: np.ndarray  # (out_dim,)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]


@dataclass
class AutoencoderParams:
    encoder: DenseLayerParams
    decoder_bias: np.ndarray  # (in_dim,)
    tied: bool = True

    @property
    def decoder_weight(self) -> np.ndarray:
        # A view: perturbing the encoder weight moves the decoder with it.
        return self.encoder.weight.T


@dataclass
class StackedAutoencoderModel:
    layers: list[AutoencoderParams]
    activation: str = "relu"
    decoder_activation: str = "relu"

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.decoder_activation not in ACTIVATIONS:
            raise ValueError(f"unknown decoder activation {self.decoder_activation!r}")
        for k in range(1, len(self.layers)):
            if self.layers[k].encoder.in_dim != self.layers[k - 1].encoder.out_dim:
                raise SchemaError(
                    f"layer {k} expects {self.layers[k].encoder.in_dim} inputs, "
                    f"layer {k - 1} emits {self.layers[k - 1].encoder.out_dim}"
                )

    @property
    def input_dim(self) -> int:
        return self.layers[0].encoder.in_dim

    @property
    def hidden_dims(self) -> list[int]:
        return [ae.encoder.out_dim for ae in self.layers]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].encoder.out_dim


@dataclass
class SoftmaxHead:
    weight: np.ndarray  # (hidden_dim, n_classes)
    bias: np.ndarray  # (n_classes,)

    def __post_init__(self):
        if self.weight.shape[1] < 2:
            raise SchemaError("a softmax head needs at least two classes")

    @property
    def n_classes(self) -> int:
        return self.weight.shape[1]


def activation(z, kind: str = "relu") -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "linear":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0).astype(np.float64)
    return np.ones_like(z)


def softmax(logits) -> np.ndarray:
    """Row-wise softmax with the max logit subtracted first."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def resolve_decoder_activation(kind: str, targets: np.ndarray, encoder_kind: str) -> str:
    """``auto`` keeps the encoder activation unless targets go negative."""
    if kind != "auto":
        return kind
    if encoder_kind == "relu" and np.min(targets, initial=0.0) < 0:
        return "linear"
    return encoder_kind


# -- initialisation ---------------------------------------------------------


def init_autoencoder(in_dim: int, hidden_dim: int, rng: RandomSource, scale: float = 6.0) -> AutoencoderParams:
    limit = np.sqrt(scale / in_dim)
    w = rng.generator.uniform(-limit, limit, size=(in_dim, hidden_dim))
    return AutoencoderParams(
        DenseLayerParams(w, np.zeros(hidden_dim)),
        np.zeros(in_dim),
    )


def init_stack(
    input_dim: int,
    hidden_dims,
    rng: RandomSource,
    activation: str = "relu",
    decoder_activation: str = "relu",
    scale: float = 6.0,
) -> StackedAutoencoderModel:
    dims = [int(input_dim)] + [int(h) for h in hidden_dims]
    if len(dims) < 2 or min(dims) < 1:
        raise SchemaError(f"invalid layer dimensions {dims}")
    layers = [init_autoencoder(dims[k], dims[k + 1], rng.child(k), scale) for k in range(len(dims) - 1)]
    return StackedAutoencoderModel(layers, activation, decoder_activation)


def init_head(hidden_dim: int, n_classes: int, rng: RandomSource, scale: float = 6.0) -> SoftmaxHead:
    limit = np.sqrt(scale / hidden_dim)
    return SoftmaxHead(
        rng.generator.uniform(-limit, limit, size=(hidden_dim, n_classes)),
        np.zeros(n_classes),
    )


# -- forward passes ----------------------------------------------------------


def _check_cols(x: np.ndarray, expected: int, what: str) -> np.ndarray:
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != expected:
        raise SchemaError(f"{what} expects {expected} input columns, got shape {x.shape}")
    return x


def encode_layer(ae: AutoencoderParams, x: np.ndarray, kind: str = "relu") -> np.ndarray:
    return activation(x @ ae.encoder.weight + ae.encoder.bias, kind)


def decode_layer(ae: AutoencoderParams, d: np.ndarray, kind: str = "relu") -> np.ndarray:
    return activation(d @ ae.decoder_weight + ae.decoder_bias, kind)


def encode(model: StackedAutoencoderModel, x) -> np.ndarray:
    """Compressed representation from the last hidden layer."""
    a = _check_cols(x, model.input_dim, "encoder")
    for ae in model.layers:
        a = encode_layer(ae, a, model.activation)
    return a


def reconstruct(ae: AutoencoderParams, x, kind: str = "relu", decoder_kind: str | None = None) -> np.ndarray:
    x = _check_cols(x, ae.encoder.in_dim, "autoencoder")
    return decode_layer(ae, encode_layer(ae, x, kind), decoder_kind or kind)


def reconstruct_stack(model: StackedAutoencoderModel, x) -> np.ndarray:
    """Encode through every layer, then decode back down to the input space."""
    a = encode(model, x)
    for ae in reversed(model.layers):
        a = decode_layer(ae, a, model.decoder_activation)
    return a


def reconstruction_error(model: StackedAutoencoderModel, x) -> np.ndarray:
    """Per-row mean squared reconstruction error through the whole stack."""
    x = _check_cols(x, model.input_dim, "encoder")
    return np.mean((reconstruct_stack(model, x) - x) ** 2, axis=1)


def predict_proba(model: StackedAutoencoderModel, head: SoftmaxHead, x) -> np.ndarray:
    d = encode(model, x)
    if d.shape[1] != head.weight.shape[0]:
        raise SchemaError(f"head expects {head.weight.shape[0]} features, encoder emits {d.shape[1]}")
    return softmax(d @ head.weight + head.bias)


# -- losses and gradients -----------------------------------------------------


def reconstruction_loss_and_grads(
    ae: AutoencoderParams, x: np.ndarray, kind: str = "relu", decoder_kind: str | None = None
) -> tuple[float, dict[str, np.ndarray]]:
    """Cost 0.5 * mean over rows of ||y - x||^2 and its gradient.

    The tied weight receives the encoder and decoder contributions summed.
    """
    decoder_kind = decoder_kind or kind
    n = x.shape[0]
    w = ae.encoder.weight
    z1 = x @ w + ae.encoder.bias
    d = activation(z1, kind)
    z2 = d @ w.T + ae.decoder_bias
    y = activation(z2, decoder_kind)
    diff = y - x
    loss = 0.5 * float(np.sum(diff * diff)) / n
    dz2 = diff * activation_grad(z2, decoder_kind) / n
    dz1 = (dz2 @ w) * activation_grad(z1, kind)
    grads = {
        "weight": x.T @ dz1 + dz2.T @ d,
        "bias": dz1.sum(axis=0),
        "decoder_bias": dz2.sum(axis=0),
    }
    return loss, grads


def _one_hot(codes: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((codes.shape[0], n_classes))
    out[np.arange(codes.shape[0]), codes] = 1.0
    return out


def classifier_loss_and_grads(
    model: StackedAutoencoderModel, head: SoftmaxHead, x: np.ndarray, codes: np.ndarray
) -> tuple[float, list[dict[str, np.ndarray]], dict[str, np.ndarray]]:
    """Mean cross-entropy of softmax(head(encode(x))) and gradients for every layer."""
    n = x.shape[0]
    acts = [x]
    pre = []
    for ae in model.layers:
        z = acts[-1] @ ae.encoder.weight + ae.encoder.bias
        pre.append(z)
        acts.append(activation(z, model.activation))
    logits = acts[-1] @ head.weight + head.bias
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), codes]))
    dlogits = (np.exp(shifted - log_norm[:, None]) - _one_hot(codes, head.n_classes)) / n
    head_grads = {"weight": acts[-1].T @ dlogits, "bias": dlogits.sum(axis=0)}
    layer_grads: list[dict[str, np.ndarray]] = [None] * len(model.layers)  # type: ignore[list-item]
    da = dlogits @ head.weight.T
    for k in range(len(model.layers) - 1, -1, -1):
        dz = da * activation_grad(pre[k], model.activation)
        layer_grads[k] = {"weight": acts[k].T @ dz, "bias": dz.sum(axis=0)}
        if k:
            da = dz @ model.layers[k].encoder.weight.T
    return loss, layer_grads, head_grads


# -- training -------------------------------------------------------------------


def _batches(n: int, batch_size: int, gen: np.random.Generator):
    order = gen.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _mse(ae, x, kind, decoder_kind) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        return float(np.mean((reconstruct(ae, x, kind, decoder_kind) - x) ** 2))


def pretrain_layer(
    ae: AutoencoderParams,
    inputs,
    cfg: TrainConfig,
    kind: str = "relu",
    decoder_kind: str | None = None,
) -> tuple[AutoencoderParams, list[float]]:
    """Fit one autoencoder to reconstruct its inputs by mini-batch SGD.

    Returns a new parameter set and the reconstruction MSE over ``inputs``
    before training followed by one value per epoch.
    """
    x = _check_cols(inputs, ae.encoder.in_dim, "autoencoder")
    if not np.isfinite(x).all():
        raise TrainingError("pretraining inputs contain non-finite values")
    decoder_kind = decoder_kind or kind
    ae = copy.deepcopy(ae)
    gen = RandomSource(cfg.seed).generator
    lr = cfg.learning_rate
    history = [_mse(ae, x, kind, decoder_kind)]
    if x.shape[0] == 0:
        return ae, history
    for epoch in range(1, cfg.epochs + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            for idx in _batches(x.shape[0], cfg.batch_size, gen):
                _, g = reconstruction_loss_and_grads(ae, x[idx], kind, decoder_kind)
                ae.encoder.weight -= lr * g["weight"]
                ae.encoder.bias -= lr * g["bias"]
                ae.decoder_bias -= lr * g["decoder_bias"]
        mse = _mse(ae, x, kind, decoder_kind)
        if not np.isfinite(mse) or not np.isfinite(ae.encoder.weight).all():
            raise TrainingError(f"pretraining diverged at epoch {epoch} (learning rate {lr})")
        history.append(mse)
    return ae, history


def stack_pretrain(
    model: StackedAutoencoderModel,
    x,
    cfg: TrainConfig,
    on_layer: Callable[[int, np.ndarray], None] | None = None,
    decoder_activation: str = "auto",
) -> tuple[StackedAutoencoderModel, list[list[float]]]:
    """Greedy layer-wise pretraining.

    Layer k is trained on the encodings produced by the already-trained
    layers 0..k-1. ``on_layer(k, inputs)`` is called with each layer's
    training inputs. ``decoder_activation='auto'`` switches every decoder to
    linear when the stack's inputs include negative values.
    """
    a = _check_cols(x, model.input_dim, "encoder")
    dec = resolve_decoder_activation(decoder_activation, a, model.activation)
    layers = []
    histories = []
    for k, ae in enumerate(model.layers):
        if on_layer is not None:
            on_layer(k, a)
        try:
            trained, hist = pretrain_layer(ae, a, replace(cfg, seed=cfg.seed + k), model.activation, dec)
        except TrainingError as exc:
            raise TrainingError(f"layer {k}: {exc}") from None
        layers.append(trained)
        histories.append(hist)
        a = encode_layer(trained, a, model.activation)
    return StackedAutoencoderModel(layers, model.activation, dec), histories


def finetune_supervised(
    model: StackedAutoencoderModel,
    head: SoftmaxHead,
    x,
    labels,
    cfg: TrainConfig,
    head_only: bool = False,
) -> tuple[StackedAutoencoderModel, SoftmaxHead, list[float]]:
    """Backpropagate cross-entropy through the head and every encoder layer.

    Decoder biases are left untouched. With ``head_only`` the encoder is
    frozen and only the softmax layer moves. Returns the updated copies and
    the training loss before training plus after each epoch.
    """
    x = _check_cols(x, model.input_dim, "encoder")
    codes = np.asarray(labels, dtype=np.int64)
    if codes.shape != (x.shape[0],):
        raise SchemaError(f"{codes.shape[0]} labels for {x.shape[0]} rows")
    if codes.size and (codes.min() < 0 or codes.max() >= head.n_classes):
        raise SchemaError(f"label codes must lie in [0, {head.n_classes})")
    model = copy.deepcopy(model)
    head = copy.deepcopy(head)
    gen = RandomSource(cfg.seed).generator
    lr = cfg.learning_rate

    def full_loss():
        with np.errstate(over="ignore", invalid="ignore"):
            return classifier_loss_and_grads(model, head, x, codes)[0] if x.shape[0] else 0.0

    history = [full_loss()]
    if x.shape[0] == 0:
        return model, head, history
    for epoch in range(1, cfg.epochs + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            for idx in _batches(x.shape[0], cfg.batch_size, gen):
                _, layer_grads, head_grads = classifier_loss_and_grads(model, head, x[idx], codes[idx])
                head.weight -= lr * head_grads["weight"]
                head.bias -= lr * head_grads["bias"]
                if not head_only:
                    for ae, g in zip(model.layers, layer_grads):
                        ae.encoder.weight -= lr * g["weight"]
                        ae.encoder.bias -= lr * g["bias"]
        loss = full_loss()
        if not np.isfinite(loss):
            raise TrainingError(f"fine-tuning diverged at epoch {epoch} (learning rate {lr})")
        history.append(loss)
    return model, head, history


def train_classifier(
    x,
    codes,
    hidden_dims,
    n_classes: int,
    pretrain: TrainConfig,
    finetune: TrainConfig,
    rng: RandomSource,
    decoder_activation: str = "auto",
    head_only: bool = False,
) -> tuple[StackedAutoencoderModel, SoftmaxHead]:
    """Pretrain a fresh stack, attach a softmax head and fine-tune both."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    stack = init_stack(x.shape[1], hidden_dims, rng.child(0), scale=pretrain.init_scale)
    stack, _ = stack_pretrain(stack, x, pretrain, decoder_activation=decoder_activation)
    head = init_head(stack.output_dim, n_classes, rng.child(1), scale=finetune.init_scale)
    stack, head, _ = finetune_supervised(stack, head, x, codes, finetune, head_only)
    return stack, head
