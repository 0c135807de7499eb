"""Dense MLP substrate: forward/backward passes, temperature softmax, Adam, checkpoints."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

CHECKPOINT_MAGIC = b"TRSTMLP1"
_HEADER_LEN = struct.Struct("<I")


class ShapeError(ValueError):
    """Dimension mismatch between an array and the model it is used with."""


@dataclass(frozen=True)
class MlpConfig:
    """Fully connected architecture: layer_dims = (input, hidden..., output)."""

    layer_dims: tuple[int, ...]
    dropout_rate: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if len(self.layer_dims) < 3:
            raise ValueError("need input, at least one hidden, and output layer")
        if min(self.layer_dims) < 1:
            raise ValueError("layer dims must all be >= 1")
        if not 0.0 <= float(self.dropout_rate) < 1.0:
            raise ValueError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


@dataclass
class Mlp:
    """Weights and biases for every layer; layer l maps dims[l] -> dims[l+1]."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    config: MlpConfig

    @property
    def input_dim(self) -> int:
        return self.config.layer_dims[0]

    @property
    def num_classes(self) -> int:
        return self.config.layer_dims[-1]

    @property
    def last_hidden(self) -> int:
        """Index of the last hidden activation, the default feature layer."""
        return len(self.config.layer_dims) - 2


@dataclass
class ForwardTrace:
    """Per-layer record of one forward pass.

    activations[0] is the input, hidden entries are post-ReLU (mask-adjusted
    when dropout was active), and the final entry holds the raw logits.
    dropout_masks is None for deterministic passes.
    """

    pre_activations: list[np.ndarray]
    activations: list[np.ndarray]
    dropout_masks: list[np.ndarray] | None = None


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_mlp(config: MlpConfig) -> Mlp:
    """He-uniform weights (+-sqrt(6/fan_in)), zero biases, seeded."""
    rng = np.random.default_rng(config.seed)
    weights, biases = [], []
    dims = config.layer_dims
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights=weights, biases=biases, config=config)


def parameters(model: Mlp) -> list[np.ndarray]:
    """Flat parameter list [W0, b0, W1, b1, ...]; entries are live views."""
    out: list[np.ndarray] = []
    for w, b in zip(model.weights, model.biases):
        out.extend((w, b))
    return out


def forward(
    model: Mlp,
    x: np.ndarray,
    stochastic: bool = False,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, ForwardTrace]:
    """Run one sample through the network, recording a full trace.

    Dropout applies to hidden activations only when `stochastic` is set and
    the configured rate is positive (inverted scaling, so deterministic
    inference needs no rescaling).
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise ShapeError(f"input has shape {x.shape}, expected ({model.input_dim},)")
    p = model.config.dropout_rate
    use_dropout = stochastic and p > 0.0
    if use_dropout and rng is None:
        raise ValueError("stochastic forward with dropout requires an rng")

    pre, acts = [], [x]
    masks: list[np.ndarray] | None = [] if use_dropout else None
    a = x
    n_layers = len(model.weights)
    for layer, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = w @ a + b
        pre.append(z)
        if layer == n_layers - 1:
            a = z
        else:
            a = np.maximum(z, 0.0)
            if use_dropout:
                mask = (rng.random(a.shape) >= p) / (1.0 - p)
                masks.append(mask)
                a = a * mask
        acts.append(a)
    logits = acts[-1]
    if not np.all(np.isfinite(logits)):
        raise FloatingPointError("forward pass produced non-finite logits")
    return logits, ForwardTrace(pre_activations=pre, activations=acts, dropout_masks=masks)


def softmax_t(logits: np.ndarray, temperature: float) -> np.ndarray:
    """Temperature softmax with max-subtraction for stability."""
    if temperature <= 0.0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    logits = np.asarray(logits, dtype=float)
    shifted = (logits - logits.max()) / temperature
    e = np.exp(shifted)
    return e / e.sum()


def cross_entropy_t(logits: np.ndarray, target: int, temperature: float) -> float:
    """-log softmax_t(logits)[target], computed in log space."""
    if temperature <= 0.0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    logits = np.asarray(logits, dtype=float)
    if not 0 <= target < logits.shape[0]:
        raise IndexError(f"target {target} out of range for {logits.shape[0]} classes")
    shifted = (logits - logits.max()) / temperature
    return float(np.log(np.exp(shifted).sum()) - shifted[target])


def _check_trace(model: Mlp, trace: ForwardTrace) -> None:
    dims = model.config.layer_dims
    if len(trace.activations) != len(dims) or any(
        a.shape != (d,) for a, d in zip(trace.activations, dims)
    ):
        raise ShapeError("trace does not match model architecture")


def backward_from_output_grad(
    model: Mlp, trace: ForwardTrace, dlogits: np.ndarray
) -> tuple[list[np.ndarray], np.ndarray]:
    """Backpropagate an arbitrary logit gradient.

    Returns (param_grads, input_grad) with param_grads ordered like
    `parameters(model)`.
    """
    _check_trace(model, trace)
    dlogits = np.asarray(dlogits, dtype=float)
    if dlogits.shape != (model.num_classes,):
        raise ShapeError("output gradient has wrong shape")

    n_layers = len(model.weights)
    w_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    b_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    delta = dlogits
    for layer in range(n_layers - 1, -1, -1):
        a_prev = trace.activations[layer]
        w_grads[layer] = np.outer(delta, a_prev)
        b_grads[layer] = delta
        g_act = model.weights[layer].T @ delta
        if layer > 0:
            g_act = g_act * (trace.pre_activations[layer - 1] > 0.0)
            if trace.dropout_masks is not None:
                g_act = g_act * trace.dropout_masks[layer - 1]
        delta = g_act
    input_grad = delta

    param_grads: list[np.ndarray] = []
    for wg, bg in zip(w_grads, b_grads):
        param_grads.extend((wg, bg))
    return param_grads, input_grad


def backward(
    model: Mlp, trace: ForwardTrace, target: int, temperature: float
) -> tuple[list[np.ndarray], np.ndarray]:
    """Exact gradients of cross_entropy_t w.r.t. parameters and the input."""
    logits = trace.activations[-1]
    probs = softmax_t(logits, temperature)
    if not 0 <= target < probs.shape[0]:
        raise IndexError(f"target {target} out of range for {probs.shape[0]} classes")
    dlogits = probs.copy()
    dlogits[target] -= 1.0
    dlogits /= temperature
    return backward_from_output_grad(model, trace, dlogits)


def ce_value_and_input_grad(
    model: Mlp, x: np.ndarray, target: int, temperature: float
) -> tuple[float, np.ndarray]:
    """Deterministic cross_entropy_t value and input gradient in one pass.

    Skips trace bookkeeping and parameter gradients; used by per-sample
    optimization loops. Agrees with forward + backward bit-for-bit.
    """
    zs: list[np.ndarray] = []
    a = x
    n_layers = len(model.weights)
    for layer in range(n_layers - 1):
        z = model.weights[layer] @ a + model.biases[layer]
        zs.append(z)
        a = np.maximum(z, 0.0)
    logits = model.weights[-1] @ a + model.biases[-1]

    shifted = (logits - logits.max()) / temperature
    e = np.exp(shifted)
    total = e.sum()
    loss = float(np.log(total) - shifted[target])

    delta = e / total
    delta[target] -= 1.0
    delta /= temperature
    for layer in range(n_layers - 1, 0, -1):
        g_act = model.weights[layer].T @ delta
        delta = g_act * (zs[layer - 1] > 0.0)
    input_grad = model.weights[0].T @ delta
    return loss, input_grad


def adam_init(params: list[np.ndarray], beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    return AdamState(
        first_moment=[np.zeros_like(p) for p in params],
        second_moment=[np.zeros_like(p) for p in params],
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray],
              lr: float) -> None:
    """One bias-corrected Adam update; mutates params and state in place."""
    if lr < 0.0:
        raise ValueError("lr must be >= 0")
    if len(params) != len(state.first_moment) or len(grads) != len(params):
        raise ShapeError("parameter/gradient lists do not match optimizer state")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ShapeError("gradient shape does not match parameter shape")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def feature(trace: ForwardTrace, layer: int | None = None) -> np.ndarray:
    """Post-activation vector of the requested layer; None means last hidden."""
    acts = trace.activations
    if layer is None:
        layer = len(acts) - 2
    if not 0 <= layer < len(acts):
        raise IndexError(f"layer {layer} out of range for {len(acts)} layers")
    return acts[layer]


def save_checkpoint(model: Mlp, path: str) -> None:
    """Write magic, length-prefixed JSON header, then little-endian f64 data."""
    header = json.dumps(
        {
            "layer_dims": list(model.config.layer_dims),
            "dropout_rate": model.config.dropout_rate,
            "seed": model.config.seed,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(_HEADER_LEN.pack(len(header)))
        fh.write(header)
        for w, b in zip(model.weights, model.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_checkpoint(path: str) -> Mlp:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint magic")
    off = len(CHECKPOINT_MAGIC)
    (header_len,) = _HEADER_LEN.unpack_from(blob, off)
    off += _HEADER_LEN.size
    header = json.loads(blob[off : off + header_len].decode("utf-8"))
    off += header_len
    config = MlpConfig(
        layer_dims=tuple(header["layer_dims"]),
        dropout_rate=float(header["dropout_rate"]),
        seed=int(header["seed"]),
    )
    dims = config.layer_dims
    expected = sum(dims[l + 1] * dims[l] + dims[l + 1] for l in range(len(dims) - 1))
    if len(blob) - off != expected * 8:
        raise ValueError(f"{path}: payload is {len(blob) - off} bytes, expected {expected * 8}")
    weights, biases = [], []
    for l in range(len(dims) - 1):
        n_w = dims[l + 1] * dims[l]
        w = np.frombuffer(blob, dtype="<f8", count=n_w, offset=off).reshape(dims[l + 1], dims[l])
        off += n_w * 8
        b = np.frombuffer(blob, dtype="<f8", count=dims[l + 1], offset=off)
        off += dims[l + 1] * 8
        weights.append(w.astype(float))
        biases.append(b.astype(float))
    return Mlp(weights=weights, biases=biases, config=config)
