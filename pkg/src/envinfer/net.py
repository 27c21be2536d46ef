"""Minimal dense network engine with exact manual backprop.

Hidden layers use ReLU, the output layer is a single linear logit.  The
backward pass accepts an arbitrary cotangent on the logits, which is what
lets the invariance-penalty training reuse it unchanged.  All math is
float64.
"""

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import BadWidths, ShapeMismatch


@dataclass
class ModelParams:
    widths: list
    weights: list   # per layer, (out, in) float64
    biases: list    # per layer, (out,) float64

    @property
    def n_layers(self):
        return len(self.weights)


@dataclass
class Gradients:
    weights: list
    biases: list


@dataclass
class OptimizerState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    step: int = 0
    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0


def init_mlp(widths, seed: int) -> ModelParams:
    """Zero-mean normal weights scaled by 1/sqrt(fan_in), zero biases."""
    widths = list(widths)
    if len(widths) < 2 or widths[-1] != 1 or any(w <= 0 for w in widths):
        raise BadWidths(f"bad widths {widths}")
    gen = rng.stream(seed, "init")
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(gen.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return ModelParams(widths=widths, weights=weights, biases=biases)


def forward(params: ModelParams, batch: np.ndarray):
    """Return (logits (B,), activations).

    activations[0] is the input batch; activations[k] for hidden layers is
    the post-ReLU output; the penultimate entry is the embedding used for
    clustering.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.widths[0]:
        raise ShapeMismatch(f"batch {x.shape} vs input width {params.widths[0]}")
    activations = [x]
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        x = np.maximum(x @ w.T + b, 0.0)
        activations.append(x)
    logits = x @ params.weights[-1].T + params.biases[-1]
    return logits[:, 0], activations


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_loss(logits: np.ndarray, labels: np.ndarray):
    """Mean binary cross-entropy on logits; returns (loss, dloss/dlogits)."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if z.shape != y.shape:
        raise ShapeMismatch(f"{z.shape} vs {y.shape}")
    # softplus(z) - y*z, stable for large |z|
    losses = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(z))) - y * z
    dlogits = (sigmoid(z) - y) / z.size
    return float(losses.mean()), dlogits


def backward(params: ModelParams, activations, dlogits: np.ndarray) -> Gradients:
    """Exact gradients of dlogits . logits w.r.t. all parameters."""
    if len(activations) != params.n_layers:
        raise ShapeMismatch("activations do not match the architecture")
    delta = np.asarray(dlogits, dtype=np.float64)[:, None]
    if delta.shape[0] != activations[0].shape[0]:
        raise ShapeMismatch("cotangent batch size mismatch")
    gw = [None] * params.n_layers
    gb = [None] * params.n_layers
    for k in range(params.n_layers - 1, -1, -1):
        gw[k] = delta.T @ activations[k]
        gb[k] = delta.sum(axis=0)
        if k > 0:
            delta = (delta @ params.weights[k]) * (activations[k] > 0)
    return Gradients(weights=gw, biases=gb)


def zero_state(params: ModelParams, step_size=1e-3, weight_decay=0.0,
               beta1=0.9, beta2=0.999, eps=1e-8) -> OptimizerState:
    return OptimizerState(
        m_w=[np.zeros_like(w) for w in params.weights],
        v_w=[np.zeros_like(w) for w in params.weights],
        m_b=[np.zeros_like(b) for b in params.biases],
        v_b=[np.zeros_like(b) for b in params.biases],
        step_size=step_size, beta1=beta1, beta2=beta2, eps=eps,
        weight_decay=weight_decay,
    )


def update_params(params: ModelParams, grads: Gradients, state: OptimizerState):
    """Adam with bias correction; decoupled weight decay on weights only."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for k in range(params.n_layers):
        gw, gb = grads.weights[k], grads.biases[k]
        if gw.shape != params.weights[k].shape or gb.shape != params.biases[k].shape:
            raise ShapeMismatch(f"gradient shape mismatch at layer {k}")
        state.m_w[k] = b1 * state.m_w[k] + (1 - b1) * gw
        state.v_w[k] = b2 * state.v_w[k] + (1 - b2) * gw * gw
        state.m_b[k] = b1 * state.m_b[k] + (1 - b1) * gb
        state.v_b[k] = b2 * state.v_b[k] + (1 - b2) * gb * gb
        step_w = state.step_size * (state.m_w[k] / corr1) / (np.sqrt(state.v_w[k] / corr2) + state.eps)
        step_b = state.step_size * (state.m_b[k] / corr1) / (np.sqrt(state.v_b[k] / corr2) + state.eps)
        params.weights[k] -= step_w + state.step_size * state.weight_decay * params.weights[k]
        params.biases[k] -= step_b
    return params, state


def accuracy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Fraction with (logit > 0) == label; logit exactly 0 predicts 0."""
    z = np.asarray(logits)
    y = np.asarray(labels)
    if z.shape != y.shape:
        raise ShapeMismatch(f"{z.shape} vs {y.shape}")
    return float(((z > 0).astype(np.int64) == y.astype(np.int64)).mean())


# --- checkpoint codec ---

_CKPT_VERSION = 1
_ACT_RELU = 1


def encode_params(params: ModelParams) -> bytes:
    head = struct.pack("<III", _CKPT_VERSION, _ACT_RELU, len(params.widths))
    head += struct.pack(f"<{len(params.widths)}I", *params.widths)
    body = b"".join(
        w.astype(np.float64).tobytes() + b.astype(np.float64).tobytes()
        for w, b in zip(params.weights, params.biases)
    )
    checksum = struct.pack("<I", zlib.crc32(body))
    return head + body + checksum


def decode_params(data: bytes) -> ModelParams:
    version, act, nw = struct.unpack("<III", data[:12])
    if version != _CKPT_VERSION or act != _ACT_RELU:
        raise ValueError("unsupported checkpoint header")
    widths = list(struct.unpack(f"<{nw}I", data[12 : 12 + 4 * nw]))
    off = 12 + 4 * nw
    body = data[off:-4]
    (checksum,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != checksum:
        raise ValueError("checkpoint checksum mismatch")
    weights, biases = [], []
    pos = 0
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        nbytes = fan_out * fan_in * 8
        weights.append(np.frombuffer(body, np.float64, count=fan_out * fan_in, offset=pos).reshape(fan_out, fan_in).copy())
        pos += nbytes
        biases.append(np.frombuffer(body, np.float64, count=fan_out, offset=pos).copy())
        pos += fan_out * 8
    return ModelParams(widths=widths, weights=weights, biases=biases)
