"""Small fully connected network with hand-derived gradients and Adam.

Tensors are plain float64 numpy arrays in row-major order.  Weight
matrices are stored as ``(fan_in, fan_out)`` so a layer computes
``x @ W + b``.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, InputError, StateError

ACTIVATIONS = ("relu", "identity")
CHECKPOINT_VERSION = 1


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.weight = np.array(self.weight, dtype=np.float64)
        self.bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        if self.weight.ndim != 2:
            raise ConfigurationError("layer weight must be a matrix")
        if self.bias.shape[0] != self.weight.shape[1]:
            raise ConfigurationError(
                f"bias length {self.bias.shape[0]} does not match "
                f"weight output dim {self.weight.shape[1]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown activation {self.activation!r}")


class Network:
    """Feed-forward MLP producing one logit per class."""

    def __init__(self, layers):
        layers = list(layers)
        if not layers:
            raise ConfigurationError("network needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise ConfigurationError(
                    f"layer dims do not chain: {prev.weight.shape} -> {nxt.weight.shape}"
                )
        if layers[-1].activation != "identity":
            raise ConfigurationError("final layer must use the identity activation")
        self.layers = layers
        self._cache = None

    @classmethod
    def init(cls, dims, rng):
        """He-normal weights and zero biases; relu on hidden layers."""
        dims = [int(d) for d in dims]
        if len(dims) < 2 or min(dims) < 1:
            raise ConfigurationError(f"invalid layer dims {dims}")
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(dims, dims[1:])):
            last = i == len(dims) - 2
            scale = math.sqrt((1.0 if last else 2.0) / fan_in)
            w = rng.normal((fan_in, fan_out)) * scale
            layers.append(Layer(w, np.zeros(fan_out), "identity" if last else "relu"))
        return cls(layers)

    @property
    def dims(self):
        return [self.layers[0].weight.shape[0]] + [l.weight.shape[1] for l in self.layers]

    @property
    def num_classes(self):
        return self.layers[-1].weight.shape[1]

    def parameters(self):
        params = []
        for layer in self.layers:
            params.append(layer.weight)
            params.append(layer.bias)
        return params

    def copy(self):
        return Network(
            [Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers]
        )

    def forward(self, batch, cache=True):
        x = np.asarray(batch, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.layers[0].weight.shape[0]:
            raise ConfigurationError(
                f"input has shape {x.shape}, network expects "
                f"{self.layers[0].weight.shape[0]} features"
            )
        inputs = []
        pre = []
        h = x
        for layer in self.layers:
            inputs.append(h)
            z = h @ layer.weight + layer.bias
            pre.append(z)
            h = np.maximum(z, 0.0) if layer.activation == "relu" else z
        if not np.all(np.isfinite(h)):
            raise FloatingPointError("non-finite logits in forward pass")
        if cache:
            self._cache = (inputs, pre)
        return h

    def predict_proba(self, batch):
        return sigmoid(self.forward(batch, cache=False))

    def backward(self, grad_logits):
        """Parameter gradients for the batch seen by the last ``forward``.

        Returned in the same order as :meth:`parameters`.  The cache is
        consumed so a second call without a new forward pass fails.
        """
        if self._cache is None:
            raise StateError("backward called without a preceding forward pass")
        inputs, pre = self._cache
        g = np.asarray(grad_logits, dtype=np.float64)
        if g.shape != pre[-1].shape:
            raise InputError(f"gradient shape {g.shape} != logits shape {pre[-1].shape}")
        self._cache = None
        grads = [None] * (2 * len(self.layers))
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if layer.activation == "relu":
                g = g * (pre[i] > 0.0)
            grads[2 * i] = inputs[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i > 0:
                g = g @ layer.weight.T
        return grads


def forward(net, batch):
    return net.forward(batch)


def _sigmoid_exact(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


_BELOW_ONE = np.nextafter(1.0, 0.0)
_ABOVE_ZERO = np.finfo(np.float64).tiny


def sigmoid(logits):
    """Logistic function kept strictly inside (0, 1).

    Float64 rounds sigmoid(z) to exactly 1.0 for z above ~37, so outputs are
    clipped one ulp below 1 (and to the smallest normal above 0).
    """
    z = np.asarray(logits, dtype=np.float64)
    scalar = z.ndim == 0
    out = np.clip(_sigmoid_exact(np.atleast_1d(z)), _ABOVE_ZERO, _BELOW_ONE)
    return float(out[0]) if scalar else out


def masked_weighted_bce(logits, targets, mask, pos_weight, neg_weight, reduction="mean"):
    """Weighted binary cross-entropy with a loss mask.

    Per entry ``w_pos * t * softplus(-z) + w_neg * (1 - t) * softplus(z)``,
    evaluated on logits so nothing saturates.  Masked-out entries contribute
    exactly zero.  ``reduction="mean"`` divides by all N*K entries (masked
    ones count as zeros); ``"masked_mean"`` divides by the number of
    unmasked entries.

    Returns ``(loss, dloss_dlogits)``.
    """
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    m = np.asarray(mask)
    if z.ndim == 1:
        z, t, m = z[None, :], t[None, :], m[None, :]
    if t.shape != z.shape or m.shape != z.shape:
        raise InputError(f"shape mismatch: logits {z.shape}, targets {t.shape}, mask {m.shape}")
    if np.any(~((t >= 0.0) & (t <= 1.0))):
        raise InputError("targets must lie in [0, 1]")
    if not np.all((m == 0) | (m == 1)):
        raise InputError("mask must be binary")
    m = m.astype(bool)
    wp = np.broadcast_to(np.asarray(pos_weight, dtype=np.float64), z.shape[-1:])
    wn = np.broadcast_to(np.asarray(neg_weight, dtype=np.float64), z.shape[-1:])

    entry = wp * t * np.logaddexp(0.0, -z) + wn * (1.0 - t) * np.logaddexp(0.0, z)
    p = _sigmoid_exact(z)
    dentry = wp * t * (p - 1.0) + wn * (1.0 - t) * p
    entry = np.where(m, entry, 0.0)
    dentry = np.where(m, dentry, 0.0)

    if reduction == "mean":
        denom = z.size
    elif reduction == "masked_mean":
        denom = int(m.sum())
    else:
        raise ConfigurationError(f"unknown reduction {reduction!r}")
    if denom == 0:
        return 0.0, np.zeros_like(z)
    return float(entry.sum() / denom), dentry / denom


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    @classmethod
    def for_network(cls, net, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        if not lr > 0:
            raise ConfigurationError(f"learning rate must be positive, got {lr}")
        params = net.parameters()
        return cls(
            lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_update(params, grads, state):
    """In-place bias-corrected Adam step over matching param/grad lists."""
    if len(params) != len(state.m):
        raise StateError("optimizer state does not match parameter list")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if m.shape != p.shape or g.shape != p.shape:
            raise StateError("gradient/accumulator shape does not mirror parameter")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def backward_and_step(net, state, grad_logits):
    grads = net.backward(grad_logits)
    adam_update(net.parameters(), grads, state)
    return net, state


def _flat(a):
    return [float(x) for x in np.asarray(a, dtype=np.float64).ravel()]


def checkpoint_dict(net, state=None):
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "layer_dims": net.dims,
        "activation_tags": [l.activation for l in net.layers],
        "weights": [_flat(l.weight) for l in net.layers],
        "biases": [_flat(l.bias) for l in net.layers],
        "optimizer": None,
    }
    if state is not None:
        doc["optimizer"] = {
            "lr": state.lr, "beta1": state.beta1, "beta2": state.beta2,
            "eps": state.eps, "step": state.step,
            "m": [_flat(a) for a in state.m],
            "v": [_flat(a) for a in state.v],
        }
    return doc


def network_from_checkpoint(doc):
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise InputError(f"unsupported checkpoint version {doc.get('format_version')!r}")
    dims = doc["layer_dims"]
    layers = []
    for i, tag in enumerate(doc["activation_tags"]):
        w = np.array(doc["weights"][i], dtype=np.float64).reshape(dims[i], dims[i + 1])
        layers.append(Layer(w, np.array(doc["biases"][i], dtype=np.float64), tag))
    net = Network(layers)
    state = None
    opt = doc.get("optimizer")
    if opt is not None:
        shapes = [p.shape for p in net.parameters()]
        state = AdamState(
            lr=opt["lr"], beta1=opt["beta1"], beta2=opt["beta2"], eps=opt["eps"],
            step=int(opt["step"]),
            m=[np.array(a, dtype=np.float64).reshape(s) for a, s in zip(opt["m"], shapes)],
            v=[np.array(a, dtype=np.float64).reshape(s) for a, s in zip(opt["v"], shapes)],
        )
    return net, state


def save_checkpoint(path, net, state=None):
    # json writes floats with repr(), which round-trips float64 exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(checkpoint_dict(net, state), fh)


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        return network_from_checkpoint(json.load(fh))
