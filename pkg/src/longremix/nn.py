"""Small dense feed-forward classifier with hand-coded gradients.

ReLU hidden layers, softmax output, momentum SGD. No autodiff: every
gradient is an explicit expression, validated against central finite
differences in the test suite. Two instances of :class:`Network` (tagged
``model1`` / ``model2``) form the co-trained pair used by the trainer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError
from .seeding import NET_INIT, derive_rng

LOG_EPS = 1e-12  # clamp inside log() so confident wrong predictions stay finite

CHECKPOINT_MAGIC = "longremix-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Network:
    """Dense layers; ``weights[k]`` has shape (fan_in, fan_out)."""

    weights: list
    biases: list
    tag: str = "model1"

    def __post_init__(self):
        if not self.weights:
            raise ValueError("network needs at least one layer")
        for k in range(len(self.weights) - 1):
            if self.weights[k].shape[1] != self.weights[k + 1].shape[0]:
                raise ValueError(
                    f"layer {k} output width {self.weights[k].shape[1]} does not "
                    f"match layer {k + 1} input width {self.weights[k + 1].shape[0]}"
                )
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (w.shape[1],):
                raise ValueError(f"bias {k} shape {b.shape} != ({w.shape[1]},)")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def layer_sizes(self) -> tuple:
        return (self.input_dim,) + tuple(w.shape[1] for w in self.weights)

    def copy(self) -> "Network":
        return Network([w.copy() for w in self.weights],
                       [b.copy() for b in self.biases], self.tag)


@dataclass
class Gradients:
    d_weights: list
    d_biases: list


@dataclass(frozen=True)
class TotalLoss:
    """Composite loss: mean CE on the labelled half, weighted mean squared
    error on the unlabelled half, plus a uniform-prior KL penalty on the
    mean prediction of both halves."""

    lambda_u: float
    lambda_reg: float


@dataclass
class OptimizerState:
    velocity_w: list
    velocity_b: list
    lr: float
    momentum: float
    weight_decay: float


def init_network(layer_sizes, seed, tag="model1") -> Network:
    """Glorot-uniform weights (range +-sqrt(6/(fan_in+fan_out))), zero biases."""
    rng = derive_rng(*_as_keys(seed), NET_INIT)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases, tag)


def _as_keys(seed):
    if isinstance(seed, (tuple, list)):
        return tuple(seed)
    return (seed,)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _forward_cached(net: Network, x):
    acts = [x]
    pres = []
    a = x
    last = len(net.weights) - 1
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w + b
        pres.append(z)
        a = _softmax(z) if k == last else np.maximum(z, 0.0)
        acts.append(a)
    return acts, pres, acts[-1]


def forward(net: Network, x):
    """Class-probability output; accepts a single vector or a batch."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    batch = x[None, :] if single else x
    if batch.ndim != 2 or batch.shape[1] != net.input_dim:
        raise ValueError(f"input width {batch.shape[-1]} != network width {net.input_dim}")
    _, _, probs = _forward_cached(net, batch)
    return probs[0] if single else probs


def cross_entropy(p, y):
    """-sum(y * log p), clamped at 1e-12; per row for 2-D inputs."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {y.shape}")
    val = -(y * np.log(np.maximum(p, LOG_EPS))).sum(axis=-1)
    return float(val) if p.ndim == 1 else val


def squared_error(p, y):
    """Squared Euclidean distance; per row for 2-D inputs."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y, dtype=float)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch {p.shape} vs {y.shape}")
    val = ((p - y) ** 2).sum(axis=-1)
    return float(val) if p.ndim == 1 else val


def _uniform_kl(mean_pred):
    c = mean_pred.shape[0]
    pi = 1.0 / c
    return float(pi * (np.log(pi) - np.log(np.maximum(mean_pred, LOG_EPS))).sum())


def batch_loss(net: Network, batch, loss) -> float:
    """Scalar mean loss over a batch; mirrors exactly what backward() differentiates.

    ``loss`` is "cross_entropy", "squared_error", or a :class:`TotalLoss`.
    Simple losses take ``batch = (features, targets)``; the composite takes
    ``((x_feat, x_tgt), (u_feat, u_tgt))`` where the unlabelled pair may be
    empty.
    """
    if isinstance(loss, TotalLoss):
        (xf, xt), (uf, ut) = batch
        px = forward(net, xf)
        value = float(np.mean(cross_entropy(px, xt)))
        preds = px
        if len(uf):
            pu = forward(net, uf)
            value += loss.lambda_u * float(np.mean(squared_error(pu, ut)))
            preds = np.vstack([px, pu])
        value += loss.lambda_reg * _uniform_kl(preds.mean(axis=0))
        return value
    feats, targets = batch
    p = forward(net, feats)
    if loss == "cross_entropy":
        return float(np.mean(cross_entropy(p, targets)))
    if loss == "squared_error":
        return float(np.mean(squared_error(p, targets)))
    raise ValueError(f"unknown loss spec: {loss!r}")


def _softmax_vjp(p, g):
    # d(loss)/dz given d(loss)/dp, for z the softmax input
    return p * (g - (g * p).sum(axis=1, keepdims=True))


def _backprop(net: Network, acts, pres, dz) -> Gradients:
    n_layers = len(net.weights)
    d_w = [None] * n_layers
    d_b = [None] * n_layers
    g = dz
    for k in reversed(range(n_layers)):
        d_w[k] = acts[k].T @ g
        d_b[k] = g.sum(axis=0)
        if k > 0:
            g = (g @ net.weights[k].T) * (pres[k - 1] > 0)
    return Gradients(d_w, d_b)


def backward(net: Network, batch, loss) -> Gradients:
    """Gradients of the mean batch loss for every parameter."""
    if isinstance(loss, TotalLoss):
        return _backward_total(net, batch, loss)
    feats, targets = batch
    feats = np.atleast_2d(np.asarray(feats, dtype=float))
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    n = feats.shape[0]
    acts, pres, p = _forward_cached(net, feats)
    if loss == "cross_entropy":
        ysum = targets.sum(axis=1, keepdims=True)
        dz = (p * ysum - targets) / n
    elif loss == "squared_error":
        dz = _softmax_vjp(p, 2.0 * (p - targets) / n)
    else:
        raise ValueError(f"unknown loss spec: {loss!r}")
    return _backprop(net, acts, pres, dz)


def _backward_total(net: Network, batch, loss: TotalLoss) -> Gradients:
    (xf, xt), (uf, ut) = batch
    xf = np.atleast_2d(np.asarray(xf, dtype=float))
    xt = np.atleast_2d(np.asarray(xt, dtype=float))
    n_x = xf.shape[0]
    n_u = len(uf)
    if n_x == 0:
        raise ValueError("composite loss needs a non-empty labelled batch")
    if n_u:
        uf = np.atleast_2d(np.asarray(uf, dtype=float))
        ut = np.atleast_2d(np.asarray(ut, dtype=float))
        feats = np.vstack([xf, uf])
    else:
        feats = xf
    acts, pres, p = _forward_cached(net, feats)
    px, pu = p[:n_x], p[n_x:]

    # labelled: mean cross-entropy, direct output-layer form
    ysum = xt.sum(axis=1, keepdims=True)
    dz = np.empty_like(p)
    dz[:n_x] = (px * ysum - xt) / n_x

    # unlabelled: weighted mean squared error through the softmax jacobian
    g = np.zeros_like(p)
    if n_u:
        g[n_x:] = (2.0 * loss.lambda_u / n_u) * (pu - ut)
        dz[n_x:] = 0.0

    # KL(uniform || mean prediction): same dL/dp row for every sample
    if loss.lambda_reg != 0.0:
        n_tot = p.shape[0]
        c = p.shape[1]
        m = p.mean(axis=0)
        g_reg = np.where(m > LOG_EPS, -loss.lambda_reg / (c * n_tot * np.maximum(m, LOG_EPS)), 0.0)
        g += g_reg

    dz += _softmax_vjp(p, g)
    return _backprop(net, acts, pres, dz)


def init_optimizer(net: Network, lr, momentum=0.8, weight_decay=0.0) -> OptimizerState:
    return OptimizerState(
        velocity_w=[np.zeros_like(w) for w in net.weights],
        velocity_b=[np.zeros_like(b) for b in net.biases],
        lr=lr, momentum=momentum, weight_decay=weight_decay,
    )


def sgd_step(net: Network, grads: Gradients, state: OptimizerState) -> Network:
    """Momentum SGD with decoupled-from-schedule lr; updates ``net`` in place."""
    for k in range(len(net.weights)):
        gw = grads.d_weights[k] + state.weight_decay * net.weights[k]
        gb = grads.d_biases[k] + state.weight_decay * net.biases[k]
        state.velocity_w[k] = state.momentum * state.velocity_w[k] + gw
        state.velocity_b[k] = state.momentum * state.velocity_b[k] + gb
        net.weights[k] -= state.lr * state.velocity_w[k]
        net.biases[k] -= state.lr * state.velocity_b[k]
    return net


def save_checkpoint(net: Network, path):
    """Textual parameter file: versioned header, layer shapes, row-major values."""
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}",
             f"tag {net.tag}",
             "sizes " + " ".join(str(s) for s in net.layer_sizes)]
    for k, (w, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"layer {k}")
        for row in w:
            lines.append(" ".join(format(v, ".17g") for v in row))
        lines.append(" ".join(format(v, ".17g") for v in b))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> Network:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines:
        raise ParseError("empty checkpoint file", row=1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != CHECKPOINT_MAGIC:
        raise ParseError("not a checkpoint file", row=1)
    if int(head[1]) != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {head[1]}", row=1)
    tag = lines[1].split(" ", 1)[1]
    sizes = [int(s) for s in lines[2].split()[1:]]
    weights, biases = [], []
    pos = 3
    for k, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        if lines[pos] != f"layer {k}":
            raise ParseError(f"expected 'layer {k}'", row=pos + 1)
        pos += 1
        rows = []
        for _ in range(fan_in):
            rows.append([float(v) for v in lines[pos].split()])
            pos += 1
        w = np.array(rows)
        if w.shape != (fan_in, fan_out):
            raise ParseError(f"layer {k} shape mismatch", row=pos)
        b = np.array([float(v) for v in lines[pos].split()])
        pos += 1
        if b.shape != (fan_out,):
            raise ParseError(f"layer {k} bias shape mismatch", row=pos)
        weights.append(w)
        biases.append(b)
    return Network(weights, biases, tag)
