"""Constructors for the small networks every experiment runs on."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Network, NetworkBuilder
from ..errors import ShapeError

ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")
HEADS = ("softmax", "sigmoid", "none")


def init_uniform(rng, shape, fan_in):
    r = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-r, r, size=shape)


def _attach_head(b, logits, head, n_out):
    b.output("logits", logits)
    out = logits
    if head == "softmax":
        out = b.output("probs", b.softmax(logits, name="probs"))
    elif head == "sigmoid":
        out = b.output("probs", b.sigmoid(logits, name="probs"))
    if n_out == 1:
        b.output("score", b.select(out, index=0, name="score"))
        return "score"
    return "probs" if head != "none" else "logits"


def build_mlp(sizes, activation="relu", head="softmax", seed=0, weights=None, biases=None) -> Network:
    """Fully connected net ``sizes[0] -> ... -> sizes[-1]`` with an optional softmax/sigmoid head.

    ``weights``/``biases`` override the seeded uniform initialisation layer by
    layer (``weights[l]`` has shape ``(sizes[l+1], sizes[l])``). Networks with a
    single output expose it as the scalar ``score``.
    """
    sizes = [int(s) for s in sizes]
    if len(sizes) < 2:
        raise ValueError("build_mlp needs at least one layer (two sizes)")
    if any(s <= 0 for s in sizes):
        raise ValueError(f"layer sizes must be positive, got {sizes}")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    if head not in HEADS:
        raise ValueError(f"unknown head {head!r}")
    rng = np.random.default_rng(seed)
    b = NetworkBuilder()
    h = b.input("x", (sizes[0],))
    n_layers = len(sizes) - 1
    for layer, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        w = init_uniform(rng, (n_out, n_in), n_in) if weights is None else np.reshape(weights[layer], (n_out, n_in))
        bias = init_uniform(rng, (n_out,), n_in) if biases is None else np.reshape(biases[layer], (n_out,))
        h = b.dense(h, b.param(f"W{layer}", w), b.param(f"b{layer}", bias), name=f"dense{layer}")
        if layer < n_layers - 1 and activation != "identity":
            h = b.apply(activation, h, name=f"act{layer}")
    target = _attach_head(b, h, head, sizes[-1])
    meta = {"builder": "mlp", "sizes": sizes, "activation": activation, "head": head, "target": target}
    return b.build(meta)


def sigmoid_unit(weight=10.0) -> Network:
    """``F(x) = sigmoid(weight * x)`` on a scalar feature: the canonical saturating net."""
    return build_mlp([1, 1], activation="identity", head="sigmoid", weights=[[[weight]]], biases=[[0.0]])


def linear_model(weights, bias=0.0) -> Network:
    """``F(x) = w . x + bias`` as a one-layer MLP without a head."""
    w = np.asarray(weights, dtype=np.float64).reshape(1, -1)
    return build_mlp([w.shape[1], 1], activation="identity", head="none", weights=[w], biases=[[bias]])


# bias-free, so a black image gives zero logits and a uniform prediction
DEFAULT_CONV_PLAN = (
    {"type": "conv", "filters": 4, "kernel": 3, "pad": 1, "bias": False},
    {"type": "relu"},
    {"type": "avgpool", "size": 4},
    {"type": "dense", "units": 2, "bias": False},
)


def _bias(b, layer, name, init):
    # the initial values are drawn either way so the rng stream does not depend on the flag
    if layer.get("bias", True):
        return b.param(name, init)
    return b.zeros(shape=list(init.shape), name=name)


def build_convnet(input_shape=(16, 16, 1), plan=DEFAULT_CONV_PLAN, seed=0) -> Network:
    """Small image classifier from a layer plan; the last layer must be ``dense`` (softmax head).

    Plan entries are dicts with a ``type`` of ``conv`` (filters, kernel, pad),
    ``relu``/``sigmoid``/``tanh``, ``maxpool``/``avgpool`` (size), ``flatten``,
    or ``dense`` (units). Dense layers flatten their input automatically.
    ``conv`` and ``dense`` accept ``"bias": false`` for a fixed zero bias.
    """
    plan = [dict(p) for p in plan]
    if not plan or plan[-1].get("type") != "dense":
        raise ShapeError("convnet plan must end with a dense layer")
    if len(input_shape) != 3:
        raise ShapeError(f"convnet input must be (H, W, C), got {input_shape}")
    rng = np.random.default_rng(seed)
    b = NetworkBuilder()
    h = b.input("x", input_shape)
    shape = tuple(int(s) for s in input_shape)
    for i, layer in enumerate(plan):
        kind = layer.get("type")
        if kind == "conv":
            if len(shape) != 3:
                raise ShapeError(f"layer {i}: conv needs an (H, W, C) input, got {shape}")
            k, f, pad = int(layer["kernel"]), int(layer["filters"]), int(layer.get("pad", 0))
            fan_in = k * k * shape[2]
            kern = b.param(f"K{i}", init_uniform(rng, (k, k, shape[2], f), fan_in))
            bias = _bias(b, layer, f"c{i}", init_uniform(rng, (f,), fan_in))
            h = b.conv2d(h, kern, bias, pad=pad, name=f"conv{i}")
            shape = (shape[0] + 2 * pad - k + 1, shape[1] + 2 * pad - k + 1, f)
            if min(shape[:2]) < 1:
                raise ShapeError(f"layer {i}: kernel {k} too large for input")
        elif kind in ("relu", "sigmoid", "tanh"):
            h = b.apply(kind, h, name=f"{kind}{i}")
        elif kind in ("maxpool", "avgpool"):
            size = int(layer["size"])
            if len(shape) != 3 or shape[0] % size or shape[1] % size:
                raise ShapeError(f"layer {i}: pool size {size} does not divide {shape}")
            h = b.apply(f"{kind}2d", h, size=size, name=f"{kind}{i}")
            shape = (shape[0] // size, shape[1] // size, shape[2])
        elif kind in ("flatten", "dense"):
            if len(shape) != 1:
                h = b.reshape(h, shape=[-1], name=f"flatten{i}")
                shape = (int(np.prod(shape)),)
            if kind == "dense":
                units = int(layer["units"])
                w = b.param(f"W{i}", init_uniform(rng, (units, shape[0]), shape[0]))
                c = _bias(b, layer, f"b{i}", init_uniform(rng, (units,), shape[0]))
                h = b.dense(h, w, c, name=f"dense{i}")
                shape = (units,)
        else:
            raise ShapeError(f"layer {i}: unknown layer type {kind!r}")
    target = _attach_head(b, h, "softmax", shape[0])
    meta = {"builder": "convnet", "input_shape": list(input_shape), "plan": plan, "target": target}
    return b.build(meta)


def build_lstm_lm(vocab_size, embed_dim, hidden_dim, seq_len=10, seed=0) -> Network:
    """Embedding -> unrolled LSTM -> softmax over the vocabulary.

    The input ``x`` is a (seq_len, vocab_size) one-hot matrix; it enters
    through ``x @ E`` with no bias, so scaling ``x`` by alpha scales every
    embedding vector by alpha. ``probs`` is the next-word distribution.
    """
    dims = dict(vocab_size=vocab_size, embed_dim=embed_dim, hidden_dim=hidden_dim, seq_len=seq_len)
    if any(int(v) <= 0 for v in dims.values()):
        raise ShapeError(f"LSTM dimensions must be positive, got {dims}")
    v, d, n, t_len = (int(x) for x in (vocab_size, embed_dim, hidden_dim, seq_len))
    rng = np.random.default_rng(seed)
    b = NetworkBuilder()
    x = b.input("x", (t_len, v))
    emb = b.matmul(x, b.param("E", init_uniform(rng, (v, d), 1)), name="embed")
    weights = {}
    for g in "ifgo":
        weights[g] = (
            b.param(f"W_{g}", init_uniform(rng, (n, d + n), d + n)),
            b.param(f"b_{g}", init_uniform(rng, (n,), d + n)),
        )
    h = b.zeros(shape=[n], name="h0")
    c = b.zeros(shape=[n], name="c0")
    for t in range(t_len):
        xt = b.row(emb, index=t, name=f"x{t}")
        h, c = b.lstm_cell(xt, h, c, weights, prefix=f"t{t}")
    out_w = b.param("W_out", init_uniform(rng, (v, n), n))
    out_b = b.param("b_out", init_uniform(rng, (v,), n))
    logits = b.dense(h, out_w, out_b, name="dense_out")
    target = _attach_head(b, logits, "softmax", v)
    return b.build({"builder": "lstm_lm", **dims, "target": target})


def one_hot_sequence(tokens, vocab_size) -> np.ndarray:
    tokens = np.asarray(tokens, dtype=np.int64)
    out = np.zeros((tokens.size, int(vocab_size)))
    out[np.arange(tokens.size), tokens] = 1.0
    return out


@dataclass(frozen=True)
class EquivalentPair:
    """Two structurally different ReLU networks that compute the same function.

    ``test_inputs`` is the documented grid on which agreement is checked; the
    straight path from the zero baseline to each of them stays off the
    ``x1 == x2`` diagonal.
    """

    net_a: Network
    net_b: Network
    domain_note: str
    test_inputs: np.ndarray = field(repr=False, default=None)


def _pair_net(w1, b1, w2, b2, w_out, tag):
    b = NetworkBuilder()
    x = b.input("x", (2,))
    h1 = b.relu(b.dense(x, b.param("W1", w1), b.param("b1", b1), name="hidden_pre"), name="hidden")
    s = b.relu(b.dense(h1, b.param("W2", w2), b.param("b2", b2), name="gate_pre"), name="gate")
    z = b.concat(x, h1, s, name="skip")
    y = b.dense(z, b.param("W3", w_out), b.param("b3", [0.0]), name="out")
    b.output("score", b.select(y, index=0, name="score"))
    return b.build({"builder": "equivalent_pair", "variant": tag, "target": "score"})


# Both nets are min(x1, x2) + relu(relu(x2) - 1 - relu(x1 - 0.5)).
# Net A: x1 - relu(x1 - x2)    and  relu(relu(x2) - 1 - relu(x1 - 0.5))
# Net B: x2 - relu(x2 - x1)    and  relu(relu(x2 - 1) - relu(x1 - 0.5))
_PAIR_A = dict(
    w1=[[1.0, -1.0], [0.0, 1.0], [1.0, 0.0]],
    b1=[0.0, 0.0, -0.5],
    w2=[[0.0, 1.0, -1.0]],
    b2=[-1.0],
    w_out=[[1.0, 0.0, -1.0, 0.0, 0.0, 1.0]],
)
_PAIR_B = dict(
    w1=[[-1.0, 1.0], [0.0, 1.0], [1.0, 0.0]],
    b1=[0.0, -1.0, -0.5],
    w2=[[0.0, 1.0, -1.0]],
    b2=[0.0],
    w_out=[[0.0, 1.0, -1.0, 0.0, 0.0, 1.0]],
)


def pair_function(x) -> float:
    """Closed form both equivalent-pair networks compute."""
    relu = lambda v: max(v, 0.0)  # noqa: E731
    x1, x2 = float(x[0]), float(x[1])
    return min(x1, x2) + relu(relu(x2) - 1.0 - relu(x1 - 0.5))


def equivalent_pair() -> EquivalentPair:
    """The shipped functionally-equivalent pair used for the invariance comparison."""
    grid = np.array([(a, b) for a in np.linspace(-2, 2, 9) for b in np.linspace(-2, 2, 9)] + [(1.0, 2.0)])
    note = (
        "netA and netB compute min(x1, x2) + relu(relu(x2) - 1 - relu(x1 - 0.5)). "
        "Scaling paths from (0, 0) to off-diagonal inputs such as (1, 2) never cross x1 == x2; "
        "the threshold units switch at isolated alphas, a measure-zero set."
    )
    return EquivalentPair(_pair_net(**_PAIR_A, tag="A"), _pair_net(**_PAIR_B, tag="B"), note, grid)
