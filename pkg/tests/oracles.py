"""Independent reference computations shared by the unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from intgrad.autodiff import NetworkBuilder, backward, evaluate, finite_difference_gradient

KINK_MARGIN = 1e-2
FD_STEP = 1e-5


def away_from_zero(rng, shape, low=0.2, high=1.5):
    """Random values with |v| in [low, high]: no ReLU kink within ``low``."""
    mag = rng.uniform(low, high, size=shape)
    return mag * rng.choice([-1.0, 1.0], size=shape)


def distinct_values(rng, n, gap=0.05):
    """``n`` values in random order whose pairwise gaps are at least ``gap`` (no max-pool ties)."""
    return rng.permutation(np.arange(n) * gap + rng.uniform(0, gap / 4)) - n * gap / 2


def _reduce(b, node, shape, rng):
    """Scalar ``sum(node * R)`` with random ``R``, so every output coordinate matters."""
    r = b.param("R", rng.uniform(0.5, 1.5, size=shape))
    b.output("score", b.sum(b.multiply(node, r)))


def op_cases(seed=0):
    """``{case name: (network, inputs)}`` exercising every op in the catalog plus the LSTM composite."""
    rng = np.random.default_rng(seed)
    cases = {}

    def unary(op, x, out_shape, **attrs):
        b = NetworkBuilder()
        h = b.apply(op, b.input("x", x.shape), **attrs)
        _reduce(b, h, out_shape, rng)
        return b.build(), {"x": x}

    def binary(op, a, c, out_shape, **attrs):
        b = NetworkBuilder()
        h = b.apply(op, b.input("a", a.shape), b.input("c", c.shape), **attrs)
        _reduce(b, h, out_shape, rng)
        return b.build(), {"a": a, "c": c}

    for op in ("add", "subtract", "multiply"):
        cases[op] = binary(op, rng.normal(size=(3, 4)), rng.normal(size=(3, 4)), (3, 4))
        cases[f"{op}-scalar"] = binary(op, rng.normal(size=(3, 4)), np.asarray(rng.normal()), (3, 4))
    cases["scale"] = unary("scale", rng.normal(size=(5,)), (5,), factor=-1.7)
    cases["matmul"] = binary("matmul", rng.normal(size=(3, 4)), rng.normal(size=(4, 2)), (3, 2))
    cases["matmul-vector"] = binary("matmul", rng.normal(size=(4,)), rng.normal(size=(4, 2)), (2,))

    b = NetworkBuilder()
    h = b.dense(b.input("x", (4,)), b.input("W", (3, 4)), b.input("b", (3,)))
    _reduce(b, h, (3,), rng)
    cases["dense"] = (b.build(), {"x": rng.normal(size=4), "W": rng.normal(size=(3, 4)), "b": rng.normal(size=3)})

    cases["relu"] = unary("relu", away_from_zero(rng, (6,)), (6,))
    cases["sigmoid"] = unary("sigmoid", rng.normal(size=(6,)) * 2, (6,))
    cases["tanh"] = unary("tanh", rng.normal(size=(6,)), (6,))
    cases["softmax"] = unary("softmax", rng.normal(size=(5,)), (5,))
    cases["softmax-rows"] = unary("softmax", rng.normal(size=(2, 5)), (2, 5))
    cases["maxpool1d"] = unary("maxpool1d", distinct_values(rng, 8), (4,), size=2)
    cases["maxpool2d"] = unary("maxpool2d", distinct_values(rng, 32).reshape(4, 4, 2), (2, 2, 2), size=2)
    cases["avgpool1d"] = unary("avgpool1d", rng.normal(size=(6,)), (2,), size=3)
    cases["avgpool2d"] = unary("avgpool2d", rng.normal(size=(4, 4, 2)), (2, 2, 2), size=2)

    b = NetworkBuilder()
    h = b.conv2d(b.input("x", (5, 5, 2)), b.input("k", (3, 3, 2, 3)), b.input("b", (3,)), pad=1)
    _reduce(b, h, (5, 5, 3), rng)
    cases["conv2d"] = (
        b.build(),
        {"x": rng.normal(size=(5, 5, 2)), "k": rng.normal(size=(3, 3, 2, 3)), "b": rng.normal(size=3)},
    )

    cases["concat"] = binary("concat", rng.normal(size=(3,)), rng.normal(size=(2,)), (5,))
    cases["concat-axis1"] = binary("concat", rng.normal(size=(2, 3)), rng.normal(size=(2, 1)), (2, 4), axis=1)
    cases["reshape"] = unary("reshape", rng.normal(size=(2, 3)), (3, 2), shape=[3, -1])
    cases["select"] = unary("select", rng.normal(size=(2, 3)), (), index=4)
    cases["row"] = unary("row", rng.normal(size=(3, 4)), (4,), index=1)
    cases["sum"] = unary("sum", rng.normal(size=(2, 3)), ())
    cases["embedding"] = unary("embedding", rng.normal(size=(5, 3)), (4, 3), ids=[0, 2, 2, 4])

    b = NetworkBuilder()
    h = b.add(b.input("x", (3,)), b.zeros(shape=[3]))
    _reduce(b, h, (3,), rng)
    cases["zeros"] = (b.build(), {"x": rng.normal(size=3)})

    b = NetworkBuilder()
    x, hh, c = b.input("x", (3,)), b.input("h", (2,)), b.input("c", (2,))
    weights, inputs = {}, {"x": rng.normal(size=3), "h": rng.normal(size=2), "c": rng.normal(size=2)}
    for g in "ifgo":
        weights[g] = (b.input(f"W{g}", (2, 5)), b.input(f"b{g}", (2,)))
        inputs[f"W{g}"], inputs[f"b{g}"] = rng.normal(size=(2, 5)), rng.normal(size=2)
    h_new, c_new = b.lstm_cell(x, hh, c, weights, prefix="cell")
    _reduce(b, b.concat(h_new, c_new), (4,), rng)
    cases["lstm_cell"] = (b.build(), inputs)
    return cases


def relative_error(analytic: dict, numeric: dict) -> float:
    """Largest per-input ``||a - n|| / max(||a||, ||n||)`` (absolute when both are tiny)."""
    worst = 0.0
    for name in numeric:
        a, n = np.ravel(analytic[name]), np.ravel(numeric[name])
        scale = max(np.linalg.norm(a), np.linalg.norm(n), 1e-8)
        worst = max(worst, float(np.linalg.norm(a - n) / scale))
    return worst


def gradient_vs_fd(net, inputs, h=FD_STEP) -> float:
    analytic = backward(net, inputs, output="score")
    numeric = finite_difference_gradient(net, inputs, output="score", h=h)
    return relative_error(analytic, numeric)


# -- random compositions ---------------------------------------------------------

LAYER_KINDS = ("dense", "relu", "sigmoid", "tanh", "softmax", "scale", "square", "maxpool", "avgpool", "shift")


def random_composition(layers, seed, width=8):
    """Chain of ``layers`` (names from ``LAYER_KINDS``) on an input of length ``width``."""
    rng = np.random.default_rng(seed)
    b = NetworkBuilder()
    h = b.input("x", (width,))
    n = width
    for i, kind in enumerate(layers):
        if kind == "dense":
            m = int(rng.integers(2, 7)) * 2
            w = b.param(f"W{i}", rng.normal(size=(m, n)) / np.sqrt(n))
            h, n = b.dense(h, w, b.param(f"b{i}", rng.normal(size=m) * 0.3)), m
        elif kind in ("relu", "sigmoid", "tanh", "softmax"):
            h = b.apply(kind, h)
        elif kind == "scale":
            h = b.scale(h, factor=float(rng.uniform(-2, 2)))
        elif kind == "square":
            h = b.multiply(h, h)
        elif kind == "shift":
            h = b.add(h, b.param(f"s{i}", rng.normal(size=n)))
        elif n % 2 == 0:
            h, n = b.apply(f"{kind}1d", h, size=2), n // 2
    _reduce(b, h, (n,), rng)
    return b.build(), {"x": rng.normal(size=width)}


def kink_distance(net, inputs) -> float:
    """Smallest distance of any ReLU input from 0 or any max-pool window from a tie."""
    values = evaluate(net, inputs)
    dist = np.inf
    for node in net.nodes:
        if node.op == "relu":
            dist = min(dist, float(np.min(np.abs(values[node.inputs[0]]))))
        elif node.op == "maxpool1d":
            win = values[node.inputs[0]].reshape(-1, int(node.attrs["size"]))
            top2 = np.sort(win, axis=-1)[:, -2:]
            dist = min(dist, float(np.min(top2[:, 1] - top2[:, 0])))
    return dist


# -- evaluation oracles ------------------------------------------------------------


def naive_aopc(score_fn, image, importance, steps, pixels_per_step):
    """AOPC by the definition: rank pixels with a Python sort, rebuild each ablated image from scratch."""
    h, w = importance.shape
    ranked = sorted(range(h * w), key=lambda i: (-importance.reshape(-1)[i], i))
    base = score_fn(image)
    drops, ys = [], []
    for k in range(1, steps + 1):
        ablated = np.array(image, copy=True)
        for flat in ranked[: k * pixels_per_step]:
            r, c = divmod(flat, w)
            ablated[r, c, :] = 0.0
        drops.append(base - score_fn(ablated))
        ys.append(sum(drops) / k)
    return ys


def brute_force_localization(importance, boxes):
    inside = total = 0.0
    h, w = importance.shape
    for r in range(h):
        for c in range(w):
            v = importance[r, c]
            total += v
            if any(b.y0 <= r < b.y1 and b.x0 <= c < b.x1 for b in boxes):
                inside += v
    return inside / total if total else 0.0


def sigmoid_ig_closed_form(weight, x):
    """Exact integrated gradient of sigmoid(weight * t) on [0, x]: sigmoid(weight x) - 1/2."""
    return 1.0 / (1.0 + np.exp(-weight * x)) - 0.5
