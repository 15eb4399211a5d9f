"""Forward evaluation and reverse-mode differentiation over a ``Network``.

All functions are pure: activations live in per-call dictionaries, so one
network can be evaluated from many threads at once.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

from ..errors import DomainError, GraphError, ShapeError
from .graph import Network, Node
from .ops import OPS

# rule(node, g, values) -> tuple of cotangents, one per node input
Rule = Callable[[Node, np.ndarray, Mapping[str, np.ndarray]], tuple]


def _check_inputs(net: Network, inputs: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
    declared = net.input_shapes
    unknown = set(inputs) - set(declared)
    if unknown:
        raise GraphError(f"unknown input name(s): {sorted(unknown)}")
    checked = {}
    for name, shape in declared.items():
        if name not in inputs:
            raise GraphError(f"missing input {name!r}")
        value = np.asarray(inputs[name], dtype=np.float64)
        if value.shape != shape:
            raise ShapeError(f"input {name!r}: expected shape {shape}, got {value.shape}")
        if not np.all(np.isfinite(value)):
            raise DomainError(f"input {name!r} contains NaN or Inf")
        checked[name] = value
    return checked


def evaluate(net: Network, inputs, params=None) -> dict[str, np.ndarray]:
    """Value of every node. ``params`` overrides entries of the parameter store."""
    values = dict(_check_inputs(net, inputs))
    store = net.params if params is None else {**net.params, **params}
    for node in net.nodes:
        if node.op == "input":
            continue
        if node.op == "param":
            values[node.name] = np.asarray(store[node.name], dtype=np.float64)
            continue
        args = [values[s] for s in node.inputs]
        values[node.name] = np.asarray(OPS[node.op].forward(*args, **node.attrs), dtype=np.float64)
    return values


def forward(net: Network, inputs, outputs: Iterable[str] | None = None, params=None) -> dict[str, np.ndarray]:
    """Values of the requested outputs (aliases or node names); all declared outputs by default."""
    values = evaluate(net, inputs, params)
    names = list(net.outputs) if outputs is None else list(outputs)
    return {name: values[net.resolve(name)] for name in names}


def output_seed(net: Network, values, output: str, index: int | None):
    """One-hot cotangent selecting a scalar from ``output``."""
    node = net.resolve(output)
    out = values[node]
    if index is None:
        if out.size != 1:
            raise ShapeError(f"output {output!r} has shape {out.shape}; pick an element with index=")
        return node, np.ones_like(out)
    if not 0 <= int(index) < out.size:
        raise DomainError(f"index {index} out of range for output {output!r} of size {out.size}")
    seed = np.zeros(out.size)
    seed[int(index)] = 1.0
    return node, seed.reshape(out.shape)


def scalar_value(net: Network, values, output: str, index: int | None) -> float:
    node, seed = output_seed(net, values, output, index)
    return float(np.sum(values[node] * seed))


def vjp(net: Network, values, seeds: Mapping[str, np.ndarray], rules: Mapping[str, Rule] | None = None):
    """Reverse sweep from ``seeds`` (node name -> cotangent); returns cotangents of all reached nodes.

    ``rules`` replaces the catalog vector-Jacobian product for the named op kinds,
    which is how the rival back-propagation methods are expressed.
    """
    rules = rules or {}
    cot: dict[str, np.ndarray] = {}
    for name, g in seeds.items():
        cot[name] = cot.get(name, 0.0) + np.asarray(g, dtype=np.float64)
    last = max((net.index[n] for n in seeds), default=-1)
    for node in reversed(net.nodes[: last + 1]):
        if node.op in ("input", "param") or node.name not in cot:
            continue
        g = cot[node.name]
        if node.op in rules:
            grads = rules[node.op](node, g, values)
        else:
            grads = OPS[node.op].vjp(g, [values[s] for s in node.inputs], values[node.name], **node.attrs)
        for src, gs in zip(node.inputs, grads):
            if gs is None:
                continue
            cot[src] = cot[src] + gs if src in cot else np.array(gs, dtype=np.float64)
    return cot


def backward(
    net: Network,
    inputs,
    output: str | None = None,
    index: int | None = None,
    wrt: Iterable[str] | None = None,
    rules: Mapping[str, Rule] | None = None,
    params=None,
) -> dict[str, np.ndarray]:
    """Gradient of one scalar output with respect to inputs (default) or named parameters.

    ``output`` defaults to ``net.target``; vector outputs need ``index``.
    Inputs the output does not depend on get an all-zero gradient.
    """
    values = evaluate(net, inputs, params)
    node, seed = output_seed(net, values, output or net.target, index)
    cot = vjp(net, values, {node: seed}, rules)
    names = list(net.input_shapes) if wrt is None else list(wrt)
    grads = {}
    for name in names:
        if name not in net.index or net.node(name).op not in ("input", "param"):
            raise GraphError(f"cannot differentiate with respect to {name!r}")
        grads[name] = cot.get(name, np.zeros_like(values[name]))
        if grads[name].shape != values[name].shape:
            grads[name] = np.broadcast_to(grads[name], values[name].shape).copy()
    return grads


def finite_difference_gradient(
    net: Network,
    inputs,
    output: str | None = None,
    index: int | None = None,
    h: float = 1e-5,
    wrt: Iterable[str] | None = None,
) -> dict[str, np.ndarray]:
    """Central differences ``(F(x + h e_i) - F(x - h e_i)) / 2h`` per coordinate."""
    if not h > 0:
        raise ValueError("finite-difference step h must be positive")
    output = output or net.target
    base = {k: np.asarray(v, dtype=np.float64) for k, v in inputs.items()}
    names = list(net.input_shapes) if wrt is None else list(wrt)

    def f(inp, prm):
        return scalar_value(net, evaluate(net, inp, prm), output, index)

    grads = {}
    for name in names:
        is_param = net.node(name).op == "param"
        x0 = np.array(net.params[name] if is_param else base[name], dtype=np.float64)
        g = np.zeros(x0.size)
        flat = x0.reshape(-1)
        for i in range(flat.size):
            vals = []
            for step in (h, -h):
                xi = flat.copy()
                xi[i] += step
                xi = xi.reshape(x0.shape)
                if is_param:
                    vals.append(f(base, {name: xi}))
                else:
                    vals.append(f({**base, name: xi}, None))
            g[i] = (vals[0] - vals[1]) / (2 * h)
        grads[name] = g.reshape(x0.shape)
    return grads
