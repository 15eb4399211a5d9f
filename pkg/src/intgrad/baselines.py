"""Score back-propagation methods used as comparison points.

All four reuse the engine's reverse sweep with op-specific rules swapped in:

* DeepLift (rescale rule): secant slopes instead of derivatives.
* LRP-epsilon: relevance redistribution proportional to contributions.
* DeConvNet and guided back-propagation: modified ReLU backward passes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attribution import AttributionResult, Target, make_result, resolve_target, scaling_path
from .autodiff import Network, evaluate, vjp
from .autodiff.engine import output_seed
from .autodiff.ops import ELEMENTWISE_DERIVATIVES, OPS
from .errors import ShapeError

METHODS = ("deeplift-rescale", "lrp-epsilon", "deconvnet", "guided-backprop")
DEFAULT_EPSILON = 1e-2
# pre-activation deltas below this fall back to the local derivative
DELTA_TOL = 1e-12


@dataclass(frozen=True)
class BackpropRule:
    method: str
    epsilon: float | None = None
    reference: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "lrp-epsilon" and not (self.epsilon and self.epsilon > 0):
            raise ValueError("LRP needs epsilon > 0")


def _catalog_vjp(node, g, values):
    return OPS[node.op].vjp(g, [values[s] for s in node.inputs], values[node.name], **node.attrs)


def _sweep(net, x, target, rules, seed_scale=None):
    name = net.input_name
    values = evaluate(net, {name: x})
    node, seed = output_seed(net, values, target.output, target.index)
    if seed_scale is not None:
        seed = seed * seed_scale(values[node])
    cot = vjp(net, values, {node: seed}, rules)
    return cot.get(name, np.zeros_like(values[name])), values


# -- DeepLift ----------------------------------------------------------------


def deeplift_rescale(net: Network, input, reference=None, output=None, index=None) -> AttributionResult:
    """Multipliers from secant slopes, times the input's difference from ``reference``.

    Elementwise nonlinearities use ``(y - y_ref) / (x - x_ref)``, falling back to
    the local derivative where the pre-activation delta vanishes. Products use
    the Jacobian at the midpoint of the two operands, which splits
    ``ab - a'b'`` exactly. Softmax and max-pool fall back to their local
    gradient, so conservation is only guaranteed without them.
    """
    path = scaling_path(input, reference)
    x, ref = path.input, path.baseline
    target = resolve_target(net, x, output, index)
    ref_values = evaluate(net, {net.input_name: ref})

    def secant(node, g, values):
        (src,) = node.inputs
        dx = values[src] - ref_values[src]
        dy = values[node.name] - ref_values[node.name]
        local = ELEMENTWISE_DERIVATIVES[node.op](values[src], values[node.name])
        small = np.abs(dx) < DELTA_TOL
        slope = np.where(small, local, dy / np.where(small, 1.0, dx))
        return (g * slope,)

    def midpoint(node, g, values):
        mids = [(values[s] + ref_values[s]) / 2 for s in node.inputs]
        return OPS[node.op].vjp(g, mids, None, **node.attrs)

    rules = {op: secant for op in ELEMENTWISE_DERIVATIVES}
    rules.update({op: midpoint for op, d in OPS.items() if d.kind == "bilinear"})
    multipliers, _ = _sweep(net, x, target, rules)
    return make_result(net, path, multipliers * (x - ref), "deeplift-rescale", None, target)


# -- LRP ---------------------------------------------------------------------


def _stabilize(z, eps):
    return z + eps * np.where(z >= 0, 1.0, -1.0)


def lrp_epsilon(net: Network, input, epsilon=DEFAULT_EPSILON, output=None, index=None) -> AttributionResult:
    """Relevance propagation with the epsilon rule, starting from the explained score.

    Affine ops (dense, conv, add, pooling averages, ...) hand relevance to each
    variable operand in proportion to its contribution, ``x * J^T (R / (z + eps sign z))``;
    relevance reaching parameters or biases is absorbed. Elementwise
    activations and softmax pass relevance through, max-pool routes it to the
    winner, and a product of two variables splits it equally.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    path = scaling_path(input)
    x = path.input
    target = resolve_target(net, x, output, index)
    variable = _variable_nodes(net)

    def z_rule(node, r, values):
        s = r / _stabilize(values[node.name], epsilon)
        grads = _catalog_vjp(node, s, values)
        return tuple(
            values[src] * gs if gs is not None and src in variable else None for src, gs in zip(node.inputs, grads)
        )

    def passthrough(node, r, values):
        return (r,)

    def split(node, r, values):
        srcs = [s for s in node.inputs if s in variable]
        if node.op == "matmul" and len(srcs) == 1:
            return z_rule(node, r, values)
        share = r / max(len(srcs), 1)
        return tuple(share if s in variable else None for s in node.inputs)

    rules = {}
    for op, d in OPS.items():
        if d.kind == "linear":
            rules[op] = z_rule
        elif d.kind == "elementwise" or op == "softmax":
            rules[op] = passthrough
        elif d.kind == "bilinear":
            rules[op] = split
    relevance, _ = _sweep(net, x, target, rules, seed_scale=lambda out: out)
    return make_result(net, path, relevance, "lrp-epsilon", None, target)


def _variable_nodes(net):
    """Nodes whose value depends on a graph input."""
    variable = set()
    for node in net.nodes:
        if node.op == "input" or any(s in variable for s in node.inputs):
            variable.add(node.name)
    return variable


# -- modified ReLU backward passes --------------------------------------------


def _relu_backprop(net, input, relu_rule, output, index):
    x = np.asarray(input, dtype=np.float64)
    if x.shape != net.input_shape:
        raise ShapeError(f"input shape {x.shape} != network input {net.input_shape}")
    target = resolve_target(net, x, output, index)
    signal, _ = _sweep(net, x, target, {"relu": relu_rule})
    return signal


def deconvnet(net: Network, input, output=None, index=None) -> np.ndarray:
    """Backward signal where each ReLU rectifies the incoming signal and ignores the forward mask."""

    def rule(node, g, values):
        return (np.where(g > 0, g, 0.0),)

    return _relu_backprop(net, input, rule, output, index)


def guided_backprop(net: Network, input, output=None, index=None) -> np.ndarray:
    """Backward signal passed by a ReLU only where its input and the incoming signal are positive."""

    def rule(node, g, values):
        return (np.where((values[node.inputs[0]] > 0) & (g > 0), g, 0.0),)

    return _relu_backprop(net, input, rule, output, index)


def attribute(net: Network, input, rule: BackpropRule, output=None, index=None) -> np.ndarray:
    """Attribution values for ``rule.method`` as a plain array."""
    if rule.method == "deeplift-rescale":
        return deeplift_rescale(net, input, rule.reference, output, index).values
    if rule.method == "lrp-epsilon":
        return lrp_epsilon(net, input, rule.epsilon, output, index).values
    if rule.method == "deconvnet":
        return deconvnet(net, input, output, index)
    return guided_backprop(net, input, output, index)


__all__ = [
    "METHODS",
    "BackpropRule",
    "Target",
    "attribute",
    "deconvnet",
    "deeplift_rescale",
    "guided_backprop",
    "lrp_epsilon",
]
