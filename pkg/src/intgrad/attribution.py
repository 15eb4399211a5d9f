"""Counterfactual scaling paths, interior gradients, and integrated gradients."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Network, backward, forward
from .errors import ShapeError

# panel values of the usual interior-gradient visualisation
DEFAULT_ALPHAS = (0.02, 0.04, 0.06, 0.08, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)
RIEMANN_RULES = ("right", "left", "midpoint")


@dataclass(frozen=True)
class PathSpec:
    """Straight line from ``baseline`` (alpha = 0) to ``input`` (alpha = 1).

    ``gamma`` may be replaced by any callable ``alpha -> point`` with the same
    endpoints; only the straight line is shipped.
    """

    baseline: np.ndarray
    input: np.ndarray
    gamma: Callable[[float], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.baseline.shape != self.input.shape:
            raise ShapeError(f"baseline shape {self.baseline.shape} != input shape {self.input.shape}")

    def __call__(self, alpha: float) -> np.ndarray:
        if self.gamma is not None:
            return np.asarray(self.gamma(alpha), dtype=np.float64)
        # (1 - a) b + a x hits both endpoints exactly in floating point
        alpha = float(alpha)
        return (1.0 - alpha) * self.baseline + alpha * self.input


def scaling_path(input, baseline=None) -> PathSpec:
    """Path of counterfactuals ``alpha * input`` (or from ``baseline`` when given)."""
    x = np.asarray(input, dtype=np.float64)
    b = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=np.float64)
    return PathSpec(b, x)


@dataclass(frozen=True)
class Target:
    """Which scalar of the network is explained: ``output[index]``."""

    output: str
    index: int | None = None


def resolve_target(net: Network, x, output=None, index=None) -> Target:
    """Default to the network's target output and, for vectors, its top class at ``x``."""
    output = output or net.target
    if index is None:
        value = forward(net, {net.input_name: x}, outputs=[output])[output]
        if value.size != 1:
            index = int(np.argmax(value))
    return Target(output, index)


def predict_scalar(net: Network, x, target: Target) -> float:
    value = forward(net, {net.input_name: x}, outputs=[target.output])[target.output]
    return float(value.reshape(-1)[target.index or 0])


def gradient(net: Network, x, target: Target) -> np.ndarray:
    name = net.input_name
    return backward(net, {name: x}, output=target.output, index=target.index)[name]


@dataclass(frozen=True)
class InteriorGradients:
    alphas: tuple[float, ...]
    gradients: tuple[np.ndarray, ...]
    target: Target


def _check_alphas(alphas):
    alphas = tuple(float(a) for a in alphas)
    if not alphas:
        raise ValueError("need at least one alpha")
    if any(not 0.0 <= a <= 1.0 for a in alphas):
        raise ValueError(f"alphas must lie in [0, 1], got {alphas}")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise ValueError("alphas must be strictly increasing")
    return alphas


def _map(fn, items, workers):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def interior_gradients(net: Network, path: PathSpec, alphas=DEFAULT_ALPHAS, output=None, index=None, workers=None):
    """Gradients of the explained score at each counterfactual ``path(alpha)``.

    The target class is fixed at the actual input (alpha = 1). With
    ``workers`` > 1 the gradients are computed on a thread pool; results keep
    alpha order either way.
    """
    alphas = _check_alphas(alphas)
    target = resolve_target(net, path.input, output, index)
    grads = _map(lambda a: gradient(net, path(a), target), alphas, workers)
    return InteriorGradients(alphas, tuple(grads), target)


@dataclass(frozen=True)
class AttributionResult:
    """Per-coordinate attributions plus the bookkeeping needed to sanity-check them.

    ``gap`` is the signed residual ``sum(values) - (f_input - f_baseline)``.
    """

    values: np.ndarray
    method: str
    steps: int | None
    gap: float
    f_input: float
    f_baseline: float
    target: Target

    @property
    def total(self) -> float:
        return float(np.sum(self.values))

    @property
    def relative_gap(self) -> float:
        delta = self.f_input - self.f_baseline
        return abs(self.gap) / abs(delta) if delta else float("inf") if self.gap else 0.0


def make_result(net, path, values, method, steps, target) -> AttributionResult:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != path.input.shape:
        raise ShapeError(f"attribution shape {values.shape} != input shape {path.input.shape}")
    f_x = predict_scalar(net, path.input, target)
    f_b = predict_scalar(net, path.baseline, target)
    gap = float(np.sum(values)) - (f_x - f_b)
    return AttributionResult(values, method, steps, gap, f_x, f_b, target)


def integrated_gradients(
    net: Network, path: PathSpec, steps=50, output=None, index=None, rule="right", workers=None
) -> AttributionResult:
    """Riemann approximation of the path integral of gradients.

    The default right-endpoint rule computes, per coordinate,
    ``sum_{k=1..m} grad F(path(k/m)) * (path(k/m) - path((k-1)/m))``.
    ``rule="left"`` and ``rule="midpoint"`` evaluate the gradient at the left
    end or the middle of each step instead.
    """
    m = int(steps)
    if m < 1 or m != steps:
        raise ValueError(f"steps must be a positive integer, got {steps}")
    if rule not in RIEMANN_RULES:
        raise ValueError(f"unknown Riemann rule {rule!r}")
    target = resolve_target(net, path.input, output, index)
    offset = {"right": 0.0, "left": 1.0, "midpoint": 0.5}[rule]

    def term(k):
        g = gradient(net, path((k - offset) / m), target)
        return g * (path(k / m) - path((k - 1) / m))

    total = np.zeros_like(path.input)
    for t in _map(term, range(1, m + 1), workers):
        total += t
    return make_result(net, path, total, "integrated_gradients", m, target)


def completeness_gap(result: AttributionResult, net: Network, path: PathSpec) -> float:
    """``|sum(attributions) - (F(path(1)) - F(path(0)))|``, recomputed from the network."""
    f_x = predict_scalar(net, path(1.0), result.target)
    f_b = predict_scalar(net, path(0.0), result.target)
    return abs(float(np.sum(result.values)) - (f_x - f_b))


def gradient_attribution(net: Network, path: PathSpec, output=None, index=None) -> AttributionResult:
    """The plain gradient at the input, reported in the same container."""
    target = resolve_target(net, path.input, output, index)
    return make_result(net, path, gradient(net, path.input, target), "gradient", None, target)


def pixel_importance(grad) -> np.ndarray:
    """Per-pixel sum of absolute values over the channel (last) axis of an (H, W, C) tensor."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.ndim != 3:
        raise ShapeError(f"pixel importance needs an (H, W, C) tensor, got shape {grad.shape}")
    return np.abs(grad).sum(axis=-1)


def importance_map(values) -> np.ndarray:
    """Pixel importance for images; elementwise magnitude for other shapes."""
    values = np.asarray(values, dtype=np.float64)
    return pixel_importance(values) if values.ndim == 3 else np.abs(values)


def importance_trend(ig: InteriorGradients):
    """Mean importance per alpha: how much the network reacts at each scale."""
    from .evaluation import CurveSeries

    return CurveSeries(list(ig.alphas), [float(importance_map(g).mean()) for g in ig.gradients], "importance")
