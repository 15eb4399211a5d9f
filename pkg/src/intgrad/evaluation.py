"""Measurement protocols: saturation sweeps, pixel ablation (AOPC), localization, convergence."""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .attribution import (
    PathSpec,
    Target,
    gradient,
    importance_map,
    integrated_gradients,
    pixel_importance,
    predict_scalar,
    resolve_target,
    scaling_path,
    _check_alphas,
)
from .autodiff import Network, evaluate
from .baselines import deconvnet, deeplift_rescale, guided_backprop, lrp_epsilon, DEFAULT_EPSILON
from .errors import GraphError, ShapeError
from .models.datasets import BoundingBox, object_patches
from .models.zoo import EquivalentPair


@dataclass(frozen=True)
class CurveSeries:
    x: tuple[float, ...]
    y: tuple[float, ...]
    label: str

    def __init__(self, x, y, label):
        x = tuple(float(v) for v in x)
        y = tuple(float(v) for v in y)
        if len(x) != len(y):
            raise ValueError(f"curve {label!r}: {len(x)} x values but {len(y)} y values")
        if any(b <= a for a, b in zip(x, x[1:])):
            raise ValueError(f"curve {label!r}: x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "label", str(label))

    def rows(self):
        return [(a, b, self.label) for a, b in zip(self.x, self.y)]


def curves_to_csv(curves) -> str:
    """CSV with header ``x,y,label``; floats use shortest round-trip repr, so output is byte-stable."""
    buf = io.StringIO()
    buf.write("x,y,label\n")
    for curve in curves:
        for a, b, label in curve.rows():
            buf.write(f"{a!r},{b!r},{label}\n")
    return buf.getvalue()


def write_curves(curves, path) -> None:
    Path(path).write_text(curves_to_csv(curves), encoding="utf-8")


# -- saturation --------------------------------------------------------------


def saturation_sweep(net: Network, input, alphas, tap="output", output=None, index=None) -> CurveSeries:
    """Score of the top class (fixed at alpha = 1) along ``alpha * input``.

    ``tap="pre-softmax"`` reads the ``logits`` output at the same class instead.
    """
    alphas = _check_alphas(alphas)
    path = scaling_path(input)
    target = resolve_target(net, path.input, output, index)
    if tap == "pre-softmax":
        if "logits" not in net.outputs:
            raise GraphError("network exposes no 'logits' output for the pre-softmax tap")
        target = Target("logits", target.index)
    elif tap != "output":
        raise ValueError(f"unknown tap {tap!r}; use 'output' or 'pre-softmax'")
    ys = [predict_scalar(net, path(a), target) for a in alphas]
    return CurveSeries(alphas, ys, f"saturation:{tap}")


def intermediate_saturation(net: Network, input, layer, alphas):
    """L2 and cosine distance between a layer's activations at ``alpha * input`` and at ``input``.

    Cosine distance is ``1 - cos``; it is 0 when both vectors are zero and 1
    when exactly one of them is.
    """
    alphas = _check_alphas(alphas)
    node = net.resolve(layer)
    path = scaling_path(input)
    name = net.input_name
    ref = evaluate(net, {name: path.input})[node].reshape(-1)
    l2, cos = [], []
    for a in alphas:
        act = evaluate(net, {name: path(a)})[node].reshape(-1)
        l2.append(float(np.linalg.norm(act - ref)))
        na, nr = np.linalg.norm(act), np.linalg.norm(ref)
        if np.array_equal(act, ref):
            cos.append(0.0)
        elif na == 0 or nr == 0:
            cos.append(0.0 if na == nr else 1.0)
        else:
            cos.append(float(1.0 - np.dot(act, ref) / (na * nr)))
    return CurveSeries(alphas, l2, f"l2:{layer}"), CurveSeries(alphas, cos, f"cosine:{layer}")


def flat_tail(curve: CurveSeries, fraction=0.05) -> bool:
    """True when the slope over the last interval is below ``fraction`` of the steepest slope."""
    x, y = np.asarray(curve.x), np.asarray(curve.y)
    slopes = np.abs(np.diff(y) / np.diff(x))
    return bool(slopes.size and slopes[-1] < fraction * slopes.max())


# -- pixel ablation ----------------------------------------------------------


def ablation_order(importance) -> np.ndarray:
    """Flat pixel indices by descending importance; ties go to the lower row-major index."""
    imp = np.asarray(importance, dtype=np.float64).reshape(-1)
    return np.argsort(-imp, kind="stable")


def aopc(net: Network, image, importance, steps=16, pixels_per_step=4, output=None, index=None) -> CurveSeries:
    """Area over the perturbation curve for one image.

    Pixels are ranked once by ``importance`` and zeroed (all channels)
    ``pixels_per_step`` at a time, cumulatively. Point ``k`` is the mean
    score drop over steps ``1..k`` for the class that is top on the original.
    """
    image = np.asarray(image, dtype=np.float64)
    importance = np.asarray(importance, dtype=np.float64)
    if image.ndim != 3 or importance.shape != image.shape[:2]:
        raise ShapeError(f"need an (H, W, C) image and an (H, W) map, got {image.shape} and {importance.shape}")
    h, w = importance.shape
    if steps < 1 or pixels_per_step < 1 or steps * pixels_per_step > h * w:
        raise ValueError(f"{steps} steps of {pixels_per_step} pixels exceed the {h * w} pixels available")
    target = resolve_target(net, image, output, index)
    base = predict_scalar(net, image, target)
    order = ablation_order(importance)
    ablated = image.copy()
    drops = []
    for k in range(steps):
        rows, cols = np.unravel_index(order[k * pixels_per_step : (k + 1) * pixels_per_step], (h, w))
        ablated[rows, cols, :] = 0.0
        drops.append(base - predict_scalar(net, ablated, target))
    curve = np.cumsum(drops) / np.arange(1, steps + 1)
    return CurveSeries(range(1, steps + 1), curve, "aopc")


def mean_curve(curves, label) -> CurveSeries:
    ys = np.mean([c.y for c in curves], axis=0)
    return CurveSeries(curves[0].x, ys, label)


# -- localization ------------------------------------------------------------


def box_mask(shape, boxes) -> np.ndarray:
    h, w = shape
    mask = np.zeros((h, w), dtype=bool)
    for box in boxes:
        box.validate(h, w)
        mask[box.y0 : box.y1, box.x0 : box.x1] = True
    return mask


def localization_score(importance, boxes) -> float:
    """Fraction of total importance that falls inside the union of ``boxes`` (0 for an all-zero map)."""
    importance = np.asarray(importance, dtype=np.float64)
    if importance.ndim != 2:
        raise ShapeError(f"importance map must be 2-D, got {importance.shape}")
    if np.any(importance < 0):
        raise ValueError("importance map entries must be nonnegative")
    total = importance.sum()
    if total == 0:
        return 0.0
    return float(importance[box_mask(importance.shape, boxes)].sum() / total)


def eligible_patch_corpus(net: Network, n, seed=0, min_drop=0.5, max_box_fraction=2 / 3, **patch_kwargs):
    """Generated object-patch images that pass both eligibility filters.

    Kept images have boxes covering less than ``max_box_fraction`` of the image,
    and zeroing the box lowers the score of the object's class by at least
    ``min_drop`` of its original value. Candidates are drawn in seeded batches
    until ``n`` images qualify.
    """
    corpus = []
    batch = 0
    while len(corpus) < n:
        images, labels, boxes = object_patches(max(2 * n, 32), seed=seed + 7919 * batch, **patch_kwargs)
        batch += 1
        for image, label, box in zip(images, labels, boxes):
            h, w = image.shape[:2]
            if box.area >= max_box_fraction * h * w:
                continue
            target = Target(net.target, int(label))
            score = predict_scalar(net, image, target)
            ablated = image.copy()
            ablated[box_mask((h, w), [box])] = 0.0
            if score - predict_scalar(net, ablated, target) < min_drop * score:
                continue
            corpus.append((image, int(label), box))
            if len(corpus) == n:
                break
        if batch > 50:
            raise RuntimeError(f"only {len(corpus)} of {n} images passed the eligibility filters")
    return corpus


@dataclass(frozen=True)
class MethodComparison:
    """Per-image scores of integrated gradients against the gradient at the input."""

    ig: tuple[float, ...]
    grad: tuple[float, ...]

    @property
    def wins(self) -> int:
        return sum(a > b for a, b in zip(self.ig, self.grad))

    @property
    def mean_difference(self) -> float:
        return float(np.mean(np.subtract(self.ig, self.grad)))


def _ig_and_grad_maps(net, image, target, steps):
    ig = integrated_gradients(net, scaling_path(image), steps, target.output, target.index)
    return pixel_importance(ig.values), pixel_importance(gradient(net, image, target))


def compare_localization(net: Network, corpus, steps=50) -> MethodComparison:
    """In-box attribution fraction for each image of an eligible corpus, IG versus gradient."""
    ig_scores, grad_scores = [], []
    for image, label, box in corpus:
        ig_map, grad_map = _ig_and_grad_maps(net, image, Target(net.target, label), steps)
        ig_scores.append(localization_score(ig_map, [box]))
        grad_scores.append(localization_score(grad_map, [box]))
    return MethodComparison(tuple(ig_scores), tuple(grad_scores))


def compare_aopc(net: Network, images, steps=50, ablation_steps=16, pixels_per_step=4):
    """Mean AOPC curves over ``images`` for IG and gradient pixel rankings (top class of each image)."""
    ig_curves, grad_curves = [], []
    for image in images:
        target = resolve_target(net, image)
        ig_map, grad_map = _ig_and_grad_maps(net, image, target, steps)
        kw = dict(steps=ablation_steps, pixels_per_step=pixels_per_step, output=target.output, index=target.index)
        ig_curves.append(aopc(net, image, ig_map, **kw))
        grad_curves.append(aopc(net, image, grad_map, **kw))
    return mean_curve(ig_curves, "integrated_gradients"), mean_curve(grad_curves, "gradient")


# -- convergence -------------------------------------------------------------


def riemann_convergence(net: Network, path: PathSpec, steps_list, output=None, index=None, rule="right"):
    """Completeness gap of integrated gradients for each step count."""
    steps_list = [int(m) for m in steps_list]
    gaps = [abs(integrated_gradients(net, path, m, output, index, rule).gap) for m in steps_list]
    return CurveSeries(steps_list, gaps, f"completeness_gap:{rule}")


# -- implementation invariance -----------------------------------------------


@dataclass(frozen=True)
class PairRow:
    method: str
    values_a: np.ndarray
    values_b: np.ndarray
    tolerance: float

    @property
    def max_difference(self) -> float:
        return float(np.max(np.abs(self.values_a - self.values_b)))

    @property
    def differs(self) -> bool:
        return self.max_difference > self.tolerance


def compare_pair(pair: EquivalentPair, input, steps=1000, epsilon=DEFAULT_EPSILON, reference=None, threshold=1e-3):
    """Attributions of every method on both networks of ``pair``.

    Integrated gradients count as matching when they agree within ten times
    the larger completeness gap; the other methods are flagged as differing
    when some coordinate changes by more than ``threshold``.
    """
    x = np.asarray(input, dtype=np.float64)
    path = scaling_path(x)
    ig_a = integrated_gradients(pair.net_a, path, steps)
    ig_b = integrated_gradients(pair.net_b, path, steps)
    rows = [PairRow("integrated_gradients", ig_a.values, ig_b.values, 10 * max(abs(ig_a.gap), abs(ig_b.gap)))]
    methods = {
        "deeplift-rescale": lambda n: deeplift_rescale(n, x, reference).values,
        "lrp-epsilon": lambda n: lrp_epsilon(n, x, epsilon).values,
        "deconvnet": lambda n: deconvnet(n, x),
        "guided-backprop": lambda n: guided_backprop(n, x),
    }
    for name, fn in methods.items():
        rows.append(PairRow(name, fn(pair.net_a), fn(pair.net_b), threshold))
    return rows


def format_pair_report(rows) -> str:
    lines = [f"{'method':<22} {'netA':<28} {'netB':<28} {'max |diff|':>12}  verdict"]
    for row in rows:
        a = " ".join(f"{v:+.6f}" for v in row.values_a.reshape(-1))
        b = " ".join(f"{v:+.6f}" for v in row.values_b.reshape(-1))
        verdict = "DIFFERS" if row.differs else "matches"
        lines.append(f"{row.method:<22} {a:<28} {b:<28} {row.max_difference:>12.3e}  {verdict}")
    return "\n".join(lines) + "\n"


__all__ = [
    "BoundingBox",
    "CurveSeries",
    "MethodComparison",
    "PairRow",
    "ablation_order",
    "aopc",
    "compare_aopc",
    "compare_localization",
    "compare_pair",
    "curves_to_csv",
    "eligible_patch_corpus",
    "flat_tail",
    "format_pair_report",
    "importance_map",
    "intermediate_saturation",
    "localization_score",
    "riemann_convergence",
    "saturation_sweep",
    "write_curves",
]
