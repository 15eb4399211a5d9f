"""Command-line interface: ``intgrad {attribute,interior,evaluate,train}``.

Exit codes: 0 success, 2 usage error, 3 bad or unreadable data, 4 training diverged.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import evaluation as ev
from .attribution import (
    DEFAULT_ALPHAS,
    Target,
    gradient,
    importance_map,
    importance_trend,
    integrated_gradients,
    interior_gradients,
    make_result,
    resolve_target,
    scaling_path,
)
from .baselines import DEFAULT_EPSILON, deconvnet, deeplift_rescale, guided_backprop, lrp_epsilon
from .errors import IntgradError, TrainingDivergedError
from .imageio import load_input, read_boxes, save_heatmap
from .models import (
    accuracy,
    blobs,
    build_convnet,
    build_lstm_lm,
    build_mlp,
    equivalent_pair,
    load_model,
    object_patches,
    one_hot_sequence,
    save_model,
    token_repetition,
    train_toy,
)

logger = logging.getLogger("intgrad")

EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_DIVERGED = 4

METHOD_CHOICES = ("grad", "ig", "deeplift", "lrp", "deconvnet", "guided")
DATASETS = ("blobs", "patches", "tokens")
TOKEN_VOCAB, TOKEN_EMBED, TOKEN_HIDDEN = 8, 6, 12


class UsageError(Exception):
    pass


# -- argument types --------------------------------------------------------------


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _alpha_list(text):
    try:
        alphas = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not alphas or any(not 0.0 <= a <= 1.0 for a in alphas):
        raise argparse.ArgumentTypeError("alphas must be a non-empty list of values in [0, 1]")
    if any(b <= a for a, b in zip(alphas, alphas[1:])):
        raise argparse.ArgumentTypeError("alphas must be strictly increasing")
    return alphas


def _int_list(text):
    try:
        values = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values) or any(b <= a for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError("expected a strictly increasing list of positive integers")
    return values


def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {value}")
    return value


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intgrad", description="Integrated gradients and friends for toy networks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, method=True):
        p.add_argument("--model", required=True, help="model file")
        p.add_argument("--input", required=True, help="PGM/PPM image or feature CSV")
        p.add_argument("--baseline", help="baseline in the same format as --input (default: all zeros)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--output", dest="output_name", help="network output to explain (default: model target)")
        p.add_argument("--index", type=int, help="class index (default: top class at the input)")
        if method:
            p.add_argument("--method", choices=METHOD_CHOICES, default="ig")
            p.add_argument("--steps", type=_positive_int, default=50, help="Riemann steps for ig")
            p.add_argument("--epsilon", type=_positive_float, default=DEFAULT_EPSILON, help="LRP stabilizer")
            p.add_argument("--reference", help="DeepLift reference input (default: the baseline)")

    p = sub.add_parser("attribute", help="attributions CSV, heatmap, and summary for one input")
    common(p)

    p = sub.add_parser("interior", help="one heatmap per alpha plus the importance trend")
    common(p, method=False)
    p.add_argument("--alphas", type=_alpha_list, default=list(DEFAULT_ALPHAS))

    p = sub.add_parser("evaluate", help="saturation, AOPC, localization, convergence, pair comparison")
    p.add_argument("protocol", choices=("saturate", "aopc", "localize", "converge", "compare"))
    p.add_argument("--model", help="model file (not used by compare)")
    p.add_argument("--input", help="input file; aopc and localize generate a corpus when omitted")
    p.add_argument("--baseline")
    p.add_argument("--boxes", help="bounding-box sidecar for localize with --input")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=_positive_int, default=50, help="Riemann steps for ig")
    p.add_argument("--alphas", type=_alpha_list, default=list(DEFAULT_ALPHAS))
    p.add_argument("--tap", choices=("output", "pre-softmax"), default="output")
    p.add_argument("--layer", help="saturate: also report L2/cosine distances at this node")
    p.add_argument("--ms", type=_int_list, default=[20, 50, 100, 200, 400], help="converge: step counts")
    p.add_argument("--count", type=_positive_int, default=50, help="generated corpus size")
    p.add_argument("--ablation-steps", type=_positive_int, default=16)
    p.add_argument("--pixels-per-step", type=_positive_int, default=4)
    p.add_argument("--point", default="1,2", help="compare: input point")
    p.add_argument("--epsilon", type=_positive_float, default=DEFAULT_EPSILON)
    p.add_argument("--reference", help="compare: DeepLift reference point (default: origin)")

    p = sub.add_parser("train", help="train a toy model on a synthetic dataset")
    p.add_argument("--dataset", required=True, choices=DATASETS)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=_positive_int, default=10)
    p.add_argument("--lr", type=_positive_float, default=0.5)
    p.add_argument("--samples", type=_positive_int, default=400)
    return parser


# -- helpers -------------------------------------------------------------------


def _out_dir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fit(net, array, what):
    shape = net.input_shape
    if array.shape == shape:
        return array
    if array.size == int(np.prod(shape)):
        return array.reshape(shape)
    raise IntgradError(f"{what} has shape {array.shape}, the model expects {shape}")


def _load_point(net, path, what):
    names, array = load_input(path)
    array = _fit(net, array, what)
    if names is None:
        names = [f"r{i}c{j}ch{k}" for i, j, k in np.ndindex(*array.shape)] if array.ndim == 3 else None
    if names is None or len(names) != array.size:
        names = [f"f{i}" for i in range(array.size)]
    return names, array


def _load_path(args, net):
    names, x = _load_point(net, args.input, "input")
    baseline = _load_point(net, args.baseline, "baseline")[1] if args.baseline else None
    return names, scaling_path(x, baseline)


def _fmt(value) -> str:
    return repr(float(value))


def _attribution(net, path, args, target):
    x, b = path.input, path.baseline
    if args.method == "ig":
        return integrated_gradients(net, path, args.steps, target.output, target.index)
    if args.method == "deeplift":
        ref = _load_point(net, args.reference, "reference")[1] if args.reference else b
        return deeplift_rescale(net, x, ref, target.output, target.index)
    if args.method == "lrp":
        return lrp_epsilon(net, x, args.epsilon, target.output, target.index)
    fn = {"grad": gradient, "deconvnet": deconvnet, "guided": guided_backprop}[args.method]
    values = fn(net, x, target) if args.method == "grad" else fn(net, x, target.output, target.index)
    return make_result(net, path, values, args.method, None, target)


# -- commands ------------------------------------------------------------------


def cmd_attribute(args) -> int:
    net = load_model(args.model)
    names, path = _load_path(args, net)
    target = resolve_target(net, path.input, args.output_name, args.index)
    result = _attribution(net, path, args, target)
    out = _out_dir(args.out)
    lines = ["feature,input,baseline,attribution"]
    for name, xi, bi, ai in zip(names, path.input.reshape(-1), path.baseline.reshape(-1), result.values.reshape(-1)):
        lines.append(f"{name},{_fmt(xi)},{_fmt(bi)},{_fmt(ai)}")
    (out / "attributions.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    save_heatmap(importance_map(result.values), out / "heatmap.pgm")
    summary = [
        f"method: {args.method}",
        f"steps: {result.steps if result.steps is not None else '-'}",
        f"target: {target.output}" + ("" if target.index is None else f"[{target.index}]"),
        f"F(x): {_fmt(result.f_input)}",
        f"F(baseline): {_fmt(result.f_baseline)}",
        f"total attribution: {_fmt(result.total)}",
        f"completeness gap: {_fmt(abs(result.gap))}",
    ]
    (out / "summary.txt").write_text("\n".join(summary) + "\n", encoding="utf-8")
    print("\n".join(summary))
    return 0


def alpha_label(alpha) -> str:
    return f"{alpha:.4f}".rstrip("0").rstrip(".") if alpha else "0"


def cmd_interior(args) -> int:
    net = load_model(args.model)
    _, path = _load_path(args, net)
    ig = interior_gradients(net, path, args.alphas, args.output_name, args.index)
    out = _out_dir(args.out)
    for alpha, grad in zip(ig.alphas, ig.gradients):
        save_heatmap(importance_map(grad), out / f"interior_alpha{alpha_label(alpha)}.pgm")
    ev.write_curves([importance_trend(ig)], out / "trend.csv")
    print(f"wrote {len(ig.alphas)} heatmaps and trend.csv to {out}")
    return 0


def _generated_images(net, args):
    shape = net.input_shape
    if len(shape) != 3:
        raise IntgradError("a generated corpus needs an image model; pass --input instead")
    images, labels, boxes = object_patches(args.count, seed=args.seed, size=shape[0])
    return images, labels, boxes


def cmd_evaluate(args) -> int:
    out = _out_dir(args.out)
    protocol = args.protocol
    if protocol == "compare":
        return _evaluate_compare(args, out)
    if not args.model:
        raise UsageError(f"evaluate {protocol} needs --model")
    net = load_model(args.model)
    if protocol in ("saturate", "converge") and not args.input:
        raise UsageError(f"evaluate {protocol} needs --input")

    if protocol == "saturate":
        _, path = _load_path(args, net)
        curves = [ev.saturation_sweep(net, path.input, args.alphas, args.tap)]
        if args.layer:
            curves += ev.intermediate_saturation(net, path.input, args.layer, args.alphas)
        ev.write_curves(curves, out / "saturation.csv")
        flat = ev.flat_tail(curves[0])
        print(f"saturation: {len(args.alphas)} points, flat tail: {'yes' if flat else 'no'}")
    elif protocol == "converge":
        _, path = _load_path(args, net)
        curve = ev.riemann_convergence(net, path, args.ms)
        ev.write_curves([curve], out / "convergence.csv")
        for m, gap in zip(curve.x, curve.y):
            print(f"m={int(m)} gap={gap:.6e}")
    elif protocol == "aopc":
        if args.input:
            images = [_load_point(net, args.input, "input")[1]]
        else:
            images = list(_generated_images(net, args)[0])
        ig, grad = ev.compare_aopc(net, images, args.steps, args.ablation_steps, args.pixels_per_step)
        ev.write_curves([ig, grad], out / "aopc.csv")
        print(f"final-step AOPC over {len(images)} images: ig {ig.y[-1]:.6f}, grad {grad.y[-1]:.6f}")
    else:
        _evaluate_localize(args, net, out)
    return 0


def _evaluate_localize(args, net, out):
    if args.input:
        if not args.boxes:
            raise UsageError("evaluate localize with --input needs --boxes")
        x = _load_point(net, args.input, "input")[1]
        target = resolve_target(net, x)
        corpus = [(x, target.index or 0, read_boxes(args.boxes))]
    else:
        corpus = [(img, label, [box]) for img, label, box in ev.eligible_patch_corpus(net, args.count, args.seed)]
    rows = ["image,ig,grad"]
    wins = 0
    for i, (image, label, boxes) in enumerate(corpus):
        target = Target(net.target, label)
        ig_map = importance_map(integrated_gradients(net, scaling_path(image), args.steps, target.output, target.index).values)
        grad_map = importance_map(gradient(net, image, target))
        a, b = ev.localization_score(ig_map, boxes), ev.localization_score(grad_map, boxes)
        wins += a > b
        rows.append(f"{i},{_fmt(a)},{_fmt(b)}")
    (out / "localization.csv").write_text("\n".join(rows) + "\n", encoding="utf-8")
    print(f"ig beats grad on {wins} of {len(corpus)} images")


def _evaluate_compare(args, out):
    pair = equivalent_pair()
    try:
        point = np.array([float(t) for t in args.point.split(",")])
        reference = None if args.reference is None else np.array([float(t) for t in args.reference.split(",")])
    except ValueError:
        raise UsageError("--point and --reference take comma-separated numbers") from None
    if point.shape != pair.net_a.input_shape or (reference is not None and reference.shape != point.shape):
        raise UsageError(f"the pair takes {pair.net_a.input_shape[0]} coordinates")
    rows = ev.compare_pair(pair, point, steps=args.steps, epsilon=args.epsilon, reference=reference)
    report = f"input: {', '.join(_fmt(v) for v in point)}\n{pair.domain_note}\n\n" + ev.format_pair_report(rows)
    (out / "compare.txt").write_text(report, encoding="utf-8")
    print(report, end="")
    return 0


def _train_data(dataset, n, seed):
    if dataset == "blobs":
        X, y = blobs(n, seed=seed)
        return build_mlp([2, 8, 2], seed=seed), X, y
    if dataset == "patches":
        X, y, _ = object_patches(n, seed=seed)
        return build_convnet(seed=seed), X, y
    tokens, y = token_repetition(n, seed=seed, vocab_size=TOKEN_VOCAB)
    X = np.stack([one_hot_sequence(t, TOKEN_VOCAB) for t in tokens])
    return build_lstm_lm(TOKEN_VOCAB, TOKEN_EMBED, TOKEN_HIDDEN, seq_len=tokens.shape[1], seed=seed), X, y


def cmd_train(args) -> int:
    net, X, y = _train_data(args.dataset, args.samples, args.seed)
    split = int(0.75 * len(X))
    trained = train_toy(net, X[:split], y[:split], epochs=args.epochs, lr=args.lr, seed=args.seed)
    save_model(trained, args.out)
    print(f"accuracy: {accuracy(trained, X[split:], y[split:]):.4f} (held out {len(X) - split} samples)")
    return 0


COMMANDS = {"attribute": cmd_attribute, "interior": cmd_interior, "evaluate": cmd_evaluate, "train": cmd_train}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"intgrad: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingDivergedError as exc:
        print(f"intgrad: training diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (IntgradError, OSError, ValueError) as exc:
        print(f"intgrad: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
