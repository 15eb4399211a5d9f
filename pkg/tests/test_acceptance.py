"""Acceptance checks, one test per criterion; each prints a single PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v -s`` to see the lines, or execute
this file directly.
"""

from __future__ import annotations

import filecmp
import sys
import tempfile
import time
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from intgrad.attribution import gradient, integrated_gradients, resolve_target, scaling_path
from intgrad.cli import main as cli_main
from intgrad.evaluation import aopc, compare_aopc, compare_localization, compare_pair, eligible_patch_corpus
from intgrad.imageio import encode_pgm, to_bytes_image, write_boxes
from intgrad.models import (
    build_convnet,
    build_lstm_lm,
    equivalent_pair,
    linear_model,
    object_patches,
    one_hot_sequence,
    save_model,
    sigmoid_unit,
    token_repetition,
    train_toy,
)

sys.path.insert(0, str(Path(__file__).parent))
from oracles import LAYER_KINDS, KINK_MARGIN, gradient_vs_fd, kink_distance, naive_aopc, op_cases, random_composition  # noqa: E402

VOCAB = 8
N_COMPOSITIONS = 150
SIGMA_TRUE = 1 / (1 + np.exp(-10.0)) - 0.5


@lru_cache(maxsize=None)
def convnet():
    X, y, _ = object_patches(400, seed=1)
    return train_toy(build_convnet(seed=0), X, y, epochs=10, lr=0.5, seed=0)


@lru_cache(maxsize=None)
def lstm():
    tokens, y = token_repetition(400, seed=1, vocab_size=VOCAB)
    X = np.stack([one_hot_sequence(t, VOCAB) for t in tokens])
    return train_toy(build_lstm_lm(VOCAB, 6, 12, seed=0), X, y, epochs=10, lr=0.5, seed=0)


def report(number, ok, detail):
    line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line, file=sys.__stdout__, flush=True)
    return ok


# -- 1 ----------------------------------------------------------------------------


def criterion_1():
    start = time.perf_counter()
    worst_op, worst = None, 0.0
    for name, (net, inputs) in op_cases().items():
        err = gradient_vs_fd(net, inputs)
        if err > worst:
            worst_op, worst = name, err
    worst_comp, checked = 0.0, 0
    rng = np.random.default_rng(2024)
    while checked < N_COMPOSITIONS:
        layers = list(rng.choice(LAYER_KINDS, 3))
        net, inputs = random_composition(layers, int(rng.integers(1 << 31)))
        if kink_distance(net, inputs) < KINK_MARGIN:
            continue
        worst_comp = max(worst_comp, gradient_vs_fd(net, inputs))
        checked += 1
    elapsed = time.perf_counter() - start
    ok = worst < 1e-6 and worst_comp < 1e-6 and elapsed < 60
    detail = (
        f"max relative error {worst:.2e} over catalog ops (worst: {worst_op}), "
        f"{worst_comp:.2e} over {checked} random 3-layer compositions; {elapsed:.1f}s"
    )
    return ok, detail


# -- 2 ----------------------------------------------------------------------------


def _convergence(net, xs):
    """Per input: (gap(400) <= 0.5 gap(100), relative gap at m = 50)."""
    rows = []
    for x in xs:
        path = scaling_path(x)
        target = resolve_target(net, x)
        g = {m: integrated_gradients(net, path, m, target.output, target.index) for m in (50, 100, 400)}
        rows.append((abs(g[400].gap) <= 0.5 * abs(g[100].gap), g[50].relative_gap, abs(g[400].gap) / abs(g[100].gap)))
    return rows


def criterion_2():
    images = object_patches(10, seed=2)[0]
    tokens, _ = token_repetition(10, seed=2, vocab_size=VOCAB)
    seqs = [one_hot_sequence(t, VOCAB) for t in tokens]
    cases = {"sigma(10x)": (sigmoid_unit(10.0), [np.array([1.0])]), "convnet": (convnet(), images), "lstm": (lstm(), seqs)}
    ok, parts = True, []
    for name, (net, xs) in cases.items():
        rows = _convergence(net, xs)
        ratio_ok = all(r[0] for r in rows)
        rel = max(r[1] for r in rows)
        worst_ratio = max(r[2] for r in rows)
        ok &= ratio_ok and rel <= 0.01
        parts.append(
            f"{name}: gap400/gap100 max {worst_ratio:.3f} ({'ok' if ratio_ok else 'FAIL'}), "
            f"relative gap m=50 max {rel:.2%} ({'ok' if rel <= 0.01 else 'FAIL'}) over {len(xs)} input(s)"
        )
    return ok, "; ".join(parts)


# -- 3 ----------------------------------------------------------------------------


def criterion_3():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 20))
        w, x, x0 = rng.normal(size=(3, n)) * rng.uniform(0.1, 10)
        r = integrated_gradients(linear_model(w, float(rng.normal())), scaling_path(x, x0), steps=1)
        worst = max(worst, float(np.max(np.abs(r.values - w * (x - x0)))))
    return worst <= 1e-12, f"max |IG - w(x - x0)| = {worst:.1e} over 200 random linear models at m=1"


# -- 4 ----------------------------------------------------------------------------


def criterion_4():
    net = sigmoid_unit(10.0)
    x = np.array([1.0])
    target = resolve_target(net, x)
    g = float(gradient(net, x, target)[0])
    ig = float(integrated_gradients(net, scaling_path(x), steps=500).values[0])
    ok = g < 1e-3 and 0.49 <= ig <= 0.51
    return ok, f"gradient at x=1 {g:.3e} (< 1e-3), IG (m=500) {ig:.6f} in [0.49, 0.51], closed form {SIGMA_TRUE:.7f}"


# -- 5 ----------------------------------------------------------------------------


def criterion_5():
    rows = compare_pair(equivalent_pair(), np.array([1.0, 2.0]))
    ig, others = rows[0], rows[1:]
    ok = not ig.differs and all(r.differs for r in others)
    detail = ", ".join(f"{r.method} max diff {r.max_difference:.3g}" for r in rows)
    return ok, f"IG tolerance {ig.tolerance:.3g}; {detail}"


# -- 6 ----------------------------------------------------------------------------


def criterion_6():
    start = time.perf_counter()
    images = list(object_patches(50, seed=6)[0])
    ig, grad = compare_aopc(convnet(), images, steps=50)
    elapsed = time.perf_counter() - start
    ok = ig.y[-1] > grad.y[-1] and elapsed < 300
    return ok, f"final-step AOPC over {len(images)} images: IG {ig.y[-1]:.4f} vs gradient {grad.y[-1]:.4f}; {elapsed:.1f}s"


# -- 7 ----------------------------------------------------------------------------


def criterion_7():
    corpus = eligible_patch_corpus(convnet(), 100, seed=7)
    cmp = compare_localization(convnet(), corpus, steps=50)
    ok = cmp.wins * 2 > len(corpus)
    return ok, f"IG has the higher in-box fraction on {cmp.wins} of {len(corpus)} eligible images (mean margin {cmp.mean_difference:.3f})"


# -- 8 ----------------------------------------------------------------------------


def _tree_equal(a: Path, b: Path):
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    if files_a != files_b:
        return False, len(files_a)
    _, mismatch, errors = filecmp.cmpfiles(a, b, [str(p) for p in files_a], shallow=False)
    return not mismatch and not errors, len(files_a)


def criterion_8():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        save_model(sigmoid_unit(10.0), tmp / "sigma.model")
        (tmp / "one.csv").write_text("feature,value\nx,1.0\n")
        img = object_patches(1, seed=11)[0][0]
        (tmp / "img.pgm").write_bytes(encode_pgm(to_bytes_image(img)[..., 0]))
        write_boxes(object_patches(1, seed=11)[2], tmp / "boxes.txt")

        def commands(out):
            m, conv = tmp / "sigma.model", out / "patches.model"
            return [
                ["train", "--dataset", "blobs", "--out", out / "blobs.model", "--seed", "4"],
                ["train", "--dataset", "patches", "--out", conv, "--seed", "4"],
                ["train", "--dataset", "tokens", "--out", out / "tokens.model", "--seed", "4", "--samples", "120"],
                *(
                    ["attribute", "--model", conv, "--input", tmp / "img.pgm", "--method", meth, "--out", out / f"a-{meth}"]
                    for meth in ("grad", "ig", "deeplift", "lrp", "deconvnet", "guided")
                ),
                ["interior", "--model", conv, "--input", tmp / "img.pgm", "--out", out / "interior"],
                ["evaluate", "saturate", "--model", conv, "--input", tmp / "img.pgm", "--layer", "relu1", "--out", out / "sat"],
                ["evaluate", "aopc", "--model", conv, "--count", "8", "--seed", "4", "--out", out / "aopc"],
                ["evaluate", "localize", "--model", conv, "--count", "8", "--seed", "4", "--out", out / "loc"],
                ["evaluate", "localize", "--model", conv, "--input", tmp / "img.pgm", "--boxes", tmp / "boxes.txt", "--out", out / "loc1"],
                ["evaluate", "converge", "--model", m, "--input", tmp / "one.csv", "--out", out / "conv"],
                ["evaluate", "compare", "--out", out / "cmp"],
            ]

        codes = []
        for run in ("run1", "run2"):
            out = tmp / run
            out.mkdir()
            for argv in commands(out):
                codes.append(cli_main([str(a) for a in argv]))
        same, n_files = _tree_equal(tmp / "run1", tmp / "run2")
    n_cmds = len(codes) // 2
    ok = same and all(c == 0 for c in codes)
    return ok, f"{n_cmds} commands run twice, {n_files} output files, byte-identical: {same}, exit codes {sorted(set(codes))}"


# -- 9 ----------------------------------------------------------------------------


def criterion_9():
    rng = np.random.default_rng(9)
    checked, exact = 0, True
    for seed in range(10):
        net = build_convnet((8, 8, int(1 + seed % 3)), seed=seed)
        img = rng.uniform(size=net.input_shape)
        imp = np.round(rng.uniform(size=(8, 8)), 1)
        cls = int(np.argmax(net(img)))
        steps, per = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        got = aopc(net, img, imp, steps=steps, pixels_per_step=per)
        ref = naive_aopc(lambda z: float(net(z)[cls]), img, imp, steps, per)
        exact &= list(got.y) == ref
        checked += 1
    return exact, f"aopc equals the naive re-evaluation oracle exactly on {checked} random 8x8 cases: {exact}"


CRITERIA = {i: globals()[f"criterion_{i}"] for i in range(1, 10)}


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, detail = CRITERIA[number]()
    assert report(number, ok, detail), detail


if __name__ == "__main__":
    results = [report(n, *fn()) for n, fn in CRITERIA.items()]
    sys.exit(0 if all(results) else 1)
