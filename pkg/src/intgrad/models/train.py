"""Plain SGD with cross-entropy, driven by the autodiff engine's parameter gradients."""

from __future__ import annotations

import logging

import numpy as np

from ..autodiff import Network, evaluate, vjp
from ..autodiff.ops import sigmoid
from ..errors import ShapeError, TrainingDivergedError

logger = logging.getLogger(__name__)


def _loss_and_seed(net, logits, label):
    """Cross-entropy and its gradient with respect to the logits."""
    head = net.meta.get("head", "softmax")
    if head == "softmax":
        z = logits - logits.max()
        logp = z - np.log(np.exp(z).sum())
        seed = np.exp(logp)
        seed[label] -= 1.0
        return -logp[label], seed
    if head == "sigmoid":
        target = np.atleast_1d(np.asarray(label, dtype=np.float64))
        p = sigmoid(logits)
        loss = np.sum(np.logaddexp(0.0, logits) - target * logits)
        return loss, p - target
    raise ShapeError(f"cannot train a network with head {head!r}")


def _check_labels(net, y):
    n_out = net.shapes[net.resolve("logits")][0]
    head = net.meta.get("head", "softmax")
    y = np.asarray(y)
    if head == "softmax" and (n_out < 2 or y.min() < 0 or y.max() >= n_out):
        raise ShapeError(f"labels must lie in [0, {n_out}) for a {n_out}-way softmax head")
    if head == "sigmoid" and (n_out != 1 or not np.isin(y, (0, 1)).all()):
        raise ShapeError("a sigmoid head needs one output and 0/1 labels")


# overflow is detected explicitly and reported as TrainingDivergedError
@np.errstate(over="ignore", invalid="ignore")
def train_toy(net: Network, X, y, epochs=10, lr=0.1, seed=0, batch_size=8) -> Network:
    """Return a trained copy of ``net``; the input network is never modified.

    Samples are shuffled each epoch with a generator seeded by ``seed``, so the
    result is bit-identical across runs. Raises ``TrainingDivergedError`` if the
    loss stops being finite.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if "logits" not in net.outputs:
        raise ShapeError("network exposes no 'logits' output to train")
    _check_labels(net, y)
    rng = np.random.default_rng(seed)
    params = {k: np.array(v) for k, v in net.params.items()}
    logits_node = net.resolve("logits")
    name = net.input_name
    for epoch in range(epochs):
        order = rng.permutation(len(X))
        total = 0.0
        for start in range(0, len(X), batch_size):
            batch = order[start : start + batch_size]
            grads = {k: np.zeros_like(v) for k, v in params.items()}
            for i in batch:
                values = evaluate(net, {name: X[i]}, params)
                loss, seed_vec = _loss_and_seed(net, values[logits_node], y[i])
                if not np.isfinite(loss):
                    raise TrainingDivergedError(f"loss became {loss} in epoch {epoch}")
                total += loss
                cot = vjp(net, values, {logits_node: seed_vec})
                for k in grads:
                    if k in cot:
                        grads[k] += cot[k]
            for k in params:
                params[k] -= lr * grads[k] / len(batch)
            if not all(np.all(np.isfinite(v)) for v in params.values()):
                raise TrainingDivergedError(f"parameters became non-finite in epoch {epoch}")
        mean_loss = total / len(X)
        if not np.isfinite(mean_loss):
            raise TrainingDivergedError(f"loss became {mean_loss} in epoch {epoch}")
        logger.info("epoch %d loss %.6f", epoch, mean_loss)
    return net.with_params(params)


def predict(net: Network, X) -> np.ndarray:
    """Predicted class per row of ``X`` (thresholded at 0.5 for sigmoid heads)."""
    out = []
    for x in np.asarray(X, dtype=np.float64):
        logits = net(x, output="logits")
        out.append(int(logits[0] > 0) if logits.size == 1 else int(np.argmax(logits)))
    return np.array(out)


def accuracy(net: Network, X, y) -> float:
    return float(np.mean(predict(net, X) == np.asarray(y)))
