"""Seeded synthetic datasets, each making one experiment checkable against ground truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    """Pixel rectangle, inclusive-exclusive: columns ``x0:x1``, rows ``y0:y1``."""

    x0: int
    y0: int
    x1: int
    y1: int

    def validate(self, height, width):
        if not (0 <= self.x0 < self.x1 <= width and 0 <= self.y0 < self.y1 <= height):
            raise ValueError(f"box {self} outside a {height}x{width} image")
        return self

    @property
    def area(self):
        return (self.x1 - self.x0) * (self.y1 - self.y0)


def blobs(n=200, seed=0, separation=3.0, n_classes=2):
    """2-D Gaussian blobs with unit variance; centers on a circle of radius ``separation``."""
    rng = np.random.default_rng(seed)
    angles = 2 * np.pi * np.arange(n_classes) / n_classes
    centers = separation * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    y = rng.integers(0, n_classes, size=n)
    X = centers[y] + rng.normal(size=(n, 2))
    return X, y


PATCH_SHAPES = ((2, 6), (6, 2))  # (rows, cols): class 0 horizontal bar, class 1 vertical bar


def object_patches(n=200, seed=0, size=16, noise=0.1, intensity=(0.7, 1.0)):
    """Images of one bright bar on a dark, lightly noisy background.

    Returns ``(images, labels, boxes)`` with images of shape (n, size, size, 1);
    the class is the bar orientation and ``boxes[i]`` is the bar's exact extent.
    """
    rng = np.random.default_rng(seed)
    images = rng.uniform(0.0, noise, size=(n, size, size, 1))
    labels = rng.integers(0, len(PATCH_SHAPES), size=n)
    boxes = []
    for i, label in enumerate(labels):
        rows, cols = PATCH_SHAPES[label]
        y0 = int(rng.integers(0, size - rows + 1))
        x0 = int(rng.integers(0, size - cols + 1))
        images[i, y0 : y0 + rows, x0 : x0 + cols, 0] = rng.uniform(*intensity, size=(rows, cols))
        boxes.append(BoundingBox(x0, y0, x0 + cols, y0 + rows))
    return images, labels, boxes


def token_repetition(n=300, seed=0, vocab_size=8, seq_len=10, repeats=4):
    """Token sequences where one key token occurs ``repeats`` times and every other token at most once.

    The label (next word) is the repeated key token, so a model that learns the
    pattern should attribute its prediction to the key's occurrences.
    Returns ``(tokens, targets)`` with tokens of shape (n, seq_len).
    """
    if seq_len - repeats > vocab_size - 1:
        raise ValueError("vocabulary too small to fill the sequence with distinct distractors")
    rng = np.random.default_rng(seed)
    tokens = np.zeros((n, seq_len), dtype=np.int64)
    targets = rng.integers(0, vocab_size, size=n)
    for i, key in enumerate(targets):
        others = rng.permutation([t for t in range(vocab_size) if t != key])[: seq_len - repeats]
        seq = np.concatenate([np.full(repeats, key), others])
        tokens[i] = rng.permutation(seq)
    return tokens, targets
