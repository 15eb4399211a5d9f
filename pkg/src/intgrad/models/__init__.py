"""Toy networks, synthetic datasets, training, and the model file format."""

from .datasets import BoundingBox, blobs, object_patches, token_repetition
from .serialize import dumps, load_model, loads, save_model
from .train import accuracy, predict, train_toy
from .zoo import (
    EquivalentPair,
    build_convnet,
    build_lstm_lm,
    build_mlp,
    equivalent_pair,
    linear_model,
    one_hot_sequence,
    pair_function,
    sigmoid_unit,
)

__all__ = [
    "BoundingBox",
    "EquivalentPair",
    "accuracy",
    "blobs",
    "build_convnet",
    "build_lstm_lm",
    "build_mlp",
    "dumps",
    "equivalent_pair",
    "linear_model",
    "load_model",
    "loads",
    "object_patches",
    "one_hot_sequence",
    "pair_function",
    "predict",
    "save_model",
    "sigmoid_unit",
    "token_repetition",
    "train_toy",
]
