import numpy as np
import pytest

from intgrad.models import (
    build_convnet,
    build_lstm_lm,
    equivalent_pair,
    object_patches,
    one_hot_sequence,
    sigmoid_unit,
    token_repetition,
    train_toy,
)

VOCAB = 8


@pytest.fixture(scope="session")
def sigma_net():
    return sigmoid_unit(10.0)


@pytest.fixture(scope="session")
def pair():
    return equivalent_pair()


@pytest.fixture(scope="session")
def trained_convnet():
    X, y, _ = object_patches(400, seed=1)
    return train_toy(build_convnet(seed=0), X, y, epochs=10, lr=0.5, seed=0)


@pytest.fixture(scope="session")
def trained_lstm():
    tokens, y = token_repetition(400, seed=1, vocab_size=VOCAB)
    X = np.stack([one_hot_sequence(t, VOCAB) for t in tokens])
    return train_toy(build_lstm_lm(VOCAB, 6, 12, seed=0), X, y, epochs=10, lr=0.5, seed=0)


@pytest.fixture(scope="session")
def held_out_patches():
    return object_patches(60, seed=2)


@pytest.fixture(scope="session")
def held_out_sequences():
    tokens, y = token_repetition(20, seed=2, vocab_size=VOCAB)
    return np.stack([one_hot_sequence(t, VOCAB) for t in tokens]), y
