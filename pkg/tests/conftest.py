import numpy as np
import pytest

from lexhmm.backend import BACKENDS
from lexhmm.corpus import Corpus

BACKEND_NAMES = sorted(BACKENDS)


@pytest.fixture(params=BACKEND_NAMES)
def backend(request):
    return request.param


TOY_SENTENCES = [
    ["the", "dog", "runs"],
    ["a", "cat", "sleeps", "."],
    ["the", "cat", "runs", "."],
    ["dogs", "run"],
    ["the", "dog", "sleeps", "."],
]


@pytest.fixture
def toy():
    return Corpus.from_sentences(TOY_SENTENCES)


def gold_toy():
    tags = {"the": "DT", "a": "DT", "dog": "NN", "cat": "NN", "dogs": "NN",
            "runs": "VB", "run": "VB", "sleeps": "VB", ".": "."}
    return Corpus.from_sentences(TOY_SENTENCES, [[tags[w] for w in s] for s in TOY_SENTENCES])


def state_snapshot(state):
    from lexhmm.model import export_state
    snap = export_state(state)
    return {k: np.array(v, copy=True) for k, v in snap.items()}


def same_snapshot(a, b):
    return a.keys() == b.keys() and all(np.array_equal(a[k], b[k]) for k in a)
