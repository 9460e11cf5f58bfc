import os

import numpy as np
import pytest

from mldict.bench import list_images
from mldict.dictionary import DictionarySet, Dictionary, PrunePolicy, prune, train
from mldict.imgproc import BinaryImage, load_binary

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
SAMPLE_CORPUS = os.path.join(ROOT, "data", "sample_corpus")

ACCEPTANCE_REPORT = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_REPORT):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sample_paths():
    paths = list_images(SAMPLE_CORPUS)
    assert len(paths) == 50
    return paths


@pytest.fixture(scope="session")
def sample_images(sample_paths):
    return [load_binary(p) for p in sample_paths]


@pytest.fixture(scope="session")
def sample_trainer(sample_images):
    return train(sample_images, seed=0)


@pytest.fixture(scope="session")
def sample_dicts(sample_trainer):
    policy = PrunePolicy()
    return DictionarySet({n: prune(d, policy) for n, d in sample_trainer.dicts.items()})


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_image(rng, h, w, p=0.5):
    return BinaryImage((rng.random((h, w)) < p).astype(np.uint8))


def make_dicts(**levels):
    """DictionarySet from level=counts kwargs, e.g. make_dicts(L16={key: 5})."""
    return DictionarySet({int(k[1:]): Dictionary(int(k[1:]), v) for k, v in levels.items()})
