import numpy as np

from fairim.probe import probe_accuracy, stratified_split
from fairim.rng import SplitMix64


def test_split_is_stratified_and_disjoint():
    is_a = np.arange(40) < 10
    train, test = stratified_split(is_a, 0)
    assert set(train).isdisjoint(test)
    assert sorted(np.concatenate([train, test]).tolist()) == list(range(40))
    assert is_a[train].sum() == 5 and is_a[test].sum() == 5


def test_separable_embeddings_are_detected():
    is_a = np.arange(60) < 20
    z = np.where(is_a[:, None], 1.0, -1.0) + 0.1 * np.array(SplitMix64(1).uniform_array(60))[:, None]
    assert probe_accuracy(z, is_a) == 1.0


def test_uninformative_embeddings_near_chance():
    rng = SplitMix64(2)
    z = np.array(rng.uniform_array(800)).reshape(400, 2)
    is_a = np.array(rng.uniform_array(400)) < 0.3
    assert abs(probe_accuracy(z, is_a) - 0.5) < 0.1
