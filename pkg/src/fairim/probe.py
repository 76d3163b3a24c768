"""Post-hoc probe: how much group information do embeddings retain?"""

from __future__ import annotations

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import balanced_accuracy_score
from sklearn.preprocessing import StandardScaler

from .rng import SplitMix64


def stratified_split(is_a: np.ndarray, rng_seed: int, train_frac: float = 0.5) -> tuple[np.ndarray, np.ndarray]:
    rng = SplitMix64(rng_seed)
    train, test = [], []
    for want in (True, False):
        members = np.flatnonzero(is_a == want).tolist()
        rng.shuffle(members)
        cut = int(round(train_frac * len(members)))
        train += members[:cut]
        test += members[cut:]
    return np.array(sorted(train)), np.array(sorted(test))


def probe_accuracy(z: np.ndarray, is_a: np.ndarray, rng_seed: int = 0) -> float:
    """Held-out balanced accuracy of a logistic-regression group probe.

    The probe is fit with class-balanced weights on a stratified half of the
    nodes and scored on the other half. Balanced accuracy puts chance at 0.5
    regardless of group sizes.
    """
    is_a = np.asarray(is_a, dtype=bool)
    train, test = stratified_split(is_a, rng_seed)
    scaler = StandardScaler().fit(z[train])
    clf = LogisticRegression(class_weight="balanced", max_iter=2000)
    clf.fit(scaler.transform(z[train]), is_a[train])
    return float(balanced_accuracy_score(is_a[test], clf.predict(scaler.transform(z[test]))))
