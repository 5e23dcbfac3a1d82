"""Downstream evaluator used by the benchmark: a plain kNN majority-vote classifier."""

from __future__ import annotations

import numpy as np
from sklearn.neighbors import KNeighborsClassifier

from .data import Dataset


def knn_accuracy(train: Dataset, test: Dataset, features, n_neighbors: int = 5) -> float:
    """Test accuracy of a kNN classifier on the chosen feature columns.

    Columns are standardized with the training split's mean and standard
    deviation. With no features the majority training class is predicted.
    """
    cols = sorted(int(i) for i in features)
    if not cols:
        majority = np.bincount(train.target).argmax()
        return float(np.mean(test.target == majority))
    xtr = train.features[:, cols]
    xte = test.features[:, cols]
    mean = xtr.mean(axis=0)
    std = xtr.std(axis=0, ddof=1)
    std = np.where(std > 0, std, 1.0)
    clf = KNeighborsClassifier(n_neighbors=min(n_neighbors, train.n_samples), algorithm="brute")
    clf.fit((xtr - mean) / std, train.target)
    return float(np.mean(clf.predict((xte - mean) / std) == test.target))
