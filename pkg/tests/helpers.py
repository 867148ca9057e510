"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from logan.data import Dataset, build_dataset


def rows_from_arrays(features, groups, labels, preds, scores=None, texts=None):
    rows = []
    for i in range(len(features)):
        row = {
            "id": f"r{i:04d}",
            "features": [float(v) for v in features[i]],
            "group": groups[i],
            "label": int(labels[i]),
            "pred": int(preds[i]),
        }
        if scores is not None:
            row["score"] = float(scores[i])
        if texts is not None:
            row["text"] = texts[i]
        rows.append(row)
    return rows


def make_dataset(features, groups, labels, preds, scores=None, texts=None) -> Dataset:
    return build_dataset(rows_from_arrays(features, groups, labels, preds, scores, texts))


def random_dataset(
    rng: np.random.Generator,
    n: int,
    dim: int = 2,
    n_blobs: int = 3,
    spread: float = 5.0,
    with_scores: bool = True,
) -> Dataset:
    """Random blob dataset with random groups/labels/predictions."""
    centers = rng.uniform(-spread, spread, size=(n_blobs, dim))
    which = rng.integers(n_blobs, size=n)
    features = centers[which] + rng.standard_normal((n, dim))
    groups = np.where(rng.random(n) < 0.5, "a", "b")
    # both groups must appear
    groups[0] = "a"
    groups[-1] = "b"
    labels = rng.integers(0, 2, size=n)
    correct = rng.random(n) < rng.uniform(0.5, 0.95)
    preds = np.where(correct, labels, 1 - labels)
    scores = None
    if with_scores:
        u = rng.random(n)
        scores = np.where(preds == 1, 0.5 + 0.5 * u, 0.5 * u)
    return make_dataset(features, groups.tolist(), labels, preds, scores)
