"""Subset performance metrics and between-group gap computations.

All operations are pure functions over instance lists.  Metrics that are
undefined on a subset (AUC with a single class, FPR with no negatives,
anything on an empty subset) return ``None`` rather than raising; callers
treat such subsets as non-detectable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .data import Dataset, Instance


class MetricKind(Enum):
    """Performance metric used to measure the between-group disparity."""

    ACCURACY = "accuracy"
    SUBGROUP_AUC = "auc"
    FPR = "fpr"


@dataclass(frozen=True)
class GapResult:
    """Per-group performance on one subset plus their absolute difference.

    ``gap`` is None whenever either group's performance is undefined
    (empty group, degenerate AUC/FPR subset).
    """

    perf_group1: float | None
    perf_group2: float | None
    gap: float | None
    n_group1: int
    n_group2: int


def _auc_from_arrays(labels: np.ndarray, scores: np.ndarray) -> float | None:
    """Rank-based AUC (Mann-Whitney form); ties between a positive and a
    negative score are credited 0.5.  None when either class is absent."""
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def performance(subset: Sequence[Instance], kind: MetricKind) -> float | None:
    """Performance of the model on a subset under the given metric.

    Accuracy: fraction of instances with prediction == label.
    FPR: among label==0 instances, fraction predicted 1 (None if no
    negatives).  Subgroup AUC: probability a random (positive, negative)
    pair is ranked correctly by score, ties credited 0.5 (None if either
    class is absent; raises ValueError if any score is missing).

    Returns None on an empty subset.
    """
    if len(subset) == 0:
        return None
    if kind is MetricKind.ACCURACY:
        return sum(1 for inst in subset if inst.correct) / len(subset)
    if kind is MetricKind.FPR:
        negatives = [inst for inst in subset if inst.label == 0]
        if not negatives:
            return None
        return sum(1 for inst in negatives if inst.prediction == 1) / len(negatives)
    if kind is MetricKind.SUBGROUP_AUC:
        missing = [inst.id for inst in subset if inst.score is None]
        if missing:
            raise ValueError(
                f"AUC requires a score on every instance; missing for {missing[0]!r}"
            )
        labels = np.array([inst.label for inst in subset], dtype=np.int64)
        scores = np.array([inst.score for inst in subset], dtype=np.float64)
        return _auc_from_arrays(labels, scores)
    raise ValueError(f"unknown metric kind: {kind!r}")


def group_gap(
    subset: Sequence[Instance],
    kind: MetricKind,
    groups: tuple[str, str],
) -> GapResult:
    """Per-group performance on a subset and the absolute gap between them."""
    if len(subset) == 0:
        raise ValueError("group_gap requires a nonempty subset")
    sub1 = [inst for inst in subset if inst.group == groups[0]]
    sub2 = [inst for inst in subset if inst.group == groups[1]]
    p1 = performance(sub1, kind)
    p2 = performance(sub2, kind)
    gap = None if p1 is None or p2 is None else abs(p1 - p2)
    return GapResult(
        perf_group1=p1,
        perf_group2=p2,
        gap=gap,
        n_group1=len(sub1),
        n_group2=len(sub2),
    )


def global_bias(dataset: Dataset, kind: MetricKind) -> GapResult:
    """Corpus-level gap: the group disparity over the entire dataset."""
    return group_gap(dataset.instances, kind, dataset.groups)


def random_split_baseline(
    dataset: Dataset,
    kind: MetricKind,
    runs: int = 5,
    seed: int = 0,
) -> tuple[float, float]:
    """Mean and std of the gap between two random pseudo-groups.

    Each run partitions the instances uniformly at random into two
    pseudo-groups whose sizes match the real group sizes, then measures the
    performance gap between them.  This calibrates how large a gap arises
    from sampling noise alone, which is what a bias threshold has to beat.

    Runs where the gap is undefined are skipped; if every run is undefined
    the result is (nan, nan).
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    rng = np.random.default_rng(seed)
    n1, _ = dataset.group_sizes()
    gaps = []
    for _ in range(runs):
        perm = rng.permutation(dataset.n)
        side_a = [dataset.instances[i] for i in perm[:n1]]
        side_b = [dataset.instances[i] for i in perm[n1:]]
        pa = performance(side_a, kind)
        pb = performance(side_b, kind)
        if pa is None or pb is None:
            continue
        gaps.append(abs(pa - pb))
    if not gaps:
        return math.nan, math.nan
    return float(np.mean(gaps)), float(np.std(gaps))
