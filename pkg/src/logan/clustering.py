"""Bias-aware k-means clustering.

The optimizer minimizes a joint objective over hard assignments:

    total = clustering_loss + lam * bias_loss

where ``clustering_loss`` is the usual k-means inertia (sum of squared
Euclidean distances from instances to their cluster centroid) and
``bias_loss`` is the *negated* sum over clusters of the squared accuracy
gap between the two groups inside each cluster.  Clusters missing one of
the groups contribute 0 to the bias loss (their gap is undefined and so
carries no evidence).  With ``lam == 0`` this is plain Lloyd k-means.

The solver alternates two steps until no assignment changes in a full
sweep (or ``max_iter`` is hit):

  * assignment sweep: visit instances in ascending index order; for the
    instance's current cluster p and every candidate q, compute the exact
    change of the total objective if the instance moved from p to q, with
    centroids held fixed; only the gap terms of p and q change, so the
    bias part is updated from running per-cluster counts in O(1) per
    candidate.  Move to the best candidate (ties toward the lowest cluster
    index; staying scores 0) and apply the move immediately.
  * centroid update: recompute each centroid as the mean of its members.
    A cluster that lost all members is re-seeded with the instance
    farthest from the cluster's stale centroid (only instances whose own
    cluster keeps at least one other member are eligible; ties toward the
    lowest instance index).

Every accepted sweep move has non-positive delta and the centroid update
can only lower the clustering loss, so the recorded per-iteration totals
are non-increasing except across a re-seed, which is a forced assignment
change outside the delta rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .data import Dataset, LoganConfig


@dataclass(frozen=True, eq=False)
class ClusterModel:
    """Result of one fitted run: centroids, assignments, objective trace.

    ``objective_trace`` holds one ``(clustering_loss, bias_loss, total)``
    triple per recorded state: index 0 is the state after initialization
    (nearest-seed assignment plus one centroid update), each following
    entry the state after one full iteration (sweep + centroid update).
    ``clustering_loss`` is recorded raw even when the optimizer scales it
    inside ``total``.
    """

    centroids: np.ndarray
    assignment: np.ndarray
    objective_trace: tuple[tuple[float, float, float], ...]
    converged: bool
    iterations_run: int

    @property
    def n_clusters(self) -> int:
        return len(self.centroids)

    def cluster_sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.n_clusters)


@dataclass
class ClusterStats:
    """Running per-cluster tallies the solver keeps incrementally updated.

    ``group_counts[j, g]`` and ``correct_counts[j, g]`` count members and
    correct predictions of group g in cluster j; ``sums`` holds per-cluster
    feature sums so centroids can be recomputed as ``sums / sizes``.
    ``centroids`` stay fixed during an assignment sweep and are refreshed
    by the centroid update.
    """

    sizes: np.ndarray
    group_counts: np.ndarray
    correct_counts: np.ndarray
    sums: np.ndarray
    centroids: np.ndarray

    @classmethod
    def from_assignment(
        cls,
        dataset: Dataset,
        assignment: np.ndarray,
        centroids: np.ndarray,
    ) -> "ClusterStats":
        k = len(centroids)
        assignment = np.asarray(assignment, dtype=np.int64)
        g = dataset.group_codes
        w = dataset.correct_flags
        sizes = np.bincount(assignment, minlength=k)
        group_counts = np.zeros((k, 2), dtype=np.int64)
        correct_counts = np.zeros((k, 2), dtype=np.int64)
        for grp in (0, 1):
            mask = g == grp
            group_counts[:, grp] = np.bincount(assignment[mask], minlength=k)
            correct_counts[:, grp] = np.bincount(
                assignment[mask & (w == 1)], minlength=k
            )
        X = dataset.feature_matrix
        sums = np.zeros((k, X.shape[1]), dtype=np.float64)
        np.add.at(sums, assignment, X)
        return cls(
            sizes=sizes,
            group_counts=group_counts,
            correct_counts=correct_counts,
            sums=sums,
            centroids=np.array(centroids, dtype=np.float64),
        )

    def gap_terms(self) -> np.ndarray:
        """Squared accuracy gap per cluster, 0 where a group is absent."""
        n1 = self.group_counts[:, 0].astype(np.float64)
        n2 = self.group_counts[:, 1].astype(np.float64)
        ok = (n1 > 0) & (n2 > 0)
        terms = np.zeros(len(self.sizes), dtype=np.float64)
        terms[ok] = (
            self.correct_counts[ok, 0] / n1[ok]
            - self.correct_counts[ok, 1] / n2[ok]
        ) ** 2
        return terms

    def bias_loss(self) -> float:
        return -float(np.sum(self.gap_terms()))


def objective(
    dataset: Dataset,
    stats: ClusterStats,
    assignment: np.ndarray,
    lam: float,
    clustering_scale: float = 1.0,
) -> tuple[float, float, float]:
    """Evaluate (clustering_loss, bias_loss, total) for one state.

    ``clustering_loss`` is returned raw; ``total`` applies
    ``clustering_scale`` (1/n when the config normalizes the clustering
    loss, 1 otherwise) before adding ``lam * bias_loss``.
    """
    diffs = dataset.feature_matrix - stats.centroids[assignment]
    l_c = float(np.einsum("ij,ij->", diffs, diffs))
    l_b = stats.bias_loss()
    return l_c, l_b, clustering_scale * l_c + lam * l_b


def kmeanspp_init(dataset: Dataset, k: int, seed: int) -> np.ndarray:
    """k-means++ seeding: first centroid uniform over instances, each next
    one sampled proportionally to squared distance from the nearest chosen
    centroid.  Deterministic for a given seed."""
    n = dataset.n
    if k > n:
        raise ValueError(f"k={k} exceeds the number of instances ({n})")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    X = dataset.feature_matrix
    rng = np.random.default_rng(seed)
    centroids = np.empty((k, dataset.dim), dtype=np.float64)
    idx = int(rng.integers(n))
    centroids[0] = X[idx]
    closest = np.sum((X - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(closest.sum())
        if total > 0.0:
            idx = int(rng.choice(n, p=closest / total))
        else:
            # fewer distinct positions than k: fall back to uniform
            idx = int(rng.integers(n))
        centroids[j] = X[idx]
        np.minimum(closest, np.sum((X - centroids[j]) ** 2, axis=1), out=closest)
    return centroids


def _term(n1: int, n2: int, c1: int, c2: int) -> float:
    if n1 == 0 or n2 == 0:
        return 0.0
    return (c1 / n1 - c2 / n2) ** 2


def _sweep_sequential(
    X: np.ndarray,
    dist_rows: list[list[float]],
    assign: list[int],
    n1: list[int],
    n2: list[int],
    c1: list[int],
    c2: list[int],
    term: list[float],
    sums: np.ndarray,
    g: Sequence[int],
    w: Sequence[int],
    lam: float,
    dist_scale: float,
    order: Sequence[int],
) -> int:
    """One greedy assignment sweep with centroids fixed; returns the number
    of moves applied.  Mutates assign/counts/term/sums in place."""
    k = len(n1)
    moves = 0
    for i in order:
        p = assign[i]
        row = dist_rows[i]
        dp = row[p]
        a = g[i]
        wi = w[i]
        if a == 0:
            pn1, pn2, pc1, pc2 = n1[p] - 1, n2[p], c1[p] - wi, c2[p]
        else:
            pn1, pn2, pc1, pc2 = n1[p], n2[p] - 1, c1[p], c2[p] - wi
        term_p_after = _term(pn1, pn2, pc1, pc2)
        base = lam * (term[p] - term_p_after)
        best_q = -1
        best_delta = math.inf
        for q in range(k):
            if q == p:
                delta = 0.0
            else:
                if a == 0:
                    qn1, qn2, qc1, qc2 = n1[q] + 1, n2[q], c1[q] + wi, c2[q]
                else:
                    qn1, qn2, qc1, qc2 = n1[q], n2[q] + 1, c1[q], c2[q] + wi
                if qn1 == 0 or qn2 == 0:
                    term_q_after = 0.0
                else:
                    term_q_after = (qc1 / qn1 - qc2 / qn2) ** 2
                delta = dist_scale * (row[q] - dp) + base + lam * (term[q] - term_q_after)
            if delta < best_delta:
                best_delta = delta
                best_q = q
        if best_q != p:
            moves += 1
            if a == 0:
                n1[p] -= 1
                c1[p] -= wi
                n1[best_q] += 1
                c1[best_q] += wi
            else:
                n2[p] -= 1
                c2[p] -= wi
                n2[best_q] += 1
                c2[best_q] += wi
            term[p] = _term(n1[p], n2[p], c1[p], c2[p])
            term[best_q] = _term(n1[best_q], n2[best_q], c1[best_q], c2[best_q])
            sums[p] -= X[i]
            sums[best_q] += X[i]
            assign[i] = best_q
    return moves


def _fit_core(
    dataset: Dataset,
    centroids: np.ndarray,
    cfg: LoganConfig,
    sweep_order: Sequence[int] | None = None,
) -> ClusterModel:
    """Alternate assignment sweeps and centroid updates from a given seed
    state.  ``sweep_order`` overrides the ascending visit order (used by
    permutation-equivariance tests)."""
    X = dataset.feature_matrix
    n, dim = X.shape
    k = len(centroids)
    lam = cfg.lam
    dist_scale = 1.0 / n if cfg.normalize_clustering_loss else 1.0
    g_arr = dataset.group_codes
    w_arr = dataset.correct_flags
    g = g_arr.tolist()
    w = w_arr.tolist()
    order = range(n) if sweep_order is None else list(sweep_order)

    def tallies(assign_list: list[int]):
        aa = np.asarray(assign_list, dtype=np.int64)
        size_arr = np.bincount(aa, minlength=k)
        m0 = g_arr == 0
        n1_arr = np.bincount(aa[m0], minlength=k)
        c1_arr = np.bincount(aa[m0 & (w_arr == 1)], minlength=k)
        c2_arr = np.bincount(aa[~m0 & (w_arr == 1)], minlength=k)
        sum_arr = np.zeros((k, dim), dtype=np.float64)
        np.add.at(sum_arr, aa, X)
        return (
            size_arr.tolist(),
            n1_arr.tolist(),
            (size_arr - n1_arr).tolist(),
            c1_arr.tolist(),
            c2_arr.tolist(),
            sum_arr,
        )

    centroids = np.array(centroids, dtype=np.float64)
    assign = cdist(X, centroids, "sqeuclidean").argmin(axis=1).tolist()
    sizes, n1, n2, c1, c2, sums = tallies(assign)
    term = [_term(n1[j], n2[j], c1[j], c2[j]) for j in range(k)]

    def record() -> tuple[float, float, float]:
        diffs = X - centroids[assign]
        l_c = float(np.einsum("ij,ij->", diffs, diffs))
        l_b = -float(sum(term))
        return (l_c, l_b, dist_scale * l_c + lam * l_b)

    def update_centroids() -> None:
        # Re-seed any emptied cluster with the instance farthest from its
        # stale centroid; donors must leave a nonempty cluster behind.
        while True:
            empties = [j for j in range(k) if sizes[j] == 0]
            if not empties:
                break
            e = empties[0]
            dist_to_e = np.sum((X - centroids[e]) ** 2, axis=1)
            best_i = -1
            best_d = -1.0
            for i in range(n):
                if sizes[assign[i]] < 2:
                    continue
                d_i = float(dist_to_e[i])
                if d_i > best_d:
                    best_d = d_i
                    best_i = i
            if best_i < 0:
                raise RuntimeError("no eligible donor instance for empty cluster")
            src = assign[best_i]
            sizes[src] -= 1
            sizes[e] += 1
            if g[best_i] == 0:
                n1[src] -= 1
                c1[src] -= w[best_i]
                n1[e] += 1
                c1[e] += w[best_i]
            else:
                n2[src] -= 1
                c2[src] -= w[best_i]
                n2[e] += 1
                c2[e] += w[best_i]
            term[src] = _term(n1[src], n2[src], c1[src], c2[src])
            term[e] = _term(n1[e], n2[e], c1[e], c2[e])
            sums[src] -= X[best_i]
            sums[e] += X[best_i]
            assign[best_i] = e
        for j in range(k):
            centroids[j] = sums[j] / sizes[j]

    # Initial half-step: nearest-seed assignment plus one centroid update,
    # so the first sweep already works against cluster means.
    update_centroids()
    trace = [record()]
    converged = False
    iterations = 0
    for _ in range(cfg.max_iter):
        iterations += 1
        if lam == 0.0:
            # Bias term is inert: the sequential sweep reduces to batch
            # nearest-centroid assignment (ties toward the lowest index).
            new_assign = cdist(X, centroids, "sqeuclidean").argmin(axis=1).tolist()
            moves = sum(1 for i in range(n) if new_assign[i] != assign[i])
            if moves:
                assign = new_assign
                sizes, n1, n2, c1, c2, sums = tallies(assign)
                term = [_term(n1[j], n2[j], c1[j], c2[j]) for j in range(k)]
        else:
            dist_mat = cdist(X, centroids, "sqeuclidean")
            moves = _sweep_sequential(
                X,
                dist_mat.tolist(),
                assign,
                n1,
                n2,
                c1,
                c2,
                term,
                sums,
                g,
                w,
                lam,
                dist_scale,
                order,
            )
            for j in range(k):
                sizes[j] = n1[j] + n2[j]
        update_centroids()
        trace.append(record())
        if moves == 0:
            converged = True
            break

    assignment = np.array(assign, dtype=np.int64)
    assignment.setflags(write=False)
    final_centroids = centroids.copy()
    final_centroids.setflags(write=False)
    return ClusterModel(
        centroids=final_centroids,
        assignment=assignment,
        objective_trace=tuple(trace),
        converged=converged,
        iterations_run=iterations,
    )


def logan_fit(
    dataset: Dataset,
    cfg: LoganConfig,
    initial_centroids: np.ndarray | None = None,
) -> ClusterModel:
    """Fit the joint clustering / bias objective on a dataset.

    Initialization is k-means++ from ``cfg.seed`` unless explicit
    ``initial_centroids`` are given.  The run is fully deterministic for a
    given (dataset, config, init).
    """
    if initial_centroids is None:
        centroids = kmeanspp_init(dataset, cfg.k, cfg.seed)
    else:
        centroids = np.array(initial_centroids, dtype=np.float64)
        if centroids.ndim != 2 or centroids.shape[1] != dataset.dim:
            raise ValueError(
                f"initial centroids must have shape (k, {dataset.dim})"
            )
        if len(centroids) > dataset.n:
            raise ValueError(
                f"k={len(centroids)} exceeds the number of instances ({dataset.n})"
            )
    return _fit_core(dataset, centroids, cfg)


def kmeans_fit(
    dataset: Dataset,
    cfg: LoganConfig,
    initial_centroids: np.ndarray | None = None,
) -> ClusterModel:
    """Plain k-means baseline: the same solver with the bias weight off."""
    return logan_fit(dataset, replace(cfg, lam=0.0), initial_centroids)


def best_single_move_delta(
    dataset: Dataset,
    model: ClusterModel,
    cfg: LoganConfig,
) -> float:
    """Most negative objective delta over all single-instance moves, with
    the model's centroids held fixed.  A converged fit yields >= 0 (no
    improving move survives at termination)."""
    stats = ClusterStats.from_assignment(dataset, model.assignment, model.centroids)
    n = dataset.n
    k = model.n_clusters
    lam = cfg.lam
    dist_scale = 1.0 / n if cfg.normalize_clustering_loss else 1.0
    g = dataset.group_codes
    w = dataset.correct_flags
    dist_mat = cdist(dataset.feature_matrix, model.centroids, "sqeuclidean")
    n1 = stats.group_counts[:, 0].tolist()
    n2 = stats.group_counts[:, 1].tolist()
    c1 = stats.correct_counts[:, 0].tolist()
    c2 = stats.correct_counts[:, 1].tolist()
    term = stats.gap_terms().tolist()
    best = 0.0
    for i in range(n):
        p = int(model.assignment[i])
        a = int(g[i])
        wi = int(w[i])
        if a == 0:
            term_p_after = _term(n1[p] - 1, n2[p], c1[p] - wi, c2[p])
        else:
            term_p_after = _term(n1[p], n2[p] - 1, c1[p], c2[p] - wi)
        base = lam * (term[p] - term_p_after)
        dp = float(dist_mat[i, p])
        for q in range(k):
            if q == p:
                continue
            if a == 0:
                term_q_after = _term(n1[q] + 1, n2[q], c1[q] + wi, c2[q])
            else:
                term_q_after = _term(n1[q], n2[q] + 1, c1[q], c2[q] + wi)
            delta = (
                dist_scale * (float(dist_mat[i, q]) - dp)
                + base
                + lam * (term[q] - term_q_after)
            )
            if delta < best:
                best = delta
    return best
