"""Variable similarity, agglomerative clustering and cluster-contiguous reordering."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import TimeSeriesWindow


@dataclass
class ClusterPartition:
    assignment: np.ndarray
    pi: np.ndarray | None = None

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64)
        if self.pi is not None:
            self.pi = np.asarray(self.pi, dtype=np.int64)

    @property
    def n_vars(self) -> int:
        return len(self.assignment)

    @property
    def K(self) -> int:
        return int(self.assignment.max()) + 1 if len(self.assignment) else 0

    @property
    def sizes(self) -> list[int]:
        """Cluster sizes in cluster-id order (= group order after reordering)."""
        return np.bincount(self.assignment, minlength=self.K).tolist()

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.pi)
        inv[self.pi] = np.arange(len(self.pi))
        return inv

    def clusters(self) -> list[list[int]]:
        return [np.flatnonzero(self.assignment == k).tolist() for k in range(self.K)]

    def to_json(self) -> dict:
        return {"assignment": self.assignment.tolist(), "K": self.K,
                "pi": None if self.pi is None else self.pi.tolist()}


def canonical_labels(assignment) -> np.ndarray:
    """Relabel so cluster ids appear in order of their smallest member."""
    assignment = np.asarray(assignment)
    mapping: dict[int, int] = {}
    for a in assignment.tolist():
        mapping.setdefault(a, len(mapping))
    return np.array([mapping[a] for a in assignment.tolist()], dtype=np.int64)


def similarity_matrix(values, mask=None) -> np.ndarray:
    """Pearson correlation over timestamps where both variables are observed.

    Accepts a window or a (values, mask) pair.  Pairs sharing fewer than two
    observations, or with zero variance on the shared support, get
    similarity 0.  The diagonal is 1.
    """
    if isinstance(values, TimeSeriesWindow):
        values, mask = values.values, values.mask
    values = np.asarray(values, dtype=np.float64)
    if mask is None:
        mask = np.isfinite(values)
    obs = np.asarray(mask).astype(bool)
    n = values.shape[0]
    s = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            both = obs[i] & obs[j]
            if both.sum() < 2:
                continue
            a = values[i, both] - values[i, both].mean()
            b = values[j, both] - values[j, both].mean()
            den = np.sqrt((a * a).sum() * (b * b).sum())
            if den <= 0:
                continue
            s[i, j] = s[j, i] = np.clip((a * b).sum() / den, -1.0, 1.0)
    return s


def agglomerate(S: np.ndarray, epsilon: float = 0.5) -> ClusterPartition:
    """Average-linkage agglomerative clustering on the distance 1 - S.

    Merges the closest pair while its distance is below ``epsilon``; ties go
    to the lexicographically smallest (min-member, min-member) pair.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    S = np.asarray(S, dtype=np.float64)
    D = 1.0 - S
    clusters = [[i] for i in range(S.shape[0])]
    while len(clusters) > 1:
        best = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                d = D[np.ix_(clusters[a], clusters[b])].mean()
                key = (d, min(clusters[a]), min(clusters[b]))
                if best is None or key < best[0]:
                    best = (key, a, b)
        (d, _, _), a, b = best
        if not d < epsilon:
            break
        clusters[a] = sorted(clusters[a] + clusters[b])
        del clusters[b]
    assignment = np.empty(S.shape[0], dtype=np.int64)
    for k, members in enumerate(sorted(clusters, key=min)):
        assignment[members] = k
    return permutation_from_clusters(ClusterPartition(assignment))


def linkage_distance(S: np.ndarray, a, b) -> float:
    return float((1.0 - np.asarray(S))[np.ix_(list(a), list(b))].mean())


def permutation_from_clusters(p: ClusterPartition) -> ClusterPartition:
    """Order variables by (cluster id, original index)."""
    pi = np.lexsort((np.arange(p.n_vars), p.assignment))
    return ClusterPartition(p.assignment.copy(), pi)


def identity_partition(n: int) -> ClusterPartition:
    return ClusterPartition(np.zeros(n, dtype=np.int64), np.arange(n))


def reorder(w: TimeSeriesWindow, p: ClusterPartition) -> TimeSeriesWindow:
    pi = p.pi
    return replace(w, values=w.values[pi].copy(), mask=w.mask[pi].copy(),
                   variable_names=[w.variable_names[i] for i in pi])


def inverse_reorder(grid: np.ndarray, p: ClusterPartition) -> np.ndarray:
    return np.asarray(grid)[p.inverse]


def inverse_reorder_window(w: TimeSeriesWindow, p: ClusterPartition) -> TimeSeriesWindow:
    inv = p.inverse
    return replace(w, values=w.values[inv].copy(), mask=w.mask[inv].copy(),
                   variable_names=[w.variable_names[i] for i in inv])
