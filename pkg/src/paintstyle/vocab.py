"""Divisive bisecting 2-means vocabulary over patch feature vectors.

Starting from one cluster holding every feature vector, each level splits
every cluster ``k`` into children ``2k - 1`` and ``2k`` with 2-means. After
``depth`` levels each vector carries a keyword label in ``1 .. 2**depth``.
Labels are 1-based and refine exactly: ``ceil(c[T+1] / 2) == c[T]``.

Empty clusters stay in the tree as empty leaves, so label arithmetic never
shifts. Each node's split draws its seeding sample from an RNG keyed by
``(seed, level, node)``, which makes the tree independent of the order nodes
are processed in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ShapeError

__all__ = [
    "StandardizedFeatures",
    "standardize",
    "lloyd_two_means",
    "bisect",
    "VocabTree",
    "build_vocab",
    "assign",
]

_SAMPLE_SIZE = 256


@dataclass(frozen=True)
class StandardizedFeatures:
    """Column-standardized features plus the transform that produced them."""

    data: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray

    def apply(self, features: np.ndarray) -> np.ndarray:
        return _apply(np.asarray(features, dtype=np.float64), self.mean, self.scale, self.constant)


def _apply(x, mean, scale, constant):
    if x.shape[-1] != mean.shape[0]:
        raise ShapeError(f"expected {mean.shape[0]} feature columns, got {x.shape[-1]}")
    out = (x - mean) / scale
    return np.where(constant, 0.0, out)


def standardize(features: np.ndarray) -> StandardizedFeatures:
    """Z-score each column (population sd); constant columns become zeros."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise InputError("standardize needs an (N, D) matrix with N >= 2")
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    constant = sd <= 1e-12 * np.maximum(np.abs(mean), 1.0)
    scale = np.where(constant, 1.0, sd)
    return StandardizedFeatures(_apply(x, mean, scale, constant), mean, scale, constant)


def _sq_dist(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    diff = x - c
    return np.einsum("ij,ij->i", diff, diff)


def lloyd_two_means(points: np.ndarray, left: np.ndarray, right: np.ndarray, max_iter: int = 100):
    """Lloyd iterations for k = 2 from the given centroids.

    Points equidistant from both centroids go left. Stops when assignments
    repeat or after ``max_iter`` rounds.

    Returns
    -------
    to_right : bool array
    centroids : (2, D) array
    objective : list of within-cluster sums of squares, one per round
    """
    to_right = None
    objective = []
    for _ in range(max_iter):
        new = _sq_dist(points, right) < _sq_dist(points, left)
        if to_right is not None and np.array_equal(new, to_right):
            break
        if new.all() or not new.any():
            # a side emptied out; keep the last two-sided partition
            if to_right is None:
                to_right = new
            break
        to_right = new
        left = points[~to_right].mean(axis=0)
        right = points[to_right].mean(axis=0)
        objective.append(float(_sq_dist(points[~to_right], left).sum() + _sq_dist(points[to_right], right).sum()))
    return to_right, np.stack([left, right]), objective


def bisect(points: np.ndarray, seed=0, max_iter: int = 100):
    """Split points into two disjoint subsets with 2-means.

    Seeds with the farthest pair inside a random sample of at most 256
    points. A single point, or a set of identical points, goes entirely to
    the left child; the right child is then empty with a NaN centroid.

    Returns
    -------
    left_idx, right_idx : int arrays indexing ``points``
    centroids : (2, D) array
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InputError("bisect needs a non-empty (N, D) array")
    n = x.shape[0]
    everything = np.arange(n)
    empty = np.array([], dtype=np.int64)
    nan = np.full(x.shape[1], np.nan)
    if n == 1 or np.all(x == x[0]):
        return everything, empty, np.stack([x.mean(axis=0), nan])

    rng = np.random.default_rng(seed)
    sample = np.sort(rng.choice(n, size=min(n, _SAMPLE_SIZE), replace=False))
    s = x[sample]
    diff = s[:, None, :] - s[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    i, j = np.unravel_index(np.argmax(d2), d2.shape)
    a, b = sample[min(i, j)], sample[max(i, j)]
    if d2[i, j] == 0.0:
        a = sample[0]
        b = int(np.argmax(_sq_dist(x, x[a])))

    to_right, centroids, _ = lloyd_two_means(x, x[a], x[b], max_iter)
    return everything[~to_right], everything[to_right], centroids


@dataclass(frozen=True)
class VocabTree:
    """Trained bisecting tree.

    ``centroids[T - 1]`` has shape ``(2**T, D)``: row ``2k - 2`` / ``2k - 1``
    is the centroid of child ``2k - 1`` / ``2k`` of level-``T`` node ``k``
    (NaN for empty children). ``sizes[T - 1]`` counts members of each node at
    level ``T`` (``T = 1 .. depth + 1``). Centroids live in standardized space.
    """

    depth: int
    centroids: tuple
    sizes: tuple
    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray
    seed: int

    @property
    def leaf_count(self) -> int:
        return 2 ** self.depth

    @property
    def dimension(self) -> int:
        return self.mean.shape[0]

    def to_dict(self) -> dict:
        def rows(a):
            return [None if np.isnan(r).any() else [float(v) for v in r] for r in a]

        return {
            "depth": self.depth,
            "seed": self.seed,
            "dimension": self.dimension,
            "standardization": {
                "mean": [float(v) for v in self.mean],
                "scale": [float(v) for v in self.scale],
                "constant": [bool(v) for v in self.constant],
            },
            "levels": [
                {"level": t + 1, "sizes": [int(v) for v in self.sizes[t]], "child_centroids": rows(self.centroids[t])}
                for t in range(self.depth)
            ],
            "leaf_sizes": [int(v) for v in self.sizes[self.depth]],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "VocabTree":
        dim = int(doc["dimension"])
        cents = tuple(
            np.array([[np.nan] * dim if r is None else r for r in lvl["child_centroids"]], dtype=np.float64)
            for lvl in doc["levels"]
        )
        sizes = tuple(np.array(lvl["sizes"], dtype=np.int64) for lvl in doc["levels"])
        sizes = sizes + (np.array(doc["leaf_sizes"], dtype=np.int64),)
        st = doc["standardization"]
        return cls(int(doc["depth"]), cents, sizes, np.array(st["mean"], dtype=np.float64),
                   np.array(st["scale"], dtype=np.float64), np.array(st["constant"], dtype=bool),
                   int(doc["seed"]))


def build_vocab(features: StandardizedFeatures, depth: int = 10, seed: int = 0, max_iter: int = 100):
    """Grow the bisecting tree to ``2**depth`` leaves.

    Returns
    -------
    tree : VocabTree
    labels : (N, depth + 1) int array
        ``labels[:, T - 1]`` is the 1-based label at level ``T``; the last
        column is the keyword.
    """
    x = features.data
    n, dim = x.shape
    labels = np.ones((n, depth + 1), dtype=np.int64)
    centroids, sizes = [], [np.array([n], dtype=np.int64)]
    for t in range(1, depth + 1):
        current = labels[:, t - 1]
        order = np.argsort(current, kind="stable")
        bounds = np.searchsorted(current[order], np.arange(1, 2 ** (t - 1) + 2))
        cent = np.full((2 ** t, dim), np.nan)
        nxt = np.empty(n, dtype=np.int64)
        for k in range(1, 2 ** (t - 1) + 1):
            members = order[bounds[k - 1]:bounds[k]]
            if members.size == 0:
                continue
            left, right, c = bisect(x[members], seed=[seed, t, k], max_iter=max_iter)
            nxt[members[left]] = 2 * k - 1
            nxt[members[right]] = 2 * k
            cent[2 * k - 2] = c[0]
            if right.size:
                cent[2 * k - 1] = c[1]
        labels[:, t] = nxt
        centroids.append(cent)
        sizes.append(np.bincount(nxt - 1, minlength=2 ** t).astype(np.int64))
    tree = VocabTree(depth, tuple(centroids), tuple(sizes), features.mean, features.scale,
                     features.constant, int(seed))
    return tree, labels


def assign(query: np.ndarray, tree: VocabTree, standardized: bool = False) -> np.ndarray | int:
    """Quantize raw feature vector(s) by root-to-leaf nearest-centroid descent.

    Ties go to the odd (left) child. Pass ``standardized=True`` when the
    query is already in the tree's standardized space.
    """
    q = np.asarray(query, dtype=np.float64)
    single = q.ndim == 1
    q = np.atleast_2d(q)
    if q.shape[-1] != tree.dimension:
        raise ShapeError(f"query has {q.shape[-1]} dimensions, tree expects {tree.dimension}")
    if not standardized:
        q = _apply(q, tree.mean, tree.scale, tree.constant)
    label = np.ones(q.shape[0], dtype=np.int64)
    for t in range(tree.depth):
        cents = tree.centroids[t]
        left = cents[2 * label - 2]
        right = cents[2 * label - 1]
        dl = np.einsum("ij,ij->i", q - left, q - left)
        dr = np.einsum("ij,ij->i", q - right, q - right)
        dl = np.where(np.isnan(dl), np.inf, dl)
        dr = np.where(np.isnan(dr), np.inf, dr)
        label = 2 * label - 1 + (dr < dl)
    return int(label[0]) if single else label
