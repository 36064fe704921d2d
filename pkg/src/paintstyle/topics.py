"""Latent Dirichlet allocation over keyword bags, fitted by variational EM.

Each sub-image is a document whose words are the keyword labels of its
patches. The topic-word matrix ``phi`` is ``(V, K)`` with stochastic columns.
The document-topic prior is a symmetric Dirichlet(alpha). Topics get a
symmetric Dirichlet(beta + 1) prior. The M-step is therefore the smoothed
estimate ``phi ∝ counts + beta``, and the reported bound includes the log
prior, so EM increases it monotonically.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import digamma, gammaln, xlogy

from .errors import DomainError, InputError, ShapeError

__all__ = [
    "BagOfWords",
    "TopicModel",
    "EStepResult",
    "LdaFit",
    "bags_from_labels",
    "dirichlet_pdf",
    "variational_estep",
    "lda_fit",
    "aggregate_panels",
    "pattern_subset_score",
]


@dataclass(frozen=True)
class BagOfWords:
    """Keyword counts of one document."""

    doc_id: object
    counts: np.ndarray

    @property
    def length(self) -> int:
        return int(self.counts.sum())

    @classmethod
    def from_words(cls, doc_id, words, vocab_size: int) -> "BagOfWords":
        """Build from 0-based keyword indices."""
        w = np.asarray(words, dtype=np.int64)
        if w.size and (w.min() < 0 or w.max() >= vocab_size):
            raise InputError(f"keyword index outside vocabulary of size {vocab_size}")
        return cls(doc_id, np.bincount(w, minlength=vocab_size).astype(np.int64))


def bags_from_labels(doc_index: np.ndarray, labels: np.ndarray, n_docs: int, vocab_size: int) -> np.ndarray:
    """Count matrix ``(n_docs, vocab_size)`` from per-patch 1-based labels."""
    d = np.asarray(doc_index, dtype=np.int64)
    w = np.asarray(labels, dtype=np.int64) - 1
    if d.shape != w.shape:
        raise ShapeError("doc_index and labels must align")
    if w.size and (w.min() < 0 or w.max() >= vocab_size):
        raise InputError(f"keyword label outside 1..{vocab_size}")
    if d.size and (d.min() < 0 or d.max() >= n_docs):
        raise InputError("document index out of range")
    counts = np.zeros((n_docs, vocab_size), dtype=np.int64)
    np.add.at(counts, (d, w), 1)
    return counts


@dataclass(frozen=True)
class TopicModel:
    phi: np.ndarray
    alpha: np.ndarray
    beta: float
    seed: int = 0

    @property
    def n_topics(self) -> int:
        return self.phi.shape[1]

    @property
    def vocab_size(self) -> int:
        return self.phi.shape[0]

    def to_dict(self) -> dict:
        return {
            "n_topics": self.n_topics,
            "vocab_size": self.vocab_size,
            "alpha": [float(a) for a in self.alpha],
            "beta": float(self.beta),
            "seed": int(self.seed),
            "phi": [[float(v) for v in row] for row in self.phi],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TopicModel":
        return cls(np.array(doc["phi"], dtype=np.float64), np.array(doc["alpha"], dtype=np.float64),
                   float(doc["beta"]), int(doc.get("seed", 0)))


def dirichlet_pdf(pi, alpha) -> float:
    """Dirichlet density at ``pi``, which must lie on the open simplex."""
    p = np.asarray(pi, dtype=np.float64)
    a = np.asarray(alpha, dtype=np.float64)
    if p.ndim != 1 or p.shape != a.shape:
        raise ShapeError("pi and alpha must be 1-D and the same length")
    if np.any(a <= 0):
        raise DomainError("alpha entries must be positive")
    if np.any(p <= 0) or abs(p.sum() - 1.0) > 1e-9:
        raise DomainError("pi must lie on the open probability simplex")
    return float(np.exp(gammaln(a.sum()) - gammaln(a).sum() + np.sum((a - 1.0) * np.log(p))))


@dataclass
class EStepResult:
    gamma: np.ndarray
    responsibilities: np.ndarray  # (U, K) for the distinct words in ``words``
    words: np.ndarray
    bound: float
    trace: list = field(default_factory=list)


def _doc_bound(n, logphi, r, gamma, alpha):
    elog = digamma(gamma) - digamma(gamma.sum())
    return float(
        gammaln(alpha.sum()) - gammaln(alpha).sum() + np.dot(alpha - 1.0, elog)
        + np.dot(n, (r * elog).sum(axis=1) + (r * np.where(r > 0, logphi, 0.0)).sum(axis=1) - xlogy(r, r).sum(axis=1))
        - gammaln(gamma.sum()) + gammaln(gamma).sum() - np.dot(gamma - 1.0, elog)
    )


def _estep(n, logphi, alpha, gamma, tol, max_iter, want_trace):
    trace = []
    for _ in range(max_iter):
        elog = digamma(gamma) - digamma(gamma.sum())
        logr = logphi + elog
        logr -= logr.max(axis=1, keepdims=True)
        r = np.exp(logr)
        r /= r.sum(axis=1, keepdims=True)
        new = alpha + n @ r
        change = np.abs(new - gamma).sum()
        gamma = new
        if want_trace:
            trace.append(_doc_bound(n, logphi, r, gamma, alpha))
        if change < tol:
            break
    return gamma, r, trace


def variational_estep(doc, model: TopicModel, gamma0=None, tol: float = 1e-6, max_iter: int = 100,
                      trace: bool = False) -> EStepResult:
    """Coordinate ascent on one document's variational parameters.

    ``doc`` is a :class:`BagOfWords` or a length-V count vector. Iterates
    until ``gamma`` moves less than ``tol`` in L1.
    """
    counts = np.asarray(doc.counts if isinstance(doc, BagOfWords) else doc)
    if counts.ndim != 1 or counts.shape[0] != model.vocab_size:
        raise InputError(f"document must be a count vector of length {model.vocab_size}")
    if np.any(counts < 0):
        raise InputError("word counts must be non-negative")
    words = np.flatnonzero(counts)
    n = counts[words].astype(np.float64)
    with np.errstate(divide="ignore"):
        logphi = np.log(model.phi[words])
    alpha = model.alpha
    g = alpha + n.sum() / model.n_topics if gamma0 is None else np.asarray(gamma0, dtype=np.float64)
    if words.size == 0:
        return EStepResult(alpha.copy(), np.zeros((0, model.n_topics)), words, 0.0, [0.0] if trace else [])
    gamma, r, tr = _estep(n, logphi, alpha, g, tol, max_iter, trace)
    return EStepResult(gamma, r, words, _doc_bound(n, logphi, r, gamma, alpha), tr)


@dataclass
class LdaFit:
    model: TopicModel
    gamma: np.ndarray
    weights: np.ndarray
    bound_trace: list
    converged: bool


def _log_topic_prior(phi, beta):
    v = phi.shape[0]
    return float(phi.shape[1] * (gammaln(v * (beta + 1.0)) - v * gammaln(beta + 1.0)) + beta * np.log(phi).sum())


def _initial_phi(counts, n_topics, beta, seed):
    rng = np.random.default_rng(seed)
    freq = counts.sum(axis=0).astype(np.float64) + beta
    phi = freq[:, None] * rng.exponential(1.0, size=(counts.shape[1], n_topics))
    return phi / phi.sum(axis=0)


def lda_fit(counts, n_topics: int = 20, alpha: float = 1.0, beta: float = 0.01, seed: int = 0,
            max_iter: int = 500, tol: float = 1e-6, estep_tol: float = 1e-6, estep_max_iter: int = 100,
            jobs: int = 1) -> LdaFit:
    """Variational EM for LDA on an ``(M, V)`` count matrix.

    Stops when the bound changes by less than ``tol`` relative, or after
    ``max_iter`` rounds. Returned ``weights`` are the normalized
    ``gamma - alpha`` (the expected topic counts per document).
    """
    c = np.asarray(counts)
    if c.ndim != 2 or c.shape[0] == 0:
        raise InputError("counts must be a non-empty (documents, vocabulary) matrix")
    if not np.issubdtype(c.dtype, np.integer) or np.any(c < 0):
        raise InputError("counts must be non-negative integers")
    if n_topics < 1:
        raise DomainError("n_topics must be at least 1")
    if alpha <= 0 or beta < 0:
        raise DomainError("alpha must be positive and beta non-negative")
    m, v = c.shape
    alpha_vec = np.full(n_topics, float(alpha))
    phi = _initial_phi(c, n_topics, beta, seed)
    docs = []
    for row in c:
        w = np.flatnonzero(row)
        docs.append((w, row[w].astype(np.float64)))
    gamma = alpha_vec + c.sum(axis=1, keepdims=True) / n_topics

    def one(d):
        w, n = docs[d]
        if w.size == 0:
            return alpha_vec.copy(), None, 0.0
        with np.errstate(divide="ignore"):
            logphi = np.log(phi[w])
        g, r, _ = _estep(n, logphi, alpha_vec, gamma[d], estep_tol, estep_max_iter, False)
        return g, r, _doc_bound(n, logphi, r, g, alpha_vec)

    pool = ThreadPoolExecutor(max_workers=jobs) if jobs > 1 else None
    trace, converged = [], False
    try:
        for _ in range(max_iter):
            results = list(pool.map(one, range(m))) if pool else [one(d) for d in range(m)]
            expected = np.zeros((v, n_topics))
            bound = 0.0
            for d, (g, r, b) in enumerate(results):
                gamma[d] = g
                bound += b
                if r is not None:
                    w, n = docs[d]
                    expected[w] += n[:, None] * r
            if beta > 0:
                bound += _log_topic_prior(phi, beta)
            trace.append(bound)
            if len(trace) > 1 and abs(trace[-1] - trace[-2]) <= tol * abs(trace[-2]):
                converged = True
                break
            phi = expected + beta
            total = phi.sum(axis=0)
            # a topic with no mass at all (beta = 0) falls back to uniform
            phi = np.where(total > 0, phi / np.where(total > 0, total, 1.0), 1.0 / v)
    finally:
        if pool:
            pool.shutdown()
    model = TopicModel(phi, alpha_vec, float(beta), int(seed))
    return LdaFit(model, gamma, _weights(gamma, alpha_vec), trace, converged)


def _weights(gamma, alpha):
    w = np.clip(gamma - alpha, 0.0, None)
    s = w.sum(axis=1, keepdims=True)
    return np.divide(w, s, out=np.full_like(w, 1.0 / w.shape[1]), where=s > 0)


def aggregate_panels(weights: np.ndarray, panel_of_doc, n_panels: int | None = None) -> np.ndarray:
    """Per-panel sum of member weight vectors, renormalized to the simplex: ``(P, K)``."""
    w = np.asarray(weights, dtype=np.float64)
    p = np.asarray(panel_of_doc, dtype=np.int64)
    if p.shape != (w.shape[0],):
        raise InputError("every document needs exactly one panel index")
    n_panels = int(p.max()) + 1 if n_panels is None else n_panels
    if p.size and (p.min() < 0 or p.max() >= n_panels):
        raise InputError("document mapped to no valid panel")
    out = np.zeros((n_panels, w.shape[1]))
    np.add.at(out, p, w)
    if np.any(np.bincount(p, minlength=n_panels) == 0):
        raise InputError("every panel needs at least one document")
    return out / out.sum(axis=1, keepdims=True)


def pattern_subset_score(weights: np.ndarray, patterns) -> np.ndarray:
    """Summed weight of the given 1-based pattern numbers, per document (0 for an empty subset)."""
    w = np.atleast_2d(np.asarray(weights, dtype=np.float64))
    idx = np.unique(np.asarray(list(patterns), dtype=np.int64))
    if idx.size and (idx.min() < 1 or idx.max() > w.shape[1]):
        raise InputError(f"pattern numbers must lie in 1..{w.shape[1]}")
    return w[:, idx - 1].sum(axis=1)
