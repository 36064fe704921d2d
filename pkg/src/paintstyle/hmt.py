"""Two-state Gaussian-mixture hidden Markov trees on wavelet magnitudes.

Each subband's magnitudes form a quadtree: the single coefficient at the
coarsest level is the root and every node has the four spatially co-located
coefficients of the next finer level as children. A hidden state (S: small
variance, L: large variance) sits on every node; a child's state depends on its
parent's through a per-level 2x2 transition matrix, and the observation is a
zero-mean Gaussian with the state's variance. Parameters are tied across all
nodes of one level.

Fitting is EM with the upward-downward recursion in its conditional
("smoothed") form, which normalizes at every node and therefore never
underflows. All routines work on a batch of independent trees at once; the
batch axes lead every array.

Feature layout
--------------
:func:`assemble_features` packs six fitted subbands into 120 numbers. For
subband ``s`` (0..5, orientation order of :mod:`paintstyle.transform`), depth
``d`` (0 = coarsest scale .. 5 = finest) and state ``q`` (0 = S, 1 = L)::

    feature[20*s + 2*d + q]        = log variance of state q at depth d
    feature[20*s + 12 + 2*t + q]   = P(child state q | parent state q) for the
                                     transition into depth t + 2, t = 0..3
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ShapeError

__all__ = [
    "EMConfig",
    "HmtParams",
    "CoefficientForest",
    "build_forest",
    "forest_from_parents",
    "initial_params",
    "upward_downward",
    "log_likelihood",
    "em_fit",
    "assemble_features",
    "feature_index",
    "FEATURE_LENGTH",
]

FEATURE_LENGTH = 120
_N_SUBBANDS = 6
_N_SCALES = 6
_N_TRANSITIONS_KEPT = 4
_BLOCK = 2 * _N_SCALES + 2 * _N_TRANSITIONS_KEPT
_LOG_2PI = np.log(2.0 * np.pi)
_TINY = 1e-300


@dataclass(frozen=True)
class EMConfig:
    max_iter: int = 200
    tol: float = 1e-6
    var_floor: float = 1e-12
    init_persistence: float = 0.8


@dataclass(frozen=True)
class HmtParams:
    """Tied HMT parameters for a batch of trees.

    Attributes
    ----------
    root_prior : (..., 2)
        State distribution at depth 0.
    transitions : (..., D-1, 2, 2)
        ``transitions[..., d-1, j, k] = P(state k at depth d | parent state j)``.
    sigma : (..., D, 2)
        Standard deviations; column 0 is the small-variance state.
    degenerate : (...) bool
        True where the input carried no identifiable mixture.
    """

    root_prior: np.ndarray
    transitions: np.ndarray
    sigma: np.ndarray
    degenerate: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.degenerate is None:
            object.__setattr__(self, "degenerate", np.zeros(self.root_prior.shape[:-1], dtype=bool))

    @property
    def depth(self) -> int:
        return self.sigma.shape[-2]

    @property
    def batch_shape(self) -> tuple:
        return self.root_prior.shape[:-1]

    def __getitem__(self, index) -> "HmtParams":
        return HmtParams(self.root_prior[index], self.transitions[index],
                         self.sigma[index], self.degenerate[index])


@dataclass(frozen=True)
class CoefficientForest:
    """Values and parent links of one or more equally shaped trees, by depth.

    ``values[d]`` has shape ``batch + (n_d,)``; ``parents[d - 1][i]`` is the
    index (into depth ``d - 1``) of node ``i`` at depth ``d``. Parent indices
    are non-decreasing so each parent's children are contiguous.
    ``node_ids[d]`` maps each node back to its caller-side identifier (flat
    grid index for quadtrees, original node number for generic trees).
    """

    values: tuple
    parents: tuple
    node_ids: tuple

    @property
    def depth(self) -> int:
        return len(self.values)

    @property
    def node_counts(self) -> list:
        return [v.shape[-1] for v in self.values]

    @property
    def batch_shape(self) -> tuple:
        return self.values[0].shape[:-1]


# ---------------------------------------------------------------------------
# forest construction


def build_forest(pyr, subband=None, levels: int = _N_SCALES) -> CoefficientForest:
    """Wire a magnitude pyramid into quadtrees.

    Parameters
    ----------
    pyr : MagnitudePyramid
    subband : int or None
        Orientation index 0..5, or None to stack all six along a new trailing
        batch axis.
    levels : int
        Required level count.
    """
    if pyr.levels != levels:
        raise ShapeError(f"expected a {levels}-level pyramid, got {pyr.levels}")
    grids = [pyr[lvl] for lvl in range(levels, 0, -1)]  # coarse -> fine
    side = grids[0].shape[-1]
    for d, g in enumerate(grids):
        if g.shape[-3] != _N_SUBBANDS or g.shape[-2:] != (side * 2 ** d, side * 2 ** d):
            raise ShapeError("pyramid levels are not quadtree-consistent")

    rows, cols = np.divmod(np.arange(side * side), side)
    values, parents, ids = [], [], []
    for d, g in enumerate(grids):
        if d > 0:
            n_parent = rows.size
            rows = (2 * rows[:, None] + np.array([0, 0, 1, 1])).ravel()
            cols = (2 * cols[:, None] + np.array([0, 1, 0, 1])).ravel()
            parents.append(np.repeat(np.arange(n_parent), 4))
        width = g.shape[-1]
        flat = g.reshape(g.shape[:-2] + (width * width,))
        picked = flat[..., rows * width + cols]
        if subband is not None:
            picked = picked[..., subband, :]
        values.append(np.ascontiguousarray(picked, dtype=np.float64))
        ids.append(rows * width + cols)
    return CoefficientForest(tuple(values), tuple(parents), tuple(ids))


def forest_from_parents(values, parent) -> CoefficientForest:
    """Build a forest from a generic parent array (``-1`` marks roots).

    ``values`` may carry leading batch axes; the last axis indexes nodes.
    """
    values = np.asarray(values, dtype=np.float64)
    parent = np.asarray(parent, dtype=np.int64)
    n = parent.size
    if values.shape[-1] != n:
        raise ShapeError("values and parent array disagree on node count")
    depth = np.full(n, -1)
    for i in range(n):
        chain, j = [], i
        while depth[j] < 0 and parent[j] >= 0:
            chain.append(j)
            j = parent[j]
            if len(chain) > n:
                raise ShapeError("parent array contains a cycle")
        if depth[j] < 0:
            depth[j] = 0
        for k in reversed(chain):
            depth[k] = depth[parent[k]] + 1

    order = [np.flatnonzero(depth == 0)]
    parents = []
    for d in range(1, depth.max() + 1):
        pos = {node: i for i, node in enumerate(order[-1])}
        members = np.flatnonzero(depth == d)
        link = np.array([pos[parent[m]] for m in members])
        srt = np.argsort(link, kind="stable")
        order.append(members[srt])
        parents.append(link[srt])
    vals = tuple(np.ascontiguousarray(values[..., o]) for o in order)
    return CoefficientForest(vals, tuple(parents), tuple(order))


# ---------------------------------------------------------------------------
# parameters


def initial_params(forest: CoefficientForest, config: EMConfig = EMConfig()) -> HmtParams:
    """Deterministic starting point: sigma_S, sigma_L = 0.5x and 2x the level RMS."""
    batch = forest.batch_shape
    rms = np.stack([np.sqrt(np.mean(v * v, axis=-1)) for v in forest.values], axis=-1)
    rms = np.maximum(rms, np.sqrt(config.var_floor))
    sigma = np.stack([0.5 * rms, 2.0 * rms], axis=-1)
    sigma = np.maximum(sigma, np.sqrt(config.var_floor))
    p = config.init_persistence
    trans = np.broadcast_to(np.array([[p, 1 - p], [1 - p, p]]),
                            batch + (forest.depth - 1, 2, 2)).copy()
    root = np.full(batch + (2,), 0.5)
    return HmtParams(root, trans, sigma)


def _validate(params: HmtParams) -> None:
    if np.any(~(params.sigma > 0)):
        raise DomainError("state standard deviations must be positive")
    rows = params.transitions.sum(axis=-1)
    if np.any(np.abs(rows - 1.0) > 1e-9) or np.any(params.transitions < 0):
        raise DomainError("transition rows must lie on the simplex")
    if np.any(np.abs(params.root_prior.sum(axis=-1) - 1.0) > 1e-9):
        raise DomainError("root prior must lie on the simplex")


# ---------------------------------------------------------------------------
# E-step


def _group_product(msg: np.ndarray, parent: np.ndarray, n_parent: int) -> np.ndarray:
    """Product of child messages per parent; parents without children get 1."""
    b, n = msg.shape
    if n == 4 * n_parent and np.array_equal(parent, np.repeat(np.arange(n_parent), 4)):
        m = msg.reshape(b, n_parent, 4)
        return m[:, :, 0] * m[:, :, 1] * m[:, :, 2] * m[:, :, 3]
    out = np.ones((b, n_parent))
    starts = np.flatnonzero(np.r_[True, parent[1:] != parent[:-1]])
    out[:, parent[starts]] = np.multiply.reduceat(msg, starts, axis=1)
    return out


def _e_step(sq, parents, root, trans, var, want_stats=True):
    """Conditional upward-downward pass over a flat batch.

    sq : list of (B, n_d) squared observations
    root : (B, 2); trans : (B, D-1, 2, 2); var : (B, D, 2)

    Returns ``(loglik, posteriors, stats)``. Posteriors are ``(p_S, p_L)``
    pairs per depth; ``stats`` holds the M-step sufficient statistics (root
    posterior mean, per-depth posterior weights and weighted squares, and
    summed parent-child joint posteriors) or None.
    """
    D = len(sq)
    batch = sq[0].shape[0]
    marg = [(root[:, 0], root[:, 1])]
    for d in range(1, D):
        a0, a1 = marg[-1]
        t = trans[:, d - 1]
        marg.append((a0 * t[:, 0, 0] + a1 * t[:, 1, 0], a0 * t[:, 0, 1] + a1 * t[:, 1, 1]))
    marg = [(np.maximum(m0, _TINY)[:, None], np.maximum(m1, _TINY)[:, None]) for m0, m1 in marg]
    half_inv = 0.5 / var
    const = -0.5 * (_LOG_2PI + np.log(var))

    # upward: ratio[d] = P(state | subtree data) / P(state), msg[d] = message to parent
    ratio = [None] * D
    msg = [None] * D
    child = [None] * D
    loglik = np.zeros(batch)
    for d in range(D - 1, -1, -1):
        lf0 = const[:, d, 0][:, None] - sq[d] * half_inv[:, d, 0][:, None]
        lf1 = const[:, d, 1][:, None] - sq[d] * half_inv[:, d, 1][:, None]
        top = np.maximum(lf0, lf1)
        g0 = np.exp(lf0 - top)
        g1 = np.exp(lf1 - top)
        if child[d] is not None:
            g0 *= child[d][0]
            g1 *= child[d][1]
        norm = g0 * marg[d][0] + g1 * marg[d][1]
        loglik += np.sum(top + np.log(norm), axis=-1)
        inv = 1.0 / norm
        g0 *= inv
        g1 *= inv
        ratio[d] = (g0, g1)
        if d > 0:
            t = trans[:, d - 1]
            m0 = g0 * t[:, 0, 0][:, None] + g1 * t[:, 0, 1][:, None]
            m1 = g0 * t[:, 1, 0][:, None] + g1 * t[:, 1, 1][:, None]
            msg[d] = (m0, m1)
            n_parent = sq[d - 1].shape[-1]
            child[d - 1] = (_group_product(m0, parents[d - 1], n_parent),
                            _group_product(m1, parents[d - 1], n_parent))

    post = [None] * D
    post[0] = (ratio[0][0] * marg[0][0], ratio[0][1] * marg[0][1])
    if want_stats:
        weight = np.empty((batch, D, 2))
        wsq = np.empty((batch, D, 2))
        joint = np.empty((batch, max(D - 1, 0), 2, 2))
    for d in range(D):
        if d > 0:
            link = parents[d - 1]
            t = trans[:, d - 1]
            # a zero message forces a zero parent posterior; that term contributes nothing
            m0, m1 = msg[d]
            q0 = np.divide(post[d - 1][0][:, link], m0, out=np.zeros_like(m0), where=m0 > 0)
            q1 = np.divide(post[d - 1][1][:, link], m1, out=np.zeros_like(m1), where=m1 > 0)
            r0, r1 = ratio[d]
            post[d] = (r0 * (q0 * t[:, 0, 0][:, None] + q1 * t[:, 1, 0][:, None]),
                       r1 * (q0 * t[:, 0, 1][:, None] + q1 * t[:, 1, 1][:, None]))
            if want_stats:
                joint[:, d - 1, 0, 0] = t[:, 0, 0] * np.sum(q0 * r0, axis=-1)
                joint[:, d - 1, 0, 1] = t[:, 0, 1] * np.sum(q0 * r1, axis=-1)
                joint[:, d - 1, 1, 0] = t[:, 1, 0] * np.sum(q1 * r0, axis=-1)
                joint[:, d - 1, 1, 1] = t[:, 1, 1] * np.sum(q1 * r1, axis=-1)
        if want_stats:
            for k in range(2):
                weight[:, d, k] = np.sum(post[d][k], axis=-1)
                wsq[:, d, k] = np.sum(post[d][k] * sq[d], axis=-1)
    stats = None
    if want_stats:
        root_post = np.stack([post[0][0].mean(axis=-1), post[0][1].mean(axis=-1)], axis=-1)
        stats = (root_post, weight, wsq, joint)
    return loglik, post, stats


def _flatten(forest: CoefficientForest):
    batch = forest.batch_shape
    sq = [np.ascontiguousarray((v * v).reshape((-1, v.shape[-1]))) for v in forest.values]
    return batch, sq


def _flat_params(params: HmtParams, batch: tuple):
    size = int(np.prod(batch, dtype=np.int64))
    D = params.sigma.shape[-2]
    root = np.broadcast_to(params.root_prior, batch + (2,)).reshape(size, 2)
    trans = np.broadcast_to(params.transitions, batch + (D - 1, 2, 2)).reshape(size, D - 1, 2, 2)
    var = np.broadcast_to(params.sigma, batch + (D, 2)).reshape(size, D, 2) ** 2
    return root, trans, var


def upward_downward(forest: CoefficientForest, params: HmtParams) -> list:
    """Posterior state probabilities of every node.

    Returns a list over depths of arrays ``batch + (n_d, 2)`` whose last axis
    is ``(P(S | data), P(L | data))``.

    Raises
    ------
    DomainError
        For non-positive standard deviations or off-simplex probabilities.
    """
    _validate(params)
    if params.depth != forest.depth:
        raise ShapeError("parameter depth does not match the forest")
    batch, sq = _flatten(forest)
    _, post, _ = _e_step(sq, forest.parents, *_flat_params(params, batch), want_stats=False)
    return [np.stack(p, axis=-1).reshape(batch + (p[0].shape[-1], 2)) for p in post]


def log_likelihood(forest: CoefficientForest, params: HmtParams) -> np.ndarray:
    """Log-likelihood of the observations under ``params`` (one value per tree batch entry)."""
    _validate(params)
    batch, sq = _flatten(forest)
    ll, _, _ = _e_step(sq, forest.parents, *_flat_params(params, batch), want_stats=False)
    return ll.reshape(batch)


# ---------------------------------------------------------------------------
# EM


def _m_step(stats, trans, var, floor):
    root_post, weight, wsq, joint = stats
    ok = weight > _TINY
    new_var = np.where(ok, np.maximum(wsq / np.where(ok, weight, 1.0), floor), var)
    rowsum = joint.sum(axis=-1, keepdims=True)
    ok = rowsum > _TINY
    new_trans = np.where(ok, joint / np.where(ok, rowsum, 1.0), trans)
    return root_post, new_trans, new_var


def _sort_states(root, trans, var):
    """Relabel states per depth so the small-variance state comes first."""
    root, trans, var = root.copy(), trans.copy(), var.copy()
    D = var.shape[1]
    for d in range(D):
        swap = var[:, d, 0] > var[:, d, 1]
        if not np.any(swap):
            continue
        var[swap, d] = var[swap, d, ::-1]
        if d == 0:
            root[swap] = root[swap, ::-1]
        else:
            trans[swap, d - 1] = trans[swap, d - 1][:, :, ::-1]
        if d < D - 1:
            trans[swap, d] = trans[swap, d][:, ::-1, :]
    return root, trans, var


def em_fit(forest: CoefficientForest, config: EMConfig = EMConfig()):
    """Fit tied two-state HMT parameters by EM.

    Every tree in the batch is fitted independently; the loop stops per tree
    when the relative log-likelihood change drops below ``config.tol`` or
    after ``config.max_iter`` E-steps. A tree whose magnitudes are all equal
    has no identifiable mixture: it returns both variances equal to
    ``max(mean square, var_floor)``, the initial transitions, the
    ``degenerate`` flag set and a one-entry trace.

    Returns
    -------
    params : HmtParams
        Batch-shaped like the forest; states sorted so sigma_S <= sigma_L.
    traces : ndarray or list of ndarray
        Log-likelihood after each E-step (a list when the forest is batched).
    """
    if forest.depth < 2:
        raise ShapeError("EM needs trees with at least two levels")
    batch, sq = _flatten(forest)
    size = sq[0].shape[0]
    init = initial_params(forest, config)
    root, trans, var = _flat_params(init, batch)
    root, trans, var = root.copy(), trans.copy(), var.copy()

    allsq = np.concatenate(sq, axis=-1)
    degenerate = np.ptp(allsq, axis=-1) <= 1e-24 * np.maximum(allsq.max(axis=-1), 1.0)
    level = np.maximum(allsq.mean(axis=-1), config.var_floor)
    var[degenerate] = level[degenerate][:, None, None]

    traces = [[] for _ in range(size)]
    deg_idx = np.flatnonzero(degenerate)
    if deg_idx.size:
        ll, _, _ = _e_step([s[deg_idx] for s in sq], forest.parents,
                           root[deg_idx], trans[deg_idx], var[deg_idx], want_stats=False)
        for i, value in zip(deg_idx, ll):
            traces[i].append(float(value))

    active = np.flatnonzero(~degenerate)
    previous = np.full(size, np.nan)
    sub_sq = [s[active] for s in sq]
    for it in range(config.max_iter):
        if active.size == 0:
            break
        ll, _, stats = _e_step(sub_sq, forest.parents, root[active], trans[active], var[active])
        for i, value in zip(active, ll):
            traces[i].append(float(value))
        prev = previous[active]
        done = np.abs(ll - prev) <= config.tol * np.abs(prev)
        if it == config.max_iter - 1:
            done[:] = True
        previous[active] = ll
        keep = np.flatnonzero(~done)
        if keep.size:
            stats = tuple(x[keep] for x in stats)
            idx = active[keep]
            root[idx], trans[idx], var[idx] = _m_step(stats, trans[idx], var[idx], config.var_floor)
        if keep.size < active.size:
            active = active[keep]
            sub_sq = [s[keep] for s in sub_sq]

    root, trans, var = _sort_states(root, trans, var)
    D = forest.depth
    params = HmtParams(root.reshape(batch + (2,)),
                       trans.reshape(batch + (D - 1, 2, 2)),
                       np.sqrt(var).reshape(batch + (D, 2)),
                       degenerate.reshape(batch))
    trace_arrays = [np.asarray(t) for t in traces]
    if batch == ():
        return params, trace_arrays[0]
    return params, trace_arrays


# ---------------------------------------------------------------------------
# features


def feature_index(subband: int, kind: str, position: int, state: int) -> int:
    """Position of one parameter inside the 120-entry feature vector.

    ``kind`` is ``"variance"`` (``position`` = depth 0..5, coarse to fine) or
    ``"transition"`` (``position`` = 0..3 for transitions into depths 2..5).
    """
    if kind == "variance":
        return _BLOCK * subband + 2 * position + state
    if kind == "transition":
        return _BLOCK * subband + 2 * _N_SCALES + 2 * position + state
    raise ValueError(f"unknown parameter kind {kind!r}")


def assemble_features(params: HmtParams, log_variance: bool = True) -> np.ndarray:
    """Pack six subbands of HMT parameters into the 120-entry feature vector.

    ``params`` must have the six subbands on its last batch axis and six
    depths. Variances are stored as natural logs unless ``log_variance`` is
    False; transition entries are the persistence probabilities of the four
    finest parent-to-child transitions.
    """
    if params.batch_shape[-1:] != (_N_SUBBANDS,) or params.depth != _N_SCALES:
        raise ShapeError(f"need {_N_SUBBANDS} subbands x {_N_SCALES} scales, got "
                         f"batch {params.batch_shape} and depth {params.depth}")
    var = params.sigma ** 2
    var_part = np.log(var) if log_variance else var
    var_part = var_part.reshape(var.shape[:-2] + (2 * _N_SCALES,))
    kept = params.transitions[..., -_N_TRANSITIONS_KEPT:, :, :]
    persist = np.stack([kept[..., 0, 0], kept[..., 1, 1]], axis=-1)
    persist = persist.reshape(persist.shape[:-2] + (2 * _N_TRANSITIONS_KEPT,))
    block = np.concatenate([var_part, persist], axis=-1)
    return block.reshape(block.shape[:-2] + (FEATURE_LENGTH,))
