"""Independent reference computations used to check the fast code paths.

Nothing here shares code with the package: each oracle is the slow,
obviously-correct version of something the package does cleverly.
"""
import itertools

import numpy as np


def tree_depths(parent):
    depth = []
    for i in range(len(parent)):
        d, j = 0, i
        while parent[j] >= 0:
            j = parent[j]
            d += 1
        depth.append(d)
    return depth


def enumerate_hmt(values, parent, root, trans, sigma):
    """Exact node posteriors and log-likelihood by summing over all 2**n state paths.

    Parameters are tied by depth: ``trans[d - 1]`` governs parent->child into
    depth ``d`` and ``sigma[d]`` the emission at depth ``d``.
    """
    n = len(parent)
    depth = tree_depths(parent)
    post = np.zeros((n, 2))
    total = 0.0
    for states in itertools.product((0, 1), repeat=n):
        p = 1.0
        for i, s in enumerate(states):
            d = depth[i]
            if parent[i] < 0:
                p *= root[s]
            else:
                p *= trans[d - 1][states[parent[i]], s]
            sd = sigma[d][s]
            p *= np.exp(-values[i] ** 2 / (2 * sd * sd)) / np.sqrt(2 * np.pi * sd * sd)
        total += p
        for i, s in enumerate(states):
            post[i, s] += p
    return post / total, np.log(total)


def random_tree(rng, n):
    """Random parent array with node 0 as root and parent[i] < i."""
    parent = [-1]
    for i in range(1, n):
        parent.append(int(rng.integers(0, i)))
    return np.array(parent)


def sample_quadtrees(rng, n_trees, depth, root, trans, sigma):
    """Draw observations from a tied quadtree HMT.

    Returns a list over depths (coarse first) of arrays ``(n_trees, 4**d)``
    ordered so that children of parent ``i`` occupy ``4i .. 4i+3`` -- the
    same ordering a quadtree forest uses.
    """
    states = [(rng.random(n_trees) < root[1]).astype(int)[:, None]]
    for d in range(1, depth):
        parent_states = np.repeat(states[-1], 4, axis=1)
        p_large = trans[d - 1][parent_states, 1]
        states.append((rng.random(parent_states.shape) < p_large).astype(int))
    values = []
    for d, st in enumerate(states):
        sd = np.where(st == 1, sigma[d][1], sigma[d][0])
        values.append(np.abs(rng.normal(0.0, 1.0, st.shape) * sd))
    return values


def brute_two_means(x):
    """Optimal 2-partition of 1-D points: best split of the sorted order."""
    order = np.argsort(x)
    xs = x[order]
    best = (np.inf, None)
    for cut in range(1, len(xs)):
        a, b = xs[:cut], xs[cut:]
        cost = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
        if cost < best[0]:
            best = (cost, cut)
    labels = np.zeros(len(x), dtype=int)
    labels[order[best[1]:]] = 1
    return labels, best[0]
