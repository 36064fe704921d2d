"""From feature vectors to keywords to stylistic patterns.

Run: python3 demos/03_keywords_and_patterns.py

Feature vectors are standardized and split by a bisecting 2-means tree; each
leaf is a keyword. Every sub-image becomes a bag of keywords, and LDA finds
patterns (distributions over keywords) and per-sub-image pattern weights.
Here the "features" are synthetic: two styles drawn from different Gaussian
clusters.
"""
import numpy as np

from paintstyle.topics import aggregate_panels, bags_from_labels, lda_fit
from paintstyle.vocab import assign, build_vocab, standardize

rng = np.random.default_rng(0)
n_docs, per_doc, dim = 24, 196, 120
style = np.repeat([0, 1], n_docs // 2)             # first half style 0, rest style 1
centres = rng.normal(0, 2, (2, 6, dim))            # six texture clusters per style
doc_index = np.repeat(np.arange(n_docs), per_doc)
cluster = rng.integers(0, 6, n_docs * per_doc)
features = centres[style[doc_index], cluster] + rng.standard_normal((n_docs * per_doc, dim))

tree, labels = build_vocab(standardize(features), depth=6, seed=0)
print(f"vocabulary: {tree.leaf_count} keywords, {np.count_nonzero(tree.sizes[-1])} used")
print("label of the first patch at each level:", labels[0].tolist())
print("assign() agrees with training labels:", np.mean(assign(features, tree) == labels[:, -1]).round(4))

counts = bags_from_labels(doc_index, labels[:, -1], n_docs, tree.leaf_count)
fit = lda_fit(counts, n_topics=4, seed=0)
print(f"\nLDA converged={fit.converged} after {len(fit.bound_trace)} iterations")
profiles = aggregate_panels(fit.weights, style)
for s, row in enumerate(profiles):
    print(f"style {s} mean pattern weights: {np.round(row, 3).tolist()}")
