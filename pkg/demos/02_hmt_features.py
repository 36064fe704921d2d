"""Hidden Markov tree features for a single patch.

Run: python3 demos/02_hmt_features.py

Each of the six subbands becomes a quadtree of 1365 wavelet magnitudes
(1 + 4 + ... + 1024). A two-state (small/large variance) hidden Markov tree
is fitted to each by EM, and the fitted variances and state persistence
probabilities form a 120-entry feature vector.
"""
import numpy as np

from paintstyle.colorspace import patch_to_planes
from paintstyle.hmt import assemble_features, build_forest, em_fit, feature_index
from paintstyle.synthetic import stripe_panel
from paintstyle.transform import dtcwt_forward, fuse_magnitudes

# patch A: +45 stripes, patch B: -45 stripes
patches = np.stack([stripe_panel(64, 64, 45, seed=0), stripe_panel(64, 64, -45, seed=1)]) / 255.0
planes = patch_to_planes(patches)                      # (2, 3, 64, 64)
pyr = dtcwt_forward(planes)
mag = fuse_magnitudes(*(pyr.select((slice(None), c)) for c in range(3)))
forest = build_forest(mag)
print("nodes per depth:", forest.node_counts)

params, traces = em_fit(forest)
print(f"EM iterations per tree: min {min(map(len, traces))}, max {max(map(len, traces))}")
ok = all(np.all(np.diff(t) >= -1e-8) for t in traces)
print("log-likelihood never decreased:", ok)

feats = assemble_features(params)
print("feature matrix:", feats.shape)

print("\nlarge-state log variance by depth (0 = coarsest) in the +45 and -45 subbands")
print("depth   A:+45   A:-45   B:+45   B:-45")
for d in range(6):
    vals = [f[feature_index(s, "variance", d, 1)] for f in feats for s in (1, 4)]
    print(f"  {d}   " + "  ".join(f"{v:6.2f}" for v in vals))

print("\nlarge-state persistence into the finest scale (+45 subband):",
      f"{feats[0][feature_index(1, 'transition', 3, 1)]:.3f}")
