"""The whole pipeline on a synthetic two-panel corpus.

Run: python3 demos/04_end_to_end.py [out_dir]

Panel A is painted in +45 degree stripes, panel B in -45 degree stripes.
The stage files and the SVG report land in ``out_dir`` (default
``demo-out``). The configuration is shrunk (128-pixel sub-images, a
64-keyword vocabulary, 4 patterns) so the run takes a few seconds. The
same run from a shell is::

    paintstyle run-all --config demo-out/config.yaml --out-dir demo-out
"""
import json
import sys
from pathlib import Path

import numpy as np

from paintstyle.pipeline import load_config, run_all, verify_provenance
from paintstyle.pipeline import formats as fm
from paintstyle.synthetic import write_stripe_corpus

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-out")
images = write_stripe_corpus(out / "corpus", grid=(3, 3), subimage_size=128)
config = {
    "seed": 0,
    "images": {pid: str(Path(p).resolve()) for pid, p in images.items()},
    "tiling": {"subimage_size": 128},
    "vocab": {"depth": 6},
    "topics": {"n_patterns": 4},
    "embed": {"iterations": 500},
}
(out / "config.yaml").write_text(json.dumps(config, indent=1))
cfg = load_config(out / "config.yaml")

summary = run_all(cfg, out)
print("stages run:", ", ".join(summary.stages))
print("provenance problems:", verify_provenance(out) or "none")

report = fm.read_json_doc(out / "report" / "report.json", "report")
for pid, prof in zip(report["panels"], report["profiles"]):
    print(f"panel {pid} pattern profile: {np.round(prof, 3).tolist()}")
for sub in report["subsets"]:
    bright = ", ".join(f"{p}={b:.2f}" for p, b in sub["mean_brightness"].items())
    print(f"patterns {sub['patterns']}: mean heatmap brightness {bright}")
print(f"open {out / 'report'} for profiles.svg, tsne.svg and the heatmaps")
