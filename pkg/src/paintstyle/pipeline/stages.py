"""Stage runners: extract, vocab, topics, embed (report lives in ``report``).

Each runner reads the previous stage's files from ``out_dir``, checks their
magic, version and config hash against the current configuration, and writes
its own files with a provenance header. All outputs are deterministic
functions of the configuration and the input images.
"""
from __future__ import annotations

import dataclasses
import hashlib
import logging
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..colorspace import as_unit_rgb, patch_to_planes
from ..embed import TsneConfig, tsne
from ..errors import InputError, PipelineError
from ..hmt import EMConfig, assemble_features, build_forest, em_fit
from ..topics import bags_from_labels, lda_fit
from ..transform import dtcwt_forward, fuse_magnitudes
from ..vocab import build_vocab, standardize
from . import formats as fm
from .config import FeatureConfig, RunConfig, TilingConfig, stage_hashes
from .imageio import read_panel
from .tiling import subimage_grid, subimage_patches

log = logging.getLogger(__name__)

__all__ = [
    "StagePaths",
    "ExtractReport",
    "patch_features",
    "run_extract",
    "run_vocab",
    "run_topics",
    "run_embed",
    "load_features_checked",
    "verify_provenance",
]

# patches per EM batch; results do not depend on it
_CHUNK = 28


@dataclass(frozen=True)
class StagePaths:
    out_dir: Path

    def __post_init__(self):
        object.__setattr__(self, "out_dir", Path(self.out_dir))

    features = property(lambda self: self.out_dir / "features.bin")
    features_csv = property(lambda self: self.out_dir / "features.csv")
    vocab = property(lambda self: self.out_dir / "vocab.json")
    labels = property(lambda self: self.out_dir / "labels.csv")
    model = property(lambda self: self.out_dir / "model.json")
    weights = property(lambda self: self.out_dir / "weights.csv")
    embedding = property(lambda self: self.out_dir / "embedding.csv")
    embedding_svg = property(lambda self: self.out_dir / "embedding.svg")
    report_dir = property(lambda self: self.out_dir / "report")
    cache_dir = property(lambda self: self.out_dir / ".cache")


# ---------------------------------------------------------------------------
# extract


def patch_features(patches: np.ndarray, fcfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    """120-entry HMT feature vectors for ``(N, P, P, 3)`` RGB patches in [0, 1]."""
    em = EMConfig(max_iter=fcfg.em_max_iter, tol=fcfg.em_tol, var_floor=fcfg.var_floor)
    out = []
    for start in range(0, patches.shape[0], _CHUNK):
        planes = patch_to_planes(patches[start:start + _CHUNK])
        pyr = dtcwt_forward(planes, fcfg.levels)
        mag = fuse_magnitudes(*(pyr.select((slice(None), c)) for c in range(3)))
        params, _ = em_fit(build_forest(mag, levels=fcfg.levels), em)
        out.append(assemble_features(params, fcfg.log_variance))
    return np.concatenate(out, axis=0)


def _subimage_job(args):
    sub, tcfg, fcfg = args
    return patch_features(subimage_patches(as_unit_rgb(sub), tcfg), fcfg)


@dataclass
class ExtractReport:
    path: Path
    records: int
    panels: list
    failures: list = field(default_factory=list)  # (panel id, message)


def _cache_key(stage_hash: str, image_sha: str) -> str:
    return hashlib.sha256(f"{stage_hash}:{image_sha}".encode()).hexdigest()[:24]


def run_extract(cfg: RunConfig, out_dir, jobs: int = 1) -> ExtractReport:
    """Tile every panel, extract per-patch features, write ``features.bin``.

    Unreadable images are reported and skipped. Finished sub-images are
    cached under ``.cache/`` so an interrupted run resumes where it stopped;
    the cache is removed once the feature file is written.
    """
    if not cfg.images:
        raise InputError("no input images configured")
    paths = StagePaths(out_dir)
    h = stage_hashes(cfg)["extract"]
    tcfg, fcfg = cfg.tiling, cfg.features

    panels, failures, upstream, grids, sizes = [], [], {}, {}, {}
    tasks, keys = [], []
    for pid, path in cfg.images:
        try:
            img = read_panel(path)
            rows, cols = subimage_grid(img.shape[0], img.shape[1], tcfg)
        except InputError as exc:
            log.error("skipping panel %s: %s", pid, exc)
            failures.append((pid, str(exc)))
            continue
        sha = fm.sha256_file(path)
        upstream[f"image:{pid}"] = sha
        grids[pid] = [rows, cols]
        sizes[pid] = [int(img.shape[1]), int(img.shape[0])]
        cache = paths.cache_dir / "extract" / _cache_key(h, sha)
        s = tcfg.subimage_size
        for r in range(rows):
            for c in range(cols):
                tasks.append((img[r * s:(r + 1) * s, c * s:(c + 1) * s], tcfg, fcfg))
                keys.append((len(panels), r * cols + c, cache / f"{r * cols + c:05d}.npy"))
        panels.append(pid)
    if not panels:
        raise InputError("none of the configured images could be read")

    results = [None] * len(tasks)
    todo = []
    for i, (_, _, cpath) in enumerate(keys):
        if cpath.is_file():
            results[i] = np.load(cpath)
        else:
            todo.append(i)
    if todo:
        log.info("extracting %d sub-images (%d cached)", len(todo), len(tasks) - len(todo))

        def store(i, feats):
            cpath = keys[i][2]
            cpath.parent.mkdir(parents=True, exist_ok=True)
            tmp = cpath.with_suffix(".partial.npy")
            np.save(tmp, feats)
            tmp.replace(cpath)
            results[i] = feats

        if jobs > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                for i, feats in zip(todo, pool.map(_subimage_job, [tasks[i] for i in todo])):
                    store(i, feats)
        else:
            for i in todo:
                store(i, _subimage_job(tasks[i]))

    n_side = tcfg.patches_per_side
    per = tcfg.patches_per_subimage
    pr, pc = np.divmod(np.arange(per), n_side)
    panel_col = np.concatenate([np.full(per, k[0]) for k in keys])
    sub_col = np.concatenate([np.full(per, k[1]) for k in keys])
    feats = np.concatenate(results, axis=0)
    header = fm.make_header(
        "features", h, cfg.seed, upstream,
        panels=panels, images=[[pid, str(p)] for pid, p in cfg.images], grids=grids, image_sizes=sizes,
        tiling=dataclasses.asdict(tcfg), skipped=[[pid, msg] for pid, msg in failures],
    )
    pr_col, pc_col = np.tile(pr, len(keys)), np.tile(pc, len(keys))
    fm.write_features(paths.features, header, panel_col, sub_col, pr_col, pc_col, feats)
    if fcfg.csv:
        fm.write_features_csv(paths.features_csv, dict(header, magic=fm.MAGIC["features_csv"]), panels,
                              panel_col, sub_col, pr_col, pc_col, feats)
    shutil.rmtree(paths.cache_dir / "extract", ignore_errors=True)
    if paths.cache_dir.is_dir() and not any(paths.cache_dir.iterdir()):
        paths.cache_dir.rmdir()
    return ExtractReport(paths.features, feats.shape[0], panels, failures)


# ---------------------------------------------------------------------------
# downstream stages


def _require(header: dict, stage: str, cfg: RunConfig, path: Path) -> None:
    if header.get("config_hash") != stage_hashes(cfg)[stage]:
        raise PipelineError(
            f"{path} was produced under a different configuration (stage '{stage}' or earlier); "
            f"re-run the pipeline from the '{stage}' stage")


def _adopt_images(cfg: RunConfig, header: dict) -> RunConfig:
    """Fill in the image list from the feature file when the config has none."""
    if cfg.images:
        return cfg
    return dataclasses.replace(cfg, images=tuple((pid, p) for pid, p in header["images"]))


def load_features_checked(cfg: RunConfig, out_dir):
    """Read ``features.bin`` and validate it; returns ``(table, cfg)``."""
    paths = StagePaths(out_dir)
    table = fm.read_features(paths.features)
    if table.header.get("version") != fm.FORMAT_VERSION:
        raise PipelineError(f"{paths.features}: unsupported format version; re-run extract")
    cfg = _adopt_images(cfg, table.header)
    _require(table.header, "extract", cfg, paths.features)
    return table, cfg


def run_vocab(cfg: RunConfig, out_dir) -> Path:
    paths = StagePaths(out_dir)
    table, cfg = load_features_checked(cfg, out_dir)
    h = stage_hashes(cfg)["vocab"]
    seed = cfg.stage_seed("vocab")
    tree, labels = build_vocab(standardize(table.features), cfg.vocab.depth, seed)
    feat_sha = fm.sha256_file(paths.features)
    body = tree.to_dict()
    body["records"] = len(table)
    fm.write_json_doc(paths.vocab, fm.make_header("vocab", h, seed, {"features.bin": feat_sha}), body)
    panels = table.header["panels"]
    rows = [[panels[p], int(s), int(r), int(c), int(lab)]
            for p, s, r, c, lab in zip(table.panel, table.subimage, table.patch_row, table.patch_col,
                                       labels[:, -1])]
    header = fm.make_header("labels", h, seed, {"features.bin": feat_sha, "vocab.json": fm.sha256_file(paths.vocab)},
                            vocab_size=tree.leaf_count, panels=panels)
    fm.write_csv(paths.labels, header, ["panel", "subimage", "patch_row", "patch_col", "label"], rows)
    return paths.labels


def _documents(keys):
    """Map (panel, subimage) keys to document indices in first-seen order."""
    index, order = {}, []
    doc = np.empty(len(keys), dtype=np.int64)
    for i, key in enumerate(keys):
        if key not in index:
            index[key] = len(order)
            order.append(key)
        doc[i] = index[key]
    return doc, order


def run_topics(cfg: RunConfig, out_dir, jobs: int = 1) -> Path:
    paths = StagePaths(out_dir)
    cfg = _cfg_from_stage(cfg, out_dir)
    _require(fm.read_json_doc(paths.vocab, "vocab"), "vocab", cfg, paths.vocab)
    header, cols, rows = fm.read_csv(paths.labels, "labels")
    _require(header, "vocab", cfg, paths.labels)
    if cols != ["panel", "subimage", "patch_row", "patch_col", "label"]:
        raise PipelineError(f"{paths.labels}: unexpected columns {cols}")
    doc, order = _documents([(r[0], int(r[1])) for r in rows])
    labels = np.array([int(r[4]) for r in rows], dtype=np.int64)
    counts = bags_from_labels(doc, labels, len(order), int(header["vocab_size"]))
    per = cfg.tiling.patches_per_subimage
    if np.any(counts.sum(axis=1) != per):
        raise PipelineError(f"{paths.labels}: every sub-image must contribute {per} keywords")

    tc = cfg.topics
    seed = cfg.stage_seed("topics")
    fit = lda_fit(counts, tc.n_patterns, tc.alpha, tc.beta, seed, tc.max_iter, tc.tol, jobs=jobs)
    h = stage_hashes(cfg)["topics"]
    body = fit.model.to_dict()
    body.update(bound_trace=[float(b) for b in fit.bound_trace], converged=fit.converged, documents=len(order))
    up = {"labels.csv": fm.sha256_file(paths.labels)}
    fm.write_json_doc(paths.model, fm.make_header("model", h, seed, up), body)
    up["model.json"] = fm.sha256_file(paths.model)
    k = tc.n_patterns
    out_rows = [[p, s] + [fm.fmt(v) for v in w] for (p, s), w in zip(order, fit.weights)]
    fm.write_csv(paths.weights, fm.make_header("weights", h, seed, up, panels=header["panels"]),
                 ["panel", "subimage"] + [f"pi_{j}" for j in range(1, k + 1)], out_rows)
    return paths.weights


def _cfg_from_stage(cfg: RunConfig, out_dir) -> RunConfig:
    """Adopt the image list recorded in the feature file when none is configured."""
    if cfg.images:
        return cfg
    p = StagePaths(out_dir).features
    if not p.is_file():
        raise PipelineError(f"missing feature file {p}; run the extract stage first")
    return _adopt_images(cfg, fm.read_features(p).header)


def read_weights(cfg: RunConfig, out_dir):
    """Validated weights: ``(header, keys, W)`` with keys ``(panel, subimage)``."""
    paths = StagePaths(out_dir)
    header, cols, rows = fm.read_csv(paths.weights, "weights")
    _require(header, "topics", cfg, paths.weights)
    keys = [(r[0], int(r[1])) for r in rows]
    w = np.array([[float(v) for v in r[2:]] for r in rows], dtype=np.float64)
    return header, keys, w


def run_embed(cfg: RunConfig, out_dir) -> Path:
    from .report import scatter_svg

    paths = StagePaths(out_dir)
    cfg = _cfg_from_stage(cfg, out_dir)
    header, keys, w = read_weights(cfg, out_dir)
    n = w.shape[0]
    e = cfg.embed
    perplexity = e.perplexity
    cap = (n - 1) / 3.0
    if perplexity > cap:
        log.warning("perplexity %g is too large for %d points; using %.4g", perplexity, n, cap)
        perplexity = cap
    seed = cfg.stage_seed("embed")
    tc = TsneConfig(perplexity=perplexity, iterations=e.iterations, learning_rate=e.learning_rate,
                    exaggeration=e.exaggeration, exaggeration_iters=e.exaggeration_iters, seed=seed)
    res = tsne(w, tc)
    h = stage_hashes(cfg)["embed"]
    up = {"weights.csv": fm.sha256_file(paths.weights)}
    head = fm.make_header("embedding", h, seed, up, panels=header["panels"], perplexity_used=perplexity,
                          kl_initial=res.kl_initial, kl_final=res.kl_final)
    fm.write_csv(paths.embedding, head, ["panel", "subimage", "x", "y"],
                 [[p, s, fm.fmt(x), fm.fmt(y)] for (p, s), (x, y) in zip(keys, res.coords)])
    svg_head = fm.make_header("embedding", h, seed, {"embedding.csv": fm.sha256_file(paths.embedding)})
    fm.atomic_write(paths.embedding_svg, scatter_svg(svg_head, header["panels"], keys, res.coords).encode())
    return paths.embedding


def verify_provenance(out_dir) -> list:
    """Check every recorded upstream checksum against the file on disk.

    Returns a list of human-readable problems (empty when consistent).
    """
    out = Path(out_dir)
    problems = []
    files = [p for p in sorted(out.rglob("*")) if p.is_file() and p.suffix in (".bin", ".csv", ".json", ".svg")
             and ".cache" not in p.parts]
    image_paths = {}
    for f in files:
        try:
            header = fm.read_header(f)
        except PipelineError as exc:
            problems.append(str(exc))
            continue
        if f.name == "features.bin":
            image_paths = {pid: p for pid, p in header.get("images", [])}
        for name, sha in header.get("upstream", {}).items():
            if name.startswith("image:"):
                target = image_paths.get(name[6:])
                target = Path(target) if target else None
            else:
                target = out / name
            if target is None or not target.is_file():
                problems.append(f"{f.name}: upstream {name} is missing")
            elif fm.sha256_file(target) != sha:
                problems.append(f"{f.name}: upstream {name} has changed since it was used")
    return problems
