"""Report rendering: pattern profiles, heatmap overlays and the t-SNE scatter.

All figures are plain SVG written by hand so that output bytes depend only on
the numbers being drawn.
"""
from __future__ import annotations

import base64
import html
import json
import logging
import re
from pathlib import Path

import cv2
import numpy as np

from ..errors import InputError, PipelineError
from ..topics import aggregate_panels, pattern_subset_score
from . import formats as fm
from .config import RunConfig, stage_hashes
from .imageio import read_panel
from .stages import StagePaths, _cfg_from_stage, _require, read_weights

log = logging.getLogger(__name__)

__all__ = ["PALETTE", "characteristic_patterns", "heatmap_brightness", "render_report", "scatter_svg",
           "profiles_svg", "heatmap_svg"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _f(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def _svg(width: float, height: float, header: dict, body: list) -> str:
    meta = html.escape(json.dumps(header, sort_keys=True), quote=False)
    return "\n".join([
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
        f'viewBox="0 0 {_f(width)} {_f(height)}" font-family="sans-serif" font-size="11">',
        f"<metadata>{meta}</metadata>",
        f'<rect width="{_f(width)}" height="{_f(height)}" fill="white"/>',
        *body,
        "</svg>",
        "",
    ])


def _text(x, y, s, anchor="start", size=None, extra=""):
    sz = f' font-size="{size}"' if size else ""
    return f'<text x="{_f(x)}" y="{_f(y)}" text-anchor="{anchor}"{sz}{extra}>{html.escape(str(s))}</text>'


def scatter_svg(header: dict, panels: list, keys: list, coords: np.ndarray, size: int = 520) -> str:
    """2-D scatter of sub-images, one colour per panel, with a legend."""
    pad, legend = 30, 110
    c = np.asarray(coords, dtype=np.float64)
    lo, hi = c.min(axis=0), c.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    inner = size - 2 * pad
    body = [f'<rect x="{pad}" y="{pad}" width="{inner}" height="{inner}" fill="none" stroke="#999"/>']
    colour = {p: PALETTE[i % len(PALETTE)] for i, p in enumerate(panels)}
    for (panel, sub), (x, y) in zip(keys, c):
        px = pad + (x - lo[0]) / span[0] * inner
        py = pad + (hi[1] - y) / span[1] * inner
        body.append(f'<circle cx="{_f(px)}" cy="{_f(py)}" r="4" fill="{colour[panel]}" fill-opacity="0.8">'
                    f"<title>{html.escape(str(panel))} / {sub}</title></circle>")
    for i, p in enumerate(panels):
        y = pad + 16 * i + 6
        body.append(f'<circle cx="{size + 10}" cy="{y}" r="5" fill="{colour[p]}"/>')
        body.append(_text(size + 20, y + 4, p))
    body.append(_text(size / 2, 18, "t-SNE of sub-image pattern weights", "middle", 13))
    return _svg(size + legend, size, header, body)


def profiles_svg(header: dict, panels: list, profiles: np.ndarray) -> str:
    """One bar chart per panel: mean pattern weight against pattern number."""
    k = profiles.shape[1]
    bar, gap, chart_h, left, top = 18, 4, 110, 45, 24
    width = left + k * (bar + gap) + 20
    height = top + len(panels) * (chart_h + 40)
    ymax = max(float(profiles.max()), 1e-12)
    body = []
    for i, p in enumerate(panels):
        y0 = top + i * (chart_h + 40)
        base = y0 + chart_h
        body.append(_text(left, y0 - 6, f"panel {p}", size=12))
        body.append(f'<line x1="{left}" y1="{base}" x2="{width - 10}" y2="{base}" stroke="#333"/>')
        body.append(_text(left - 6, y0 + 8, _f(ymax), "end", 9))
        for j in range(k):
            h = profiles[i, j] / ymax * chart_h
            x = left + j * (bar + gap)
            body.append(f'<rect x="{_f(x)}" y="{_f(base - h)}" width="{bar}" height="{_f(h)}" '
                        f'fill="{PALETTE[i % len(PALETTE)]}"><title>pattern {j + 1}: '
                        f"{profiles[i, j]:.4f}</title></rect>")
            body.append(_text(x + bar / 2, base + 12, j + 1, "middle", 9))
    return _svg(width, height, header, body)


def _thumbnail(path, rows: int, cols: int, sub: int, width: int):
    try:
        img = read_panel(path)
    except InputError as exc:
        log.warning("no thumbnail for %s: %s", path, exc)
        return None
    img = img[:rows * sub, :cols * sub]
    if img.dtype == np.uint16:
        img = (img >> 8).astype(np.uint8)
    height = max(1, round(width * rows / cols))
    small = cv2.resize(img, (width, height), interpolation=cv2.INTER_AREA)
    ok, jpg = cv2.imencode(".jpg", np.ascontiguousarray(small[:, :, ::-1]), [cv2.IMWRITE_JPEG_QUALITY, 80])
    return base64.b64encode(jpg.tobytes()).decode() if ok else None


def heatmap_svg(header: dict, panel: str, grid: tuple, brightness: dict, thumb: str | None,
                width: int, title: str) -> str:
    """Sub-image cells over the panel, cell opacity = normalized brightness."""
    rows, cols = grid
    cell = width / cols
    top = 24
    height = rows * cell
    body = [_text(4, 16, title, size=12), f'<rect x="0" y="{top}" width="{_f(width)}" height="{_f(height)}" fill="black"/>']
    if thumb:
        body.append(f'<image x="0" y="{top}" width="{_f(width)}" height="{_f(height)}" opacity="0.45" '
                    f'preserveAspectRatio="none" href="data:image/jpeg;base64,{thumb}"/>')
    for r in range(rows):
        for c in range(cols):
            b = brightness.get(r * cols + c, 0.0)
            body.append(f'<rect x="{_f(c * cell)}" y="{_f(top + r * cell)}" width="{_f(cell)}" height="{_f(cell)}" '
                        f'fill="#ffe14d" fill-opacity="{b:.4f}" stroke="#555" stroke-width="0.5">'
                        f"<title>{html.escape(panel)} / {r * cols + c}: {b:.4f}</title></rect>")
    return _svg(width, height + top, header, body)


def characteristic_patterns(profiles: np.ndarray) -> list:
    """For each panel, the 1-based patterns on which it outweighs every other panel.

    Patterns whose mean weight in that panel is below the uniform level
    ``1 / K`` are left out. With a single panel every pattern is kept.
    """
    n_panels, k = profiles.shape
    if n_panels == 1:
        return [tuple(range(1, k + 1))]
    out = []
    for i in range(n_panels):
        others = np.delete(profiles, i, axis=0).max(axis=0)
        chosen = tuple(int(j) + 1 for j in np.flatnonzero((profiles[i] > others) & (profiles[i] >= 1.0 / k)))
        if not chosen:
            chosen = (int(np.argmax(profiles[i] - others)) + 1,)
        out.append(chosen)
    return out


def heatmap_brightness(weights: np.ndarray, patterns) -> tuple:
    """Subset weight sum per sub-image and its linear map from [0, max] to [0, 1]."""
    score = pattern_subset_score(weights, patterns)
    top = score.max()
    return score, (score / top if top > 0 else np.zeros_like(score))


def _safe(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", str(name))


def _subset_name(subset) -> str:
    return "p" + "-".join(str(j) for j in subset)


def render_report(cfg: RunConfig, out_dir) -> Path:
    """Write the report bundle under ``out_dir/report``.

    Files: ``profiles.csv``/``.svg`` (mean pattern weights per panel),
    ``heatmap.csv`` plus one ``heatmap_<subset>_<panel>.svg`` per pattern
    subset and panel, ``tsne.svg`` and a ``report.json`` summary.
    """
    paths = StagePaths(out_dir)
    cfg = _cfg_from_stage(cfg, out_dir)
    feat_header = fm.read_features(paths.features).header
    _require(feat_header, "extract", cfg, paths.features)
    w_header, keys, w = read_weights(cfg, out_dir)
    e_header, e_cols, e_rows = fm.read_csv(paths.embedding, "embedding")
    _require(e_header, "embed", cfg, paths.embedding)
    if [(r[0], int(r[1])) for r in e_rows] != keys:
        raise PipelineError(f"{paths.embedding} rows do not match {paths.weights}; re-run embed")

    panels = w_header["panels"]
    panel_idx = np.array([panels.index(p) for p, _ in keys])
    profiles = aggregate_panels(w, panel_idx, len(panels))
    subsets = [tuple(s) for s in cfg.report.patterns] if cfg.report.patterns else characteristic_patterns(profiles)
    h = stage_hashes(cfg)["report"]
    seed = cfg.seed
    up = {"weights.csv": fm.sha256_file(paths.weights), "embedding.csv": fm.sha256_file(paths.embedding)}
    head = fm.make_header("report", h, seed, up)
    rd = paths.report_dir
    rd.mkdir(parents=True, exist_ok=True)
    k = w.shape[1]

    fm.write_csv(rd / "profiles.csv", head, ["panel"] + [f"pattern_{j}" for j in range(1, k + 1)],
                 [[p] + [fm.fmt(v) for v in row] for p, row in zip(panels, profiles)])
    fm.atomic_write(rd / "profiles.svg", profiles_svg(head, panels, profiles).encode())

    grids = feat_header["grids"]
    images = dict((pid, p) for pid, p in feat_header["images"])
    sub = int(feat_header["tiling"]["subimage_size"])
    thumbs = {p: _thumbnail(images[p], *grids[p], sub, cfg.report.thumbnail_width) for p in panels}
    hm_rows, summary = [], []
    for subset in subsets:
        score, bright = heatmap_brightness(w, subset)
        name = _subset_name(subset)
        per_panel = {}
        for i, p in enumerate(panels):
            cells = {s: float(b) for (pp, s), b in zip(keys, bright) if pp == p}
            per_panel[p] = float(np.mean(list(cells.values())))
            title = f"panel {p}, patterns {', '.join(map(str, subset))}"
            svg = heatmap_svg(head, p, tuple(grids[p]), cells, thumbs[p], cfg.report.thumbnail_width, title)
            fm.atomic_write(rd / f"heatmap_{name}_{_safe(p)}.svg", svg.encode())
        cols = {p: grids[p][1] for p in panels}
        for (p, s), sc, b in zip(keys, score, bright):
            hm_rows.append([name, p, s, s // cols[p], s % cols[p], fm.fmt(sc), fm.fmt(b)])
        summary.append({"patterns": list(subset), "mean_brightness": per_panel})
    fm.write_csv(rd / "heatmap.csv", head, ["subset", "panel", "subimage", "grid_row", "grid_col", "score",
                                            "brightness"], hm_rows)

    coords = np.array([[float(r[2]), float(r[3])] for r in e_rows])
    fm.atomic_write(rd / "tsne.svg", scatter_svg(head, panels, keys, coords).encode())
    fm.write_json_doc(rd / "report.json", head, {"panels": panels, "subsets": summary,
                                                 "profiles": [[float(v) for v in row] for row in profiles]})
    return rd
