"""End-to-end orchestration: tiling, stage runners, file formats and reports."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .config import STAGES, RunConfig, load_config, stage_hashes
from .report import render_report
from .stages import (ExtractReport, StagePaths, patch_features, run_embed, run_extract, run_topics,
                     run_vocab, verify_provenance)
from .tiling import Rect, TileIndex, subimage_grid, subimage_patches, tile

__all__ = [
    "STAGES", "RunConfig", "load_config", "stage_hashes", "render_report", "ExtractReport", "StagePaths",
    "patch_features", "run_extract", "run_vocab", "run_topics", "run_embed", "verify_provenance",
    "Rect", "TileIndex", "subimage_grid", "subimage_patches", "tile", "RunSummary", "run_all",
]


@dataclass
class RunSummary:
    out_dir: Path
    stages: list = field(default_factory=list)
    failures: list = field(default_factory=list)  # (panel id, message) for skipped images


def run_all(cfg: RunConfig, out_dir, jobs: int = 1) -> RunSummary:
    """Run the enabled stages in order."""
    summary = RunSummary(Path(out_dir))
    for stage in STAGES:
        if stage not in cfg.stages:
            continue
        if stage == "extract":
            summary.failures = run_extract(cfg, out_dir, jobs).failures
        elif stage == "vocab":
            run_vocab(cfg, out_dir)
        elif stage == "topics":
            run_topics(cfg, out_dir, jobs)
        elif stage == "embed":
            run_embed(cfg, out_dir)
        else:
            render_report(cfg, out_dir)
        summary.stages.append(stage)
    return summary
