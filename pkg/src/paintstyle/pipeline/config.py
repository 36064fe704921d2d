"""Run configuration, YAML loading and per-stage provenance hashes."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..errors import ConfigError

__all__ = [
    "STAGES",
    "TilingConfig",
    "FeatureConfig",
    "VocabConfig",
    "TopicConfig",
    "EmbedConfig",
    "ReportConfig",
    "RunConfig",
    "load_config",
    "stage_hashes",
]

STAGES = ("extract", "vocab", "topics", "embed", "report")


@dataclass(frozen=True)
class TilingConfig:
    patch_size: int = 64
    patch_stride: int = 32
    subimage_size: int = 480

    @property
    def patches_per_side(self) -> int:
        return (self.subimage_size - self.patch_size) // self.patch_stride + 1

    @property
    def patches_per_subimage(self) -> int:
        return self.patches_per_side ** 2


@dataclass(frozen=True)
class FeatureConfig:
    levels: int = 6
    em_max_iter: int = 200
    em_tol: float = 1e-6
    var_floor: float = 1e-12
    log_variance: bool = True
    csv: bool = False


@dataclass(frozen=True)
class VocabConfig:
    depth: int = 10
    seed: int | None = None


@dataclass(frozen=True)
class TopicConfig:
    n_patterns: int = 20
    alpha: float = 1.0
    beta: float = 0.01
    max_iter: int = 500
    tol: float = 1e-6
    seed: int | None = None


@dataclass(frozen=True)
class EmbedConfig:
    perplexity: float = 30.0
    iterations: int = 1000
    learning_rate: float = 100.0
    exaggeration: float = 4.0
    exaggeration_iters: int = 100
    seed: int | None = None


@dataclass(frozen=True)
class ReportConfig:
    # list of pattern subsets (1-based); None picks each panel's characteristic patterns
    patterns: tuple | None = None
    thumbnail_width: int = 480


@dataclass(frozen=True)
class RunConfig:
    images: tuple = ()  # (panel_id, path) pairs, in panel order
    seed: int = 0
    stages: tuple = STAGES
    tiling: TilingConfig = field(default_factory=TilingConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    vocab: VocabConfig = field(default_factory=VocabConfig)
    topics: TopicConfig = field(default_factory=TopicConfig)
    embed: EmbedConfig = field(default_factory=EmbedConfig)
    report: ReportConfig = field(default_factory=ReportConfig)

    def __post_init__(self):
        _check(self)

    def stage_seed(self, stage: str) -> int:
        explicit = getattr(getattr(self, stage), "seed", None) if stage in ("vocab", "topics", "embed") else None
        return self.seed if explicit is None else explicit

    def with_overrides(self, seed: int | None = None, images=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(
                cfg, seed=seed,
                vocab=dataclasses.replace(cfg.vocab, seed=None),
                topics=dataclasses.replace(cfg.topics, seed=None),
                embed=dataclasses.replace(cfg.embed, seed=None),
            )
        if images:
            cfg = dataclasses.replace(cfg, images=_parse_images(images, Path.cwd()))
        return cfg

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Path | str = ".") -> "RunConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a mapping")
        doc = dict(doc)
        kwargs = {}
        sections = {"tiling": TilingConfig, "features": FeatureConfig, "vocab": VocabConfig,
                    "topics": TopicConfig, "embed": EmbedConfig, "report": ReportConfig}
        for name, kind in sections.items():
            if name in doc:
                kwargs[name] = _section(kind, doc.pop(name), name)
        if "images" in doc:
            kwargs["images"] = _parse_images(doc.pop("images"), Path(base_dir))
        if "seed" in doc:
            kwargs["seed"] = doc.pop("seed")
        if "stages" in doc:
            kwargs["stages"] = tuple(doc.pop("stages"))
        if doc:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(doc))}")
        return cls(**kwargs)


def _section(kind, raw, name):
    if raw is None:
        return kind()
    if not isinstance(raw, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    names = {f.name for f in dataclasses.fields(kind)}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {', '.join(sorted(unknown))}")
    raw = dict(raw)
    if kind is ReportConfig and raw.get("patterns") is not None:
        raw["patterns"] = _parse_patterns(raw["patterns"])
    return kind(**raw)


def _parse_patterns(raw) -> tuple:
    """Accept ``"6,8"``, ``[6, 8]`` or ``[[6, 8], [1]]`` and return subsets."""
    if isinstance(raw, str):
        raw = [raw]
    if isinstance(raw, (list, tuple)) and raw and all(isinstance(v, int) for v in raw):
        raw = [raw]
    subsets = []
    for item in raw:
        if isinstance(item, str):
            try:
                item = [int(v) for v in item.split(",") if v.strip()]
            except ValueError as exc:
                raise ConfigError(f"bad pattern list {item!r}") from exc
        subset = tuple(int(v) for v in item)
        if not subset:
            raise ConfigError("empty pattern subset")
        subsets.append(subset)
    return tuple(subsets)


def _parse_images(raw, base: Path) -> tuple:
    if isinstance(raw, dict):
        pairs = [(str(k), v) for k, v in raw.items()]
    elif isinstance(raw, (list, tuple)):
        pairs = []
        for item in raw:
            if isinstance(item, (list, tuple)) and len(item) == 2:
                pairs.append((str(item[0]), item[1]))
            else:
                pairs.append((Path(str(item)).stem, item))
    else:
        raise ConfigError("images must be a list of paths or a mapping of panel id to path")
    ids = [p for p, _ in pairs]
    if len(set(ids)) != len(ids):
        raise ConfigError("panel ids must be unique")
    out = []
    for pid, path in pairs:
        p = Path(str(path))
        out.append((pid, str(p if p.is_absolute() else (base / p))))
    return tuple(out)


def _check(cfg: RunConfig) -> None:
    t, f = cfg.tiling, cfg.features
    if f.levels != 6:
        raise ConfigError("the 120-entry feature layout needs exactly 6 wavelet levels")
    if t.patch_size <= 0 or t.patch_size % (2 ** f.levels):
        raise ConfigError(f"patch size must be a positive multiple of 2**levels = {2 ** f.levels}")
    if not 0 < t.patch_stride <= t.patch_size:
        raise ConfigError("patch stride must lie in 1..patch size")
    if t.subimage_size < t.patch_size or (t.subimage_size - t.patch_size) % t.patch_stride:
        raise ConfigError("sub-image size must fit a whole number of patch strides")
    if cfg.vocab.depth < 1:
        raise ConfigError("vocabulary depth must be at least 1")
    tp = cfg.topics
    if tp.n_patterns < 1 or tp.alpha <= 0 or tp.beta < 0 or tp.max_iter < 1:
        raise ConfigError("topics: need n_patterns >= 1, alpha > 0, beta >= 0, max_iter >= 1")
    e = cfg.embed
    if e.perplexity <= 0 or e.iterations < 1 or e.learning_rate <= 0 or e.exaggeration <= 0:
        raise ConfigError("embed: perplexity, iterations, learning rate and exaggeration must be positive")
    bad = [s for s in cfg.stages if s not in STAGES]
    if bad:
        raise ConfigError(f"unknown stages: {', '.join(bad)}")
    if cfg.report.patterns:
        for subset in cfg.report.patterns:
            if min(subset) < 1 or max(subset) > tp.n_patterns:
                raise ConfigError(f"pattern numbers must lie in 1..{tp.n_patterns}")


def load_config(path: str | Path | None) -> RunConfig:
    """Read a YAML (or JSON) config file; ``None`` gives the defaults."""
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        doc = yaml.safe_load(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {p} is not valid YAML: {exc}") from exc
    try:
        return RunConfig.from_dict(doc or {}, p.parent)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def stage_hashes(cfg: RunConfig) -> dict:
    """Cumulative configuration hash per stage.

    Each hash covers the stage's own parameters and the hash of the stage
    before it, so changing an upstream parameter invalidates everything
    downstream. Image contents are tracked separately by file checksums.
    """
    out = {}
    prev = ""
    params = {
        "extract": {"tiling": dataclasses.asdict(cfg.tiling),
                    "features": {k: v for k, v in dataclasses.asdict(cfg.features).items() if k != "csv"},
                    "panels": [pid for pid, _ in cfg.images]},
        "vocab": {"depth": cfg.vocab.depth, "seed": cfg.stage_seed("vocab")},
        "topics": {**{k: v for k, v in dataclasses.asdict(cfg.topics).items() if k != "seed"},
                   "seed": cfg.stage_seed("topics")},
        "embed": {**{k: v for k, v in dataclasses.asdict(cfg.embed).items() if k != "seed"},
                  "seed": cfg.stage_seed("embed")},
        "report": {"patterns": [list(s) for s in cfg.report.patterns] if cfg.report.patterns else None,
                   "thumbnail_width": cfg.report.thumbnail_width},
    }
    for stage in STAGES:
        prev = _digest({"stage": stage, "params": params[stage], "upstream": prev})
        out[stage] = prev
    return out
