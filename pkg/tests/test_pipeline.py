import dataclasses
import json
import shutil

import cv2
import numpy as np
import pytest

from paintstyle import cli
from paintstyle.errors import ConfigError, InputError, PipelineError
from paintstyle.pipeline import (RunConfig, StagePaths, load_config, render_report, run_all, run_embed,
                                 run_extract, run_topics, run_vocab, stage_hashes, subimage_grid,
                                 subimage_patches, tile, verify_provenance)
from paintstyle.pipeline import formats as fm
from paintstyle.pipeline.config import TilingConfig
from paintstyle.pipeline.imageio import read_panel
from paintstyle.pipeline.report import characteristic_patterns, heatmap_brightness
from paintstyle.synthetic import write_stripe_corpus

SMALL = {
    "tiling": {"subimage_size": 128},
    "vocab": {"depth": 3},
    "topics": {"n_patterns": 3},
    "embed": {"iterations": 200},
    "report": {"thumbnail_width": 64},
}


def small_config(images, **extra):
    doc = json.loads(json.dumps(SMALL))
    doc.update(extra)
    return RunConfig.from_dict(doc).with_overrides(images=images)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    return write_stripe_corpus(tmp_path_factory.mktemp("corpus"), grid=(2, 2), subimage_size=128)


@pytest.fixture(scope="module")
def finished(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = small_config(corpus)
    summary = run_all(cfg, out)
    assert summary.failures == []
    return cfg, out


# tiling ---------------------------------------------------------------------


def test_tiling_arithmetic():
    assert TilingConfig().patches_per_subimage == 196
    assert len(tile(480, 480)) == 196
    assert len(tile(480, 960)) == 392
    assert len(tile(500, 500)) == 196
    assert subimage_grid(1000, 1500) == (2, 3)
    with pytest.raises(InputError):
        tile(479, 1000)


def test_tiling_is_complete_and_stays_inside():
    entries = tile(960, 1440)
    assert len({e[0].patch_id for e in entries}) == len(entries) == 6 * 196
    for idx, rect in entries:
        assert 0 <= rect.top <= 960 - 64 and 0 <= rect.left <= 1440 - 64
        assert rect.top == idx.grid_row * 480 + idx.patch_row * 32
        assert idx.subimage == idx.grid_row * 3 + idx.grid_col


def test_subimage_patches_match_rects():
    rng = np.random.default_rng(0)
    sub = rng.integers(0, 256, (480, 480, 3), dtype=np.uint8)
    patches = subimage_patches(sub)
    assert patches.shape == (196, 64, 64, 3)
    for idx, rect in tile(480, 480)[::37]:
        assert np.array_equal(patches[idx.patch_id], sub[rect.top:rect.top + 64, rect.left:rect.left + 64])


# config -----------------------------------------------------------------------


def test_config_defaults_and_yaml(tmp_path):
    cfg = load_config(None)
    assert cfg.vocab.depth == 10 and cfg.topics.n_patterns == 20 and cfg.features.levels == 6
    (tmp_path / "c.yaml").write_text("seed: 3\nimages:\n  X: img/x.png\nreport:\n  patterns: '6,8'\n")
    cfg = load_config(tmp_path / "c.yaml")
    assert cfg.images == (("X", str(tmp_path / "img" / "x.png")),)
    assert cfg.report.patterns == ((6, 8),)
    assert cfg.stage_seed("topics") == 3


@pytest.mark.parametrize("text", [
    "bogus: 1\n",
    "features:\n  levels: 5\n",
    "tiling:\n  patch_size: 60\n",
    "topics:\n  alpha: 0\n",
    "report:\n  patterns: [25]\n",
    "stages: [extract, paint]\n",
    "images: [a.png, a.png]\n",
    "seed: [\n",
])
def test_config_errors(tmp_path, text):
    (tmp_path / "c.yaml").write_text(text)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.yaml")


def test_stage_hashes_cascade():
    a = stage_hashes(RunConfig())
    b = stage_hashes(RunConfig.from_dict({"vocab": {"depth": 9}}))
    assert a["extract"] == b["extract"]
    assert all(a[s] != b[s] for s in ("vocab", "topics", "embed", "report"))
    c = stage_hashes(RunConfig().with_overrides(seed=5))
    assert c["extract"] == a["extract"] and c["vocab"] != a["vocab"]


# formats ----------------------------------------------------------------------


def test_feature_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    feats = rng.standard_normal((7, 120))
    idx = [np.arange(7) % 2, np.arange(7), np.arange(7) // 3, np.arange(7) % 3]
    head = fm.make_header("features", "h", None, {}, panels=["A", "B"])
    fm.write_features(tmp_path / "f.bin", head, *idx, feats)
    t = fm.read_features(tmp_path / "f.bin")
    assert np.array_equal(t.features, feats)
    assert np.array_equal(t.patch_row, idx[2])
    assert t.header["dimension"] == 120 and t.header["records"] == 7
    fm.write_features_csv(tmp_path / "f.csv", head, ["A", "B"], *idx, feats)
    header, cols, rows = fm.read_csv(tmp_path / "f.csv")
    assert cols[:5] == ["panel", "subimage", "patch_row", "patch_col", "f000"]
    assert np.array_equal(np.array([[float(v) for v in r[4:]] for r in rows]), feats)
    raw = (tmp_path / "f.bin").read_bytes()
    (tmp_path / "g.bin").write_bytes(raw[:-8])
    with pytest.raises(PipelineError):
        fm.read_features(tmp_path / "g.bin")


def test_read_panel_rejects_greyscale_and_garbage(tmp_path, caplog):
    cv2.imwrite(str(tmp_path / "g.png"), np.zeros((8, 8), np.uint8))
    (tmp_path / "x.png").write_bytes(b"not an image")
    for name in ("g.png", "x.png", "missing.png"):
        with pytest.raises(InputError):
            read_panel(tmp_path / name)
    rgba = np.zeros((8, 8, 4), np.uint8)
    rgba[..., 2] = 200
    cv2.imwrite(str(tmp_path / "a.png"), rgba)
    img = read_panel(tmp_path / "a.png")
    assert "alpha" in caplog.text
    assert img.shape == (8, 8, 3) and img[0, 0, 0] == 200


# stages -------------------------------------------------------------------------


def test_stage_outputs_are_consistent(finished):
    cfg, out = finished
    p = StagePaths(out)
    table = fm.read_features(p.features)
    assert table.features.shape == (2 * 4 * 9, 120)
    assert table.header["panels"] == ["A", "B"]
    assert not p.cache_dir.exists()

    header, cols, rows = fm.read_csv(p.labels, "labels")
    labels = np.array([int(r[4]) for r in rows])
    assert len(rows) == len(table)
    assert labels.min() >= 1 and labels.max() <= 8
    counts = {}
    for r in rows:
        counts[(r[0], r[1])] = counts.get((r[0], r[1]), 0) + 1
    assert set(counts.values()) == {9}

    _, cols, rows = fm.read_csv(p.weights, "weights")
    w = np.array([[float(v) for v in r[2:]] for r in rows])
    assert w.shape == (8, 3)
    assert np.allclose(w.sum(axis=1), 1.0) and np.all(w >= 0)

    _, cols, rows = fm.read_csv(p.embedding, "embedding")
    assert cols == ["panel", "subimage", "x", "y"] and len(rows) == 8
    model = fm.read_json_doc(p.model, "model")
    assert np.all(np.diff(model["bound_trace"]) >= -1e-6 * np.abs(model["bound_trace"][1:]))
    assert verify_provenance(out) == []


def test_report_contents(finished):
    cfg, out = finished
    rd = StagePaths(out).report_dir
    doc = fm.read_json_doc(rd / "report.json", "report")
    prof = np.array(doc["profiles"])
    assert np.allclose(prof.sum(axis=1), 1.0)
    assert len(doc["subsets"]) == 2
    names = {f.name for f in rd.iterdir()}
    assert {"profiles.csv", "profiles.svg", "heatmap.csv", "tsne.svg", "report.json"} <= names
    assert sum(n.startswith("heatmap_") and n.endswith(".svg") for n in names) == 4
    assert fm.read_header(rd / "tsne.svg")["magic"] == fm.MAGIC["report"]


def test_report_with_all_patterns_is_uniformly_bright(finished, tmp_path):
    cfg, out = finished
    copy = tmp_path / "run"
    shutil.copytree(out, copy)
    full = dataclasses.replace(cfg, report=dataclasses.replace(cfg.report, patterns=((1, 2, 3),)))
    rd = render_report(full, copy)
    _, _, rows = fm.read_csv(rd / "heatmap.csv")
    assert np.allclose([float(r[-1]) for r in rows], 1.0)


def test_extract_rerun_is_bit_identical(finished, tmp_path):
    cfg, out = finished
    run_extract(cfg, tmp_path, jobs=2)
    assert (tmp_path / "features.bin").read_bytes() == StagePaths(out).features.read_bytes()


def test_downstream_stage_rejects_changed_config(finished, tmp_path):
    cfg, out = finished
    copy = tmp_path / "run"
    shutil.copytree(out, copy)
    deeper = dataclasses.replace(cfg, vocab=dataclasses.replace(cfg.vocab, depth=4))
    with pytest.raises(PipelineError):
        run_topics(deeper, copy)
    other_tiling = dataclasses.replace(cfg, features=dataclasses.replace(cfg.features, em_tol=1e-5))
    with pytest.raises(PipelineError):
        run_vocab(other_tiling, copy)
    # re-running the invalidated stage and its successors makes it consistent again
    run_vocab(deeper, copy)
    run_topics(deeper, copy)
    run_embed(deeper, copy)


def test_missing_upstream_file(finished, tmp_path):
    cfg, _ = finished
    with pytest.raises(PipelineError):
        run_vocab(cfg, tmp_path)
    with pytest.raises(PipelineError):
        run_embed(cfg, tmp_path)


def test_provenance_detects_tampering(finished, tmp_path):
    _, out = finished
    copy = tmp_path / "run"
    shutil.copytree(out, copy)
    with open(copy / "labels.csv", "a") as fh:
        fh.write("A,0,0,0,1\n")
    problems = verify_provenance(copy)
    assert any("labels.csv" in p for p in problems)


def test_stages_run_from_feature_header_without_images(finished, tmp_path):
    cfg, out = finished
    copy = tmp_path / "run"
    shutil.copytree(out, copy)
    bare = dataclasses.replace(cfg, images=())
    run_vocab(bare, copy)
    assert (copy / "labels.csv").read_bytes() == (out / "labels.csv").read_bytes()


# CLI ----------------------------------------------------------------------------


def _write_cfg(path, images):
    doc = json.loads(json.dumps(SMALL))
    doc["images"] = images
    path.write_text(json.dumps(doc))
    return path


def test_cli_skips_corrupt_image_with_input_exit(corpus, tmp_path):
    bad = tmp_path / "broken.png"
    bad.write_bytes(b"\x89PNG garbage")
    cfg = _write_cfg(tmp_path / "c.yaml", {**corpus, "C": str(bad)})
    code = cli.main(["extract", "--config", str(cfg), "--out-dir", str(tmp_path / "o")])
    assert code == cli.EXIT_INPUT
    assert fm.read_features(tmp_path / "o" / "features.bin").header["panels"] == ["A", "B"]


def test_cli_exit_codes(corpus, tmp_path, capsys):
    cfg = _write_cfg(tmp_path / "c.yaml", corpus)
    out = tmp_path / "o"
    assert cli.main(["vocab", "--config", str(cfg), "--out-dir", str(out)]) == cli.EXIT_PIPELINE
    (tmp_path / "bad.yaml").write_text("nonsense: 1\n")
    assert cli.main(["extract", "--config", str(tmp_path / "bad.yaml")]) == cli.EXIT_CONFIG
    assert cli.main(["extract", "--out-dir", str(out)]) == cli.EXIT_INPUT
    assert cli.main(["run-all", "--config", str(cfg), "--out-dir", str(out), "--csv",
                     "--patterns", "1,2", "--patterns", "3"]) == cli.EXIT_OK
    assert (out / "features.csv").is_file()
    doc = fm.read_json_doc(out / "report" / "report.json")
    assert [s["patterns"] for s in doc["subsets"]] == [[1, 2], [3]]
    assert cli.main(["report", "--config", str(cfg), "--out-dir", str(out), "--patterns", "9"]) == cli.EXIT_CONFIG
    with pytest.raises(SystemExit):
        cli.main(["paint"])


# report helpers -----------------------------------------------------------------


def test_characteristic_patterns_and_brightness():
    prof = np.array([[0.6, 0.3, 0.1], [0.1, 0.2, 0.7]])
    assert characteristic_patterns(prof) == [(1,), (3,)]
    assert characteristic_patterns(prof[:1]) == [(1, 2, 3)]
    w = np.array([[0.8, 0.1, 0.1], [0.2, 0.4, 0.4]])
    score, bright = heatmap_brightness(w, [1])
    assert np.allclose(score, [0.8, 0.2]) and np.allclose(bright, [1.0, 0.25])
