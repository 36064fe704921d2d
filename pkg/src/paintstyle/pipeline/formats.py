"""Stage file formats.

Every stage file starts with the same provenance header: a magic string,
the format version, the cumulative config hash of the stage that wrote it,
the stage seed, and the sha256 of every upstream file it was computed from.

Feature file (``features.bin``)
-------------------------------
UTF-8 text header, one ``key: <json value>`` per line, closed by a line
``end_header``. Required keys: ``magic`` (``PAINTSTYLE-FEATURES``),
``version``, ``dimension``, ``records``, ``columns``. The body follows
immediately and is columnar, little-endian, with no padding:

* ``panel``, ``subimage``, ``patch_row``, ``patch_col``: ``records`` int32
  values each, in that order;
* then ``dimension`` float64 columns, feature 0 first, ``records`` values
  each.

Record order is panel, then sub-image, then patch row, then patch column.

CSV files carry the header as leading ``# key: <json value>`` lines,
followed by a column-name row. JSON documents hold the header keys at the
top level. SVG files hold it as JSON in their ``<metadata>`` element.
"""
from __future__ import annotations

import csv
import hashlib
import html
import io
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import PipelineError

__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "sha256_file",
    "make_header",
    "FeatureTable",
    "write_features",
    "read_features",
    "write_features_csv",
    "write_csv",
    "read_csv",
    "write_json_doc",
    "read_json_doc",
    "read_header",
    "atomic_write",
    "fmt",
]

FORMAT_VERSION = 1
MAGIC = {
    "features": "PAINTSTYLE-FEATURES",
    "features_csv": "PAINTSTYLE-FEATURES-CSV",
    "vocab": "PAINTSTYLE-VOCAB",
    "labels": "PAINTSTYLE-LABELS",
    "model": "PAINTSTYLE-MODEL",
    "weights": "PAINTSTYLE-WEIGHTS",
    "embedding": "PAINTSTYLE-EMBEDDING",
    "report": "PAINTSTYLE-REPORT",
}
_INDEX_COLUMNS = ("panel", "subimage", "patch_row", "patch_col")
_END = "end_header"


def fmt(x: float) -> str:
    """Shortest round-tripping text for a float."""
    return repr(float(x))


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def make_header(kind: str, config_hash: str, seed, upstream: dict, **extra) -> dict:
    header = {"magic": MAGIC[kind], "version": FORMAT_VERSION, "config_hash": config_hash,
              "seed": seed, "upstream": dict(sorted(upstream.items()))}
    header.update(extra)
    return header


def atomic_write(path: str | Path, data: bytes) -> None:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    tmp = p.with_name(p.name + ".partial")
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, p)


def _header_lines(header: dict, prefix: str) -> str:
    return "".join(f"{prefix}{k}: {json.dumps(v, sort_keys=True)}\n" for k, v in header.items())


def _parse_line(line: str, path) -> tuple:
    key, sep, value = line.partition(": ")
    if not sep:
        raise PipelineError(f"{path}: malformed header line {line!r}")
    try:
        return key, json.loads(value)
    except json.JSONDecodeError as exc:
        raise PipelineError(f"{path}: malformed header value for {key!r}") from exc


@dataclass
class FeatureTable:
    header: dict
    panel: np.ndarray
    subimage: np.ndarray
    patch_row: np.ndarray
    patch_col: np.ndarray
    features: np.ndarray

    def __len__(self) -> int:
        return self.features.shape[0]


def write_features(path, header: dict, panel, subimage, patch_row, patch_col, features) -> None:
    feats = np.asarray(features, dtype=np.float64)
    n, d = feats.shape
    header = dict(header)
    header.update(dimension=d, records=n, columns=list(_INDEX_COLUMNS) + [f"f{j:03d}" for j in range(d)])
    buf = io.BytesIO()
    buf.write((_header_lines(header, "") + _END + "\n").encode())
    for col in (panel, subimage, patch_row, patch_col):
        buf.write(np.asarray(col, dtype="<i4").tobytes())
    buf.write(np.asfortranarray(feats).astype("<f8").tobytes(order="F"))
    atomic_write(path, buf.getvalue())


def read_features(path) -> FeatureTable:
    p = Path(path)
    if not p.is_file():
        raise PipelineError(f"missing feature file {p}; run the extract stage first")
    raw = p.read_bytes()
    header = {}
    pos = 0
    while True:
        end = raw.find(b"\n", pos)
        if end < 0:
            raise PipelineError(f"{p}: truncated header")
        line = raw[pos:end].decode("utf-8", errors="replace")
        pos = end + 1
        if line == _END:
            break
        k, v = _parse_line(line, p)
        header[k] = v
    if header.get("magic") != MAGIC["features"]:
        raise PipelineError(f"{p}: not a feature file")
    n, d = int(header["records"]), int(header["dimension"])
    expected = pos + 4 * 4 * n + 8 * n * d
    if len(raw) != expected:
        raise PipelineError(f"{p}: body has {len(raw) - pos} bytes, expected {expected - pos}")
    cols = []
    for _ in _INDEX_COLUMNS:
        cols.append(np.frombuffer(raw, dtype="<i4", count=n, offset=pos).astype(np.int64))
        pos += 4 * n
    feats = np.frombuffer(raw, dtype="<f8", count=n * d, offset=pos).reshape(d, n).T.astype(np.float64)
    return FeatureTable(header, *cols, feats)


def write_features_csv(path, header: dict, table_panels: list, panel, subimage, patch_row, patch_col,
                       features) -> None:
    feats = np.asarray(features)
    names = ["panel", "subimage", "patch_row", "patch_col"] + [f"f{j:03d}" for j in range(feats.shape[1])]
    rows = [[table_panels[p], int(s), int(r), int(c)] + [fmt(v) for v in f]
            for p, s, r, c, f in zip(panel, subimage, patch_row, patch_col, feats)]
    write_csv(path, header, names, rows)


def write_csv(path, header: dict, columns: list, rows) -> None:
    buf = io.StringIO()
    buf.write(_header_lines(header, "# "))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    w.writerows(rows)
    atomic_write(path, buf.getvalue().encode())


def read_csv(path, kind: str | None = None) -> tuple:
    """Return ``(header, column_names, rows)`` with rows as lists of strings."""
    p = Path(path)
    if not p.is_file():
        raise PipelineError(f"missing stage file {p}")
    header = {}
    lines = p.read_text().splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("# "):
        k, v = _parse_line(lines[i][2:], p)
        header[k] = v
        i += 1
    reader = csv.reader(lines[i:])
    try:
        columns = next(reader)
    except StopIteration:
        raise PipelineError(f"{p}: no column row") from None
    _check_magic(header, kind, p)
    return header, columns, list(reader)


def write_json_doc(path, header: dict, body: dict) -> None:
    doc = dict(header)
    doc.update(body)
    atomic_write(path, (json.dumps(doc, indent=1) + "\n").encode())


def read_json_doc(path, kind: str | None = None) -> dict:
    p = Path(path)
    if not p.is_file():
        raise PipelineError(f"missing stage file {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise PipelineError(f"{p}: not valid JSON") from exc
    _check_magic(doc, kind, p)
    return doc


def _check_magic(header, kind, p):
    if kind is not None and header.get("magic") != MAGIC[kind]:
        raise PipelineError(f"{p}: expected a {kind} file, found magic {header.get('magic')!r}")
    if kind is not None and header.get("version") != FORMAT_VERSION:
        raise PipelineError(f"{p}: format version {header.get('version')} is not {FORMAT_VERSION}; "
                            "re-run the stage that wrote it")


def read_header(path) -> dict:
    """Provenance header of any stage file, picked by suffix."""
    p = Path(path)
    if p.suffix == ".bin":
        return read_features(p).header
    if p.suffix == ".csv":
        return read_csv(p)[0]
    if p.suffix == ".json":
        doc = read_json_doc(p)
        return {k: doc[k] for k in ("magic", "version", "config_hash", "seed", "upstream") if k in doc}
    if p.suffix == ".svg":
        text = p.read_text()
        start, stop = text.find("<metadata>"), text.find("</metadata>")
        if start < 0 or stop < 0:
            raise PipelineError(f"{p}: no metadata block")
        return json.loads(html.unescape(text[start + len("<metadata>"):stop]))
    raise PipelineError(f"{p}: unknown stage file type")
