"""CSV and JSON round-trips for persistence diagrams.

CSV columns: dim, birth, death. Infinite deaths are written as the
literal string "inf" in both formats (JSON has no infinity). Critical
edge tags are not serialized; a loaded diagram is metric-ready but not
differentiable.
"""

from __future__ import annotations

import csv
import io
import json

import numpy as np

from .reduction import PersistenceDiagram


def _fmt(x: float) -> str:
    return "inf" if np.isinf(x) else repr(float(x))


def diagram_to_csv(pd: PersistenceDiagram, path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh)
        w.writerow(["dim", "birth", "death"])
        for b, d, k in zip(pd.births, pd.deaths, pd.dims):
            w.writerow([int(k), repr(float(b)), _fmt(d)])
    finally:
        if own:
            fh.close()


def diagram_from_csv(path_or_file) -> PersistenceDiagram:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, newline="") if own else path_or_file
    try:
        rows = list(csv.reader(fh))
    finally:
        if own:
            fh.close()
    feats = []
    for row in rows[1:]:
        if not row:
            continue
        k, b, d = int(row[0]), float(row[1]), float(row[2])
        feats.append((b, d, k))
    return PersistenceDiagram.from_features(feats, kind="csv")


def diagram_to_json(pd: PersistenceDiagram, path_or_file=None) -> str:
    doc = {
        "kind": pd.kind,
        "n_points": int(pd.n_points),
        "features": [
            {"dim": int(k), "birth": float(b),
             "death": "inf" if np.isinf(d) else float(d)}
            for b, d, k in zip(pd.births, pd.deaths, pd.dims)
        ],
    }
    text = json.dumps(doc, sort_keys=True)
    if path_or_file is not None:
        if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
            with open(path_or_file, "w") as fh:
                fh.write(text)
        else:
            path_or_file.write(text)
    return text


def diagram_from_json(source) -> PersistenceDiagram:
    if isinstance(source, (str, bytes)):
        text = source
        if isinstance(text, bytes):
            text = text.decode()
        stripped = text.lstrip()
        if not stripped.startswith("{"):
            with open(source) as fh:
                text = fh.read()
        doc = json.loads(text)
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        doc = json.load(source)
    else:
        doc = source
    feats = []
    for f in doc["features"]:
        d = f["death"]
        feats.append((float(f["birth"]),
                      float("inf") if d == "inf" else float(d),
                      int(f["dim"])))
    return PersistenceDiagram.from_features(
        feats, n_points=int(doc.get("n_points", 0)),
        kind=doc.get("kind", "json"))
