"""Model serialization: one self-describing JSON document per model.

Float values survive a save/load round trip bit-exactly (shortest-repr float
serialization parses back to the identical double).
"""

from __future__ import annotations

import json
import os

import numpy as np

FORMAT_VERSION = 1


def params_to_doc(params: list[np.ndarray]) -> list[dict]:
    out = []
    for p in params:
        arr = np.asarray(p, dtype=np.float64)
        out.append({"shape": list(arr.shape), "data": arr.ravel().tolist()})
    return out


def params_from_doc(doc: list[dict]) -> list[np.ndarray]:
    params = []
    for entry in doc:
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        params.append(arr)
    return params


def save_doc(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_doc(path, expected_kind: str) -> dict:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("kind") != expected_kind:
        raise ValueError(f"{path}: expected a {expected_kind!r} document, got {doc.get('kind')!r}")
    if doc.get("format") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format version {doc.get('format')!r}")
    return doc
