"""Deterministic CSV / JSON writers and the output manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np


def format_number(v) -> str:
    """Fixed 17-significant-digit text for floats; ints stay ints."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.17g}"
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO(newline="")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_number(v) for v in row])
    return buf.getvalue()


def json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def json_text(obj) -> str:
    return json.dumps(json_safe(obj), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


class OutputDir:
    """Collects written files so a manifest with content hashes can be emitted."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: dict[str, str] = {}

    def _write(self, rel: str, text: str) -> Path:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        data = text.encode("utf-8")
        path.write_bytes(data)
        self.files[rel] = hashlib.sha256(data).hexdigest()
        return path

    def write_csv(self, rel: str, header, rows) -> Path:
        return self._write(rel, csv_text(header, rows))

    def write_json(self, rel: str, obj) -> Path:
        return self._write(rel, json_text(obj))

    def write_manifest(self, rel: str = "manifest.json", unhashed=("metadata.json",)) -> Path:
        """List every data file with its SHA-256; ``unhashed`` files carry run metadata."""
        entries = [{"path": k, "sha256": v} for k, v in sorted(self.files.items())]
        path = self.root / rel
        path.write_text(json_text({"files": entries, "unhashed": list(unhashed)}), encoding="utf-8")
        return path
