"""Deterministic CSV/JSON writers with finiteness checks and hashed manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import NonFiniteError


def format_value(v: Any) -> str:
    """CSV cell text; floats keep 17 significant digits and always look like floats."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        s = f"{float(v):.17g}"
        if not any(c in s for c in ".eni"):
            s += ".0"
        return s
    return str(v)


def parse_value(s: str) -> Any:
    if s == "true":
        return True
    if s == "false":
        return False
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _check_finite(producer: str, obj: Any, path: str = "") -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _check_finite(producer, v, f"{path}.{k}" if path else str(k))
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            _check_finite(producer, v, f"{path}[{i}]")
    elif isinstance(obj, np.ndarray):
        if obj.dtype.kind in "fc" and not np.all(np.isfinite(obj)):
            raise NonFiniteError(producer, f"non-finite entry in {path or 'array'}")
    elif isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        raise NonFiniteError(producer, f"{path or 'value'} is {obj}")


def require_finite(producer: str, obj: Any) -> None:
    """Raise :class:`NonFiniteError` naming ``producer`` if ``obj`` holds NaN or infinity."""
    _check_finite(producer, obj)


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence[Any]],
              producer: str) -> Path:
    rows = [list(r) for r in rows]
    for r in rows:
        if len(r) != len(columns):
            raise ValueError(f"{producer}: row has {len(r)} cells, expected {len(columns)}")
    require_finite(producer, rows)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(v) for v in r])
    return path


def read_csv(path: str | Path) -> tuple[list[str], list[list[Any]]]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [[parse_value(c) for c in row] for row in reader]


def _plain(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def write_json(path: str | Path, obj: Any, producer: str) -> Path:
    """Sorted-key JSON; floats use the shortest exactly round-tripping representation."""
    require_finite(producer, obj)
    path = Path(path)
    path.write_text(json.dumps(_plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")
    return path


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text())


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir: str | Path, command: str, config: dict, files: Sequence[Path],
                   version: str) -> Path:
    """``manifest.json`` echoing the resolved config and hashing every output file."""
    out_dir = Path(out_dir)
    entry = {
        "command": command,
        "config": config,
        "version": version,
        "files": {Path(f).name: sha256_file(f) for f in sorted(files, key=lambda p: Path(p).name)},
    }
    return write_json(out_dir / "manifest.json", entry, "manifest")
