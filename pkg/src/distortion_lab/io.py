"""Artifact files: CSV with 17 significant digits, canonical JSON, run manifests."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import platform
from pathlib import Path

import numpy as np

from .ifs_core import IfsPair, ternary_pair
from .metrics import AtomicMeasure

MANIFEST = "manifest.json"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, rows, header=None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in (row if np.ndim(row) else [row])])
    return path


def read_csv(path, header: bool = True) -> np.ndarray:
    """Numeric CSV as an (n, d) array; a single column comes back 1-d."""
    with Path(path).open() as fh:
        rows = list(csv.reader(fh))
    if header and rows and not _numeric(rows[0]):
        rows = rows[1:]
    a = np.array([[float(v) for v in r] for r in rows if r], dtype=float)
    if a.size == 0:
        return np.empty(0)
    return a[:, 0] if a.shape[1] == 1 else a


def _numeric(row) -> bool:
    try:
        [float(v) for v in row]
        return True
    except ValueError:
        return False


def write_cloud(path, cloud) -> Path:
    a = np.asarray(cloud, dtype=float)
    if a.ndim == 1:
        return write_csv(path, a[:, None], ["x"])
    return write_csv(path, a, [f"x{i}" for i in range(a.shape[1])])


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_default, allow_nan=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    import networkx
    import scipy

    from . import __version__

    return {
        "distortion_lab": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "networkx": networkx.__version__,
    }


def write_manifest(out_dir, command: str, config: dict, inputs: dict, seeds: dict, outputs: list) -> Path:
    """Run record; the timestamp is the only field that changes between identical runs."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "config": config,
        "inputs": {k: {"path": str(v), "sha256": sha256_file(v)} for k, v in inputs.items() if v},
        "seeds": seeds,
        "versions": versions(),
        "outputs": {name: sha256_file(out_dir / name) for name in sorted(outputs)},
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }
    return write_json(out_dir / MANIFEST, manifest)


def load_pair(spec: str) -> IfsPair:
    """Pair from a JSON file, or the built-in name ``ternary``."""
    if spec == "ternary":
        return ternary_pair()
    return IfsPair.from_json(read_json(spec))


def load_measure(path) -> AtomicMeasure:
    return AtomicMeasure.from_json(read_json(path))
