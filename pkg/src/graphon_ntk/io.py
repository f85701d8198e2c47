"""Plain-text file formats: kernel blocks, graphon grids, models, tables and run manifests.

Floats are written with ``repr`` so every file round-trips exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ParseError
from .gntk import KernelBlock
from .graphons import Graphon, StepGraphon
from .regression import RegressionModel


def _num(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_matrix(path, A, header: Sequence[str] = ()):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        for line in header:
            out.writerow([line])
        for row in np.atleast_2d(A):
            out.writerow([_num(v) for v in row])


def _read_numbers(path, skip: int = 0) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if lineno <= skip or not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    if rows and len({len(r) for r in rows}) != 1:
        raise ParseError(path, skip + 1, "rows have different lengths")
    return np.array(rows, dtype=float)


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_kernel_block(path, block: KernelBlock):
    """First line ``n``, then ``n`` comma-separated rows; meta goes to ``<path>.json``."""
    write_matrix(path, block.values, header=[str(block.n)])
    meta = {k: (list(v) if isinstance(v, tuple) else v) for k, v in block.meta.items()}
    meta["n"] = block.n
    sidecar_path(path).write_text(json.dumps(meta, sort_keys=True, indent=2, default=_json_default) + "\n")


def load_kernel_block(path) -> KernelBlock:
    path = Path(path)
    with open(path) as fh:
        first = fh.readline().strip()
    try:
        n = int(first)
    except ValueError:
        raise ParseError(path, 1, f"expected the block size, got {first!r}") from None
    values = _read_numbers(path, skip=1) if n else np.zeros((0, 0))
    if values.shape != (n, n):
        raise ParseError(path, 2, f"expected {n} rows of {n} values")
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    return KernelBlock(values, meta)


def save_graphon_grid(path, w: Graphon, m: int):
    """Values ``W(u_i, u_j)`` on the ``m x m`` midpoint grid, one row per line."""
    write_matrix(path, w.grid(m))


def load_graphon_grid(path) -> StepGraphon:
    values = _read_numbers(path)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ParseError(path, 1, "graphon grid must be square")
    return StepGraphon(values)


def save_model(path, model: RegressionModel):
    Path(path).write_text(model.to_json() + "\n")


def load_model(path) -> RegressionModel:
    return RegressionModel.from_json(Path(path).read_text())


def write_rows(path, columns: Sequence[str], rows: Iterable[dict]):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(columns)
        for r in rows:
            out.writerow([_num(r[c]) for c in columns])


def read_rows(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def save_node_table(path, X, ids=None, labels=None):
    X = np.asarray(X, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    ids = list(range(len(X))) if ids is None else list(ids)
    cols = ["id"] + [f"f_{k + 1}" for k in range(X.shape[1])] + (["label"] if labels is not None else [])
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(cols)
        for i, row in enumerate(X):
            extra = [int(labels[i])] if labels is not None else []
            out.writerow([ids[i]] + [_num(v) for v in row] + extra)


def save_split(path, roles: dict):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["id", "role"])
        for role in ("train", "val", "test"):
            for node in roles.get(role, []):
                out.writerow([node, role])


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def config_hash(config: dict) -> str:
    text = json.dumps(config, sort_keys=True, default=_json_default)
    return hashlib.sha256(text.encode()).hexdigest()


def versions() -> dict:
    import scipy

    from . import __version__

    return {"graphon_ntk": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def write_manifest(out_dir, command: str, config: dict, seeds, outputs: Sequence[str]) -> Path:
    """``manifest.json`` next to the outputs: command, config and its hash, seeds, versions."""
    path = Path(out_dir) / "manifest.json"
    manifest = {
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "seeds": list(seeds) if isinstance(seeds, (list, tuple, range)) else [seeds],
        "outputs": sorted(outputs),
        "versions": versions(),
    }
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2, default=_json_default) + "\n")
    return path


def save_signals(path, X, ids=None):
    """One graph signal per row: header ``sample,<node ids...>``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    ids = list(range(X.shape[1])) if ids is None else list(ids)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["sample"] + ids)
        for s, row in enumerate(X):
            out.writerow([s] + [_num(v) for v in row])


def load_signals(path):
    """Inverse of :func:`save_signals`; returns ``(X, node_ids)``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "sample":
            raise ParseError(path, 1, "expected a 'sample,...' header")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise ParseError(path, lineno, f"expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
    return np.array(rows, dtype=float).reshape(len(rows), len(header) - 1), header[1:]
