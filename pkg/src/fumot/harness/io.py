"""
Field files, traces and run manifests.

Nodal fields are written as CSV with a one-line header

    # nx=<int> ny=<int> domain=<kind> channel=<name>

followed by ``nx`` rows of ``ny`` values (row ``i`` is ``x_i``). Values are
printed with 17 significant digits so that reading a file back reproduces the
array bit for bit. An 8-bit PGM rendering can be written next to the CSV for
quick inspection; the CSV stays the reference copy.
"""
from __future__ import annotations

import csv
import json
import platform
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "FieldFile",
    "read_field",
    "write_field",
    "write_pgm",
    "read_pgm",
    "write_trace",
    "write_table",
    "write_manifest",
    "environment_versions",
]

_HEADER = re.compile(r"#\s*nx=(\d+)\s+ny=(\d+)\s+domain=(\S+)\s+channel=(\S+)")


@dataclass
class FieldFile:
    """A nodal field with the metadata of its CSV header."""

    data: np.ndarray
    domain: str
    channel: str

    @property
    def nx(self) -> int:
        return self.data.shape[0]

    @property
    def ny(self) -> int:
        return self.data.shape[1]


def write_field(path, data, domain: str, channel: str, pgm: bool = False) -> Path:
    """Write a nodal field as CSV (and optionally a PGM next to it).

    ``channel`` and ``domain`` may not contain whitespace.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise ValueError(f"expected a 2D nodal field, got shape {data.shape}")
    if re.search(r"\s", channel + domain):
        raise ValueError("channel and domain names may not contain whitespace")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nx, ny = data.shape
    with open(path, "w", newline="") as fh:
        fh.write(f"# nx={nx} ny={ny} domain={domain} channel={channel}\n")
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")
    if pgm:
        write_pgm(path.with_suffix(".pgm"), data, label=channel)
    return path


def read_field(path) -> FieldFile:
    """Read a CSV written by :func:`write_field`."""
    with open(path) as fh:
        first = fh.readline()
        m = _HEADER.match(first.strip())
        if m is None:
            raise ValueError(f"{path}: missing or malformed field header: {first.strip()!r}")
        nx, ny = int(m.group(1)), int(m.group(2))
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (nx, ny):
        raise ValueError(f"{path}: header says {nx}x{ny}, body has shape {data.shape}")
    return FieldFile(data, m.group(3), m.group(4))


def write_pgm(path, data, label: str = "", lo: float | None = None, hi: float | None = None) -> Path:
    """Binary 8-bit PGM (P5) rendering with the value range in a comment.

    The image has ``ny`` rows and ``nx`` columns with ``y`` increasing
    upwards. Non-finite values render black.
    """
    data = np.asarray(data, dtype=float)
    finite = data[np.isfinite(data)]
    lo = float(finite.min()) if lo is None and finite.size else (0.0 if lo is None else lo)
    hi = float(finite.max()) if hi is None and finite.size else (1.0 if hi is None else hi)
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    img = np.clip(np.nan_to_num((data - lo) * scale, nan=0.0, posinf=255.0, neginf=0.0), 0, 255)
    img = np.round(img).astype(np.uint8).T[::-1]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = img.shape
    header = f"P5\n# {label} min={lo:.9g} max={hi:.9g}\n{cols} {rows}\n255\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(img.tobytes())
    return path


def read_pgm(path):
    """Read a P5 file written by :func:`write_pgm`: ``(image, min, max)``."""
    raw = Path(path).read_bytes()
    tokens, comments, pos = [], [], 0
    while len(tokens) < 4:
        # header tokens are separated by whitespace; comments run to end of line
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            end = raw.index(b"\n", pos)
            comments.append(raw[pos + 1:end].decode())
            pos = end + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end].decode())
        pos = end
    if tokens[0] != "P5":
        raise ValueError(f"{path}: not a binary PGM")
    cols, rows = int(tokens[1]), int(tokens[2])
    img = np.frombuffer(raw[pos + 1:pos + 1 + rows * cols], dtype=np.uint8).reshape(rows, cols)
    lo = hi = None
    for c in comments:
        m = re.search(r"min=(\S+)\s+max=(\S+)", c)
        if m:
            lo, hi = float(m.group(1)), float(m.group(2))
    return img, lo, hi


def write_trace(path, trace) -> Path:
    """Optimizer trace records as CSV (iteration, objective, grad_norm, step)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "objective", "grad_norm", "step"])
        for rec in trace:
            w.writerow([rec.iteration, repr(float(rec.objective)), repr(float(rec.grad_norm)),
                        repr(float(rec.step))])
    return path


def write_table(path, rows, columns) -> Path:
    """Plain CSV table with a header row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in np.asarray(rows, dtype=float):
            w.writerow([repr(float(v)) for v in row])
    return path


def environment_versions() -> dict:
    """Versions of the interpreter and the numerical stack."""
    import numba
    import scipy
    import yaml

    from .. import __version__

    return {
        "fumot": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "pyyaml": yaml.__version__,
        "platform": platform.platform(),
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_manifest(path, config: dict, seeds: dict, results: dict | None = None,
                   files: list | None = None) -> Path:
    """JSON manifest: config echo, seeds, library versions, results and written files."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {
        "config": _jsonable(config),
        "seeds": _jsonable(seeds),
        "versions": environment_versions(),
        "results": _jsonable(results or {}),
        "files": [str(f) for f in (files or [])],
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True))
    return path
