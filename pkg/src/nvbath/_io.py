"""Shared text-output helpers: scientific-notation formatting, metadata CSV,
and atomic writes (write to a temp file in the same directory, then rename)."""
from __future__ import annotations

import os
import tempfile

import numpy as np

# 9 significant digits, fixed scientific notation, for diffable output
FLOAT_FMT = "%.8e"


def format_float(x):
    return FLOAT_FMT % float(x)


def atomic_write_text(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(columns, metadata=None):
    """CSV with '#'-prefixed metadata lines, a header row, and %.8e values.

    ``columns`` is a mapping of name to 1-d array; all columns must have
    equal length.
    """
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    if any(a.shape != arrays[0].shape for a in arrays):
        raise ValueError("columns must have equal length")
    lines = []
    for key, value in (metadata or {}).items():
        lines.append(f"# {key} = {value}")
    lines.append(",".join(names))
    for row in zip(*arrays):
        lines.append(",".join(format_float(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, columns, metadata=None):
    atomic_write_text(path, csv_text(columns, metadata))


def read_csv(path):
    """Inverse of write_csv: returns (metadata dict, dict of float arrays)."""
    metadata = {}
    header = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                key, _, value = body.partition("=")
                metadata[key.strip()] = value.strip()
            elif header is None:
                header = [c.strip() for c in line.split(",")]
            else:
                rows.append([float(v) for v in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: no header row")
    data = np.asarray(rows, dtype=float).reshape(len(rows), len(header))
    return metadata, {name: data[:, i] for i, name in enumerate(header)}
