"""Plain-text formats: edge lists, node CSVs, label CSVs and JSON sidecars.

Edge list::

    4 3
    0 1
    1 2 0.5
    2 3

First line ``n m``, then ``m`` lines ``i j [w]`` (0-based, whitespace
separated). Blank lines and lines starting with ``#`` are ignored. Weights
are written with ``repr`` so a round trip is exact.

Signals are ``node,value`` CSVs and labels ``node,class`` CSVs, each with a
header row.
"""

from __future__ import annotations

import csv
import json
import math
import os

import numpy as np

from .exceptions import DimensionMismatch, ParseError
from .graph import build_graph

__all__ = [
    "read_edge_list",
    "write_edge_list",
    "format_edge_list",
    "read_signal",
    "write_signal",
    "read_labels",
    "write_labels",
    "read_features",
    "write_json",
    "format_float",
]


def format_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _open(path):
    if not os.path.exists(path):
        raise FileNotFoundError(f"{path}: no such file")
    return open(path, newline="")


def _content_lines(fh):
    for lineno, raw in enumerate(fh, start=1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def read_edge_list(path):
    with _open(path) as fh:
        lines = _content_lines(fh)
        try:
            lineno, header = next(lines)
        except StopIteration:
            raise ParseError("empty edge list", path, None) from None
        parts = header.split()
        try:
            n, m = (int(p) for p in parts) if len(parts) == 2 else (None, None)
        except ValueError:
            n = m = None
        if n is None or n < 1 or m < 0:
            raise ParseError(f"header must be 'n m' with n >= 1, m >= 0; got {header!r}", path, lineno)
        edges = []
        seen = {}
        for lineno, line in lines:
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"expected 'i j [w]', got {line!r}", path, lineno)
            try:
                i, j = int(parts[0]), int(parts[1])
                w = float(parts[2]) if len(parts) == 3 else 1.0
            except ValueError:
                raise ParseError(f"could not parse edge {line!r}", path, lineno) from None
            if not (0 <= i < n and 0 <= j < n):
                raise ParseError(f"endpoint outside 0..{n - 1} in {line!r}", path, lineno)
            if i == j:
                raise ParseError(f"self-loop on node {i}", path, lineno)
            if not (w > 0 and math.isfinite(w)):
                raise ParseError(f"weight must be finite and positive, got {parts[2]}", path, lineno)
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ParseError(f"edge {key} repeats line {seen[key]}", path, lineno)
            seen[key] = lineno
            edges.append((i, j, w))
        if len(edges) != m:
            raise ParseError(f"header announces {m} edges, found {len(edges)}", path, None)
    return build_graph(n, edges if edges else np.zeros((0, 3)))


def format_edge_list(g):
    out = [f"{g.n} {g.m}"]
    weighted = not g.is_unweighted
    for i, j, w in zip(g.src, g.dst, g.weights):
        out.append(f"{i} {j} {format_float(w)}" if weighted else f"{i} {j}")
    return "\n".join(out) + "\n"


def write_edge_list(g, path):
    with open(path, "w", newline="") as fh:
        fh.write(format_edge_list(g))


def _read_node_csv(path, value_name, parse, n=None):
    with _open(path) as fh:
        rows = list(csv.reader(fh))
    body = [(k, r) for k, r in enumerate(rows, start=1) if r and any(c.strip() for c in r)]
    if not body:
        raise ParseError("empty file", path, None)
    lineno, head = body[0]
    if [c.strip() for c in head] != ["node", value_name]:
        raise ParseError(f"header must be 'node,{value_name}', got {','.join(head)!r}", path, lineno)
    nodes, vals = [], []
    for lineno, r in body[1:]:
        if len(r) != 2:
            raise ParseError(f"expected 2 fields, got {len(r)}", path, lineno)
        try:
            nodes.append(int(r[0]))
            vals.append(parse(r[1].strip()))
        except ValueError:
            raise ParseError(f"could not parse row {','.join(r)!r}", path, lineno) from None
        if nodes[-1] < 0:
            raise ParseError("negative node index", path, lineno)
    return np.asarray(nodes, dtype=np.int64), vals


def read_signal(path, n=None):
    """Read a ``node,value`` CSV covering every node exactly once."""
    nodes, vals = _read_node_csv(path, "value", float)
    size = int(nodes.max()) + 1 if n is None else int(n)
    if len(nodes) != size or not np.array_equal(np.sort(nodes), np.arange(size)):
        raise DimensionMismatch(
            f"{path}: signal rows must list nodes 0..{size - 1} exactly once (found {len(nodes)} rows)"
        )
    out = np.empty(size)
    out[nodes] = vals
    if not np.all(np.isfinite(out)):
        raise ParseError("non-finite signal value", path, None)
    return out


def write_signal(path, values):
    with open(path, "w", newline="") as fh:
        fh.write("node,value\n")
        for i, v in enumerate(np.asarray(values, dtype=float)):
            fh.write(f"{i},{format_float(v)}\n")


def read_labels(path):
    """Read ``node,class`` rows; returns ``(nodes, classes)`` arrays."""
    nodes, vals = _read_node_csv(path, "class", int)
    if len(set(nodes.tolist())) != len(nodes):
        raise ParseError("a node is labelled twice", path, None)
    classes = np.asarray(vals, dtype=np.int64)
    if classes.size and classes.min() < 0:
        raise ParseError("class labels must be >= 0", path, None)
    return nodes, classes


def write_labels(path, labels, nodes=None):
    labels = np.asarray(labels, dtype=np.int64)
    nodes = np.arange(len(labels)) if nodes is None else np.asarray(nodes, dtype=np.int64)
    with open(path, "w", newline="") as fh:
        fh.write("node,class\n")
        for i, c in zip(nodes, labels):
            fh.write(f"{i},{c}\n")


def read_features(path):
    """Numeric CSV, one row per node; a non-numeric first row is treated as a header."""
    with _open(path) as fh:
        rows = [(k, r) for k, r in enumerate(csv.reader(fh), start=1) if r]
    if not rows:
        raise ParseError("empty feature file", path, None)
    try:
        [float(c) for c in rows[0][1]]
    except ValueError:
        rows = rows[1:]
    width = None
    data = []
    for lineno, r in rows:
        try:
            vals = [float(c) for c in r]
        except ValueError:
            raise ParseError(f"non-numeric feature row {','.join(r)!r}", path, lineno) from None
        if width is None:
            width = len(vals)
        elif len(vals) != width:
            raise ParseError(f"expected {width} columns, got {len(vals)}", path, lineno)
        data.append(vals)
    if not data:
        raise ParseError("no feature rows", path, None)
    return np.asarray(data)


def write_json(path, obj):
    with open(path, "w", newline="") as fh:
        fh.write(json.dumps(obj, sort_keys=True, indent=2) + "\n")
