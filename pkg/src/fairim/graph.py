"""Undirected graphs with per-node sensitive attributes.

Nodes are dense integers ``0 .. n-1``. Edges are stored canonically as an
``(m, 2)`` array of ``u < v`` pairs sorted lexicographically; the row index
of a pair is its edge id, which the cascade kernels use to address coins.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

GROUP_A = "A"
GROUP_B = "B"


def _canonical_edges(pairs: Iterable[tuple[int, int]]) -> np.ndarray:
    canon = {(u, v) if u < v else (v, u) for u, v in pairs}
    if not canon:
        return np.zeros((0, 2), dtype=np.int64)
    return np.array(sorted(canon), dtype=np.int64)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Immutable undirected graph.

    ``raw_attributes`` holds columns as read from disk; ``labels`` holds the
    binarized groups (``True`` means group A) for each name in
    ``attribute_names``.
    """

    n: int
    edges: np.ndarray
    labels: Mapping[str, np.ndarray] = field(default_factory=dict)
    attribute_names: tuple[str, ...] = ()
    raw_attributes: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 0:
            raise DataError("node count must be non-negative")
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(e):
            if e.min() < 0 or e.max() >= self.n:
                raise DataError(f"edge endpoint outside [0, {self.n})")
            if np.any(e[:, 0] == e[:, 1]):
                raise DataError("self-loops are not allowed")
            e = _canonical_edges(map(tuple, e.tolist()))
        object.__setattr__(self, "edges", _frozen(e))
        labels = {}
        for name in self.attribute_names:
            lab = np.asarray(self.labels[name], dtype=bool)
            if lab.shape != (self.n,):
                raise DataError(f"attribute {name!r} must label all {self.n} nodes")
            labels[name] = _frozen(lab)
        object.__setattr__(self, "labels", labels)
        for name, col in self.raw_attributes.items():
            if len(col) != self.n:
                raise DataError(f"raw attribute {name!r} must cover all {self.n} nodes")

    @classmethod
    def from_edges(cls, n: int, pairs: Iterable[tuple[int, int]], **kw) -> "AttributedGraph":
        return cls(n=n, edges=np.array(list(pairs), dtype=np.int64).reshape(-1, 2), **kw)

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(u), int(v)) for u, v in self.edges}

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """``(indptr, indices, edge_ids)`` adjacency, neighbours sorted ascending."""
        m = self.m
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        eid = np.concatenate([np.arange(m), np.arange(m)])
        order = np.lexsort((dst, src))
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
        return (
            _frozen(indptr),
            _frozen(dst[order].astype(np.int64)),
            _frozen(eid[order].astype(np.int64)),
        )

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def group_sizes(self, attr: str) -> tuple[int, int]:
        lab = self.labels[attr]
        a = int(lab.sum())
        return a, self.n - a

    def with_labels(self, attr: str, is_a: np.ndarray) -> "AttributedGraph":
        labels = dict(self.labels)
        labels[attr] = np.asarray(is_a, dtype=bool)
        names = self.attribute_names if attr in self.attribute_names else self.attribute_names + (attr,)
        return replace(self, labels=labels, attribute_names=names)

    def induced_subgraph(self, keep: Sequence[int]) -> "AttributedGraph":
        """Subgraph on ``keep`` (ascending), relabelled densely in that order."""
        keep = np.asarray(sorted(keep), dtype=np.int64)
        remap = np.full(self.n, -1, dtype=np.int64)
        remap[keep] = np.arange(len(keep))
        e = remap[self.edges] if self.m else np.zeros((0, 2), dtype=np.int64)
        e = e[(e >= 0).all(axis=1)]
        return AttributedGraph(
            n=len(keep),
            edges=e,
            labels={k: v[keep] for k, v in self.labels.items()},
            attribute_names=self.attribute_names,
            raw_attributes={k: tuple(col[i] for i in keep) for k, col in self.raw_attributes.items()},
        )


def feature_matrix(g: AttributedGraph) -> np.ndarray:
    """Dense 0/1 adjacency matrix; row ``u`` is the feature vector of node ``u``."""
    x = np.zeros((g.n, g.n), dtype=np.float64)
    if g.m:
        x[g.edges[:, 0], g.edges[:, 1]] = 1.0
        x[g.edges[:, 1], g.edges[:, 0]] = 1.0
    return x


def group_nodes(g: AttributedGraph, attr: str) -> tuple[list[int], list[int]]:
    if attr not in g.labels:
        raise DataError(f"unknown or non-binarized attribute {attr!r}")
    lab = g.labels[attr]
    return np.flatnonzero(lab).tolist(), np.flatnonzero(~lab).tolist()


def binarize_attribute(
    g: AttributedGraph, attr: str, predicate: Callable[[object], str]
) -> AttributedGraph:
    """Install group labels for ``attr`` by applying ``predicate`` to raw values.

    ``predicate`` maps a raw value to ``"A"`` or ``"B"``; any exception it
    raises, or any other return value, is reported with the node id.
    """
    if attr not in g.raw_attributes:
        raise DataError(f"raw attribute {attr!r} not present")
    is_a = np.zeros(g.n, dtype=bool)
    for node, value in enumerate(g.raw_attributes[attr]):
        try:
            label = predicate(value)
        except (TypeError, ValueError) as exc:
            raise DataError(f"node {node}: cannot classify {attr}={value!r}: {exc}") from exc
        if label not in (GROUP_A, GROUP_B):
            raise DataError(f"node {node}: predicate returned {label!r} for {attr}={value!r}")
        is_a[node] = label == GROUP_A
    return g.with_labels(attr, is_a)


def threshold_predicate(max_a: float) -> Callable[[object], str]:
    """``value <= max_a`` is group A. Values are parsed as numbers."""

    def predicate(value):
        if isinstance(value, str):
            value = float(value)
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            raise TypeError(f"non-numeric value {value!r}")
        return GROUP_A if value <= max_a else GROUP_B

    return predicate


# ---------------------------------------------------------------- file io


def _parse_int(tok: str, path, lineno: int) -> int:
    try:
        return int(tok)
    except ValueError:
        raise DataError(f"{path}:{lineno}: malformed token {tok!r}") from None


def read_edge_pairs(path) -> tuple[list[tuple[int, int]], int | None]:
    """Raw ``(u, v)`` pairs and the ``#n`` header value, if any."""
    pairs = []
    declared = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                head = line[1:].split()
                if len(head) == 2 and head[0] == "n":
                    declared = _parse_int(head[1], path, lineno)
                continue
            toks = line.split()
            if len(toks) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 tokens, got {len(toks)}")
            u, v = (_parse_int(t, path, lineno) for t in toks)
            if u < 0 or v < 0:
                raise DataError(f"{path}:{lineno}: negative node id")
            if u == v:
                raise DataError(f"{path}:{lineno}: self-loop on node {u}")
            pairs.append((u, v))
    return pairs, declared


def load_edge_list(
    path, remap: bool = False, extra_ids: Iterable[int] = ()
) -> AttributedGraph | tuple[AttributedGraph, dict[int, int]]:
    """Read a whitespace separated edge list.

    With ``remap=False`` ids are used as-is and ``n`` is ``1 + max id`` (or the
    ``#n`` header when present). With ``remap=True`` the sorted distinct ids are
    mapped to ``0 ..`` and ``(graph, id_map)`` is returned, ``id_map`` sending
    original ids to dense ids. ``extra_ids`` adds nodes that have no edges
    (only meaningful with ``remap``).
    """
    pairs, declared = read_edge_pairs(path)
    if remap:
        ids = sorted({x for p in pairs for x in p} | {int(x) for x in extra_ids})
        id_map = {orig: i for i, orig in enumerate(ids)}
        g = AttributedGraph.from_edges(len(ids), [(id_map[u], id_map[v]) for u, v in pairs])
        return g, id_map
    top = 1 + max((max(p) for p in pairs), default=-1)
    n = top if declared is None else declared
    if n < top:
        raise DataError(f"{path}: header declares n={n} but ids reach {top - 1}")
    return AttributedGraph.from_edges(n, pairs)


def write_edge_list(g: AttributedGraph, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"#n {g.n}\n")
        for u, v in g.edges:
            fh.write(f"{u} {v}\n")


def write_id_map(id_map: Mapping[int, int], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["original_id", "dense_id"])
        for orig, dense in sorted(id_map.items(), key=lambda kv: kv[1]):
            w.writerow([orig, dense])


def read_id_map(path) -> dict[int, int]:
    with open(path, newline="") as fh:
        return {int(r["original_id"]): int(r["dense_id"]) for r in csv.DictReader(fh)}


def _coerce(value: str):
    try:
        return int(value)
    except ValueError:
        try:
            return float(value)
        except ValueError:
            return value


def read_attribute_ids(path) -> list[int]:
    """Node ids listed in the first column of an attribute CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        return [_parse_int(row[0].strip(), path, i) for i, row in enumerate(reader, start=2) if row and row[0].strip()]


def load_attributes(path, g: AttributedGraph, id_map: Mapping[int, int] | None = None) -> AttributedGraph:
    """Attach raw attribute columns from a ``node_id,<attr>...`` CSV.

    Integer-looking values become ``int``, other numerics ``float``, the rest
    stay strings. With ``id_map`` the CSV ids are original ids; rows whose id
    is absent from the map are skipped (they belong to nodes with no edges
    that were never materialised).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty attribute file") from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0] != "node_id":
            raise DataError(f"{path}: header must be node_id,<attr>[,...]")
        names = header[1:]
        cols: dict[str, list] = {name: [None] * g.n for name in names}
        seen = np.zeros(g.n, dtype=bool)
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} columns")
            node = _parse_int(row[0].strip(), path, lineno)
            if id_map is not None:
                if node not in id_map:
                    continue
                node = id_map[node]
            if not 0 <= node < g.n:
                raise DataError(f"{path}:{lineno}: unknown node id {row[0].strip()}")
            if seen[node]:
                raise DataError(f"{path}:{lineno}: duplicate row for node {row[0].strip()}")
            seen[node] = True
            for name, value in zip(names, row[1:]):
                cols[name][node] = _coerce(value.strip())
    missing = np.flatnonzero(~seen)
    if len(missing):
        raise DataError(f"{path}: no attribute row for node {int(missing[0])}")
    raw = dict(g.raw_attributes)
    raw.update({name: tuple(col) for name, col in cols.items()})
    return replace(g, raw_attributes=raw)


def write_attributes(g: AttributedGraph, path, names: Sequence[str] | None = None) -> None:
    """Write raw columns, or ``A``/``B`` labels for binarized-only attributes."""
    names = list(names) if names is not None else list(dict.fromkeys([*g.raw_attributes, *g.attribute_names]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", *names])
        for u in range(g.n):
            row = [u]
            for name in names:
                if name in g.raw_attributes:
                    row.append(g.raw_attributes[name][u])
                else:
                    row.append(GROUP_A if g.labels[name][u] else GROUP_B)
            w.writerow(row)


def group_label_predicate(value) -> str:
    """Predicate for attribute files that already hold ``A``/``B`` labels."""
    s = str(value).strip().upper()
    if s not in (GROUP_A, GROUP_B):
        raise ValueError(f"expected A or B, got {value!r}")
    return s
