"""Graph loading, generation and all-pairs shortest paths.

Graphs here are undirected, unweighted and simple. Everything that feeds the
optimizer goes through :func:`apsp`, which turns a connected graph into a
hop-count :class:`DistanceMatrix`.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path


class GraphParseError(ValueError):
    """Raised when a graph or distance file cannot be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DisconnectedGraphError(ValueError):
    """Raised when shortest-path distances would be infinite."""

    def __init__(self, u: int, v: int, labels: Optional[Sequence[str]] = None):
        self.u, self.v = u, v
        name_u = labels[u] if labels else str(u)
        name_v = labels[v] if labels else str(v)
        super().__init__(
            f"graph is disconnected: vertices {name_u} and {name_v} lie in different components"
        )


@dataclass
class Graph:
    n: int
    edges: list[tuple[int, int]] = field(default_factory=list)
    labels: Optional[list[str]] = None

    def __post_init__(self) -> None:
        seen = set()
        clean = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            key = (u, v) if u < v else (v, u)
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            clean.append(key)
        self.edges = clean
        if self.labels is not None and len(self.labels) != self.n:
            raise ValueError("labels must have one entry per vertex")

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[tuple[int, int]],
                   labels: Optional[list[str]] = None) -> "Graph":
        """Build a graph, silently dropping self-loops and repeated pairs."""
        seen = set()
        edges = []
        for u, v in pairs:
            if u == v:
                continue
            key = (u, v) if u < v else (v, u)
            if key not in seen:
                seen.add(key)
                edges.append(key)
        return cls(n, edges, labels)

    @property
    def m(self) -> int:
        return len(self.edges)

    def edge_set(self) -> set[frozenset[int]]:
        return {frozenset(e) for e in self.edges}

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def to_csr(self) -> csr_matrix:
        if not self.edges:
            return csr_matrix((self.n, self.n), dtype=np.int8)
        e = np.asarray(self.edges, dtype=np.int64)
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        data = np.ones(len(rows), dtype=np.int8)
        return csr_matrix((data, (rows, cols)), shape=(self.n, self.n))

    def vertex_labels(self) -> list[str]:
        return list(self.labels) if self.labels is not None else [str(i) for i in range(self.n)]


@dataclass
class DistanceMatrix:
    """Symmetric target distances plus the dilation factor already applied."""

    d: np.ndarray
    dilation: float = 1.0
    labels: Optional[list[str]] = None

    def __post_init__(self) -> None:
        self.d = np.asarray(self.d, dtype=float)
        if self.d.ndim != 2 or self.d.shape[0] != self.d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {self.d.shape}")
        if not np.all(np.isfinite(self.d)):
            raise ValueError("distance matrix contains non-finite entries")
        if np.any(self.d < 0):
            raise ValueError("distance matrix contains negative entries")
        if np.any(np.diag(self.d) != 0):
            raise ValueError("distance matrix must have a zero diagonal")
        if not np.allclose(self.d, self.d.T, rtol=1e-12, atol=1e-12):
            raise ValueError("distance matrix is not symmetric")
        if self.dilation <= 0:
            raise ValueError("dilation must be positive")
        if self.labels is not None and len(self.labels) != self.n:
            raise ValueError("labels must have one entry per row")

    @property
    def n(self) -> int:
        return self.d.shape[0]

    def max(self) -> float:
        return float(self.d.max()) if self.n else 0.0

    def scaled(self, factor: float) -> "DistanceMatrix":
        """Return a copy with every distance multiplied by ``factor``."""
        if factor <= 0:
            raise ValueError("dilation factor must be positive")
        return DistanceMatrix(self.d * factor, self.dilation * factor, self.labels)

    def to_csv(self) -> str:
        labels = self.labels if self.labels is not None else [str(i) for i in range(self.n)]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([""] + labels)
        for lab, row in zip(labels, self.d):
            writer.writerow([lab] + [repr(float(x)) for x in row])
        return buf.getvalue()


def read_distance_csv(text: str, rtol: float = 1e-9) -> DistanceMatrix:
    """Parse a labeled square distance table (the format written by ``to_csv``)."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise GraphParseError("empty distance table")
    labels = [c.strip() for c in rows[0][1:]]
    n = len(labels)
    if n == 0:
        raise GraphParseError("header row has no labels", 1)
    if len(rows) - 1 != n:
        raise GraphParseError(f"expected {n} data rows, found {len(rows) - 1}")
    d = np.empty((n, n))
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != n + 1:
            raise GraphParseError(f"expected {n + 1} fields, found {len(row)}", lineno)
        if row[0].strip() != labels[i]:
            raise GraphParseError(
                f"row label {row[0].strip()!r} does not match column label {labels[i]!r}", lineno)
        for j, cell in enumerate(row[1:]):
            try:
                d[i, j] = float(cell)
            except ValueError:
                raise GraphParseError(f"non-numeric distance {cell!r}", lineno) from None
    if not np.all(np.isfinite(d)):
        bad = np.argwhere(~np.isfinite(d))[0]
        raise GraphParseError(f"missing or non-finite distance for pair ({labels[bad[0]]}, {labels[bad[1]]})")
    for i in range(n):
        if d[i, i] != 0:
            raise GraphParseError(f"nonzero self-distance for {labels[i]}", i + 2)
    for i, j in itertools.combinations(range(n), 2):
        a, b = d[i, j], d[j, i]
        if not math.isclose(a, b, rel_tol=rtol, abs_tol=1e-12):
            raise GraphParseError(
                f"asymmetric distances for pair ({labels[i]}, {labels[j]}): {a} vs {b}")
    d = 0.5 * (d + d.T)
    return DistanceMatrix(d, 1.0, labels)


# ---------------------------------------------------------------------------
# Parsers
# ---------------------------------------------------------------------------

def parse_matrix_market(text: str) -> Graph:
    """Read the nonzero pattern of a coordinate Matrix Market file.

    Values are ignored, the diagonal is dropped and the pattern is symmetrized.
    Non-square matrices use ``max(rows, cols)`` vertices.
    """
    lines = text.splitlines()
    if not lines or not lines[0].startswith("%%MatrixMarket"):
        raise GraphParseError("missing '%%MatrixMarket' banner", 1)
    banner = lines[0].split()
    if len(banner) < 4 or banner[1].lower() != "matrix":
        raise GraphParseError(f"malformed banner {lines[0]!r}", 1)
    if banner[2].lower() != "coordinate":
        raise GraphParseError(f"unsupported format {banner[2]!r}; only 'coordinate' is read", 1)

    size_line = None
    idx = 1
    while idx < len(lines):
        s = lines[idx].strip()
        idx += 1
        if not s or s.startswith("%"):
            continue
        size_line = (idx, s)
        break
    if size_line is None:
        raise GraphParseError("missing size line", len(lines))
    lineno, s = size_line
    parts = s.split()
    if len(parts) != 3:
        raise GraphParseError(f"size line must have 3 integers, got {s!r}", lineno)
    try:
        rows, cols, nnz = (int(p) for p in parts)
    except ValueError:
        raise GraphParseError(f"size line must have 3 integers, got {s!r}", lineno) from None
    if rows < 0 or cols < 0 or nnz < 0:
        raise GraphParseError("negative size", lineno)

    n = max(rows, cols)
    pairs = []
    count = 0
    for k in range(idx, len(lines)):
        s = lines[k].strip()
        if not s or s.startswith("%"):
            continue
        lineno = k + 1
        toks = s.split()
        if len(toks) < 2:
            raise GraphParseError(f"entry needs row and column indices, got {s!r}", lineno)
        try:
            i, j = int(toks[0]), int(toks[1])
        except ValueError:
            raise GraphParseError(f"non-integer index in {s!r}", lineno) from None
        if not (1 <= i <= rows and 1 <= j <= cols):
            raise GraphParseError(f"index ({i}, {j}) outside declared {rows}x{cols}", lineno)
        count += 1
        pairs.append((i - 1, j - 1))
    if count != nnz:
        raise GraphParseError(f"header declares {nnz} entries but {count} were found", len(lines))
    return Graph.from_pairs(n, pairs)


def parse_edge_list(text: str) -> Graph:
    """Parse whitespace-separated ``u v`` lines; ``#`` starts a comment line.

    Vertex ids are reindexed densely in first-appearance order and kept as labels.
    """
    index: dict[str, int] = {}
    labels: list[str] = []
    pairs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        s = raw.strip()
        if not s or s.startswith("#"):
            continue
        toks = s.split()
        if len(toks) != 2:
            raise GraphParseError(f"expected two vertex ids, got {s!r}", lineno)
        ids = []
        for tok in toks:
            try:
                key = str(int(tok))
            except ValueError:
                raise GraphParseError(f"non-integer vertex id {tok!r}", lineno) from None
            if key not in index:
                index[key] = len(labels)
                labels.append(key)
            ids.append(index[key])
        pairs.append((ids[0], ids[1]))
    return Graph.from_pairs(len(labels), pairs, labels)


def serialize_edge_list(g: Graph) -> str:
    labels = g.vertex_labels()
    return "".join(f"{labels[u]} {labels[v]}\n" for u, v in g.edges)


def serialize_matrix_market(g: Graph) -> str:
    out = ["%%MatrixMarket matrix coordinate pattern symmetric", f"{g.n} {g.n} {g.m}"]
    out += [f"{max(u, v) + 1} {min(u, v) + 1}" for u, v in g.edges]
    return "\n".join(out) + "\n"


def load_graph(path: str) -> Graph:
    """Load ``.mtx`` files as Matrix Market, anything else as an edge list."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".mtx") or text.startswith("%%MatrixMarket"):
        return parse_matrix_market(text)
    return parse_edge_list(text)


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

GOLDEN = (1 + math.sqrt(5)) / 2


def _cyclic(v: tuple[float, float, float]) -> list[tuple[float, float, float]]:
    a, b, c = v
    return [(a, b, c), (b, c, a), (c, a, b)]


def polytope_vertices(kind: str) -> np.ndarray:
    """Vertex coordinates of a regular polytope, in the order used by :func:`generate_polytope`."""
    if kind == "tetrahedron":
        pts = [(1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)]
    elif kind == "cube":
        pts = list(itertools.product((-1, 1), repeat=3))
    elif kind == "octahedron":
        pts = [(0, 0, 1), (1, 0, 0), (0, 1, 0), (-1, 0, 0), (0, -1, 0), (0, 0, -1)]
    elif kind == "icosahedron":
        pts = []
        for s1, s2 in itertools.product((-1, 1), repeat=2):
            pts += _cyclic((0.0, s1 * 1.0, s2 * GOLDEN))
    elif kind == "dodecahedron":
        pts = [tuple(float(x) for x in p) for p in itertools.product((-1, 1), repeat=3)]
        for s1, s2 in itertools.product((-1, 1), repeat=2):
            pts += _cyclic((0.0, s1 / GOLDEN, s2 * GOLDEN))
    else:
        raise ValueError(f"unknown polytope {kind!r}")
    return np.asarray(pts, dtype=float)


POLYTOPES = ("tetrahedron", "cube", "octahedron", "dodecahedron", "icosahedron")


def generate_polytope(kind: str) -> Graph:
    """1-skeleton of a Platonic solid: vertex pairs at the minimum mutual distance."""
    pts = polytope_vertices(kind)
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(-1))
    edge_len = dist[dist > 1e-9].min()
    n = len(pts)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n)
             if abs(dist[i, j] - edge_len) < 1e-6]
    return Graph(n, edges)


def generate_cycle(n: int) -> Graph:
    if n < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


def generate_path(n: int) -> Graph:
    if n < 1:
        raise ValueError("a path needs at least 1 vertex")
    return Graph(n, [(i, i + 1) for i in range(n - 1)])


def generate_grid(rows: int, cols: int) -> Graph:
    """Rectangular lattice; vertex ``r * cols + c`` sits at row r, column c."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Graph(rows * cols, edges)


def generate_complete(n: int) -> Graph:
    return Graph(n, list(itertools.combinations(range(n), 2)))


def subdivide(g: Graph, times: int = 1) -> Graph:
    """Replace every edge by a two-edge path through a new midpoint, ``times`` rounds."""
    if times < 1:
        raise ValueError("times must be a positive integer")
    n, edges = g.n, list(g.edges)
    labels = list(g.labels) if g.labels is not None else None
    for _ in range(times):
        new_edges = []
        for u, v in edges:
            m = n
            n += 1
            if labels is not None:
                labels.append(f"{labels[u]}-{labels[v]}")
            new_edges.append((u, m))
            new_edges.append((v, m))
        edges = new_edges
    return Graph(n, edges, labels)


def generate(spec: str) -> Graph:
    """Build a graph from a generator string.

    Accepted forms: a polytope name, ``cycle:N``, ``path:N``, ``complete:N``,
    ``grid:RxC`` (or ``grid:N`` for a square grid).
    """
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    if name == "isocahedron":
        name = "icosahedron"
    try:
        if name in POLYTOPES and not arg:
            return generate_polytope(name)
        if name == "cycle":
            return generate_cycle(int(arg))
        if name == "path":
            return generate_path(int(arg))
        if name == "complete":
            return generate_complete(int(arg))
        if name == "grid":
            r, _, c = arg.lower().partition("x")
            return generate_grid(int(r), int(c or r))
    except ValueError as exc:
        raise ValueError(f"bad generator spec {spec!r}: {exc}") from None
    raise ValueError(f"unknown generator {spec!r}")


# ---------------------------------------------------------------------------
# Shortest paths
# ---------------------------------------------------------------------------

def apsp(g: Graph) -> DistanceMatrix:
    """Hop-count distances between all vertex pairs (BFS from every source)."""
    if g.n == 0:
        return DistanceMatrix(np.zeros((0, 0)), 1.0, g.labels)
    csr = g.to_csr()
    ncomp, comp = connected_components(csr, directed=False)
    if ncomp > 1:
        u = 0
        v = int(np.flatnonzero(comp != comp[0])[0])
        raise DisconnectedGraphError(u, v, g.labels)
    d = shortest_path(csr, method="D", directed=False, unweighted=True)
    return DistanceMatrix(d, 1.0, list(g.labels) if g.labels is not None else None)
