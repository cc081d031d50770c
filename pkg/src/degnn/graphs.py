"""Undirected weighted graphs: construction, file ingestion, normalization.

The Graph type is the package currency for every structural operation. Edges
are canonical (i, j) pairs with i < j and positive finite weights; both a
sorted edge list and a per-node adjacency view are kept so dense-matrix code
and the partition/decomposition passes (which must scale to ~1e6 edges) can
each use the natural representation.
"""

import warnings

import numpy as np

from degnn.errors import DomainError, ParseError


class Graph:
    """Immutable undirected graph on nodes 0..n-1.

    Parameters
    ----------
    n : int
        Node count, must be positive.
    edges : iterable of (i, j) or (i, j, weight)
        Undirected edges. Pairs are canonicalized to i < j. Weight defaults
        to 1.0 and must be finite and positive. Self-loops and duplicate
        pairs are rejected here; file loading deduplicates before calling.

    Treat instances as frozen: no method mutates state after __init__.
    """

    __slots__ = ("n", "_edges", "_weights", "_adj")

    def __init__(self, n, edges=()):
        if not isinstance(n, (int, np.integer)) or n <= 0:
            raise DomainError(f"node count must be a positive int, got {n!r}")
        self.n = int(n)
        adj = [dict() for _ in range(self.n)]
        canon = {}
        for e in edges:
            if len(e) == 2:
                i, j = e
                w = 1.0
            elif len(e) == 3:
                i, j, w = e
            else:
                raise DomainError(f"edge must be (i, j) or (i, j, w), got {e!r}")
            i, j = int(i), int(j)
            if i == j:
                raise DomainError(f"self-loop ({i}, {j}) is not allowed")
            if i > j:
                i, j = j, i
            if i < 0 or j >= self.n:
                raise DomainError(f"edge ({i}, {j}) out of range for n={self.n}")
            w = float(w)
            if not np.isfinite(w) or w <= 0.0:
                raise DomainError(f"edge ({i}, {j}) has invalid weight {w!r}")
            if (i, j) in canon:
                raise DomainError(f"duplicate edge ({i}, {j})")
            canon[(i, j)] = w
            adj[i][j] = w
            adj[j][i] = w
        pairs = sorted(canon)
        self._edges = tuple(pairs)
        self._weights = tuple(canon[p] for p in pairs)
        self._adj = tuple(adj)

    @property
    def m(self):
        """Number of undirected edges."""
        return len(self._edges)

    def edges(self):
        """Sorted tuple of canonical (i, j) pairs, i < j."""
        return self._edges

    def edge_list(self):
        """Sorted list of (i, j, weight) triples."""
        return [(i, j, w) for (i, j), w in zip(self._edges, self._weights)]

    def neighbors(self, i):
        """Mapping neighbor -> weight for node i. Do not mutate."""
        return self._adj[i]

    def degree(self, i):
        return len(self._adj[i])

    def weighted_degree(self, i):
        return sum(self._adj[i].values())

    def has_edge(self, i, j):
        return j in self._adj[i]

    def weight(self, i, j):
        try:
            return self._adj[i][j]
        except KeyError:
            raise DomainError(f"no edge ({i}, {j})") from None

    def __repr__(self):
        return f"Graph(n={self.n}, m={self.m})"


def load_edge_list(path, n=None, one_indexed=False):
    """Read a whitespace-separated edge list file into a Graph.

    Each non-blank line is "src dst" or "src dst weight"; text after '#' is
    a comment. Duplicate undirected pairs collapse to one edge (the last
    weight read wins); self-loop lines are skipped with a warning. Node
    count is 1 + max id seen unless n is given explicitly.

    Raises ParseError (with 1-based line number) on malformed lines and
    DomainError on negative ids or an explicit n smaller than 1 + max id.
    """
    path = str(path)
    raw = {}
    max_id = -1
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) not in (2, 3):
                raise ParseError(
                    f"expected 'src dst [weight]', got {len(parts)} fields",
                    path=path, line=lineno,
                )
            try:
                i, j = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(
                    f"node ids must be integers, got {parts[0]!r} {parts[1]!r}",
                    path=path, line=lineno,
                ) from None
            w = 1.0
            if len(parts) == 3:
                try:
                    w = float(parts[2])
                except ValueError:
                    raise ParseError(
                        f"weight must be a number, got {parts[2]!r}",
                        path=path, line=lineno,
                    ) from None
            if one_indexed:
                i -= 1
                j -= 1
            if i < 0 or j < 0:
                raise DomainError(
                    f"negative node id on line {lineno} of {path}"
                )
            if i == j:
                warnings.warn(
                    f"skipping self-loop ({i}, {i}) on line {lineno} of {path}"
                )
                max_id = max(max_id, i)
                continue
            if i > j:
                i, j = j, i
            raw[(i, j)] = w
            max_id = max(max_id, j)
    if n is None:
        if max_id < 0:
            raise ParseError("edge list is empty and no node count given", path=path)
        n = max_id + 1
    elif max_id >= n:
        raise DomainError(
            f"explicit n={n} but file references node {max_id}"
        )
    return Graph(n, [(i, j, w) for (i, j), w in raw.items()])


def load_features_csv(path, n):
    """Read a headerless CSV of n rows into an n x d float64 matrix.

    Raises ParseError on a row-count mismatch, ragged rows, or non-numeric
    cells (with the offending 1-based line number).
    """
    path = str(path)
    rows = []
    width = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            cells = text.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise ParseError(
                    f"row has {len(cells)} cells, expected {width}",
                    path=path, line=lineno,
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise ParseError(
                    "non-numeric cell", path=path, line=lineno
                ) from None
    if len(rows) != n:
        raise ParseError(f"expected {n} feature rows, found {len(rows)}", path=path)
    out = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(out)):
        raise ParseError("feature file contains non-finite values", path=path)
    return out


def adjacency(g):
    """Dense symmetric n x n adjacency matrix with edge weights."""
    a = np.zeros((g.n, g.n), dtype=np.float64)
    for (i, j), w in zip(g.edges(), g._weights):
        a[i, j] = w
        a[j, i] = w
    return a


def normalized_adjacency(g, add_self_loops=True):
    """Symmetric degree-normalized adjacency D^{-1/2} (A [+ I]) D^{-1/2}.

    Degrees are row sums of the (optionally self-looped) matrix. With
    self-loops every degree is positive; without them an isolated node has
    no valid normalization and raises DomainError. The result has spectral
    norm at most 1, attained on any graph with at least one edge.
    """
    a = adjacency(g)
    if add_self_loops:
        a = a + np.eye(g.n)
    deg = a.sum(axis=1)
    if np.any(deg <= 0.0):
        bad = int(np.argmin(deg))
        raise DomainError(
            f"node {bad} has degree 0; normalization needs positive degrees "
            "(enable add_self_loops or remove isolated nodes)"
        )
    inv_sqrt = 1.0 / np.sqrt(deg)
    return a * inv_sqrt[:, None] * inv_sqrt[None, :]


def connected_components(g):
    """Label nodes by component: array of length n, labels 0..c-1.

    Component labels follow first-seen order scanning nodes by id, so the
    component containing node 0 is label 0.
    """
    labels = np.full(g.n, -1, dtype=np.int64)
    c = 0
    for start in range(g.n):
        if labels[start] >= 0:
            continue
        stack = [start]
        labels[start] = c
        while stack:
            u = stack.pop()
            for v in g.neighbors(u):
                if labels[v] < 0:
                    labels[v] = c
                    stack.append(v)
        c += 1
    return labels


def induced_subgraph(g, nodes):
    """Subgraph on the given nodes with ids relabeled to 0..len(nodes)-1.

    Returns (subgraph, mapping) where mapping[k] is the original id of the
    subgraph's node k. Node order follows the sorted input.
    """
    nodes = sorted(set(int(v) for v in nodes))
    if not nodes:
        raise DomainError("cannot induce a subgraph on an empty node set")
    if nodes[0] < 0 or nodes[-1] >= g.n:
        raise DomainError("subgraph nodes out of range")
    index = {v: k for k, v in enumerate(nodes)}
    edges = []
    for v in nodes:
        for u, w in g.neighbors(v).items():
            if u > v and u in index:
                edges.append((index[v], index[u], w))
    return Graph(len(nodes), edges), nodes
