"""Deterministic multilevel k-way graph partitioner.

Pipeline per connected region: coarsen by heavy-edge matching until the
graph is small, grow an initial partition greedily from seeded start nodes,
then walk the levels back up refining with Fiduccia-Mattheyses passes
(single-node moves picked by gain, tentative sequences with rollback to the
best balanced prefix). All tie-breaks go to the smallest node id, so a seed
fully determines the output.

Disconnected graphs are handled outside the pipeline: each component is
partitioned independently with part counts allocated proportionally to
component size (every component at least one part when p allows), or whole
components are packed onto parts when there are more components than parts.

Balance is measured as max part size / (n / p) and kept below the caller's
max_imbalance whenever feasible; moves never empty a part.
"""

import heapq
import math
import warnings
from collections import deque
from dataclasses import dataclass

import numpy as np

from degnn.errors import DomainError, ParseError
from degnn.graphs import connected_components, induced_subgraph

COARSE_STOP_FACTOR = 8
COARSE_STOP_FLOOR = 30
MAX_FM_PASSES = 12
INITIAL_TRIES = 3


@dataclass(frozen=True)
class Partition:
    """Node labels in [0, p). Empty parts only occur when unavoidable."""

    labels: np.ndarray
    p: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.int64)
        if labels.ndim != 1 or len(labels) == 0:
            raise DomainError("labels must be a non-empty 1-D array")
        if self.p < 1 or labels.min() < 0 or labels.max() >= self.p:
            raise DomainError(f"labels must lie in [0, {self.p})")
        object.__setattr__(self, "labels", labels)

    def sizes(self):
        return np.bincount(self.labels, minlength=self.p)

    def imbalance(self):
        n = len(self.labels)
        return float(self.sizes().max() / (n / self.p))


def cut_edges(g, part):
    """Edges of g whose endpoints land in different parts."""
    labels = part.labels
    return [(i, j) for (i, j) in g.edges() if labels[i] != labels[j]]


def cut_weight(g, part):
    labels = part.labels
    return float(sum(w for (i, j, w) in g.edge_list() if labels[i] != labels[j]))


def partition_stats(g, part):
    """Summary dict: part count, sizes, imbalance, cut size and weight."""
    cut = cut_edges(g, part)
    return {
        "p": part.p,
        "n": g.n,
        "sizes": [int(s) for s in part.sizes()],
        "imbalance": part.imbalance(),
        "cut_edges": len(cut),
        "cut_weight": cut_weight(g, part),
    }


def random_balanced_partition(n, p, seed):
    """Baseline: seeded shuffle dealt round-robin, sizes differ by <= 1."""
    if not (1 <= p <= n):
        raise DomainError(f"need 1 <= p <= n, got p={p}, n={n}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    labels = np.empty(n, dtype=np.int64)
    labels[order] = np.arange(n) % p
    return Partition(labels=labels, p=p)


def import_partition(path, n):
    """Read one part id per line; p becomes 1 + max id.

    Raises ParseError on a line-count mismatch or non-integer lines and
    DomainError on negative ids. Ids missing from the middle of the range
    leave empty parts, which is tolerated with a warning.
    """
    path = str(path)
    labels = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                v = int(text)
            except ValueError:
                raise ParseError(
                    f"expected one integer per line, got {text!r}",
                    path=path, line=lineno,
                ) from None
            if v < 0:
                raise DomainError(f"negative part id {v} on line {lineno} of {path}")
            labels.append(v)
    if len(labels) != n:
        raise ParseError(f"expected {n} lines, found {len(labels)}", path=path)
    arr = np.asarray(labels, dtype=np.int64)
    p = int(arr.max()) + 1
    present = set(arr.tolist())
    missing = [k for k in range(p) if k not in present]
    if missing:
        warnings.warn(f"partition file leaves parts {missing} empty")
    return Partition(labels=arr, p=p)


def _adjacency_lists(g):
    adj = [dict(g.neighbors(v)) for v in range(g.n)]
    return adj


def _contract(adj, node_w, rng):
    """One heavy-edge matching contraction. Returns (coarse adj, weights, map)."""
    n = len(adj)
    match = [-1] * n
    for u in rng.permutation(n):
        u = int(u)
        if match[u] != -1:
            continue
        best = -1
        best_w = -math.inf
        for v, w in adj[u].items():
            if match[v] != -1:
                continue
            if w > best_w or (w == best_w and (best == -1 or v < best)):
                best, best_w = v, w
        if best != -1:
            match[u] = best
            match[best] = u
    coarse_id = [-1] * n
    c = 0
    for u in range(n):
        if coarse_id[u] == -1:
            coarse_id[u] = c
            v = match[u]
            if v != -1:
                coarse_id[v] = c
            c += 1
    cadj = [dict() for _ in range(c)]
    cw = [0.0] * c
    for u in range(n):
        cw[coarse_id[u]] += node_w[u]
    for u in range(n):
        cu = coarse_id[u]
        for v, w in adj[u].items():
            if v <= u:
                continue
            cv = coarse_id[v]
            if cu == cv:
                continue
            cadj[cu][cv] = cadj[cu].get(cv, 0.0) + w
            cadj[cv][cu] = cadj[cv].get(cu, 0.0) + w
    return cadj, cw, coarse_id, c


def _grow_initial(adj, node_w, p, cap, rng):
    """Greedy graph growing from p seeded start nodes."""
    n = len(adj)
    labels = [-1] * n
    part_w = [0.0] * p
    seeds = [int(s) for s in rng.choice(n, size=p, replace=False)]
    frontiers = []
    for k, s in enumerate(seeds):
        labels[s] = k
        part_w[k] += node_w[s]
        frontiers.append(deque(sorted(adj[s])))
    assigned = p
    unassigned_cursor = 0
    while assigned < n:
        # lightest part claims next, smallest part id on ties
        k = min(range(p), key=lambda q: (part_w[q], q))
        node = -1
        fr = frontiers[k]
        while fr:
            cand = fr.popleft()
            if labels[cand] == -1:
                node = cand
                break
        if node == -1:
            while labels[unassigned_cursor] != -1:
                unassigned_cursor += 1
            node = unassigned_cursor
        labels[node] = k
        part_w[k] += node_w[node]
        assigned += 1
        for v in sorted(adj[node]):
            if labels[v] == -1:
                fr.append(v)
    return labels, part_w


def _cut_of(adj, labels):
    total = 0.0
    for u in range(len(adj)):
        for v, w in adj[u].items():
            if v > u and labels[u] != labels[v]:
                total += w
    return total


def _fm_refine(adj, node_w, labels, p, cap):
    """Fiduccia-Mattheyses passes until no improving balanced prefix exists.

    Each pass tentatively moves every node at most once, always taking the
    currently best (gain, smallest id) move whose target stays under a
    relaxed cap, then rolls back to the best strictly balanced prefix. On
    exit no single feasible move strictly reduces the cut, so the result is
    locally minimal under single-node moves.
    """
    n = len(adj)
    if p == 1 or n == 0:
        return labels
    max_w = max(node_w)
    relaxed = cap + max_w
    part_w = [0.0] * p
    for u in range(n):
        part_w[labels[u]] += node_w[u]

    def neighbor_parts(u):
        d = {}
        for v, w in adj[u].items():
            lv = labels[v]
            d[lv] = d.get(lv, 0.0) + w
        return d

    for _ in range(MAX_FM_PASSES):
        cut = _cut_of(adj, labels)
        start_cut = cut
        feasible0 = max(part_w) <= cap
        locked = [False] * n
        heap = []

        def push_moves(u):
            nbp = neighbor_parts(u)
            own = nbp.get(labels[u], 0.0)
            for tgt, wsum in nbp.items():
                if tgt != labels[u]:
                    heapq.heappush(heap, (-(wsum - own), u, tgt))

        for u in range(n):
            if any(labels[v] != labels[u] for v in adj[u]):
                push_moves(u)

        moves = []
        best_idx = -1
        best_cut = cut if feasible0 else math.inf
        best_feasible = feasible0
        while heap:
            neg_gain, u, tgt = heapq.heappop(heap)
            if locked[u] or labels[u] == tgt:
                continue
            nbp = neighbor_parts(u)
            gain = nbp.get(tgt, 0.0) - nbp.get(labels[u], 0.0)
            if -neg_gain != gain:
                heapq.heappush(heap, (-gain, u, tgt))
                continue
            src = labels[u]
            if part_w[tgt] + node_w[u] > relaxed:
                continue
            if part_w[src] - node_w[u] <= 0.0:
                continue
            labels[u] = tgt
            part_w[src] -= node_w[u]
            part_w[tgt] += node_w[u]
            locked[u] = True
            cut -= gain
            moves.append((u, src, tgt))
            feasible = max(part_w) <= cap
            if (feasible and not best_feasible) or (
                feasible == best_feasible and cut < best_cut
            ):
                best_idx = len(moves) - 1
                best_cut = cut
                best_feasible = feasible
            for v in sorted(adj[u]):
                if not locked[v]:
                    push_moves(v)
        # roll back past the best prefix
        for u, src, tgt in reversed(moves[best_idx + 1:]):
            labels[u] = src
            part_w[tgt] -= node_w[u]
            part_w[src] += node_w[u]
        improved = best_cut < start_cut or (best_feasible and not feasible0)
        if not improved:
            break
    return labels


def _partition_region(adj, node_w, p, cap, rng):
    """Multilevel pipeline on one connected region given as adjacency lists."""
    n = len(adj)
    if p == 1:
        return [0] * n
    target = max(COARSE_STOP_FLOOR, COARSE_STOP_FACTOR * p)
    levels = []
    cur_adj, cur_w = adj, node_w
    while len(cur_adj) > target:
        cadj, cw, cmap, c = _contract(cur_adj, cur_w, rng)
        if c >= 0.95 * len(cur_adj):
            break
        levels.append((cur_adj, cur_w, cmap))
        cur_adj, cur_w = cadj, cw
    if p > len(cur_adj):
        # matching can overshoot below p on tiny regions; back off one level
        while levels and p > len(cur_adj):
            cur_adj, cur_w, _ = levels.pop()
    labels = None
    best_key = None
    for _ in range(INITIAL_TRIES):
        cand, _ = _grow_initial(cur_adj, cur_w, p, cap, rng)
        cand = _fm_refine(cur_adj, cur_w, cand, p, cap)
        part_w = [0.0] * p
        for u, lab in enumerate(cand):
            part_w[lab] += cur_w[u]
        key = (max(part_w) > cap, _cut_of(cur_adj, cand))
        if best_key is None or key < best_key:
            labels, best_key = cand, key
    for fine_adj, fine_w, cmap in reversed(levels):
        labels = [labels[cmap[u]] for u in range(len(fine_adj))]
        labels = _fm_refine(fine_adj, fine_w, labels, p, cap)
    return labels


def _allocate_parts(sizes, p):
    """Largest-remainder allocation of p parts over component sizes.

    Allocations are proportional to size, capped at the component size, and
    may be zero: a component too small to earn a part is packed whole onto
    an existing part by the caller. The sum is exactly p.
    """
    total = sum(sizes)
    quotas = [s * p / total for s in sizes]
    alloc = [min(int(s), int(q)) for q, s in zip(quotas, sizes)]

    def remainder(i):
        return quotas[i] - alloc[i]

    while sum(alloc) < p:
        order = sorted(range(len(sizes)), key=lambda i: (-(remainder(i)), i))
        for i in order:
            if alloc[i] < sizes[i]:
                alloc[i] += 1
                break
        else:
            raise DomainError("cannot allocate parts: p exceeds node count")
    while sum(alloc) > p:
        order = sorted(range(len(sizes)), key=lambda i: (remainder(i), i))
        for i in order:
            if alloc[i] > 0:
                alloc[i] -= 1
                break
    return alloc


def multilevel_partition(g, p, seed, max_imbalance=1.3):
    """Partition g into p parts, deterministically under seed.

    Returns a Partition whose imbalance stays within max_imbalance whenever
    that is feasible, with an edge cut locally minimal under single-node
    moves. Connected components never get split across parts unless their
    size demands it, and grouping whole components onto a part adds no cut
    edges.
    """
    if not isinstance(p, (int, np.integer)) or isinstance(p, bool):
        raise DomainError(f"p must be an int, got {p!r}")
    if not (1 <= p <= g.n):
        raise DomainError(f"need 1 <= p <= n={g.n}, got p={p}")
    if max_imbalance < 1.0:
        raise DomainError(f"max_imbalance must be >= 1.0, got {max_imbalance}")
    rng = np.random.default_rng(seed)
    labels = np.zeros(g.n, dtype=np.int64)
    if p == 1:
        return Partition(labels=labels, p=1)

    comp = connected_components(g)
    n_comp = int(comp.max()) + 1
    cap_global = max(max_imbalance * g.n / p, math.ceil(g.n / p))

    if n_comp == 1:
        adj = _adjacency_lists(g)
        region = _partition_region(adj, [1.0] * g.n, p, cap_global, rng)
        return Partition(labels=np.asarray(region, dtype=np.int64), p=p)

    comp_nodes = [np.flatnonzero(comp == c) for c in range(n_comp)]
    sizes = [len(nodes) for nodes in comp_nodes]
    alloc = _allocate_parts(sizes, p)

    # components that earned parts are split within themselves
    part_w = [0.0] * p
    next_part = 0
    for c in range(n_comp):
        p_c = alloc[c]
        if p_c == 0:
            continue
        if p_c == 1:
            labels[comp_nodes[c]] = next_part
            part_w[next_part] += sizes[c]
        else:
            sub, mapping = induced_subgraph(g, comp_nodes[c])
            cap_c = max(cap_global, math.ceil(sizes[c] / p_c))
            sub_adj = _adjacency_lists(sub)
            region = _partition_region(sub_adj, [1.0] * sub.n, p_c, cap_c, rng)
            for local, orig in enumerate(mapping):
                labels[orig] = next_part + region[local]
            for lab in region:
                part_w[next_part + lab] += 1.0
        next_part += p_c

    # components with no part of their own pack onto the lightest part,
    # biggest first; they never add cut edges
    leftovers = sorted(
        (c for c in range(n_comp) if alloc[c] == 0),
        key=lambda c: (-sizes[c], c),
    )
    for c in leftovers:
        k = min(range(p), key=lambda q: (part_w[q], q))
        labels[comp_nodes[c]] = k
        part_w[k] += sizes[c]
    return Partition(labels=labels, p=p)
