import numpy as np
import pytest

from degnn.errors import DomainError, ParseError
from degnn.graphs import Graph, connected_components
from degnn.partition import (
    Partition,
    cut_edges,
    cut_weight,
    import_partition,
    multilevel_partition,
    partition_stats,
    random_balanced_partition,
)
from oracles import best_balanced_bipartition_cut


def _random_graph(n, target_m, rng):
    edges = set()
    while len(edges) < target_m:
        i, j = rng.integers(0, n, size=2)
        if i != j:
            edges.add((min(i, j), max(i, j)))
    return Graph(n, sorted(edges))


def test_partition_container():
    part = Partition(labels=np.array([0, 1, 1, 0]), p=2)
    assert part.sizes().tolist() == [2, 2]
    assert part.imbalance() == 1.0
    with pytest.raises(DomainError):
        Partition(labels=np.array([0, 2]), p=2)


def test_cut_accounting():
    g = Graph(4, [(0, 1, 2.0), (1, 2, 3.0), (2, 3, 4.0)])
    part = Partition(labels=np.array([0, 0, 1, 1]), p=2)
    assert cut_edges(g, part) == [(1, 2)]
    assert cut_weight(g, part) == 3.0
    st = partition_stats(g, part)
    assert st["cut_edges"] == 1 and st["cut_weight"] == 3.0
    assert st["sizes"] == [2, 2] and st["imbalance"] == 1.0


def test_path_bipartition_is_optimal():
    # the one partition question small enough to answer by brute force:
    # an 8 node path splits 4|4 with a single crossing edge
    edges = [(i, i + 1) for i in range(7)]
    g = Graph(8, edges)
    opt = best_balanced_bipartition_cut(8, [(i, j, 1.0) for i, j in edges])
    assert opt == 1.0
    for seed in range(12):
        part = multilevel_partition(g, 2, seed=seed, max_imbalance=1.0)
        assert part.sizes().tolist() == [4, 4]
        assert cut_weight(g, part) == opt


def test_beats_random_and_respects_balance():
    for trial in range(6):
        rng = np.random.default_rng(100 + trial)
        g = _random_graph(120, 360, rng)
        for p in (2, 4, 8):
            part = multilevel_partition(g, p, seed=trial, max_imbalance=1.3)
            st = partition_stats(g, part)
            assert st["imbalance"] <= 1.3 + 1e-9
            assert min(part.sizes()) >= 1
            rnd = random_balanced_partition(g.n, p, seed=trial)
            assert cut_weight(g, part) <= cut_weight(g, rnd)


def test_deterministic_under_seed():
    rng = np.random.default_rng(42)
    g = _random_graph(150, 450, rng)
    a = multilevel_partition(g, 4, seed=9)
    b = multilevel_partition(g, 4, seed=9)
    assert np.array_equal(a.labels, b.labels)


def test_respects_weights():
    # heavy middle edge: any sane bipartition cuts a light edge instead
    g = Graph(4, [(0, 1, 1.0), (1, 2, 100.0), (2, 3, 1.0)])
    part = multilevel_partition(g, 2, seed=0, max_imbalance=2.0)
    assert part.labels[1] == part.labels[2]


def test_disconnected_components_stay_whole_when_possible():
    # two triangles, p=2: zero cut is reachable and must be found
    g = Graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])
    part = multilevel_partition(g, 2, seed=1)
    assert cut_weight(g, part) == 0.0
    assert part.sizes().tolist() == [3, 3]


def test_disconnected_dominant_component_gets_split():
    # a 199 node component plus an isolated node: packing whole components
    # cannot balance, so the big one must be split
    rng = np.random.default_rng(8)
    edges = set()
    while len(edges) < 500:
        i, j = rng.integers(0, 199, size=2)
        if i != j:
            edges.add((min(i, j), max(i, j)))
    g = Graph(200, sorted(edges))
    assert int(connected_components(g).max()) + 1 >= 2
    part = multilevel_partition(g, 2, seed=3, max_imbalance=1.3)
    assert partition_stats(g, part)["imbalance"] <= 1.3 + 1e-9


def test_more_components_than_parts_packs_evenly():
    # five triangles onto two parts: perfect packing keeps cut at zero
    edges = []
    for t in range(5):
        b = 3 * t
        edges += [(b, b + 1), (b + 1, b + 2), (b, b + 2)]
    g = Graph(15, edges)
    part = multilevel_partition(g, 2, seed=0, max_imbalance=1.3)
    assert cut_weight(g, part) == 0.0
    assert sorted(part.sizes().tolist()) == [6, 9]


def test_single_part_and_errors():
    g = Graph(5, [(0, 1)])
    assert multilevel_partition(g, 1, seed=0).sizes().tolist() == [5]
    with pytest.raises(DomainError):
        multilevel_partition(g, 0, seed=0)
    with pytest.raises(DomainError):
        multilevel_partition(g, 6, seed=0)
    with pytest.raises(DomainError):
        multilevel_partition(g, 2, seed=0, max_imbalance=0.9)


def test_import_partition(tmp_path):
    path = tmp_path / "part.txt"
    path.write_text("0\n1\n1\n0\n")
    part = import_partition(path, n=4)
    assert part.p == 2
    assert part.labels.tolist() == [0, 1, 1, 0]
    path.write_text("0\n2\n2\n0\n")
    with pytest.warns(UserWarning):
        part = import_partition(path, n=4)
    assert part.p == 3
    path.write_text("0\n1\n")
    with pytest.raises(ParseError):
        import_partition(path, n=4)
