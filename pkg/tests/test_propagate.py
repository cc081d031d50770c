import numpy as np
import pytest

from degnn.errors import DomainError
from degnn.graphs import Graph, normalized_adjacency
from degnn.linalg import kron, unvec, vec
from degnn.propagate import (
    DECAY_COLUMNS,
    activation_masks,
    decay_curve,
    endtoend_extremes,
    forward,
    gcn_stack,
    graphcnn_stack,
    linearized_map,
    prelu,
    quantized_entropy,
    random_unit_features,
    weights_with_top_singular,
    write_decay_csv,
)
from oracles import forward_reference


def _random_gcn_stack(rng, n=None, d=None, depth=None, slope=0.2):
    n = n or int(rng.integers(2, 7))
    d = d or int(rng.integers(1, 4))
    depth = depth or int(rng.integers(1, 6))
    a = rng.normal(size=(n, n))
    weights = [rng.normal(size=(d, d)) for _ in range(depth)]
    return gcn_stack(a, weights, slope=slope)


def _random_graphcnn_stack(rng, slope=0.2):
    n = int(rng.integers(2, 7))
    d = int(rng.integers(1, 4))
    depth = int(rng.integers(1, 6))
    k = int(rng.integers(1, 4))
    pieces = [rng.normal(size=(n, n)) for _ in range(k)]
    layer_weights = [
        [rng.normal(size=(d, d)) for _ in range(k)] for _ in range(depth)
    ]
    return graphcnn_stack(pieces, layer_weights, slope=slope)


def test_prelu_values():
    z = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    assert np.allclose(prelu(z, 0.2), [-0.4, -0.1, 0.0, 0.5, 2.0])


def test_forward_identity_stack_keeps_nonnegative_input():
    x = np.abs(np.random.default_rng(0).normal(size=(4, 3)))
    stack = gcn_stack(np.eye(4), [np.eye(3)] * 3)
    for y in forward(stack, x):
        assert np.array_equal(y, x)


def test_forward_slope_one_is_linear():
    rng = np.random.default_rng(1)
    n, d, depth = 4, 2, 3
    a = rng.normal(size=(n, n))
    weights = [rng.normal(size=(d, d)) for _ in range(depth)]
    stack = gcn_stack(a, weights, slope=1.0)
    x = rng.normal(size=(n, d))
    y = forward(stack, x)[-1]
    linear = vec(x)
    for w in weights:
        linear = kron(w.T, a) @ linear
    assert np.max(np.abs(vec(y) - linear)) < 1e-10


def test_forward_matches_reference_oracle():
    rng = np.random.default_rng(2)
    for _ in range(20):
        stack = _random_graphcnn_stack(rng)
        x = rng.normal(size=(stack.n, stack.in_dim))
        got = forward(stack, x)[-1]
        want = forward_reference(
            stack.pieces, stack.layer_weights, x, stack.slope
        )[-1]
        assert np.max(np.abs(got - want)) < 1e-10


def test_forward_shape_errors():
    stack = gcn_stack(np.eye(3), [np.eye(2)])
    with pytest.raises(DomainError):
        forward(stack, np.zeros((3, 3)))
    with pytest.raises(DomainError):
        gcn_stack(np.eye(3), [])
    with pytest.raises(DomainError):
        gcn_stack(np.eye(3), [np.ones((2, 3)), np.ones((2, 2))])
    with pytest.raises(DomainError):
        gcn_stack(np.eye(3), [np.eye(2)], slope=0.0)


def test_linearized_matches_forward_gcn_and_graphcnn():
    rng = np.random.default_rng(3)
    worst = 0.0
    for trial in range(100):
        if trial % 2 == 0:
            stack = _random_gcn_stack(rng)
        else:
            stack = _random_graphcnn_stack(rng)
        x = rng.normal(size=(stack.n, stack.in_dim))
        y = forward(stack, x)[-1]
        _, yv = linearized_map(stack, vec(x))
        worst = max(worst, float(np.max(np.abs(vec(y) - yv))))
    assert worst < 1e-9


def test_linearized_product_acts_on_fresh_inputs_with_same_masks():
    rng = np.random.default_rng(4)
    stack = _random_gcn_stack(rng, n=4, d=2, depth=3)
    x = rng.normal(size=8)
    product, yv = linearized_map(stack, x)
    assert product.shape == (8, 8)
    assert np.max(np.abs(product @ x - yv)) == 0.0


def test_masks_are_binary_and_match_signs():
    rng = np.random.default_rng(5)
    stack = _random_gcn_stack(rng, n=5, d=2, depth=1, slope=0.3)
    x = rng.normal(size=10)
    masks = activation_masks(stack, x)
    assert len(masks) == 1
    assert set(np.unique(masks[0])) <= {0.3, 1.0}
    # mixed signs in a generic pre-activation
    assert 0.3 in masks[0] and 1.0 in masks[0]


def test_all_nonnegative_trajectory_gives_identity_masks():
    x = np.abs(np.random.default_rng(6).normal(size=(4, 2)))
    stack = gcn_stack(np.eye(4), [np.eye(2)] * 2)
    for mask in activation_masks(stack, vec(x)):
        assert np.all(mask == 1.0)


def test_endtoend_extremes_identity_stack():
    stack = gcn_stack(np.eye(3), [np.eye(2)] * 4)
    hi, lo = endtoend_extremes(stack, np.ones(6))
    assert abs(hi - 1.0) < 1e-12 and abs(lo - 1.0) < 1e-12


def test_quantized_entropy_counts():
    vs = np.array([[0.0], [1.0], [2.0], [3.0]])
    assert quantized_entropy(vs, 0.5) == 2.0
    # all samples collapse inside one epsilon cell
    tiny = np.array([[1e-9, -1e-9], [5e-10, 0.0], [0.0, 9e-10]])
    assert quantized_entropy(tiny, 1e-6) == 0.0
    with pytest.raises(DomainError):
        quantized_entropy(vs, 0.0)
    with pytest.raises(DomainError):
        quantized_entropy(np.zeros((0, 2)), 1.0)


def test_quantized_entropy_ceiling():
    rng = np.random.default_rng(7)
    for _ in range(10):
        s = rng.normal(size=(rng.integers(1, 20), 3))
        assert quantized_entropy(s, 1e-6) <= np.log2(len(s)) + 1e-12


def test_quantize_then_map_never_gains_entropy():
    # deterministic maps cannot split equal quantized inputs
    rng = np.random.default_rng(8)
    eps = 1e-3
    for _ in range(10):
        y = rng.normal(size=(12, 6))
        m = rng.normal(size=(6, 6)) * rng.uniform(0.1, 3.0)
        q = np.trunc(y / eps) * eps
        before = quantized_entropy(q, eps)
        after = quantized_entropy(q @ m.T, eps)
        assert after <= before + 1e-12


def test_entropy_distinct_under_separation():
    # separation above twice epsilon per coordinate cell guarantees
    # distinct quantized outputs (the zero cell spans two widths)
    eps = 0.1
    vs = np.array([[0.0, 0.0], [0.25, 0.0], [0.0, -0.25], [0.25, -0.25]])
    assert quantized_entropy(vs, eps) == 2.0


def test_decay_curve_identity_stack():
    stack = gcn_stack(np.eye(3), [np.eye(2)])
    rows = decay_curve(stack, [1], n_samples=8, epsilon=1e-6, seed=0)
    assert len(rows) == 1
    assert rows[0]["entropy_bits"] == 3.0
    assert rows[0]["n_samples"] == 8


def test_decay_curve_bound_column_exact():
    rng = np.random.default_rng(9)
    g = Graph(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)])
    a = normalized_adjacency(g)
    weights = [
        weights_with_top_singular((2, 2), 0.5, seed=100 + i) for i in range(6)
    ]
    stack = gcn_stack(a, weights)
    rows = decay_curve(stack, [1, 2, 4, 6], n_samples=6, epsilon=1e-6, seed=1)
    for row in rows:
        assert row["bound"] == 0.5 ** row["depth"]
        assert row["max_sv"] <= row["bound"] + 1e-12
    ent = [row["entropy_bits"] for row in rows]
    assert all(ent[i + 1] <= ent[i] + 1e-12 for i in range(len(ent) - 1))


def test_decay_curve_preserve_stack_keeps_entropy():
    # slope 0.6 with doubled identity propagation: every layer expands
    stack = gcn_stack(2.0 * np.eye(3), [np.eye(2)] * 4, slope=0.6)
    rows = decay_curve(stack, [1, 2, 3, 4], n_samples=12, epsilon=1e-6, seed=2)
    for row in rows:
        assert row["entropy_bits"] == np.log2(12)
        assert row["min_sv"] >= 1.2 ** row["depth"] - 1e-9


def test_decay_curve_validates_depths():
    stack = gcn_stack(np.eye(2), [np.eye(2)] * 3)
    for bad in ([], [2, 1], [0], [4], [2, 2]):
        with pytest.raises(DomainError):
            decay_curve(stack, bad)


def test_decay_csv_schema(tmp_path):
    stack = gcn_stack(np.eye(2), [np.eye(2)] * 2)
    rows = decay_curve(stack, [1, 2], n_samples=4, seed=3)
    path = tmp_path / "decay.csv"
    write_decay_csv(rows, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == ",".join(DECAY_COLUMNS)
    assert len(lines) == 3


def test_random_unit_features_scale():
    feats = random_unit_features(4, 3, 5, seed=11)
    assert len(feats) == 5
    for x in feats:
        assert abs(np.max(np.abs(x)) - 1.0) < 1e-15


def test_weights_with_top_singular():
    from degnn.spectral import singular_extremes

    w = weights_with_top_singular((3, 3), 0.5, seed=12)
    hi, _ = singular_extremes(w)
    assert abs(hi - 0.5) < 1e-12
