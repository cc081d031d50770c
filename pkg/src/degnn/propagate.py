"""Forward propagation, its exact linearization, and an entropy proxy.

A stack propagates node features through L layers of Y -> sigma(sum_k
A_k Y W_k) with a parametric ReLU. Because that activation multiplies each
coordinate by either 1 or the slope, every realized forward pass equals an
explicit linear map: the product of per-layer (W_k^T kron A_k) sums, each
premultiplied by a diagonal {slope, 1} mask read off the pre-activation
signs. That product's singular extremes certify how much of the input
survives the stack, and a quantization-based entropy of sampled outputs
tracks the same story empirically.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .linalg import as_matrix, as_vector, vec
from .spectral import (
    _check_slope,
    composite_operator,
    gcn_regime,
    graphcnn_regime,
    singular_extremes,
)


@dataclass(frozen=True)
class LayerStack:
    """L layers of piece matrices with per-piece, per-layer weights.

    pieces: K square matrices shared by all layers (K=1 for the plain
    variant). layer_weights: one tuple of K weight matrices per layer,
    chained so layer i's column count feeds layer i+1's rows.
    """

    variant: str
    pieces: tuple
    layer_weights: tuple
    slope: float

    def __post_init__(self):
        if self.variant not in ("gcn", "graphcnn"):
            raise DomainError(f"unknown stack variant {self.variant!r}")
        # slope 1 makes the stack linear (mask = identity), which is useful
        # on its own; the regime certificates stay restricted to (0, 1)
        if not (0.0 < float(self.slope) <= 1.0):
            raise DomainError(f"slope must lie in (0, 1], got {self.slope}")
        if not self.pieces:
            raise DomainError("need at least one piece matrix")
        n = self.pieces[0].shape[0]
        for a in self.pieces:
            if a.shape != (n, n):
                raise DomainError("piece matrices must be square and same size")
        if not self.layer_weights:
            raise DomainError("need at least one layer")
        d_prev = None
        for li, layer in enumerate(self.layer_weights):
            if len(layer) != len(self.pieces):
                raise DomainError(
                    f"layer {li} has {len(layer)} weight matrices for "
                    f"{len(self.pieces)} pieces"
                )
            shape = layer[0].shape
            for w in layer:
                if w.shape != shape:
                    raise DomainError(f"layer {li} weights disagree on shape")
            if d_prev is not None and shape[0] != d_prev:
                raise DomainError(
                    f"layer {li} expects {shape[0]} input columns, "
                    f"previous layer emits {d_prev}"
                )
            d_prev = shape[1]

    @property
    def depth(self):
        return len(self.layer_weights)

    @property
    def n(self):
        return self.pieces[0].shape[0]

    @property
    def in_dim(self):
        return self.layer_weights[0][0].shape[0]

    def prefix(self, depth):
        """The stack truncated to its first `depth` layers."""
        if not (1 <= depth <= self.depth):
            raise DomainError(f"depth must lie in [1, {self.depth}]")
        return LayerStack(
            variant=self.variant,
            pieces=self.pieces,
            layer_weights=self.layer_weights[:depth],
            slope=self.slope,
        )

    def regime(self):
        """Certificate report for this stack's per-layer factors."""
        if self.variant == "gcn":
            return gcn_regime(
                self.pieces[0],
                [layer[0] for layer in self.layer_weights],
                slope=self.slope,
            )
        return graphcnn_regime(self.pieces, self.layer_weights, slope=self.slope)


def gcn_stack(a_mat, weights, slope=0.2):
    """Stack with a single propagation matrix and one weight per layer."""
    a_mat = as_matrix(a_mat, "a_mat")
    layer_weights = tuple((as_matrix(w, "weight"),) for w in weights)
    return LayerStack(
        variant="gcn", pieces=(a_mat,), layer_weights=layer_weights, slope=slope
    )


def graphcnn_stack(pieces, layer_weights, slope=0.2):
    """Stack with K piece matrices and K weight matrices per layer."""
    pieces = tuple(as_matrix(a, "piece") for a in pieces)
    layer_weights = tuple(
        tuple(as_matrix(w, "weight") for w in layer) for layer in layer_weights
    )
    return LayerStack(
        variant="graphcnn", pieces=pieces, layer_weights=layer_weights, slope=slope
    )


def prelu(z, slope):
    """max(z, slope*z) elementwise; equals z for z >= 0, slope*z below."""
    return np.maximum(z, slope * z)


def forward(stack, x0):
    """All L per-layer outputs of the stack applied to features x0."""
    x0 = as_matrix(x0, "x0")
    if x0.shape != (stack.n, stack.in_dim):
        raise DomainError(
            f"features must be {stack.n} x {stack.in_dim}, got {x0.shape}"
        )
    outs = []
    y = x0
    for layer in stack.layer_weights:
        z = sum(a @ y @ w for a, w in zip(stack.pieces, layer))
        y = prelu(z, stack.slope)
        outs.append(y)
    return outs


def activation_masks(stack, x):
    """Per-layer diagonal mask vectors (entries in {slope, 1}) realized on x.

    The masks come from the vectorized pre-activations: entry >= 0 maps to
    1, negative entries to the slope.
    """
    x = as_vector(x, "x")
    masks = []
    y = x
    for layer in stack.layer_weights:
        m = composite_operator(stack.pieces, layer)
        z = m @ y
        mask = np.where(z >= 0.0, 1.0, stack.slope)
        masks.append(mask)
        y = mask * z
    return masks


def linearized_map(stack, x):
    """Explicit end-to-end matrix realized by the stack on input vector x.

    Returns (matrix, matrix @ x). The matrix is the product, last layer
    leftmost, of mask-scaled per-layer operators; its action reproduces the
    vectorized forward pass exactly up to float roundoff.
    """
    x = as_vector(x, "x")
    if len(x) != stack.n * stack.in_dim:
        raise DomainError(
            f"input must have {stack.n * stack.in_dim} entries, got {len(x)}"
        )
    product = None
    y = x
    for layer in stack.layer_weights:
        m = composite_operator(stack.pieces, layer)
        z = m @ y
        mask = np.where(z >= 0.0, 1.0, stack.slope)
        layer_mat = mask[:, None] * m
        product = layer_mat if product is None else layer_mat @ product
        y = mask * z
    return product, product @ x


def endtoend_extremes(stack, x):
    """(largest, smallest) singular value of the realized end-to-end map."""
    product, _ = linearized_map(stack, x)
    return singular_extremes(product)


def quantized_entropy(samples, epsilon):
    """log2 of the number of distinct epsilon-quantized sample vectors.

    Each coordinate is truncated toward zero to a multiple of epsilon, so
    any value of magnitude below epsilon lands exactly on 0. For a
    deterministic map fed uniform samples this counts surviving outcomes,
    an entropy in bits.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.ndim != 2 or samples.shape[0] == 0:
        raise DomainError("samples must be a non-empty 2-D array")
    if not np.all(np.isfinite(samples)):
        raise DomainError("samples must be finite")
    epsilon = float(epsilon)
    if not (epsilon > 0.0):
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    # +0.0 folds -0.0 into 0.0 so the byte view is canonical
    q = np.trunc(samples / epsilon) + 0.0
    distinct = len({row.tobytes() for row in q})
    return float(np.log2(distinct))


def random_unit_features(n, d, n_samples, seed):
    """n_samples feature matrices with max-abs entry exactly 1."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_samples):
        x = rng.normal(size=(n, d))
        x /= np.max(np.abs(x))
        out.append(x)
    return out


def weights_with_top_singular(shape, sigma, seed):
    """Random weight matrix rescaled so its largest singular value is sigma."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=shape)
    hi, _ = singular_extremes(w)
    if hi == 0.0:
        raise DomainError("degenerate random draw cannot be rescaled")
    return w * (float(sigma) / hi)


DECAY_COLUMNS = (
    "depth",
    "bound",
    "max_sv",
    "min_sv",
    "entropy_bits",
    "n_samples",
    "epsilon",
    "seed",
)


def decay_curve(stack, depths, n_samples=16, epsilon=1e-6, seed=0, inputs=None):
    """Certificate bound vs realized behavior at each prefix depth.

    For every depth l in `depths` (sorted ascending, all within the stack)
    this evaluates the depth-l prefix on a common set of sampled inputs and
    reports the certificate factor raised to l, the extreme singular values
    of the realized end-to-end maps over the sample, and the quantized
    entropy of the depth-l outputs. inputs may supply explicit feature
    matrices; otherwise n_samples are drawn at unit max-abs scale by seed.
    """
    depths = [int(d) for d in depths]
    if not depths or depths != sorted(set(depths)):
        raise DomainError("depths must be distinct and sorted ascending")
    if depths[0] < 1 or depths[-1] > stack.depth:
        raise DomainError(f"depths must lie in [1, {stack.depth}]")
    if inputs is None:
        inputs = random_unit_features(stack.n, stack.in_dim, n_samples, seed)
    else:
        inputs = [as_matrix(x, "input") for x in inputs]
        n_samples = len(inputs)
    if n_samples < 1:
        raise DomainError("need at least one sample")

    per_layer = stack.regime().bound_per_layer
    want = set(depths)
    # realized products and outputs per sample at each requested depth
    agg = {
        l: {"max_sv": -np.inf, "min_sv": np.inf, "outputs": []} for l in depths
    }
    for x_mat in inputs:
        x = vec(x_mat)
        product = None
        y = x
        for li, layer in enumerate(stack.layer_weights, start=1):
            m = composite_operator(stack.pieces, layer)
            z = m @ y
            mask = np.where(z >= 0.0, 1.0, stack.slope)
            layer_mat = mask[:, None] * m
            product = layer_mat if product is None else layer_mat @ product
            y = mask * z
            if li in want:
                hi, lo = singular_extremes(product)
                slot = agg[li]
                slot["max_sv"] = max(slot["max_sv"], hi)
                slot["min_sv"] = min(slot["min_sv"], lo)
                slot["outputs"].append(y.copy())
            if li >= depths[-1]:
                break
    rows = []
    for l in depths:
        slot = agg[l]
        rows.append(
            {
                "depth": l,
                "bound": per_layer**l,
                "max_sv": slot["max_sv"],
                "min_sv": slot["min_sv"],
                "entropy_bits": quantized_entropy(np.array(slot["outputs"]), epsilon),
                "n_samples": n_samples,
                "epsilon": epsilon,
                "seed": int(seed),
            }
        )
    return rows


def write_decay_csv(rows, path):
    """Write decay rows to CSV with the mandatory header."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DECAY_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c]
                             for c in DECAY_COLUMNS])
