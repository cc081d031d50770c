"""Desk-scale node-classification trainer with hand-written backprop.

Everything here is full-batch, deterministic under a single seed, and free
of autograd: gradients are derived layer by layer so they can be audited
against central differences. Four backbones share one propagation core
(sum over pieces of A_k H W_k); they differ only in how each layer's input
is assembled (previous output, residual add, concatenation of earlier
outputs, or a jumping concatenation before the classifier).
"""

import csv
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .decompose import layer_decompositions, piece_matrices
from .errors import DomainError, ParseError, TrainingError
from .graphs import Graph, normalized_adjacency
from .propagate import prelu

BACKBONES = ("gcn", "resgcn", "densegcn", "jknet")
DECOMP_SOURCES = ("none", "random", "connectivity_aware")


@dataclass(frozen=True)
class SBMSpec:
    """Planted-partition graph recipe with block-coded node features."""

    n: int
    b: int
    p_in: float
    p_out: float
    d: int
    noise: float = 0.1
    train_frac: float = 0.6
    val_frac: float = 0.2
    test_frac: float = 0.2

    def __post_init__(self):
        if self.n < self.b or self.b < 1:
            raise DomainError(f"need n >= b >= 1, got n={self.n}, b={self.b}")
        if not (0.0 <= self.p_out < self.p_in <= 1.0):
            raise DomainError(
                f"need 0 <= p_out < p_in <= 1, got p_in={self.p_in}, "
                f"p_out={self.p_out}"
            )
        if self.d < self.b:
            raise DomainError(
                f"feature dim must fit a block one-hot: d={self.d} < b={self.b}"
            )
        if self.noise < 0.0:
            raise DomainError("noise scale must be non-negative")
        total = self.train_frac + self.val_frac + self.test_frac
        if min(self.train_frac, self.val_frac, self.test_frac) <= 0.0 or abs(
            total - 1.0
        ) > 1e-9:
            raise DomainError("split fractions must be positive and sum to 1")


@dataclass(frozen=True)
class NodeData:
    """A graph with block labels, features, and boolean split masks."""

    graph: Graph
    labels: np.ndarray
    features: np.ndarray
    masks: dict


def _sbm_once(spec, rng):
    blocks = np.repeat(np.arange(spec.b), -(-spec.n // spec.b))[: spec.n]
    prob = np.where(
        blocks[:, None] == blocks[None, :], spec.p_in, spec.p_out
    )
    draw = rng.random((spec.n, spec.n))
    iu, ju = np.triu_indices(spec.n, k=1)
    hit = draw[iu, ju] < prob[iu, ju]
    edges = list(zip(iu[hit].tolist(), ju[hit].tolist()))

    feats = np.zeros((spec.n, spec.d))
    feats[np.arange(spec.n), blocks] = 1.0
    feats += spec.noise * rng.normal(size=(spec.n, spec.d))

    masks = {
        "train": np.zeros(spec.n, dtype=bool),
        "val": np.zeros(spec.n, dtype=bool),
        "test": np.zeros(spec.n, dtype=bool),
    }
    for blk in range(spec.b):
        nodes = np.flatnonzero(blocks == blk)
        order = nodes[rng.permutation(len(nodes))]
        n_tr = int(spec.train_frac * len(nodes))
        n_val = int(spec.val_frac * len(nodes))
        masks["train"][order[:n_tr]] = True
        masks["val"][order[n_tr : n_tr + n_val]] = True
        masks["test"][order[n_tr + n_val :]] = True
    return edges, blocks, feats, masks


def generate_sbm(spec, seed, max_retries=5):
    """Draw a stochastic block model graph with features and splits.

    Retries with a warning (bounded) when a block ends up without any
    internal edge or a split bucket comes out empty, which only happens for
    tiny or extremely sparse configurations.
    """
    rng = np.random.default_rng(seed)
    for attempt in range(max_retries + 1):
        edges, blocks, feats, masks = _sbm_once(spec, rng)
        intra = [0] * spec.b
        for i, j in edges:
            if blocks[i] == blocks[j]:
                intra[blocks[i]] += 1
        degenerate = min(intra) == 0 or any(
            not masks[name].any() for name in ("train", "val", "test")
        )
        if not degenerate:
            return NodeData(
                graph=Graph(spec.n, edges),
                labels=blocks,
                features=feats,
                masks=masks,
            )
        if attempt < max_retries:
            warnings.warn(
                f"degenerate block model draw (attempt {attempt + 1}), retrying"
            )
    raise DomainError(
        "could not draw a non-degenerate block model within the retry budget"
    )


@dataclass(frozen=True)
class ModelConfig:
    """Architecture and optimization settings for one training run."""

    backbone: str
    depth: int
    hidden: int
    k_schedule: tuple
    slope: float = 0.2
    lr: float = 0.05
    weight_decay: float = 5e-4
    max_epochs: int = 200
    patience: int = 20

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise DomainError(f"unknown backbone {self.backbone!r}")
        if self.depth < 2:
            raise DomainError(f"depth must be >= 2, got {self.depth}")
        sched = tuple(int(k) for k in self.k_schedule)
        if len(sched) != self.depth or any(k < 1 for k in sched):
            raise DomainError(
                f"k_schedule needs {self.depth} entries >= 1, got {sched}"
            )
        object.__setattr__(self, "k_schedule", sched)
        if not (0.0 < self.slope < 1.0):
            raise DomainError(f"slope must lie in (0, 1), got {self.slope}")
        if self.lr <= 0.0 or self.weight_decay < 0.0:
            raise DomainError("lr must be positive, weight_decay non-negative")
        if self.max_epochs < 1 or self.patience < 1:
            raise DomainError("max_epochs and patience must be >= 1")


_CONFIG_KEYS = {
    "backbone": str,
    "depth": int,
    "hidden": int,
    "k_schedule": lambda s: tuple(int(v) for v in s.split(",")),
    "slope": float,
    "lr": float,
    "weight_decay": float,
    "max_epochs": int,
    "patience": int,
}


def load_model_config(path):
    """Read a flat key=value file into a ModelConfig."""
    path = str(path)
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ParseError("expected key=value", path=path, line=lineno)
            key, value = (part.strip() for part in text.split("=", 1))
            if key not in _CONFIG_KEYS:
                raise ParseError(f"unknown key {key!r}", path=path, line=lineno)
            try:
                raw[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise ParseError(
                    f"bad value for {key}: {value!r}", path=path, line=lineno
                ) from None
    for required in ("backbone", "depth", "hidden"):
        if required not in raw:
            raise ParseError(f"missing required key {required!r}", path=path)
    raw.setdefault("k_schedule", tuple([1] * raw["depth"]))
    try:
        return ModelConfig(**raw)
    except DomainError as exc:
        # semantic rejections should still name the file they came from
        raise ParseError(str(exc), path=path) from None


@dataclass(frozen=True)
class TrainResult:
    """Epoch history plus the test accuracy at the best validation epoch."""

    train_loss: tuple
    train_acc: tuple
    val_loss: tuple
    val_acc: tuple
    test_acc: float
    best_epoch: int
    epochs_run: int
    seed: int


def _layer_dims(cfg, in_dim, n_classes):
    """(fan_in, fan_out) per layer for each backbone's wiring."""
    L, h = cfg.depth, cfg.hidden
    dims = []
    for i in range(1, L + 1):
        if cfg.backbone == "densegcn":
            fan_in = in_dim if i == 1 else (i - 1) * h
        elif cfg.backbone == "jknet" and i == L:
            fan_in = (L - 1) * h
        else:
            fan_in = in_dim if i == 1 else h
        fan_out = n_classes if i == L else h
        dims.append((fan_in, fan_out))
    return dims


def _init_weights(cfg, in_dim, n_classes, rng):
    """Glorot-uniform weights, one per piece per layer, drawn in layer order."""
    weights = []
    for (fan_in, fan_out), k in zip(
        _layer_dims(cfg, in_dim, n_classes), cfg.k_schedule
    ):
        s = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(
            [rng.uniform(-s, s, size=(fan_in, fan_out)) for _ in range(k)]
        )
    return weights


def _build_pieces(cfg, data, source, seed, p, discount, with_skeleton):
    """Per-layer piece propagation matrices for the requested decomposition."""
    if source not in DECOMP_SOURCES:
        raise DomainError(f"unknown decomposition source {source!r}")
    g = data.graph
    if source == "none":
        if any(k != 1 for k in cfg.k_schedule):
            raise DomainError(
                "k_schedule must be all ones when no decomposition is used"
            )
        base = normalized_adjacency(g)
        return [[base] for _ in range(cfg.depth)]
    decs = layer_decompositions(
        g, cfg.k_schedule, source, p=p, seed=seed, with_skeleton=with_skeleton
    )
    return [
        piece_matrices(g, d, normalization="global", discount=discount)
        for d in decs
    ]


def _layer_input(cfg, ys, i):
    """Assemble layer i's input from earlier outputs, per the backbone."""
    L = cfg.depth
    if cfg.backbone == "densegcn" and i >= 2:
        return np.concatenate(ys[1:i], axis=1)
    if cfg.backbone == "jknet" and i == L:
        return np.concatenate(ys[1:L], axis=1)
    return ys[i - 1]


def _forward_pass(cfg, pieces, weights, x):
    """All layer outputs plus the cached pre-activations and inputs."""
    ys = [x]
    zs = []
    ins = []
    L = cfg.depth
    for i in range(1, L + 1):
        h_in = _layer_input(cfg, ys, i)
        z = None
        for a_k, w_k in zip(pieces[i - 1], weights[i - 1]):
            term = a_k @ h_in @ w_k
            z = term if z is None else z + term
        y = z if i == L else prelu(z, cfg.slope)
        if (
            cfg.backbone == "resgcn"
            and 2 <= i <= L - 1
            and y.shape == ys[i - 1].shape
        ):
            y = y + ys[i - 1]
        ins.append(h_in)
        zs.append(z)
        ys.append(y)
    return ys, zs, ins


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_prob(cfg, weights, logits, labels, mask):
    prob = _softmax(logits)
    idx = np.flatnonzero(mask)
    ce = -np.mean(np.log(prob[idx, labels[idx]] + 1e-300))
    l2 = sum(float(np.sum(w * w)) for layer in weights for w in layer)
    return ce + 0.5 * cfg.weight_decay * l2, prob


def _backward_pass(cfg, pieces, weights, data, ys, zs, ins, prob):
    """Gradients of the masked cross-entropy + L2 loss w.r.t. every weight."""
    labels, mask = data.labels, data.masks["train"]
    n_train = int(mask.sum())
    L = cfg.depth

    d_logits = prob.copy()
    d_logits[np.arange(len(labels)), labels] -= 1.0
    d_logits[~mask] = 0.0
    d_logits /= n_train

    dys = [None] * (L + 1)
    dys[L] = d_logits
    grads = [[np.zeros_like(w) for w in layer] for layer in weights]

    def add_dy(idx, val):
        dys[idx] = val if dys[idx] is None else dys[idx] + val

    for i in range(L, 0, -1):
        dy = dys[i]
        if dy is None:
            dy = np.zeros_like(ys[i])
        if i == L:
            dz = dy
        else:
            gate = np.where(zs[i - 1] >= 0.0, 1.0, cfg.slope)
            dz = dy * gate
            if (
                cfg.backbone == "resgcn"
                and 2 <= i <= L - 1
                and ys[i].shape == ys[i - 1].shape
            ):
                add_dy(i - 1, dy)
        h_in = ins[i - 1]
        d_in = None
        for k, (a_k, w_k) in enumerate(zip(pieces[i - 1], weights[i - 1])):
            at_dz = a_k.T @ dz
            grads[i - 1][k] += h_in.T @ at_dz
            term = at_dz @ w_k.T
            d_in = term if d_in is None else d_in + term
        # route the input gradient back to the outputs that built the input
        if cfg.backbone == "densegcn" and i >= 2:
            offset = 0
            for j in range(1, i):
                width = ys[j].shape[1]
                add_dy(j, d_in[:, offset : offset + width])
                offset += width
        elif cfg.backbone == "jknet" and i == L:
            offset = 0
            for j in range(1, L):
                width = ys[j].shape[1]
                add_dy(j, d_in[:, offset : offset + width])
                offset += width
        else:
            add_dy(i - 1, d_in)

    for li, layer in enumerate(weights):
        for k, w in enumerate(layer):
            grads[li][k] += cfg.weight_decay * w
    return grads


def _accuracy(prob, labels, mask):
    idx = np.flatnonzero(mask)
    return float(np.mean(prob[idx].argmax(axis=1) == labels[idx]))


def _masked_ce(prob, labels, mask):
    idx = np.flatnonzero(mask)
    return float(-np.mean(np.log(prob[idx, labels[idx]] + 1e-300)))


def build_model(cfg, data, source="none", seed=0, p=4, discount=False,
                with_skeleton=True):
    """(per-layer pieces, init weights) for a config on a dataset."""
    n_classes = int(data.labels.max()) + 1
    in_dim = data.features.shape[1]
    pieces = _build_pieces(cfg, data, source, seed, p, discount, with_skeleton)
    rng = np.random.default_rng(seed)
    weights = _init_weights(cfg, in_dim, n_classes, rng)
    return pieces, weights


def train(cfg, data, source="none", seed=0, p=4, discount=False,
          with_skeleton=True):
    """Full-batch gradient descent with early stopping on validation accuracy.

    Deterministic under (cfg, data, source, seed). Raises TrainingError
    carrying the last finite epoch if the loss leaves the finite range.
    """
    pieces, weights = build_model(
        cfg, data, source=source, seed=seed, p=p, discount=discount,
        with_skeleton=with_skeleton,
    )
    labels = data.labels
    hist = {"train_loss": [], "train_acc": [], "val_loss": [], "val_acc": []}
    best_val = -1.0
    best_epoch = 0
    best_test = 0.0
    since_best = 0
    # fp overflow is monitored through the loss itself, so numpy's
    # intermediate warnings on a diverging run are redundant noise
    with np.errstate(all="ignore"):
        for epoch in range(1, cfg.max_epochs + 1):
            ys, zs, ins = _forward_pass(cfg, pieces, weights, data.features)
            loss, prob = _loss_and_prob(
                cfg, weights, ys[-1], labels, data.masks["train"]
            )
            if not np.isfinite(loss):
                raise TrainingError(
                    f"training loss became non-finite at epoch {epoch}",
                    last_epoch=epoch - 1,
                )
            hist["train_loss"].append(float(loss))
            hist["train_acc"].append(
                _accuracy(prob, labels, data.masks["train"])
            )
            hist["val_loss"].append(_masked_ce(prob, labels, data.masks["val"]))
            hist["val_acc"].append(_accuracy(prob, labels, data.masks["val"]))

            if hist["val_acc"][-1] > best_val:
                best_val = hist["val_acc"][-1]
                best_epoch = epoch
                best_test = _accuracy(prob, labels, data.masks["test"])
                since_best = 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    break

            grads = _backward_pass(
                cfg, pieces, weights, data, ys, zs, ins, prob
            )
            for layer, glayer in zip(weights, grads):
                for w, gw in zip(layer, glayer):
                    w -= cfg.lr * gw
    return TrainResult(
        train_loss=tuple(hist["train_loss"]),
        train_acc=tuple(hist["train_acc"]),
        val_loss=tuple(hist["val_loss"]),
        val_acc=tuple(hist["val_acc"]),
        test_acc=best_test,
        best_epoch=best_epoch,
        epochs_run=len(hist["train_loss"]),
        seed=int(seed),
    )


def _loss_at(cfg, pieces, weights, data):
    ys, _, _ = _forward_pass(cfg, pieces, weights, data.features)
    loss, _ = _loss_and_prob(
        cfg, weights, ys[-1], data.labels, data.masks["train"]
    )
    return loss


def _sign_pattern(zs):
    return [z >= 0.0 for z in zs]


def finite_diff_gradcheck(cfg, data, epsilon=1e-5, n_probes=10, seed=0,
                          source="none", p=4, discount=False,
                          with_skeleton=True, max_retries=50):
    """Max relative error between analytic and central-difference gradients.

    Probes random weight entries. A probe is redrawn (bounded) when the
    base pre-activations sit on the activation kink or when the +/- epsilon
    evaluations disagree on any activation sign, since the loss is not
    differentiable across those boundaries.
    """
    if not (1e-7 <= epsilon <= 1e-3):
        raise DomainError(f"epsilon must lie in [1e-7, 1e-3], got {epsilon}")
    pieces, weights = build_model(
        cfg, data, source=source, seed=seed, p=p, discount=discount,
        with_skeleton=with_skeleton,
    )
    ys, zs, ins = _forward_pass(cfg, pieces, weights, data.features)
    _, prob = _loss_and_prob(
        cfg, weights, ys[-1], data.labels, data.masks["train"]
    )
    grads = _backward_pass(cfg, pieces, weights, data, ys, zs, ins, prob)
    rng = np.random.default_rng(seed + 1)
    worst = 0.0
    accepted = 0
    tries = 0
    while accepted < n_probes and tries < n_probes + max_retries:
        tries += 1
        li = int(rng.integers(cfg.depth))
        k = int(rng.integers(len(weights[li])))
        w = weights[li][k]
        i = int(rng.integers(w.shape[0]))
        j = int(rng.integers(w.shape[1]))

        orig = w[i, j]
        w[i, j] = orig + epsilon
        ysp, zp, _ = _forward_pass(cfg, pieces, weights, data.features)
        lp, _ = _loss_and_prob(
            cfg, weights, ysp[-1], data.labels, data.masks["train"]
        )
        w[i, j] = orig - epsilon
        ysm, zm, _ = _forward_pass(cfg, pieces, weights, data.features)
        lm, _ = _loss_and_prob(
            cfg, weights, ysm[-1], data.labels, data.masks["train"]
        )
        w[i, j] = orig

        flipped = any(
            not np.array_equal(a, b)
            for a, b in zip(_sign_pattern(zp[:-1]), _sign_pattern(zm[:-1]))
        )
        near_kink = min(
            min(float(np.min(np.abs(z))) for z in zp[:-1]),
            min(float(np.min(np.abs(z))) for z in zm[:-1]),
        ) < 1e-8
        if flipped or near_kink:
            continue
        fd = (lp - lm) / (2.0 * epsilon)
        an = grads[li][k][i, j]
        rel = abs(an - fd) / max(abs(an), abs(fd), 1e-8)
        worst = max(worst, rel)
        accepted += 1
    if accepted < n_probes:
        warnings.warn(
            f"only {accepted}/{n_probes} probes away from activation kinks"
        )
    return worst


def stable_lr(cfg, data, source="none", seed=0, p=4, start=0.5, max_halvings=20):
    """A learning rate at which the first step provably reduced the loss.

    Halves a starting rate until one gradient step lowers the training
    loss, then returns half of that rate again as margin.
    """
    pieces, weights = build_model(cfg, data, source=source, seed=seed, p=p)
    base = _loss_at(cfg, pieces, weights, data)
    ys, zs, ins = _forward_pass(cfg, pieces, weights, data.features)
    _, prob = _loss_and_prob(
        cfg, weights, ys[-1], data.labels, data.masks["train"]
    )
    grads = _backward_pass(cfg, pieces, weights, data, ys, zs, ins, prob)
    lr = float(start)
    for _ in range(max_halvings):
        stepped = [
            [w - lr * gw for w, gw in zip(layer, glayer)]
            for layer, glayer in zip(weights, grads)
        ]
        if _loss_at(cfg, pieces, stepped, data) < base:
            return lr / 2.0
        lr /= 2.0
    raise TrainingError("no descending step size found", last_epoch=0)


KSWEEP_COLUMNS = ("k", "kind", "seed", "test_acc", "test_mean", "test_std")


def k_sweep(cfg, data, k_values, seeds, source="connectivity_aware", p=4,
            discount=False, with_skeleton=True):
    """Test accuracy per piece count: one row per (k, seed) plus aggregates."""
    k_values = [int(k) for k in k_values]
    if not k_values or min(k_values) < 1:
        raise DomainError("k values must be >= 1")
    rows = []
    for k in k_values:
        cfg_k = replace(cfg, k_schedule=tuple([k] * cfg.depth))
        src_k = "none" if (k == 1 and source == "none") else source
        accs = []
        for seed in seeds:
            res = train(
                cfg_k, data, source=src_k, seed=int(seed), p=p,
                discount=discount, with_skeleton=with_skeleton,
            )
            accs.append(res.test_acc)
            rows.append(
                {
                    "k": k,
                    "kind": "cell",
                    "seed": int(seed),
                    "test_acc": res.test_acc,
                    "test_mean": "",
                    "test_std": "",
                }
            )
        rows.append(
            {
                "k": k,
                "kind": "aggregate",
                "seed": "",
                "test_acc": "",
                "test_mean": float(np.mean(accs)),
                "test_std": float(np.std(accs)),
            }
        )
    return rows


DEPTHSWEEP_COLUMNS = (
    "backbone",
    "depth",
    "source",
    "kind",
    "seed",
    "test_acc",
    "test_mean",
    "test_median",
    "test_std",
)


def depth_sweep(cfg, data, depths, backbones, sources, seeds, k=4, p=4,
                discount=False, with_skeleton=True):
    """Test accuracy across depth, backbone, and decomposition source."""
    rows = []
    for backbone in backbones:
        if backbone not in BACKBONES:
            raise DomainError(f"unknown backbone {backbone!r}")
        for depth in depths:
            depth = int(depth)
            for source in sources:
                if source not in DECOMP_SOURCES:
                    raise DomainError(f"unknown source {source!r}")
                sched = tuple([1 if source == "none" else k] * depth)
                cfg_cell = replace(
                    cfg, backbone=backbone, depth=depth, k_schedule=sched
                )
                accs = []
                for seed in seeds:
                    res = train(
                        cfg_cell, data, source=source, seed=int(seed), p=p,
                        discount=discount, with_skeleton=with_skeleton,
                    )
                    accs.append(res.test_acc)
                    rows.append(
                        {
                            "backbone": backbone,
                            "depth": depth,
                            "source": source,
                            "kind": "cell",
                            "seed": int(seed),
                            "test_acc": res.test_acc,
                            "test_mean": "",
                            "test_median": "",
                            "test_std": "",
                        }
                    )
                rows.append(
                    {
                        "backbone": backbone,
                        "depth": depth,
                        "source": source,
                        "kind": "aggregate",
                        "seed": "",
                        "test_acc": "",
                        "test_mean": float(np.mean(accs)),
                        "test_median": float(np.median(accs)),
                        "test_std": float(np.std(accs)),
                    }
                )
    return rows


HISTORY_COLUMNS = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc")


def write_history_csv(result, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTORY_COLUMNS)
        for e in range(result.epochs_run):
            writer.writerow(
                [
                    e + 1,
                    repr(result.train_loss[e]),
                    repr(result.train_acc[e]),
                    repr(result.val_loss[e]),
                    repr(result.val_acc[e]),
                ]
            )


def write_rows_csv(rows, columns, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(
                [repr(row[c]) if isinstance(row[c], float) else row[c]
                 for c in columns]
            )
