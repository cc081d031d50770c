"""Randomized self-checks certifying the library's linear-map identities.

Each check runs seeded trials against an independent reconstruction of the
claimed identity (explicit Kronecker sums, brute-force SVD, direct forward
passes) and reports how many trials passed together with the worst error
seen. They are cheap enough to run at every release and are exposed through
the command line as named suites.
"""

from dataclasses import dataclass

import numpy as np

from .decompose import spectral_split
from .errors import DomainError
from .linalg import kron, vec
from .propagate import (
    endtoend_extremes,
    forward,
    gcn_stack,
    graphcnn_stack,
    linearized_map,
)
from .spectral import gcn_regime, graphcnn_regime, kron_sum_spectrum, svd


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one randomized suite: trials passed and the worst error."""

    name: str
    passed: int
    total: int
    max_err: float

    @property
    def ok(self):
        return self.passed == self.total

    def summary(self):
        return (
            f"{self.name}: {self.passed}/{self.total} pass "
            f"(max err {self.max_err:.3e})"
        )


def _check_trials(trials):
    trials = int(trials)
    if trials < 1:
        raise DomainError(f"need at least one trial, got {trials}")
    return trials


def check_linearization(trials=100, seed=0, tol=1e-9):
    """Forward pass equals the explicit mask-scaled operator product.

    Alternates plain and decomposed stacks over random sizes (n <= 6,
    widths <= 3, depth <= 5) and compares the deep output against the
    end-to-end matrix applied to the stacked input.
    """
    trials = _check_trials(trials)
    rng = np.random.default_rng(seed)
    passed = 0
    max_err = 0.0
    for t in range(trials):
        n = int(rng.integers(2, 7))
        depth = int(rng.integers(1, 6))
        dims = [int(rng.integers(1, 4)) for _ in range(depth + 1)]
        slope = float(rng.uniform(0.05, 0.95))
        if t % 2 == 0:
            a_mat = rng.normal(size=(n, n)) / np.sqrt(n)
            weights = [
                rng.normal(size=(dims[i], dims[i + 1])) for i in range(depth)
            ]
            stack = gcn_stack(a_mat, weights, slope=slope)
        else:
            k = int(rng.integers(1, 4))
            pieces = [rng.normal(size=(n, n)) / np.sqrt(n) for _ in range(k)]
            layer_weights = [
                [rng.normal(size=(dims[i], dims[i + 1])) for _ in range(k)]
                for i in range(depth)
            ]
            stack = graphcnn_stack(pieces, layer_weights, slope=slope)
        x = rng.normal(size=(n, dims[0]))
        deep = forward(stack, x)[-1]
        _, mapped = linearized_map(stack, vec(x))
        err = float(np.max(np.abs(vec(deep) - mapped)))
        max_err = max(max_err, err)
        passed += err < tol
    return CheckReport("linearization", passed, trials, max_err)


def check_split_spectrum(trials=100, seed=0, tol=1e-8):
    """Closed-form spectrum of a one-direction-per-piece split is exact.

    Splits a random square matrix into one piece per singular direction,
    attaches a random square weight to each piece, and compares the product
    formula against a brute-force SVD of the explicit Kronecker sum.
    """
    trials = _check_trials(trials)
    rng = np.random.default_rng(seed)
    passed = 0
    max_err = 0.0
    for t in range(trials):
        n = int(rng.integers(2, 7))
        d = int(rng.integers(1, 4))
        a_mat = rng.normal(size=(n, n))
        if t % 5 == 4:
            # rank-deficient input: zero singular values must carry through
            a_mat[:, 0] = a_mat[:, -1]
        split = spectral_split(a_mat, groups=n)
        w_pieces = [rng.normal(size=(d, d)) for _ in range(n)]
        closed = kron_sum_spectrum(split, w_pieces)
        total = sum(
            kron(w_k, a_k) for w_k, a_k in zip(w_pieces, split.pieces)
        )
        brute = svd(total).sigma
        err = float(np.max(np.abs(closed - brute)))
        max_err = max(max_err, err)
        passed += err < tol
    return CheckReport("split_spectrum", passed, trials, max_err)


def check_kron_identities(trials=100, seed=0, sv_tol=1e-8, vec_tol=1e-10):
    """Kronecker spectrum and vec factoring identities hold numerically.

    Singular values of kron(A, B) must be all products of the factors'
    singular values, and vec(A B C) must equal (C^T kron A) vec(B).
    """
    trials = _check_trials(trials)
    rng = np.random.default_rng(seed)
    passed = 0
    max_err = 0.0
    for _ in range(trials):
        m, n, p, q = (int(rng.integers(1, 5)) for _ in range(4))
        a_mat = rng.normal(size=(m, n))
        b_mat = rng.normal(size=(p, q))
        direct = svd(kron(a_mat, b_mat)).sigma
        outer = np.sort(np.outer(svd(a_mat).sigma, svd(b_mat).sigma), axis=None)
        # rectangular factors: the product multiset lists the nonzero part
        # of the spectrum, the rest of kron(A, B)'s values are exact zeros
        products = np.zeros(direct.shape)
        products[: outer.size] = outer[::-1]
        sv_err = float(np.max(np.abs(direct - products)))

        left = rng.normal(size=(m, n))
        mid = rng.normal(size=(n, p))
        right = rng.normal(size=(p, q))
        lhs = vec(left @ mid @ right)
        rhs = kron(right.T, left) @ vec(mid)
        vec_err = float(np.max(np.abs(lhs - rhs)))

        max_err = max(max_err, sv_err, vec_err)
        passed += sv_err < sv_tol and vec_err < vec_tol
    return CheckReport("kron_identities", passed, trials, max_err)


def _random_orthogonal(n, rng):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def check_regimes(trials=100, seed=0, tol=1e-9):
    """Regime certificates bound the realized end-to-end singular values.

    Cycles three constructions: stacks rescaled into the decaying regime,
    stacks built from orthogonal factors certified to preserve, and raw
    random stacks whose label is cross-checked against the definition. In
    the certified cases the realized extreme must respect the per-layer
    bound raised to the depth.
    """
    trials = _check_trials(trials)
    rng = np.random.default_rng(seed)
    passed = 0
    max_err = 0.0
    for t in range(trials):
        n = int(rng.integers(2, 6))
        d = int(rng.integers(1, 4))
        depth = int(rng.integers(1, 5))
        slope = float(rng.uniform(0.1, 0.9))
        kind = t % 3
        if kind == 0:
            # force decay: rescale the weights so sigma_a * sigma_w = 0.9
            a_mat = rng.normal(size=(n, n))
            weights = [rng.normal(size=(d, d)) for _ in range(depth)]
            sigma_a = svd(a_mat).sigma[0]
            sigma_w = max(svd(w).sigma[0] for w in weights)
            scale = 0.9 / (sigma_a * sigma_w)
            weights = [w * scale for w in weights]
            rep = gcn_regime(a_mat, weights, slope=slope)
            stack = gcn_stack(a_mat, weights, slope=slope)
            x = rng.normal(size=n * d)
            hi, _ = endtoend_extremes(stack, x)
            bound = rep.bound_per_layer ** depth
            err = max(0.0, hi - bound)
            ok = rep.regime == "decay" and err <= tol
        elif kind == 1:
            # orthogonal weights, amplified orthogonal propagation: preserve
            gain = float(rng.uniform(1.0 / slope + 0.05, 1.0 / slope + 1.0))
            a_mat = gain * _random_orthogonal(n, rng)
            weights = [_random_orthogonal(d, rng) for _ in range(depth)]
            rep = gcn_regime(a_mat, weights, slope=slope)
            stack = gcn_stack(a_mat, weights, slope=slope)
            x = rng.normal(size=n * d)
            _, lo = endtoend_extremes(stack, x)
            bound = rep.bound_per_layer ** depth
            err = max(0.0, bound - lo)
            ok = rep.regime == "preserve" and err <= tol
        else:
            # raw random decomposed stack: the label must match the rule
            k = int(rng.integers(1, min(4, n + 1)))
            a_mat = rng.normal(size=(n, n))
            split = spectral_split(a_mat, groups=k)
            layer_weights = [
                [rng.normal(size=(d, d)) for _ in range(k)]
                for _ in range(depth)
            ]
            rep = graphcnn_regime(split.pieces, layer_weights, slope=slope)
            if rep.regime == "decay":
                ok = rep.sigma_a < 1.0
            elif rep.regime == "preserve":
                ok = slope * rep.gamma_a >= 1.0
            else:
                ok = rep.sigma_a >= 1.0 and slope * rep.gamma_a < 1.0
            err = 0.0 if ok else 1.0
        max_err = max(max_err, err)
        passed += ok
    return CheckReport("regimes", passed, trials, max_err)


ALL_CHECKS = {
    "linearization": check_linearization,
    "split_spectrum": check_split_spectrum,
    "kron_identities": check_kron_identities,
    "regimes": check_regimes,
}
