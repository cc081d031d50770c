"""Singular value machinery and information-flow regime certificates.

svd() is a one-sided Jacobi implementation (hot sweep lives in degnn._kernels
with a compiled and a pure lane). numpy's own factorizations are deliberately
not used here: the verification suite cross-checks this routine against an
independent characteristic-polynomial oracle, so the certified path must be
this code and nothing else.

The regime classifiers turn singular-value extremes into one of three labels:
  decay          per-layer contraction < 1, end-to-end map shrinks to zero
  preserve       per-layer expansion >= 1 even through the activation floor,
                 the end-to-end map stays injective
  indeterminate  neither certificate applies
For the decomposed propagation rule the per-layer operator is the explicit
Kronecker sum M_i = sum_k (W_k^T kron A_k); its largest singular value upper
bounds the masked layer and `slope * smallest` lower bounds it, because the
activation mask is diagonal with entries in {slope, 1}.
"""

from dataclasses import dataclass

import numpy as np

from degnn import _kernels
from degnn.errors import DomainError, NumericError
from degnn.linalg import as_matrix, kron

MAX_SVD_SIDE = 2048
MAX_SWEEPS = 60


@dataclass(frozen=True)
class SVDResult:
    """Factorization m = u @ diag(sigma) @ v.T with sigma descending.

    u has orthonormal columns (rows x k), v likewise (cols x k), where
    k = min(rows, cols); for square input both are square orthogonal.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    def reconstruct(self):
        return self.u @ np.diag(self.sigma) @ self.v.T


def _project_out(vec, ut, filled):
    """vec minus its components along the filled rows, re-run for stability."""
    e = vec.astype(np.float64).copy()
    for _ in range(2):
        for r in filled:
            e -= (e @ ut[r]) * ut[r]
    return e, float(np.sqrt(e @ e))


def _orthonormal_direction(ut, filled, seed_vec=None):
    """A unit vector orthogonal to the filled rows of ut.

    Tries seed_vec first (kept only when most of it survives projection),
    then the canonical basis vector carrying the least energy inside the
    filled span. That vector's exact residual norm is sqrt(1 - energy),
    at least sqrt(1/m) while a complement direction exists, so a fixed
    acceptance cutoff would wrongly reject it for large m. Used for columns
    whose singular value is negligible, where the rotated working column no
    longer carries a trustworthy direction.
    """
    if seed_vec is not None:
        e, nrm = _project_out(seed_vec, ut, filled)
        if nrm > 0.25:
            return e / nrm
    m = ut.shape[1]
    energy = np.zeros(m)
    for r in filled:
        energy += ut[r] * ut[r]
    cand = np.zeros(m)
    cand[int(np.argmin(energy))] = 1.0
    e, nrm = _project_out(cand, ut, filled)
    if nrm > 1e-6:
        return e / nrm
    raise NumericError("could not complete an orthonormal basis")


def _gram_state(bt, shape_max):
    """Convergence measures of the working matrix.

    Returns (off, rel, sig_cut): the off-diagonal Frobenius norm of the Gram
    matrix, the largest relative non-orthogonality among column pairs whose
    norms sit above the negligibility cut, and the cut itself. Negligible
    columns (norm <= float rounding noise of the largest column) cannot be
    driven to relative orthogonality and are handled at extraction instead.
    """
    gram = bt @ bt.T
    d = np.sqrt(np.clip(np.diag(gram).copy(), 0.0, None))
    np.fill_diagonal(gram, 0.0)
    off = float(np.sqrt((gram * gram).sum()))
    sig_cut = float(d.max()) * (2.0 ** -52) * shape_max if d.size else 0.0
    keep = np.flatnonzero(d > sig_cut)
    rel = 0.0
    if keep.size >= 2:
        sub = gram[np.ix_(keep, keep)] / np.outer(d[keep], d[keep])
        rel = float(np.abs(sub).max())
    return off, rel, sig_cut


def svd(m, sweep=None):
    """Full singular value decomposition via one-sided Jacobi rotations.

    Convergence requires both the contract criterion (off-diagonal Frobenius
    norm of the implicit Gram matrix B^T B below 1e-12 * ||m||_F) and a
    rotation-free sweep... see below; the second condition is what makes the
    singular vectors of near-zero singular values orthonormal too. Capped at
    MAX_SWEEPS sweeps (NumericError beyond, or on a stall where the pair
    tolerance cannot push the Gram criterion any lower). Supports any shape
    with min(rows, cols) <= 2048; wide input is handled by transposing.

    The iteration runs on m scaled to unit Frobenius norm (singular values
    scale linearly and are multiplied back), so convergence behavior is
    scale-invariant: the Gram criterion in the scaled frame is exactly
    off < 1e-12 * ||m_scaled||_F. Without the pre-scaling, float64 rounding
    noise in the Gram entries (~2e-16 * ||m||_F^2) would exceed the absolute
    threshold for ||m||_F beyond ~1e3 regardless of algorithm.

    sweep overrides the kernel lane (used by the benchmark and lane tests).
    """
    a = as_matrix(m, "m")
    rows, cols = a.shape
    if min(rows, cols) > MAX_SVD_SIDE:
        raise DomainError(
            f"svd supports min(rows, cols) <= {MAX_SVD_SIDE}, got {a.shape}"
        )
    if sweep is None:
        sweep = _kernels.jacobi_sweep
    transposed = rows < cols
    work = a.T if transposed else a
    fro = float(np.sqrt((a * a).sum()))
    scale = fro if fro > 0.0 else 1.0
    # bt rows are the working columns, so rotations touch contiguous memory
    bt = np.array(work.T / scale, dtype=np.float64, order="C", copy=True)
    n = bt.shape[0]
    vt = np.eye(n, dtype=np.float64, order="C")
    threshold = 1e-12 * (fro / scale)
    shape_max = max(a.shape)
    delta = 1e-13

    converged = False
    rotations = None
    sig_cut = 0.0
    for _ in range(MAX_SWEEPS + 1):
        off, rel, sig_cut = _gram_state(bt, shape_max)
        if off <= threshold and rel <= 1e-10:
            converged = True
            break
        if rotations == 0:
            # no pair moved last sweep; further sweeps cannot improve this
            break
        rotations = sweep(bt, vt, delta)
    if not converged:
        off, rel, _ = _gram_state(bt, shape_max)
        raise NumericError(
            f"jacobi svd did not converge in {MAX_SWEEPS} sweeps "
            f"(gram off-diagonal {off:.3e} vs {threshold:.3e}, "
            f"relative {rel:.3e} vs 1e-10)"
        )

    norms = np.sqrt((bt * bt).sum(axis=1))
    order = np.argsort(-norms, kind="stable")
    bt = bt[order]
    vt = vt[order]
    snorms = norms[order]
    sigma = snorms * scale
    # significant columns keep their rotated direction; negligible ones get
    # re-orthonormalized, which perturbs the reconstruction by at most the
    # negligibility cut per column
    ut = np.zeros_like(bt)
    filled = []
    for r in range(n):
        if snorms[r] > sig_cut:
            ut[r] = bt[r] / snorms[r]
        else:
            seed_vec = bt[r] / snorms[r] if snorms[r] > 0.0 else None
            ut[r] = _orthonormal_direction(ut, filled, seed_vec)
        filled.append(r)

    u = ut.T.copy()
    v = vt.T.copy()
    if transposed:
        u, v = v, u
    return SVDResult(u=u, sigma=sigma, v=v)


def singular_extremes(m, sweep=None):
    """(largest, smallest) singular value of m."""
    s = svd(m, sweep=sweep).sigma
    return float(s[0]), float(s[-1])


@dataclass(frozen=True)
class RegimeReport:
    """Certificate inputs and the resulting regime label.

    For the plain propagation rule sigma_a/gamma_a are the adjacency
    extremes and sigma_w/gamma_w the sup/inf of weight extremes over layers.
    For the decomposed rule the weight factors fold into the per-layer
    composite operator, so sigma_a/gamma_a carry that operator's extremes
    (sup over layers for sigma_a, inf for gamma_a) and sigma_w = gamma_w = 1.
    Either way the classification reads:
        decay        iff sigma_a * sigma_w < 1
        preserve     iff slope * gamma_a * gamma_w >= 1
        indeterminate otherwise
    (the two certificates are mutually exclusive because slope < 1 and
    gamma <= sigma on each factor). bound_per_layer is the geometric factor
    the certificate propagates: sigma_a * sigma_w in the decay and
    indeterminate cases, slope * gamma_a * gamma_w under preserve.
    """

    sigma_a: float
    gamma_a: float
    sigma_w: float
    gamma_w: float
    slope: float
    regime: str
    bound_per_layer: float

    def to_kv(self):
        """Flat key=value block (one pair per line), CLI-friendly."""
        items = [
            ("sigma_a", repr(self.sigma_a)),
            ("gamma_a", repr(self.gamma_a)),
            ("sigma_w", repr(self.sigma_w)),
            ("gamma_w", repr(self.gamma_w)),
            ("slope", repr(self.slope)),
            ("regime", self.regime),
            ("bound_per_layer", repr(self.bound_per_layer)),
        ]
        return "\n".join(f"{k}={v}" for k, v in items) + "\n"


def _check_slope(slope):
    slope = float(slope)
    if not (0.0 < slope < 1.0):
        raise DomainError(f"activation slope must lie in (0, 1), got {slope}")
    return slope


def _classify(sigma_a, gamma_a, sigma_w, gamma_w, slope):
    if sigma_a * sigma_w < 1.0:
        regime = "decay"
        bound = sigma_a * sigma_w
    elif slope * gamma_a * gamma_w >= 1.0:
        regime = "preserve"
        bound = slope * gamma_a * gamma_w
    else:
        regime = "indeterminate"
        bound = sigma_a * sigma_w
    return RegimeReport(
        sigma_a=float(sigma_a),
        gamma_a=float(gamma_a),
        sigma_w=float(sigma_w),
        gamma_w=float(gamma_w),
        slope=slope,
        regime=regime,
        bound_per_layer=float(bound),
    )


def gcn_regime(a_mat, weights, slope=0.2):
    """Classify a plain propagation stack from its factor spectra.

    a_mat is the (already normalized, if desired) propagation matrix;
    weights is the per-layer list of weight matrices. The per-layer linear
    map is the masked (W^T kron A), whose singular values are bounded by
    the products of the factor extremes.
    """
    slope = _check_slope(slope)
    a_mat = as_matrix(a_mat, "a_mat")
    if a_mat.shape[0] != a_mat.shape[1]:
        raise DomainError("propagation matrix must be square")
    if not weights:
        raise DomainError("need at least one weight matrix")
    sigma_a, gamma_a = singular_extremes(a_mat)
    sigma_w = -np.inf
    gamma_w = np.inf
    for w in weights:
        hi, lo = singular_extremes(as_matrix(w, "weight"))
        sigma_w = max(sigma_w, hi)
        gamma_w = min(gamma_w, lo)
    return _classify(sigma_a, gamma_a, sigma_w, gamma_w, slope)


def composite_operator(pieces, piece_weights):
    """Explicit per-layer operator sum_k (W_k^T kron A_k) of a decomposed layer."""
    if len(pieces) != len(piece_weights):
        raise DomainError(
            f"{len(pieces)} pieces but {len(piece_weights)} weight matrices"
        )
    total = None
    for a_k, w_k in zip(pieces, piece_weights):
        a_k = as_matrix(a_k, "piece")
        w_k = as_matrix(w_k, "piece weight")
        term = kron(w_k.T, a_k)
        total = term if total is None else total + term
    return total


def graphcnn_regime(pieces, layer_weights, slope=0.2):
    """Classify a decomposed stack by its per-layer composite operators.

    pieces: list of n x n piece matrices A_k (shared across layers).
    layer_weights: one list of per-piece weight matrices per layer.
    Builds M_i = sum_k (W_k^T kron A_k) explicitly for every layer and
    classifies on sup_i sigma(M_i) and inf_i gamma(M_i); the diagonal
    activation mask can only scale singular values by a factor in
    [slope, 1], which is what the classification rule accounts for.
    """
    slope = _check_slope(slope)
    if not pieces:
        raise DomainError("need at least one piece matrix")
    if not layer_weights:
        raise DomainError("need at least one layer of weights")
    n = as_matrix(pieces[0], "piece").shape
    if n[0] != n[1]:
        raise DomainError("piece matrices must be square")
    sup_sigma = -np.inf
    inf_gamma = np.inf
    for wk in layer_weights:
        m_i = composite_operator(pieces, wk)
        hi, lo = singular_extremes(m_i)
        sup_sigma = max(sup_sigma, hi)
        inf_gamma = min(inf_gamma, lo)
    return _classify(sup_sigma, inf_gamma, 1.0, 1.0, slope)


def kron_sum_spectrum(split, w_pieces):
    """Singular values of sum_k (W_k kron A_k) for spectrally split pieces.

    When the pieces come from a one-singular-value-per-piece spectral split
    (A_k = u_k sigma_k v_k^T sharing A's singular bases), the sum's singular
    values are exactly every product sigma_k * (singular value j of W_k):
    the shared bases rotate the sum into a block structure where piece k
    contributes the block sigma_k * W_k, so no large factorization is
    needed. Returns the full multiset as a descending array of length n*d.

    split: a SpectralSplit with one piece per singular value (groups == n).
    w_pieces: n weight matrices, all d x d.
    """
    n = len(split.sigma)
    if split.groups != n:
        raise DomainError(
            "closed-form spectrum needs one singular value per piece "
            f"(groups={split.groups}, n={n})"
        )
    if len(w_pieces) != n:
        raise DomainError(f"expected {n} weight matrices, got {len(w_pieces)}")
    d = None
    values = []
    for k, w_k in enumerate(w_pieces):
        w_k = as_matrix(w_k, f"w_pieces[{k}]")
        if w_k.shape[0] != w_k.shape[1]:
            raise DomainError("weight pieces must be square")
        if d is None:
            d = w_k.shape[0]
        elif w_k.shape[0] != d:
            raise DomainError("weight pieces must share one dimension")
        sw = svd(w_k).sigma
        values.append(split.sigma[k] * sw)
    out = np.concatenate(values)
    out.sort()
    return out[::-1].copy()
