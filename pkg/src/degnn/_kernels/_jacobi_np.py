"""Pure numpy lane for the one-sided Jacobi sweep.

Semantics must stay in lockstep with _jacobi_cy.pyx: one cyclic pass over
all column pairs, rotating whenever the pair is not yet orthogonal relative
to its own scale. The driver in degnn.spectral owns convergence.
"""

import math


def jacobi_sweep(bt, vt, delta):
    """One cyclic one-sided Jacobi sweep, in place.

    bt holds the working matrix transposed (row k is column k of B), vt holds
    the accumulated rotations transposed (row k is column k of V), so every
    rotation touches two contiguous rows. Returns the rotation count.

    A pair (i, j) is skipped when |b_i . b_j| <= delta * ||b_i|| * ||b_j||,
    a relative test, so near-zero columns still get orthogonalized against
    each other at their own scale. A zero-rotation sweep therefore certifies
    every pair orthogonal to within delta.
    """
    n = bt.shape[0]
    rotations = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            bi = bt[i]
            bj = bt[j]
            gamma = float(bi @ bj)
            if gamma == 0.0:
                continue
            alpha = float(bi @ bi)
            beta = float(bj @ bj)
            if abs(gamma) <= delta * math.sqrt(alpha * beta):
                continue
            zeta = (beta - alpha) / (2.0 * gamma)
            sign = 1.0 if zeta >= 0.0 else -1.0
            t = sign / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
            c = 1.0 / math.sqrt(1.0 + t * t)
            s = c * t
            # evaluate both updates from the old rows before writing either
            new_bi = c * bi - s * bj
            new_bj = s * bi + c * bj
            bt[i] = new_bi
            bt[j] = new_bj
            vi = vt[i]
            vj = vt[j]
            new_vi = c * vi - s * vj
            new_vj = s * vi + c * vj
            vt[i] = new_vi
            vt[j] = new_vj
            rotations += 1
    return rotations
