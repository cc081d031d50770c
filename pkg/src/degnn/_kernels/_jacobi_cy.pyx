# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled lane for the one-sided Jacobi sweep.

Mirrors _jacobi_np.jacobi_sweep exactly: same pair order, same skip test,
same rotation formulas, so the two lanes agree to floating-point roundoff.
"""

from libc.math cimport fabs, sqrt


def jacobi_sweep(double[:, ::1] bt, double[:, ::1] vt, double delta):
    """One cyclic one-sided Jacobi sweep over row pairs of bt, in place.

    bt is the working matrix transposed (row k is column k of B); vt carries
    the accumulated right rotations transposed; delta is the relative
    orthogonality tolerance below which a pair is skipped. Returns the
    rotation count.
    """
    cdef Py_ssize_t n = bt.shape[0]
    cdef Py_ssize_t m = bt.shape[1]
    cdef Py_ssize_t nv = vt.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double alpha, beta, gamma, zeta, sign, t, c, s, xi, xj
    cdef long rotations = 0

    for i in range(n - 1):
        for j in range(i + 1, n):
            gamma = 0.0
            for k in range(m):
                gamma += bt[i, k] * bt[j, k]
            if gamma == 0.0:
                continue
            alpha = 0.0
            beta = 0.0
            for k in range(m):
                alpha += bt[i, k] * bt[i, k]
                beta += bt[j, k] * bt[j, k]
            if fabs(gamma) <= delta * sqrt(alpha * beta):
                continue
            zeta = (beta - alpha) / (2.0 * gamma)
            sign = 1.0 if zeta >= 0.0 else -1.0
            t = sign / (fabs(zeta) + sqrt(1.0 + zeta * zeta))
            c = 1.0 / sqrt(1.0 + t * t)
            s = c * t
            for k in range(m):
                xi = bt[i, k]
                xj = bt[j, k]
                bt[i, k] = c * xi - s * xj
                bt[j, k] = s * xi + c * xj
            for k in range(nv):
                xi = vt[i, k]
                xj = vt[j, k]
                vt[i, k] = c * xi - s * xj
                vt[j, k] = s * xi + c * xj
            rotations += 1
    return rotations
