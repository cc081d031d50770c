"""Sweep kernel selection: compiled extension when present, numpy otherwise.

Both lanes implement the identical cyclic one-sided Jacobi sweep; the
extension is an optional build, so importing this package never fails for
lack of a compiler. degnn.spectral picks up `jacobi_sweep` from here; the
benchmark and the lane-equivalence tests grab both via sweep_implementations.
"""

from degnn._kernels._jacobi_np import jacobi_sweep as python_sweep

try:
    from degnn._kernels._jacobi_cy import jacobi_sweep as compiled_sweep
except ImportError:
    compiled_sweep = None

jacobi_sweep = compiled_sweep if compiled_sweep is not None else python_sweep


def active_lane():
    """Which sweep implementation svd() will use: 'compiled' or 'python'."""
    return "compiled" if compiled_sweep is not None else "python"


def sweep_implementations():
    """Every available sweep lane, keyed by name."""
    impls = {"python": python_sweep}
    if compiled_sweep is not None:
        impls["compiled"] = compiled_sweep
    return impls
