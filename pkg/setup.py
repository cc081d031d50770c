"""Builds the optional compiled sweep kernel.

The package is fully functional without it: degnn._kernels falls back to the
numpy implementation when the extension is absent or fails to import.  Set
DEGNN_NO_EXT=1 to skip the build entirely.
"""

import os

from setuptools import Extension, setup


def extensions():
    if os.environ.get("DEGNN_NO_EXT") == "1":
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "degnn._kernels._jacobi_cy",
        sources=["src/degnn/_kernels/_jacobi_cy.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=extensions())
