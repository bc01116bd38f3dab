"""Build script for the optional compiled kernels.

The package works without them: ``cobro._backend`` falls back to the
numpy implementation when the extension cannot be imported.
"""
import os
import sys

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("COBRO_NO_EXT"):
        return []
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        sys.stderr.write("cython/numpy unavailable; skipping compiled kernels\n")
        return []
    openmp = [] if sys.platform == "darwin" else ["-fopenmp"]
    ext = Extension(
        "cobro._kernels",
        ["src/cobro/_kernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"] + openmp,
        extra_link_args=openmp,
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
