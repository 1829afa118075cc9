"""Build script for the optional compiled kernel core.

The package is fully functional without the extension: snooptest._kernels
falls back to pure-Python implementations when the compiled module is
missing or when SNOOPTEST_PURE_PYTHON=1 is set. Any failure here therefore
degrades to a slower install instead of a broken one.
"""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SNOOPTEST_SKIP_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "snooptest._kernels._core",
                    sources=["src/snooptest/_kernels/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
