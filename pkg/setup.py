"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so a failed build degrades to the pure backend
instead of failing the install.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("HETBOOST_SKIP_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "hetboost._core",
                    ["src/hetboost/_core.pyx"],
                    include_dirs=[numpy.get_include()],
                    # -ffp-contract=off keeps the compiled kernels bit-identical
                    # to the numpy fallback (no fused multiply-add).
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
