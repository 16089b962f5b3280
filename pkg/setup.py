"""Build script for the compiled integration kernels.

The package is fully functional without the extension (a pure-Python
fallback is selected at import time); set MOBISIM_PURE=1 to skip the
compilation step explicitly.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("MOBISIM_PURE"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "mobisim._kernels_c",
                    ["src/mobisim/_kernels_c.pyx"],
                    # -ffp-contract=off: no fused multiply-add, so C arithmetic
                    # stays bit-identical to CPython float arithmetic.
                    extra_compile_args=["-O3", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
