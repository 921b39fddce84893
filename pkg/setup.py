"""Build script: compiles the optional fast-path extension.

The package works without the extension (a NumPy fallback is selected at
import time), so compilation failures are non-fatal when
NETKUCB_REQUIRE_EXT is unset.
"""

import os

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "netkucb._core",
                ["src/netkucb/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    if os.environ.get("NETKUCB_REQUIRE_EXT"):
        raise

setup(ext_modules=ext_modules)
