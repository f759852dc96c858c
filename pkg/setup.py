"""Build script for the optional compiled PCST kernel.

The package works without the extension (a pure-Python kernel is selected
at import time), so a missing compiler or Cython only costs speed.
"""

import os

from setuptools import Extension, setup

try:
    if not os.path.exists("src/graphqa/_pcst_core.pyx"):
        raise ImportError("kernel source not present")
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "graphqa._pcst_core",
                ["src/graphqa/_pcst_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
