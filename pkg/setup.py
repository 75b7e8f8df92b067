"""Build script for the compiled geometry kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile degrades performance but not behavior.
"""

import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy as np
except ImportError:
    ext_modules = []
else:
    if not os.path.exists("src/scadnotate/geometry/_kernel_c.pyx"):
        raise SystemExit("missing _kernel_c.pyx")
    ext_modules = cythonize(
        [
            Extension(
                "scadnotate.geometry._kernel_c",
                ["src/scadnotate/geometry/_kernel_c.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
        },
    )

setup(ext_modules=ext_modules)
