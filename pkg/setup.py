"""Build script for the optional compiled convolution core.

The Cython extension is a performance add-on: if Cython or a C compiler is
unavailable the install proceeds and the package falls back to the NumPy
kernels at import time.
"""

import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and os.environ.get("ZSDN_SKIP_EXT") != "1":
    ext_modules = cythonize(
        [
            Extension(
                "zsdn._kernels.cyconv",
                sources=["src/zsdn/_kernels/cyconv.pyx"],
                extra_compile_args=["-O3", "-march=native", "-fopenmp"],
                extra_link_args=["-fopenmp"],
                include_dirs=[np.get_include()],
                optional=True,  # failed builds fall back to the NumPy lane
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
