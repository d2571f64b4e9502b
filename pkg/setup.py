import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install, kernels fall back to numpy
    cythonize = None


def extensions():
    if cythonize is None or os.environ.get("PATCHRETINEX_NO_EXT"):
        return []
    ext = Extension(
        "patchretinex._kernels",
        ["src/patchretinex/_kernels.pyx"],
        include_dirs=[np.get_include()],
        # no -ffast-math / -march=native: results must match the numpy fallback bit for bit
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    return cythonize(
        [ext],
        compiler_directives={"language_level": "3"},
    )


setup(ext_modules=extensions())
