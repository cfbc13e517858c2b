"""Build script.  The compiled kernel backend is optional: if Cython or a C
compiler is missing the package installs anyway and falls back to the numpy
implementation at import time."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("GAUGELAB_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext = Extension(
            "gaugelab._kernels._fast",
            sources=["src/gaugelab/_kernels/_fast.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
