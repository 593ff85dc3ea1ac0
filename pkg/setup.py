"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure numpy implementation is
selected at import time); building it speeds up the hot inner loops
considerably. Build in place with:

    python setup.py build_ext --inplace
"""
from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/polyfolio/_kernels/_core.pyx",
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
        },
    )
    include_dirs = [numpy.get_include()]
except ImportError:
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
