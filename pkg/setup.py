"""Builds the optional compiled kernel extension.

If Cython or a C toolchain is unavailable the install still succeeds;
adabatch.kernels falls back to the pure-NumPy implementation at import.
"""

from setuptools import setup

ext_modules = []
include_dirs = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/adabatch/kernels/_core.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
    include_dirs = [numpy.get_include()]
except ImportError:
    pass

setup(ext_modules=ext_modules, include_dirs=include_dirs)
