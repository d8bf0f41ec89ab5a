"""Build script. Compiles the optional filter-bank kernel when Cython and a C
compiler are available; the package falls back to the numpy implementation at
import time otherwise."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "tiadc._kernels",
                ["src/tiadc/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
