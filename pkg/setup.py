"""Build script: compiles the optional observation-grouping kernel.

The package works without the extension (a pure-Python kernel is selected
at import time); the compiled kernel just makes large exact-score
enumerations faster.  See benchmarks/bench_enumeration.py.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "randenc._obskernel",
                ["src/randenc/_obskernel.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
