"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-NumPy backend is selected at
import time), so a failed compile degrades to a warning rather than breaking
the install.
"""

import sys

from setuptools import Extension, setup


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        print(f"anchortune: skipping compiled kernels ({exc})", file=sys.stderr)
        return []
    ext = Extension(
        "anchortune.kernels._convcy",
        sources=["src/anchortune/kernels/_convcy.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
