"""Build script: compiles the optional coordinate-descent extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compilation only costs speed.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "lassosi._kernels._cd_cython",
                ["src/lassosi/_kernels/_cd_cython.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
