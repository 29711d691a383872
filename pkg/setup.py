"""Build script for the optional compiled channel kernel.

The package works without the extension (a numpy fallback is selected at
import time), so any failure to cythonize or compile only degrades speed.
"""

from setuptools import Extension, setup

extensions = []
try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "mclink._kernels._core",
                ["src/mclink/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError as exc:  # pragma: no cover - build environment dependent
    print(f"mclink: skipping compiled kernel ({exc}); numpy fallback will be used")

setup(ext_modules=extensions)
