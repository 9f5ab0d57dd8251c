"""Build script: compiles the optional simplex pivot kernels.

The package works without the compiled extension (a numpy fallback is
selected at import time), so a failed compile only costs speed.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "gridrestore._kernels",
                ["src/gridrestore/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"warning: building without compiled kernels ({exc})")

setup(ext_modules=ext_modules)
