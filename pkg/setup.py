"""Build script: compiles the optional Monte Carlo kernel extension.

The package works without the extension (a pure-numpy fallback is selected
at import time), so any failure here degrades to a source-only install.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "d2dcache.mc._kernels",
                ["src/d2dcache/mc/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"d2dcache: skipping compiled kernels ({exc}); pure-python fallback will be used")

setup(ext_modules=ext_modules)
