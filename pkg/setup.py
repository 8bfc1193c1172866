"""Build script: compiles the optional Cython kernel module.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any build failure here downgrades to a pure
install instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "geopath._kernels._core",
                ["src/geopath/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
except Exception as exc:  # noqa: BLE001 - fall back to pure install
    print(f"geopath: skipping Cython extension build ({exc!r})")

setup(ext_modules=ext_modules)
