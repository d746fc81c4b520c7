import os

from setuptools import Extension, setup

# The compiled kernel core is optional: the package falls back to the numpy
# implementation at import time if the extension is absent. Set
# SPHEREREG_NO_EXT=1 to skip building it (e.g. on a machine without a C
# compiler).
ext_modules = []
if not os.environ.get("SPHEREREG_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "spherereg._batchkern",
                    ["src/spherereg/_batchkern.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        pass

setup(ext_modules=ext_modules)
