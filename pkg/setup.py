"""Build script for the optional compiled coherence kernel.

The package works without the extension: nvbath.kernels falls back to the
numpy implementation when the compiled module is absent, and the
NVBATH_KERNEL environment variable can force either backend.  Set
NVBATH_NO_EXT=1 to skip compilation entirely.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("NVBATH_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            ["src/nvbath/_kernels.pyx"],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # no Cython: build from the pregenerated C if it is present
        c_file = os.path.join("src", "nvbath", "_kernels.c")
        if os.path.exists(c_file):
            ext_modules = [Extension("nvbath._kernels", [c_file])]

setup(ext_modules=ext_modules)
