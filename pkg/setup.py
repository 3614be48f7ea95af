"""Build the optional Cython kernels.

The package works without them: ``provnet.kernels`` falls back to pure Python
when ``provnet._ckernels`` cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("PROVNET_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "provnet._ckernels",
                    ["src/provnet/_ckernels.pyx"],
                    language="c++",
                    extra_compile_args=["-O3", "-ffp-contract=off", "-std=c++17"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
