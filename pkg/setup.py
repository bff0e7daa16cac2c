"""Builds the optional Cython round kernel; the package works without it."""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DPPGD_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("dppgd.kernels._compiled", ["src/dppgd/kernels/_compiled.pyx"],
                       include_dirs=[np.get_include()], extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        print("Cython or numpy missing: installing the numpy kernel only")

setup(ext_modules=ext_modules)
