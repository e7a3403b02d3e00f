"""Builds the optional compiled Monte Carlo kernel.

Without Cython (or a C compiler) the package installs without it and the
numpy fallback in ``tdmjls._mc_fallback`` is used at runtime.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension(
            "tdmjls._mc_kernel",
            sources=["src/tdmjls/_mc_kernel.pyx"],
            include_dirs=[np.get_include()],
            # no FMA contraction: paths must match the numpy fallback bit for bit
            extra_compile_args=["-O3", "-ffp-contract=off"],
        )],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
