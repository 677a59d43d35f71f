import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    ext_modules = cythonize(
        [
            Extension(
                "oscint._kernels",
                ["src/oscint/_kernels.pyx"],
                extra_compile_args=["-O3"],
                language="c",
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    # pure-python install still works, the package falls back at import time
    ext_modules = []

setup(ext_modules=ext_modules)
