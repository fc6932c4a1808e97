# Build with: python setup.py build_ext --inplace
# The compiled kernels are optional; the package falls back to the numpy
# implementations in lidarmocap._kernels.pykernels when the extension is
# missing.
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "lidarmocap._kernels._core",
                ["src/lidarmocap/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                # Keep floating point strictly unfused so the compiled
                # kernels stay bit-identical to the numpy fallback.
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
