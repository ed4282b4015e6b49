import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# No -ffast-math / -march=native: the compiled kernels must reproduce the
# pure-Python fallback bit for bit.
extensions = [
    Extension(
        "assort_knap._ckernels",
        ["src/assort_knap/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O2", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
]

setup(
    ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}),
)
