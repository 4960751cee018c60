import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

_random_lib = os.path.join(os.path.dirname(np.__file__), "random", "lib")

extensions = [
    Extension(
        "monifrac._kernels",
        ["src/monifrac/_kernels.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[_random_lib],
        libraries=["npyrandom", "m"],
        extra_compile_args=["-O3", "-fcx-limited-range"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
