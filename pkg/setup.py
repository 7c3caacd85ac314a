import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = cythonize(
    Extension(
        "riffled._kernels",
        sources=["src/riffled/_kernels.pyx"],
        include_dirs=[np.get_include()],
    ),
    compiler_directives={"language_level": 3, "boundscheck": False, "wraparound": False},
)

setup(ext_modules=extensions)
