import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "oscbench._kernels",
                ["src/oscbench/_kernels.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )

# The compiled kernel is an optional fast path: oscbench falls back to the
# numpy implementation at import time if the extension is missing.
setup(ext_modules=ext_modules)
