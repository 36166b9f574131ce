import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install, fallback kernels only
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("reeblab._kernels", ["src/reeblab/_kernels.pyx"],
                   include_dirs=[np.get_include()], extra_compile_args=["-O3"],
                   optional=True)],  # a failed compile leaves the numpy fallback
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
