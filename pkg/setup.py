import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# no floating-point contraction: the compiled kernel must round exactly like Python
ext = Extension("cutcell._kernel", ["src/cutcell/_kernel.pyx"], language="c++",
                include_dirs=[np.get_include()],
                extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math", "-std=c++17"])

setup(ext_modules=cythonize([ext], compiler_directives={"language_level": 3}))
