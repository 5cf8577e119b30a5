from Cython.Build import cythonize
from setuptools import Extension, setup

ext = Extension(
    "swapsim._dock_core",
    ["src/swapsim/_dock_core.pyx"],
    # No fast-math, no FMA contraction and no sin/cos fusion: the compiled
    # kernel must return the same floats as the pure-Python one.
    extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math", "-fno-builtin-sin", "-fno-builtin-cos"],
    optional=True,  # without a compiler the package falls back to _dock_py
)

setup(ext_modules=cythonize([ext], compiler_directives={"language_level": "3"}))
