"""Builds the optional native cores; the package works without them."""
import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("LOCKPERF_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension("lockperf._simcore", ["src/lockperf/_simcore.pyx"],
                      extra_compile_args=["-O2"]),
            Extension("lockperf._lockcore", ["src/lockperf/_lockcore.pyx"],
                      extra_compile_args=["-O2"]),
        ]
        ext_modules = cythonize(extensions, compiler_directives={"language_level": "3"})

setup(ext_modules=ext_modules)
