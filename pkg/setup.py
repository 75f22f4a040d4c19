"""Builds the compiled stepper extension.

The package works without it: tumblekit._backend falls back to the
numpy stepper when the extension is absent or fails to build.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "tumblekit._stepper",
                ["src/tumblekit/_stepper.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
