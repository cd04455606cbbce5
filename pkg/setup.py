"""Build the optional compiled kernels.

If Cython or a C compiler is missing the package still installs and falls
back to the numpy/pure-Python kernels at import time.
"""
import os

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            self.warn(f"compiled kernels not built ({exc}); using fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            self.warn(f"failed to build {ext.name} ({exc}); using fallback")


def extensions():
    if os.environ.get("SUCSIM_NO_EXT"):
        return []
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    from setuptools import Extension

    ext = Extension(
        "sucsim._ckernels",
        ["src/sucsim/_ckernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    try:
        return cythonize([ext], compiler_directives={"language_level": "3"})
    except Exception as exc:  # noqa: BLE001
        print(f"cythonize failed ({exc}); using fallback kernels")
        return []


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
