"""Build script: the compiled kernel is optional.

If Cython or a C++ compiler is unavailable the package installs without it
and falls back to the pure-Python kernel at import time.
"""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext

ext_modules = []
if os.environ.get("LEXHMM_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        sys.stderr.write("Cython not found; building without the compiled kernel\n")
    else:
        ext_modules = cythonize(
            [Extension(
                "lexhmm._kernel",
                ["src/lexhmm/_kernel.pyx"],
                include_dirs=["src/lexhmm"],
                language="c++",
                # bit-identical arithmetic with the Python kernel: no FMA contraction, no fast-math
                extra_compile_args=["-O2", "-std=c++17", "-ffp-contract=off", "-fno-fast-math"],
            )],
            compiler_directives={"language_level": "3"},
        )


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as e:  # compiler missing or failing
            sys.stderr.write(f"compiled kernel not built ({e}); using the Python kernel\n")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as e:
            sys.stderr.write(f"compiled kernel not built ({e}); using the Python kernel\n")


setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
