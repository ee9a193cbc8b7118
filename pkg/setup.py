"""Build script.

The compiled kernel extension is optional: if Cython or a C compiler is
missing the install proceeds with the pure-Python kernel backend, which
is selected automatically at import time.  Set FLSIM_NO_EXT=1 to skip
the extension build explicitly.
"""

import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext


def _extensions():
    if os.environ.get("FLSIM_NO_EXT") == "1":
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        sys.stderr.write("flsim: Cython not available, building without compiled kernels\n")
        return []
    return cythonize(
        ["src/flsim/kernels/_core.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )


class optional_build_ext(build_ext):
    """Swallow compiler failures so the pure backend remains usable."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001 - any build failure is non-fatal
            sys.stderr.write(f"flsim: compiled kernels skipped ({exc})\n")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            sys.stderr.write(f"flsim: building {ext.name} failed ({exc}), using pure backend\n")


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
