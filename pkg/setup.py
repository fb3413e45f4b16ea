"""Build script: compiles the optional consensus speedup kernel.

The package is pure Python by default; if Cython and a C compiler are
available the integer round kernel in ``zoomgrad/consensus/_speedups.pyx``
is compiled and picked up automatically at import time.  Installation
must succeed either way, so any failure here downgrades to a pure build.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/zoomgrad/consensus/_speedups.pyx"],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"speedup kernel skipped ({exc}); using pure-Python consensus loop")

setup(ext_modules=ext_modules)
