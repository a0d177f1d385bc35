"""Build script: compiles the hot-loop extension when Cython and a C
compiler are available, otherwise installs the pure-Python package (the
runtime falls back to jumplab._fallback automatically).
"""

from setuptools import setup

ext_modules = []
try:
    from setuptools import Extension
    from Cython.Build import cythonize

    ext = Extension(
        "jumplab._core",
        ["src/jumplab/_core.pyx"],
        # -ffp-contract=off keeps FMA contraction from changing last-ulp
        # rounding; the fallback and the extension must produce identical
        # trajectories for identical seeds.
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    ext_modules = cythonize([ext], language_level="3")
except Exception as exc:  # pragma: no cover - build-environment dependent
    import sys

    print(f"jumplab: skipping compiled core ({exc}); "
          "pure-Python fallback will be used", file=sys.stderr)

setup(ext_modules=ext_modules)
