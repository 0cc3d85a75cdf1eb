import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# -ffp-contract=off: the compiled kernels must be bit-identical to the
# pure-Python fallback, so FMA contraction has to stay off.
ext_modules = []
if cythonize is not None and os.environ.get("CFMIMO_PURE_PYTHON") != "1":
    ext_modules = cythonize(
        [
            Extension(
                "cfmimo._kernels._core",
                sources=["src/cfmimo/_kernels/_core.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
