"""Build script: compiles the optional Cython matching kernel.

The package works without the extension (bibmap.kernel falls back to the
pure-Python implementation), so a failed or skipped Cython build still
yields a usable install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "bibmap._ckernel",
                ["src/bibmap/_ckernel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
