import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# Compiled core for the KDE inner loop. If the extension is missing at
# runtime the package falls back to the pure-numpy backend (see
# levelset_lab/kde.py), so a failed build only costs speed.
extensions = [
    Extension(
        "levelset_lab._kdecore",
        ["src/levelset_lab/_kdecore.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
