import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if cythonize is not None and os.environ.get("REVIEW_INSIGHT_NO_EXT") != "1":
    ext_modules = cythonize(
        [
            Extension(
                "review_insight.mglda._gibbs",
                ["src/review_insight/mglda/_gibbs.pyx"],
                include_dirs=[np.get_include()],
                # no fast-math / fp contraction: the numpy fallback must match bit for bit
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
