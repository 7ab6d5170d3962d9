import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [Extension(
            "hqplab._kernel.admm_cy",
            ["src/hqplab/_kernel/admm_cy.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=["-O3"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )],
        language_level=3,
    )
except ImportError:
    # pure-Python install still works; the fallback kernel is selected at import
    extensions = []

setup(ext_modules=extensions)
