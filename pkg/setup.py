from setuptools import Extension, setup

# The compiled kernels are optional: if the toolchain is unavailable the
# package installs anyway and falls back to the numpy implementations.
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "kgunlearn.kernels._core",
                ["src/kgunlearn/kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ]
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
