import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

ext = Pybind11Extension(
    "czsl._czsl",
    sorted(glob.glob("src/*.cpp")) + ["python/czsl_module.cpp"],
    include_dirs=["include", "vendor"],
    cxx_std=20,
)

setup(
    ext_modules=[ext],
    cmdclass={"build_ext": build_ext},
    packages=["czsl"],
    package_dir={"czsl": "python/czsl"},
)
