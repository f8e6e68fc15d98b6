from setuptools import setup
from ksflow import __version__

with open("README.rst") as readme:
    long_description = readme.read()

setup(
    name="ksflow",
    version=__version__,
    description="Finite-rank Kohn-Sham half-density simulator and verification suites",
    long_description=long_description,
    author="The ksflow developers",
    license="MIT",
    keywords="kohn-sham density-functional split-step spectral scattering dispersive",
    install_requires=[
        "numpy>=1.24,<3.0",
        "scipy>=1.10,<2.0",
        "sympy>=1.2,<2.0",
    ],
    packages=["ksflow"],
    entry_points={"console_scripts": ["ksflow = ksflow.cli:main"]},
    zip_safe=False,
)
