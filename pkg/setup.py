"""A setuptools based setup module.

See:
https://packaging.python.org/guides/distributing-packages-using-setuptools/
"""

from setuptools import setup, find_packages
import pathlib

here = pathlib.Path(__file__).parent.resolve()

long_description = (here / "README.md").read_text(encoding="utf-8")

# load elements of version.py
exec(open(here / 'src' / 'advtrain' / 'version.py').read())

setup(
    name="advtrain",
    version=__version__,
    description="Adversarial perturbations and learning with a strong "
                "adversary for small feedforward classifiers",
    long_description=long_description,
    long_description_content_type="text/markdown",
    author="advtrain developers",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "License :: OSI Approved :: MIT License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3 :: Only",
    ],
    keywords=[
        "adversarial-examples", "robust-training", "mnist", "min-max",
    ],
    package_dir={"": "src"},
    packages=find_packages(where="src"),
    python_requires=">=3.8, <4",
    # numerics follow numpy/scipy, matrix diffs use deepdiff
    install_requires=[
        "numpy>=1.21,<3",
        "scipy>=1.7,<2",
        "deepdiff>=6.3.0,<9",
        "tqdm>=4.60,<5",
    ],
    extras_require={
        "dev": [
            "tox>=3.25.1,<4"
        ],
        "test": [
            "flake8>=5.0.0,<6",
            "coverage>=6.4.2,<7",
            "nose2>=0.12.0,<1",
            "yamllint>=1.29,<2",
            "mock>=4.0.3,<5",
        ],
    },
    entry_points={
        "console_scripts": [
            "advtrain=advtrain.main:main",
        ],
    },
)
