#!/usr/bin/env python3
# -*- coding: utf-8 -*-

import setuptools

from pefusion import _version

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="pefusion",
    version=f"{_version.__version__}",
    description="Permutation entropy feature fusion for image classification with SVMs",
    long_description=long_description,
    long_description_content_type="text/markdown",
    package_data={"pefusion": ["py.typed", "profiles/*.ini", "profiles/checksums.txt"]},
    packages=setuptools.find_packages(exclude=["examples", "examples.*"]),
    python_requires=">=3.8",
    install_requires=["numpy>=1.20", "scikit-image>=0.19"],
    entry_points={
        "console_scripts": ["pefusion=pefusion.cli:main"],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: OS Independent",
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Image Recognition",
        "Topic :: Scientific/Engineering :: Artificial Intelligence"
    ],
)
