#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
pefusion library
~~~~~~~~~~~~~~~~~~~~~
Permutation entropy, correlation, HOG and LBP features of images,
fused into one vector per image and classified with an RBF SVM.

Released under the Apache License 2.0
"""

from pefusion import _version
from pefusion import err
from pefusion import parameters
from pefusion import hashing
from pefusion import ordinal
from pefusion import imagefeat
from pefusion import descriptors
from pefusion import fusion
from pefusion import config
from pefusion import datasets
from pefusion import svm


NAME = "pefusion"
__version__ = _version.__version__
__author__ = "pefusion contributors"
