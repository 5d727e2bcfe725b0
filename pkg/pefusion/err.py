#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
pefusion: Custom Exceptions

Every exception also derives from the builtin a caller would expect
(mostly ValueError), so generic handlers keep working.
"""


class PefusionException(Exception):
    "An exception specific to pefusion occured"
    def __init__(self, *args, **kwargs):  # type: ignore[no-untyped-def]
        Exception.__init__(self, *args, **kwargs)


class InvalidConfiguration(PefusionException, ValueError):
    """A configuration value is out of its allowed range or a
       configuration file contains unknown / missing keys."""


class ContradictoryParameters(PefusionException, ValueError):
    """Thrown if the user tries to use settings in a mutually exclusive way."""


class InsufficientLength(PefusionException, ValueError):
    """A sequence is too short for the embedding dimension and delay.
       The message names the required minimum length."""


class DimensionMismatch(PefusionException, ValueError):
    """Vectors or matrices do not have the expected dimensions."""


class OutOfDomain(PefusionException, ValueError):
    """A pixel position is too close to the border to be evaluated."""


class GeometryMismatch(PefusionException, ValueError):
    """An image does not fit the geometry a pipeline was configured for.
       The message names the failing sub-configuration."""


class DatasetFormatError(PefusionException, ValueError):
    """A dataset file does not follow its binary format."""


class BadMagic(DatasetFormatError):
    """The magic number of an IDX file is not the expected one."""


class TruncatedPayload(DatasetFormatError):
    """A dataset file is shorter than its header declares."""


class OversizedPayload(DatasetFormatError):
    """A dataset file contains more bytes than its header declares."""


class CountMismatch(DatasetFormatError):
    """Image and label files disagree on the number of items."""


class InvalidLabel(DatasetFormatError):
    """A label is outside the range of known classes."""


class InsufficientClassPopulation(PefusionException, ValueError):
    """A class has fewer members than a sampling or splitting
       procedure requires."""


class SingleClassInput(PefusionException, ValueError):
    """A binary classifier was given samples of one class only."""


class FileFormatError(PefusionException, ValueError):
    """A feature matrix (PEFM) or model (PESV) file is corrupt."""


class FingerprintMismatch(PefusionException, ValueError):
    """Features were built with a different pipeline configuration
       than the one a model was trained on."""


class SplitMismatch(PefusionException, ValueError):
    """A test split was provided where a training split is expected."""


class ChecksumMismatch(PefusionException, ValueError):
    """The checksum of a file does not match the expected value."""
