#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Entropy and correlation features of 2D images
~~~~~~~~~~~~~~~~~~~~~
* Bidirectional permutation entropy along rows, columns, diagonals
  and anti-diagonals.
* Forward permutation entropy of overlapping patches.
* Pearson correlation of adjacent rows and of adjacent columns.

Images are 2D float arrays indexed [row, column].

Released under the Apache License 2.0
"""

from dataclasses import dataclass, field
import logging
from typing import List, Tuple

import numpy as np

from pefusion import err
from pefusion import ordinal
from pefusion import parameters
from pefusion.ordinal import OrdinalConfig


@dataclass(frozen=True)
class DirectionalConfig:
    """Diagonal offsets -K..K and the way the PE of a line and
       of its reversal are combined."""
    K: int = 10
    ordinal: OrdinalConfig = field(default_factory=OrdinalConfig)
    aggregate: str = 'geometric'

    def __post_init__(self) -> None:
        parameters.enforce_int_range('K', self.K, 0)
        parameters.enforce_choice('aggregate', self.aggregate,
                                  ('geometric', 'arithmetic'))

    @property
    def n_features(self) -> int:
        return 2 * self.K + 1

    def validate_for(self, shape: Tuple[int, int]) -> None:
        """Every included diagonal must be long enough for one
           ordinal pattern."""
        shortest = min(diagonal_lengths(shape, self.K))
        if shortest < self.ordinal.span:
            raise err.InvalidConfiguration(
                f"directional: K = {self.K} leaves diagonals of length " +
                f"{shortest} in a {shape[0]}x{shape[1]} image, but at " +
                f"least {self.ordinal.span} values are required.")


@dataclass(frozen=True)
class PatchConfig:
    "Patch size and stride in pixels."
    patch_h: int = 4
    patch_w: int = 4
    stride: int = 2
    bidirectional: bool = False

    def __post_init__(self) -> None:
        parameters.enforce_int_range('patch_h', self.patch_h, 1)
        parameters.enforce_int_range('patch_w', self.patch_w, 1)
        parameters.enforce_int_range('stride', self.stride, 1)
        parameters.enforce_boolean(self.bidirectional, 'bidirectional')

    def grid(self, shape: Tuple[int, int]) -> Tuple[int, int]:
        "Number of patches along each axis."
        return ((shape[0] - self.patch_h) // self.stride + 1,
                (shape[1] - self.patch_w) // self.stride + 1)

    def validate_for(self, shape: Tuple[int, int],
                     ordinal_config: ordinal.OrdinalConfig) -> None:
        if self.patch_h > shape[0] or self.patch_w > shape[1]:
            raise err.InvalidConfiguration(
                f"patch: {self.patch_h}x{self.patch_w} patches do not fit " +
                f"into a {shape[0]}x{shape[1]} image.")
        if self.patch_h * self.patch_w < ordinal_config.span:
            raise err.InvalidConfiguration(
                f"patch: {self.patch_h}x{self.patch_w} patches hold fewer " +
                f"than the {ordinal_config.span} values one pattern needs.")


def check_image(image: np.ndarray) -> np.ndarray:
    "Return the image as a 2D float64 array or raise ValueError."
    pixels = np.asarray(image, dtype=np.float64)
    if pixels.ndim != 2:
        raise ValueError(f"Expected a 2D image, got shape {pixels.shape}.")
    if pixels.shape[0] < 1 or pixels.shape[1] < 1:
        raise ValueError('The image is empty.')
    if not np.all(np.isfinite(pixels)):
        raise ValueError('The image contains non-finite intensities.')
    return pixels


def row_pe(image: np.ndarray, config: ordinal.OrdinalConfig) -> np.ndarray:
    "One bidirectional PE value per row, in row order."
    pixels = check_image(image)
    return ordinal.bidirectional_from_sequences(pixels, config)


def col_pe(image: np.ndarray, config: ordinal.OrdinalConfig) -> np.ndarray:
    "One bidirectional PE value per column, in column order."
    pixels = check_image(image)
    return ordinal.bidirectional_from_sequences(pixels.T, config)


def diagonal_lengths(shape: Tuple[int, int], K: int) -> List[int]:
    "Length of the diagonals with offsets -K..K."
    blank = np.empty(shape, dtype=np.int8)
    return [np.diagonal(blank, offset=k).shape[0] for k in range(-K, K + 1)]


def diag_pe(image: np.ndarray, config: DirectionalConfig) -> np.ndarray:
    """Bidirectional PE of the top-left to bottom-right diagonals.
       Offset k > 0 lies right of (above) the main diagonal, k < 0 below
       it. Values are ordered by ascending offset -K..K."""
    pixels = check_image(image)
    config.validate_for(pixels.shape)
    values = np.empty(config.n_features, dtype=np.float64)
    for position, k in enumerate(range(-config.K, config.K + 1)):
        line = np.diagonal(pixels, offset=k)
        values[position] = ordinal.bidirectional_from_sequences(
            line[np.newaxis, :], config.ordinal, config.aggregate)[0]
    return values


def antidiag_pe(image: np.ndarray, config: DirectionalConfig) -> np.ndarray:
    """Bidirectional PE of the lines running from top-right to
       bottom-left, i.e. the diagonals of the mirrored image."""
    pixels = check_image(image)
    return diag_pe(np.fliplr(pixels), config)


def patch_pe(image: np.ndarray,
             config: PatchConfig,
             ordinal_config: ordinal.OrdinalConfig) -> np.ndarray:
    """PE of overlapping patches. Patches are enumerated row-major over
       their top-left anchors and flattened row-major."""
    pixels = check_image(image)
    config.validate_for(pixels.shape, ordinal_config)
    windows = np.lib.stride_tricks.sliding_window_view(
        pixels, (config.patch_h, config.patch_w))
    windows = windows[::config.stride, ::config.stride]
    sequences = windows.reshape(-1, config.patch_h * config.patch_w)
    logging.debug('%s patches of %sx%s pixels', sequences.shape[0],
                  config.patch_h, config.patch_w)
    if config.bidirectional:
        return ordinal.bidirectional_from_sequences(sequences, ordinal_config)
    return ordinal.normalized_entropy_from_counts(
        ordinal.pattern_counts(sequences, ordinal_config))


def _pearson_pairs(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Row-wise Pearson coefficient of two equally shaped 2D arrays.
       Rows without any variation yield 0."""
    first_centered = first - first.mean(axis=1, keepdims=True)
    second_centered = second - second.mean(axis=1, keepdims=True)
    numerator = (first_centered * second_centered).sum(axis=1)
    denominator = np.sqrt((first_centered ** 2).sum(axis=1) *
                          (second_centered ** 2).sum(axis=1))
    flat = (np.ptp(first, axis=1) == 0) | (np.ptp(second, axis=1) == 0)
    safe = np.where(flat | (denominator == 0), 1.0, denominator)
    coefficients = np.where(flat | (denominator == 0), 0.0,
                            numerator / safe)
    return np.clip(coefficients, -1.0, 1.0)


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    "Pearson correlation coefficient, 0 if either vector is constant."
    first = np.asarray(a, dtype=np.float64)
    second = np.asarray(b, dtype=np.float64)
    if first.ndim != 1 or first.shape != second.shape:
        raise err.DimensionMismatch(
            f"Vectors of shape {first.shape} and {second.shape} " +
            "cannot be correlated.")
    if first.shape[0] < 2:
        raise err.InsufficientLength(
            'Pearson correlation needs at least 2 values.')
    return float(_pearson_pairs(first[np.newaxis, :], second[np.newaxis, :])[0])


def adjacent_row_corr(image: np.ndarray) -> np.ndarray:
    "Correlation of row i with row i + 1 for i = 0..H-2."
    pixels = check_image(image)
    if pixels.shape[0] < 2 or pixels.shape[1] < 2:
        raise err.InsufficientLength(
            'Adjacent row correlation needs at least 2 rows and 2 columns.')
    return _pearson_pairs(pixels[:-1], pixels[1:])


def adjacent_col_corr(image: np.ndarray) -> np.ndarray:
    "Correlation of column j with column j + 1 for j = 0..W-2."
    pixels = check_image(image)
    if pixels.shape[0] < 2 or pixels.shape[1] < 2:
        raise err.InsufficientLength(
            'Adjacent column correlation needs at least 2 rows and 2 columns.')
    return _pearson_pairs(pixels.T[:-1], pixels.T[1:])
