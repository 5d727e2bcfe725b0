#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Classical image descriptors
~~~~~~~~~~~~~~~~~~~~~
* Histogram of oriented gradients (HOG): unsigned orientations,
  magnitude weighted votes, L2 normalized blocks.
* Local binary patterns (LBP) from scikit-image: circular neighborhood
  with bilinear interpolation, uniform-pattern histogram with P + 2 bins.

Both expect intensities scaled to [0, 1] and compute in float64.
The defaults reproduce 441 HOG and 18 LBP features on 28x28 images.

Released under the Apache License 2.0
"""

from dataclasses import dataclass
import functools
import logging
from typing import Tuple
import warnings

import numpy as np
from skimage.feature import local_binary_pattern

from pefusion import err
from pefusion import parameters
from pefusion.imagefeat import check_image

MAX_LBP_POINTS = 24


@dataclass(frozen=True)
class HogConfig:
    """Cell size in pixels, orientation bins over [0, 180) degrees,
       block side in cells and the epsilon of the block norm."""
    cell_h: int = 4
    cell_w: int = 4
    n_bins: int = 9
    block_cells: int = 1
    norm_epsilon: float = 1e-5
    soft_binning: bool = False

    def __post_init__(self) -> None:
        parameters.enforce_int_range('cell_h', self.cell_h, 1)
        parameters.enforce_int_range('cell_w', self.cell_w, 1)
        parameters.enforce_int_range('n_bins', self.n_bins, 2)
        parameters.enforce_int_range('block_cells', self.block_cells, 1)
        parameters.enforce_positive('norm_epsilon', self.norm_epsilon)
        parameters.enforce_boolean(self.soft_binning, 'soft_binning')

    def cells(self, shape: Tuple[int, int]) -> Tuple[int, int]:
        return shape[0] // self.cell_h, shape[1] // self.cell_w

    def n_features(self, shape: Tuple[int, int]) -> int:
        cells_y, cells_x = self.cells(shape)
        blocks = ((cells_y - self.block_cells + 1) *
                  (cells_x - self.block_cells + 1))
        return blocks * self.block_cells ** 2 * self.n_bins

    def validate_for(self, shape: Tuple[int, int]) -> None:
        if shape[0] % self.cell_h or shape[1] % self.cell_w:
            raise err.GeometryMismatch(
                f"hog: a {shape[0]}x{shape[1]} image is not divisible into " +
                f"{self.cell_h}x{self.cell_w} cells. Crop or pad the " +
                "images explicitly.")
        cells_y, cells_x = self.cells(shape)
        if self.block_cells > min(cells_y, cells_x):
            raise err.GeometryMismatch(
                f"hog: blocks of {self.block_cells} cells do not fit into " +
                f"a grid of {cells_y}x{cells_x} cells.")


@dataclass(frozen=True)
class LbpConfig:
    "Number of circular neighbors P and radius R in pixels."
    P: int = 16
    R: int = 2
    mode: str = 'uniform'

    def __post_init__(self) -> None:
        parameters.enforce_int_range('P', self.P, 4, MAX_LBP_POINTS)
        parameters.enforce_int_range('R', self.R, 1)
        parameters.enforce_choice('mode', self.mode, ('uniform',))

    @property
    def n_bins(self) -> int:
        return self.P + 2

    def validate_for(self, shape: Tuple[int, int]) -> None:
        if min(shape) <= 2 * self.R:
            raise err.GeometryMismatch(
                f"lbp: a {shape[0]}x{shape[1]} image has no pixels at " +
                f"least R = {self.R} away from every border.")


# HOG

def gradients(image: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Central differences along x (columns) and y (rows).
       The image is padded by replicating its edges, so every
       pixel gets a gradient."""
    pixels = check_image(image)
    if pixels.shape[0] < 3 or pixels.shape[1] < 3:
        raise err.InsufficientLength(
            'Gradients need an image of at least 3x3 pixels.')
    padded = np.pad(pixels, 1, mode='edge')
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    return gx, gy


def cell_histograms(image: np.ndarray, config: HogConfig) -> np.ndarray:
    """Orientation histograms of every cell before normalization,
       shape (cells_y, cells_x, n_bins). Each pixel votes with its
       full gradient magnitude."""
    pixels = check_image(image)
    config.validate_for(pixels.shape)
    gx, gy = gradients(pixels)
    magnitude = np.hypot(gx, gy)
    orientation = np.mod(np.degrees(np.arctan2(gy, gx)), 180.0)
    bin_width = 180.0 / config.n_bins

    cells_y, cells_x = config.cells(pixels.shape)
    rows, cols = np.indices(pixels.shape)
    cell_index = (rows // config.cell_h) * cells_x + cols // config.cell_w

    if config.soft_binning:
        position = orientation / bin_width - 0.5
        lower = np.floor(position)
        upper_share = position - lower
        lower_bin = lower.astype(np.int64) % config.n_bins
        upper_bin = (lower_bin + 1) % config.n_bins
        flat = np.concatenate([(cell_index * config.n_bins + lower_bin).ravel(),
                               (cell_index * config.n_bins + upper_bin).ravel()])
        weights = np.concatenate([(magnitude * (1.0 - upper_share)).ravel(),
                                  (magnitude * upper_share).ravel()])
    else:
        # hard assignment to the bin containing the orientation
        bins = np.floor(orientation / bin_width).astype(np.int64) % config.n_bins
        flat = (cell_index * config.n_bins + bins).ravel()
        weights = magnitude.ravel()

    histogram = np.bincount(flat, weights=weights,
                            minlength=cells_y * cells_x * config.n_bins)
    return histogram.reshape(cells_y, cells_x, config.n_bins)


def hog(image: np.ndarray, config: HogConfig) -> np.ndarray:
    """HOG feature vector. Blocks of block_cells x block_cells cells
       (stride one cell) are normalized by v / sqrt(|v|^2 + eps^2).
       Blocks are emitted row-major, cells row-major within a block
       and bins innermost."""
    histograms = cell_histograms(image, config)
    size = config.block_cells
    blocks = np.lib.stride_tricks.sliding_window_view(
        histograms, (size, size), axis=(0, 1))
    # (blocks_y, blocks_x, n_bins, size, size) -> bins innermost
    blocks = blocks.transpose(0, 1, 3, 4, 2).reshape(
        blocks.shape[0], blocks.shape[1], -1)
    norms = np.sqrt((blocks ** 2).sum(axis=-1, keepdims=True) +
                    config.norm_epsilon ** 2)
    return (blocks / norms).ravel()


# LBP

def _local_binary_pattern(pixels: np.ndarray, config: LbpConfig,
                          method: str) -> np.ndarray:
    """Code map over the whole image. Angle 0 points along +x, angles
       grow counter-clockwise (towards smaller row indices)."""
    with warnings.catch_warnings():
        # intensities are floats in [0, 1] throughout the pipeline
        warnings.filterwarnings('ignore', message='Applying `local_binary_pattern`',
                                category=UserWarning)
        codes = local_binary_pattern(pixels, config.P, config.R, method=method)
    return codes.astype(np.int64)


def lbp_code(image: np.ndarray, x: int, y: int, config: LbpConfig) -> int:
    "LBP code of the pixel in column x and row y."
    pixels = check_image(image)
    height, width = pixels.shape
    if not (config.R <= x < width - config.R and
            config.R <= y < height - config.R):
        raise err.OutOfDomain(
            f"Pixel (x={x}, y={y}) is closer than R = {config.R} " +
            f"to the border of a {height}x{width} image.")
    return int(_local_binary_pattern(pixels, config, 'default')[y, x])


def lbp_codes(image: np.ndarray, config: LbpConfig) -> np.ndarray:
    "Code map of all interior pixels (borders of width R excluded)."
    pixels = check_image(image)
    config.validate_for(pixels.shape)
    R = config.R
    return _local_binary_pattern(pixels, config, 'default')[R:-R, R:-R]


def is_uniform(code: int, points: int) -> bool:
    "True if the circular bit string has at most two 0/1 transitions."
    bits = [(code >> p) & 1 for p in range(points)]
    transitions = sum(bits[p] != bits[p - 1] for p in range(points))
    return transitions <= 2


@functools.lru_cache(maxsize=8)
def uniform_lookup(points: int) -> np.ndarray:
    """Histogram bin of every code: the number of set bits for
       uniform codes, points + 1 for all others."""
    codes = np.arange(2 ** points, dtype=np.int64)
    bits = (codes[:, np.newaxis] >> np.arange(points)) & 1
    transitions = (bits != np.roll(bits, 1, axis=1)).sum(axis=1)
    table = np.where(transitions <= 2, bits.sum(axis=1), points + 1)
    logging.debug('%s of %s codes are uniform for P = %s',
                  int((transitions <= 2).sum()), codes.shape[0], points)
    table.setflags(write=False)
    return table


def lbp_histogram(image: np.ndarray, config: LbpConfig) -> np.ndarray:
    "Uniform-pattern histogram over the interior pixels, summing to 1."
    pixels = check_image(image)
    config.validate_for(pixels.shape)
    R = config.R
    bins = _local_binary_pattern(pixels, config, config.mode)[R:-R, R:-R]
    counts = np.bincount(bins.ravel(), minlength=config.n_bins).astype(np.float64)
    return counts / counts.sum()
