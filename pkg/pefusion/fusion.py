#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Feature fusion
~~~~~~~~~~~~~~~~~~~~~
Concatenates all feature families of an image into one vector, in a
fixed order that is recorded in a FeatureManifest:

    row_pe, col_pe, diag_pe, antidiag_pe, patch_pe,
    row_corr, col_corr, hog, lbp

With the defaults a 28x28 grayscale image yields 28 + 28 + 21 + 21 +
169 + 27 + 27 + 441 + 18 = 780 features.

Also home of the standardizer and of the PEFM feature matrix file
format:

    b'PEFM' | u16 version | u64 rows | u64 cols     (little-endian)
    rows * cols float32, row-major                   (little-endian)
    u64 byte length | UTF-8 JSON (manifest, optional labels / split)

Released under the Apache License 2.0
"""

from concurrent.futures import ThreadPoolExecutor
import dataclasses
from dataclasses import dataclass, field
import functools
import json
import logging
import os
import pathlib
import struct
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from pefusion import descriptors
from pefusion import err
from pefusion import hashing
from pefusion import imagefeat
from pefusion import parameters
from pefusion.ordinal import OrdinalConfig

SEGMENT_ORDER = ('row_pe', 'col_pe', 'diag_pe', 'antidiag_pe', 'patch_pe',
                 'row_corr', 'col_corr', 'hog', 'lbp')

PEFM_MAGIC = b'PEFM'
PEFM_VERSION = 1
_PEFM_HEADER = struct.Struct('<4sHQQ')
_LENGTH_PREFIX = struct.Struct('<Q')

# ITU-R BT.601 luma weights
LUMINANCE_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class PipelineConfig:
    """Image geometry the pipeline is built for plus the settings of
       every feature family."""
    height: int = 28
    width: int = 28
    channels: int = 1
    ordinal: OrdinalConfig = field(default_factory=OrdinalConfig)
    directional: imagefeat.DirectionalConfig = field(
        default_factory=imagefeat.DirectionalConfig)
    patch: imagefeat.PatchConfig = field(default_factory=imagefeat.PatchConfig)
    hog: descriptors.HogConfig = field(default_factory=descriptors.HogConfig)
    lbp: descriptors.LbpConfig = field(default_factory=descriptors.LbpConfig)
    channel_mode: str = 'grayscale'

    def __post_init__(self) -> None:
        parameters.enforce_int_range('height', self.height, 1)
        parameters.enforce_int_range('width', self.width, 1)
        parameters.enforce_int_range('channels', self.channels, 1)
        parameters.enforce_choice('channel_mode', self.channel_mode,
                                  ('grayscale', 'per-channel'))
        if self.directional.ordinal != self.ordinal:
            raise err.ContradictoryParameters(
                'The directional features must use the same ordinal ' +
                'configuration as the rest of the pipeline.')
        if self.channel_mode == 'grayscale' and self.channels not in (1, 3):
            raise err.ContradictoryParameters(
                'Grayscale mode can only convert 1 or 3 channel images.')
        self.validate_geometry()

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def validate_geometry(self) -> None:
        "Check that every sub-configuration works for the declared shape."
        shape = self.shape
        if self.width < self.ordinal.span or self.height < self.ordinal.span:
            raise err.InvalidConfiguration(
                f"ordinal: rows and columns of a {self.height}x{self.width} " +
                f"image are shorter than the {self.ordinal.span} values " +
                "one pattern needs.")
        if min(shape) < 3:
            raise err.InvalidConfiguration(
                'hog: gradients need images of at least 3x3 pixels.')
        self.directional.validate_for(shape)
        self.patch.validate_for(shape, self.ordinal)
        self.hog.validate_for(shape)
        self.lbp.validate_for(shape)

    def channel_names(self) -> List[str]:
        "Suffixes of the channel blocks (empty for grayscale)."
        if self.channel_mode == 'grayscale':
            return ['']
        if self.channels == 3:
            return ['R', 'G', 'B']
        return [f"c{index}" for index in range(self.channels)]

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        return hashing.fingerprint(self.to_dict())


class Segment(NamedTuple):
    "A named, contiguous slice of the feature vector."
    name: str
    offset: int
    length: int


@dataclass(frozen=True)
class FeatureManifest:
    "Layout of a feature vector and the fingerprint of its configuration."
    segments: Tuple[Segment, ...]
    total_dim: int
    fingerprint: str

    def __post_init__(self) -> None:
        position = 0
        for segment in self.segments:
            if segment.offset != position or segment.length < 0:
                raise err.FileFormatError(
                    f"Segment {segment.name} is not contiguous with " +
                    "the previous one.")
            position += segment.length
        if position != self.total_dim:
            raise err.FileFormatError(
                f"Segments cover {position} features, but the manifest " +
                f"declares {self.total_dim}.")

    @classmethod
    def from_lengths(cls,
                     lengths: Iterable[Tuple[str, int]],
                     fingerprint: str) -> 'FeatureManifest':
        segments = []
        offset = 0
        for name, length in lengths:
            segments.append(Segment(name, offset, length))
            offset += length
        return cls(tuple(segments), offset, fingerprint)

    def names(self) -> List[str]:
        return [segment.name for segment in self.segments]

    def segment(self, name: str) -> Segment:
        for segment in self.segments:
            if segment.name == name:
                return segment
        raise KeyError(f"No segment named {name}")

    def to_dict(self) -> dict:
        return {'segments': [segment._asdict() for segment in self.segments],
                'total_dim': self.total_dim,
                'fingerprint': self.fingerprint}

    @classmethod
    def from_dict(cls, data: dict) -> 'FeatureManifest':
        try:
            segments = tuple(Segment(str(item['name']), int(item['offset']),
                                     int(item['length']))
                             for item in data['segments'])
            return cls(segments, int(data['total_dim']), str(data['fingerprint']))
        except (KeyError, TypeError, ValueError) as malformed:
            if isinstance(malformed, err.FileFormatError):
                raise
            raise err.FileFormatError(
                f"Malformed feature manifest: {malformed}") from malformed


def segment_lengths(config: PipelineConfig) -> List[Tuple[str, int]]:
    "Name and length of every segment, derived from the configuration."
    height, width = config.shape
    patches_y, patches_x = config.patch.grid(config.shape)
    per_channel = (
        ('row_pe', height),
        ('col_pe', width),
        ('diag_pe', config.directional.n_features),
        ('antidiag_pe', config.directional.n_features),
        ('patch_pe', patches_y * patches_x),
        ('row_corr', height - 1),
        ('col_corr', width - 1),
        ('hog', config.hog.n_features(config.shape)),
        ('lbp', config.lbp.n_bins))
    lengths = []
    for channel in config.channel_names():
        suffix = f"[{channel}]" if channel else ''
        lengths.extend((name + suffix, length) for name, length in per_channel)
    return lengths


@functools.lru_cache(maxsize=32)
def build_manifest(config: PipelineConfig) -> FeatureManifest:
    "Manifest of the vectors extract() produces for this configuration."
    return FeatureManifest.from_lengths(segment_lengths(config),
                                        config.fingerprint())


def _channel_planes(image: np.ndarray, config: PipelineConfig) -> List[np.ndarray]:
    pixels = np.asarray(image, dtype=np.float64)
    if pixels.ndim == 2:
        pixels = pixels[np.newaxis, :, :]
    if pixels.ndim != 3:
        raise err.GeometryMismatch(
            f"Expected a 2D image or a (channels, height, width) array, " +
            f"got shape {pixels.shape}.")
    if pixels.shape != (config.channels, config.height, config.width):
        raise err.GeometryMismatch(
            f"Image of shape {pixels.shape} does not match the declared " +
            f"geometry {(config.channels, config.height, config.width)}.")
    if config.channel_mode == 'per-channel':
        return [pixels[index] for index in range(pixels.shape[0])]
    if pixels.shape[0] == 3:
        weights = np.asarray(LUMINANCE_WEIGHTS)
        return [np.tensordot(weights, pixels, axes=1)]
    return [pixels[0]]


def _extract_plane(plane: np.ndarray, config: PipelineConfig) -> List[np.ndarray]:
    return [
        imagefeat.row_pe(plane, config.ordinal),
        imagefeat.col_pe(plane, config.ordinal),
        imagefeat.diag_pe(plane, config.directional),
        imagefeat.antidiag_pe(plane, config.directional),
        imagefeat.patch_pe(plane, config.patch, config.ordinal),
        imagefeat.adjacent_row_corr(plane),
        imagefeat.adjacent_col_corr(plane),
        descriptors.hog(plane, config.hog),
        descriptors.lbp_histogram(plane, config.lbp)]


def extract(image: np.ndarray,
            config: PipelineConfig) -> Tuple[np.ndarray, FeatureManifest]:
    """Fused feature vector of one image. A 2D array is a grayscale
       image, a 3D array is interpreted as (channels, height, width)."""
    manifest = build_manifest(config)
    parts: List[np.ndarray] = []
    for plane in _channel_planes(image, config):
        parts.extend(_extract_plane(imagefeat.check_image(plane), config))
    vector = np.concatenate(parts)
    if vector.shape[0] != manifest.total_dim:
        raise err.DimensionMismatch(
            f"Extracted {vector.shape[0]} features, the manifest expects " +
            f"{manifest.total_dim}.")
    return vector, manifest


def extract_batch(images: Iterable[np.ndarray],
                  config: PipelineConfig,
                  threads: int = 1) -> Tuple[np.ndarray, FeatureManifest]:
    """Feature matrix with one row per image, in input order.
       All images must share the declared geometry."""
    parameters.enforce_int_range('threads', threads, 1)
    manifest = build_manifest(config)
    batch = list(images)
    expected = {(config.height, config.width),
                (config.channels, config.height, config.width)}
    for index, image in enumerate(batch):
        if np.shape(image) not in expected:
            raise err.GeometryMismatch(
                f"Image {index} has shape {np.shape(image)}, expected " +
                f"{config.channels}x{config.height}x{config.width}.")
    matrix = np.zeros((len(batch), manifest.total_dim), dtype=np.float64)
    if not batch:
        return matrix, manifest

    def single(image: np.ndarray) -> np.ndarray:
        return extract(image, config)[0]

    with ThreadPoolExecutor(max_workers=threads) as executor:
        for row, vector in enumerate(executor.map(single, batch)):
            matrix[row] = vector
            if (row + 1) % 5000 == 0:
                logging.info('Extracted features of %s images.', row + 1)
    logging.info('Feature matrix of shape %s ready.', matrix.shape)
    return matrix, manifest


def pixel_features(images: Iterable[np.ndarray]) -> Tuple[np.ndarray, FeatureManifest]:
    """Raw intensities as features, the usual SVM baseline.
       Each image is flattened row-major (channel planes first)."""
    batch = [np.asarray(image, dtype=np.float64) for image in images]
    if not batch:
        raise ValueError('pixel_features needs at least one image.')
    shape = batch[0].shape
    for index, image in enumerate(batch):
        if image.shape != shape:
            raise err.GeometryMismatch(
                f"Image {index} has shape {image.shape}, expected {shape}.")
    matrix = np.stack([image.ravel() for image in batch])
    manifest = FeatureManifest.from_lengths(
        [('pixels', matrix.shape[1])],
        hashing.fingerprint({'features': 'pixels', 'shape': list(shape)}))
    return matrix, manifest


def select_segments(matrix: np.ndarray,
                    manifest: FeatureManifest,
                    names: Sequence[str]) -> Tuple[np.ndarray, FeatureManifest]:
    "Keep only the named segments, in the order of the manifest."
    unknown = set(names) - set(manifest.names())
    if unknown:
        raise KeyError(f"Unknown segments: {', '.join(sorted(unknown))}")
    kept = [segment for segment in manifest.segments if segment.name in names]
    columns = np.concatenate(
        [np.arange(segment.offset, segment.offset + segment.length)
         for segment in kept]) if kept else np.zeros(0, dtype=np.int64)
    selected = FeatureManifest.from_lengths(
        [(segment.name, segment.length) for segment in kept],
        hashing.fingerprint({'base': manifest.fingerprint,
                             'segments': [segment.name for segment in kept]}))
    return np.asarray(matrix)[:, columns], selected


# Standardization

@dataclass(frozen=True, eq=False)
class Standardizer:
    "Column means and population standard deviations of training data."
    means: np.ndarray
    stds: np.ndarray

    def to_dict(self) -> dict:
        return {'means': [float(value) for value in self.means],
                'stds': [float(value) for value in self.stds]}

    @classmethod
    def from_dict(cls, data: dict) -> 'Standardizer':
        return cls(np.asarray(data['means'], dtype=np.float64),
                   np.asarray(data['stds'], dtype=np.float64))


def fit_standardizer(matrix: np.ndarray) -> Standardizer:
    """Fit per-column statistics. Columns without variation get
       std = 1, so they become zeros after centering."""
    data = np.asarray(matrix, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 2:
        raise err.InsufficientLength(
            'A standardizer needs a 2D matrix with at least 2 rows.')
    means = data.mean(axis=0)
    stds = data.std(axis=0)
    constant = stds < 1e-12
    if constant.any():
        logging.warning('%s constant columns will be mapped to zero.',
                        int(constant.sum()))
    stds = np.where(constant, 1.0, stds)
    return Standardizer(means, stds)


def apply_standardizer(matrix: np.ndarray,
                       standardizer: Standardizer) -> np.ndarray:
    "Transform (x - mean) / std column-wise with fitted statistics."
    data = np.asarray(matrix, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != standardizer.means.shape[0]:
        raise err.DimensionMismatch(
            f"Matrix of shape {data.shape} does not match a standardizer " +
            f"fitted on {standardizer.means.shape[0]} columns.")
    return (data - standardizer.means) / standardizer.stds


# PEFM files

class FeatureFile(NamedTuple):
    "Content of a PEFM file."
    matrix: np.ndarray
    manifest: FeatureManifest
    labels: Optional[np.ndarray] = None
    split: Optional[str] = None
    dataset: Optional[str] = None


def atomic_write(path: Union[pathlib.Path, str], payload: bytes) -> None:
    target = pathlib.Path(path)
    partial = target.with_name(target.name + '.part')
    try:
        partial.write_bytes(payload)
        os.replace(partial, target)
    except OSError:
        logging.exception('Could not write %s', target)
        partial.unlink(missing_ok=True)
        raise


def write_feature_matrix(path: Union[pathlib.Path, str],
                         matrix: np.ndarray,
                         manifest: FeatureManifest,
                         labels: Optional[Sequence[int]] = None,
                         split: Optional[str] = None,
                         dataset: Optional[str] = None) -> None:
    "Write a PEFM file. The matrix is stored as little-endian float32."
    data = np.asarray(matrix)
    if data.ndim != 2 or data.shape[1] != manifest.total_dim:
        raise err.DimensionMismatch(
            f"Matrix of shape {data.shape} does not match a manifest " +
            f"with {manifest.total_dim} features.")
    trailer = manifest.to_dict()
    if labels is not None:
        if len(labels) != data.shape[0]:
            raise err.CountMismatch(
                f"{len(labels)} labels for {data.shape[0]} feature rows.")
        trailer['labels'] = [int(label) for label in labels]
    if split is not None:
        trailer['split'] = parameters.enforce_choice('split', split,
                                                     ('train', 'test'))
    if dataset is not None:
        trailer['dataset'] = dataset
    trailer_bytes = json.dumps(trailer, sort_keys=True).encode('utf-8')
    payload = b''.join([
        _PEFM_HEADER.pack(PEFM_MAGIC, PEFM_VERSION, data.shape[0], data.shape[1]),
        np.ascontiguousarray(data, dtype='<f4').tobytes(),
        _LENGTH_PREFIX.pack(len(trailer_bytes)),
        trailer_bytes])
    atomic_write(path, payload)
    logging.info('Wrote %sx%s feature matrix to %s',
                 data.shape[0], data.shape[1], path)


def read_feature_matrix(path: Union[pathlib.Path, str]) -> FeatureFile:
    "Read a PEFM file written by write_feature_matrix()."
    payload = pathlib.Path(path).read_bytes()
    if len(payload) < _PEFM_HEADER.size:
        raise err.FileFormatError(f"{path} is too short for a PEFM header.")
    magic, version, rows, cols = _PEFM_HEADER.unpack_from(payload)
    if magic != PEFM_MAGIC:
        raise err.FileFormatError(f"{path} is not a PEFM file.")
    if version != PEFM_VERSION:
        raise err.FileFormatError(
            f"{path} has unsupported PEFM version {version}.")
    data_end = _PEFM_HEADER.size + rows * cols * 4
    if data_end + _LENGTH_PREFIX.size > len(payload):
        raise err.FileFormatError(
            f"{path} is truncated: header declares {rows}x{cols} values.")
    (trailer_length,) = _LENGTH_PREFIX.unpack_from(payload, data_end)
    trailer_start = data_end + _LENGTH_PREFIX.size
    if trailer_start + trailer_length != len(payload):
        raise err.FileFormatError(
            f"{path}: manifest length does not match the file size.")
    try:
        trailer = json.loads(payload[trailer_start:].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as malformed:
        raise err.FileFormatError(
            f"{path}: manifest is not valid JSON.") from malformed
    if not isinstance(trailer, dict):
        raise err.FileFormatError(f"{path}: manifest is not a JSON object.")
    manifest = FeatureManifest.from_dict(trailer)
    if manifest.total_dim != cols:
        raise err.FileFormatError(
            f"{path}: manifest describes {manifest.total_dim} columns, " +
            f"the matrix has {cols}.")
    matrix = np.frombuffer(payload, dtype='<f4', count=rows * cols,
                           offset=_PEFM_HEADER.size).reshape(rows, cols)
    labels = trailer.get('labels')
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (rows,):
            raise err.FileFormatError(f"{path}: label count does not match.")
    return FeatureFile(matrix.astype(np.float32), manifest, labels,
                       trailer.get('split'), trailer.get('dataset'))
