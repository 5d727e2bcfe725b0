#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Benchmark datasets
~~~~~~~~~~~~~~~~~~~~~
Readers for the two distribution formats of the benchmarks:

IDX (MNIST family: Fashion-MNIST, KMNIST, EMNIST), big-endian,
optionally gzip-compressed:
    images: u32 0x00000803 | u32 count | u32 rows | u32 cols | u8 pixels
    labels: u32 0x00000801 | u32 count | u8 labels

CIFAR-10 binary batches: records of 3073 bytes,
    u8 label | 1024 red | 1024 green | 1024 blue  (32x32, row-major)

Pixel bytes are kept as uint8. Intensities in [0, 1] are derived on
access by dividing by 255.

Released under the Apache License 2.0
"""

from dataclasses import dataclass, field
import gzip
import logging
import pathlib
import struct
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from pefusion import err
from pefusion import parameters

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
GZIP_MAGIC = b'\x1f\x8b'

CIFAR_SIDE = 32
CIFAR_RECORD_BYTES = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE
CIFAR_CLASSES = 10

PathLike = Union[pathlib.Path, str]


@dataclass(frozen=True, eq=False)
class LabeledImageSet:
    """Images of identical geometry with one class index each.
       pixels has shape (n, H, W) or (n, C, H, W)."""
    pixels: np.ndarray
    labels: np.ndarray
    class_names: Optional[Tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.pixels.dtype != np.uint8 or self.pixels.ndim not in (3, 4):
            raise ValueError('pixels must be a uint8 array of shape ' +
                             '(n, H, W) or (n, C, H, W).')
        if self.labels.ndim != 1 or self.labels.shape[0] != self.pixels.shape[0]:
            raise err.CountMismatch(
                f"{self.labels.shape[0]} labels for " +
                f"{self.pixels.shape[0]} images.")
        if self.labels.size and self.labels.min() < 0:
            raise err.InvalidLabel('Labels must not be negative.')
        if (self.class_names is not None and self.labels.size and
                self.labels.max() >= len(self.class_names)):
            raise err.InvalidLabel(
                f"Label {int(self.labels.max())} exceeds the " +
                f"{len(self.class_names)} known classes.")
        self.pixels.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def image_shape(self) -> Tuple[int, ...]:
        return tuple(self.pixels.shape[1:])

    @property
    def n_classes(self) -> int:
        if self.class_names is not None:
            return len(self.class_names)
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def image(self, index: int) -> np.ndarray:
        "Intensities of one image in [0, 1] as float64."
        return self.pixels[index] / 255.0

    @property
    def images(self) -> np.ndarray:
        "Intensities of all images in [0, 1] as float64."
        return self.pixels / 255.0

    def iter_images(self) -> Iterator[np.ndarray]:
        for index in range(len(self)):
            yield self.image(index)

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def take(self, indices: Sequence[int]) -> 'LabeledImageSet':
        selection = np.asarray(indices, dtype=np.int64)
        return LabeledImageSet(self.pixels[selection].copy(),
                               self.labels[selection].copy(),
                               self.class_names)


@dataclass(frozen=True)
class DatasetProfile:
    "How to read one benchmark and what it is documented to contain."
    name: str
    loader: str
    n_classes: int
    train_size: int
    test_size: int
    transpose: bool = False
    label_offset: int = 0
    class_names: Tuple[str, ...] = field(default_factory=tuple)


PROFILES: Dict[str, DatasetProfile] = {
    'fashion-mnist': DatasetProfile(
        'fashion-mnist', 'idx', 10, 60000, 10000,
        class_names=('T-shirt/top', 'Trouser', 'Pullover', 'Dress', 'Coat',
                     'Sandal', 'Shirt', 'Sneaker', 'Bag', 'Ankle boot')),
    'kmnist': DatasetProfile(
        'kmnist', 'idx', 10, 60000, 10000,
        class_names=('o', 'ki', 'su', 'tsu', 'na', 'ha', 'ma', 'ya', 're', 'wo')),
    # EMNIST stores images transposed and numbers the letters 1..26
    'emnist-letters': DatasetProfile(
        'emnist-letters', 'idx', 26, 124800, 20800,
        transpose=True, label_offset=1,
        class_names=tuple(chr(code) for code in range(ord('a'), ord('z') + 1))),
    'cifar10': DatasetProfile(
        'cifar10', 'cifar10', 10, 50000, 10000,
        class_names=('airplane', 'automobile', 'bird', 'cat', 'deer',
                     'dog', 'frog', 'horse', 'ship', 'truck')),
}


def get_profile(name: str) -> DatasetProfile:
    try:
        return PROFILES[name]
    except KeyError:
        raise err.InvalidConfiguration(
            f"Unknown dataset profile '{name}'. Known profiles: " +
            f"{', '.join(sorted(PROFILES))}") from None


def _parse_idx_header(header: bytes, path: PathLike, magic: int,
                      n_dims: int) -> Tuple[int, ...]:
    if len(header) < 4 * (1 + n_dims):
        raise err.TruncatedPayload(
            f"{path} is too short for an IDX header.")
    found_magic, *dims = struct.unpack(f">{1 + n_dims}I", header)
    if found_magic != magic:
        raise err.BadMagic(
            f"{path}: magic number 0x{found_magic:08x}, " +
            f"expected 0x{magic:08x}.")
    return tuple(dims)


def _read_idx(path: PathLike, magic: int,
              n_dims: int) -> Tuple[Tuple[int, ...], bytes]:
    """Read header and payload of a plain or gzip-compressed IDX file.
       At most one byte beyond the declared payload is read."""
    header_size = 4 * (1 + n_dims)
    try:
        with open(path, 'rb') as raw:
            compressed = raw.read(2) == GZIP_MAGIC
            raw.seek(0)
            stream = gzip.GzipFile(fileobj=raw) if compressed else raw
            try:
                dims = _parse_idx_header(stream.read(header_size), path,
                                         magic, n_dims)
                expected = int(np.prod(dims, dtype=np.int64))
                payload = stream.read(expected + 1)
            except (OSError, EOFError) as broken:
                raise err.TruncatedPayload(
                    f"{path}: damaged gzip stream.") from broken
    except (FileNotFoundError, PermissionError):
        logging.exception('Cannot read dataset file %s', path)
        raise
    if len(payload) < expected:
        raise err.TruncatedPayload(
            f"{path}: header declares {expected} payload bytes, " +
            f"file has {len(payload)}.")
    if len(payload) > expected:
        raise err.OversizedPayload(
            f"{path}: data beyond the declared size of {expected} bytes.")
    return dims, payload


def load_idx(images_path: PathLike,
             labels_path: PathLike,
             transpose: bool = False,
             label_offset: int = 0,
             class_names: Optional[Sequence[str]] = None) -> LabeledImageSet:
    """Read a pair of IDX image and label files.
       transpose swaps rows and columns of every image (EMNIST)."""
    (count, rows, cols), image_bytes = _read_idx(
        images_path, IDX_IMAGES_MAGIC, 3)
    (label_count,), label_bytes = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if count != label_count:
        raise err.CountMismatch(
            f"{images_path} holds {count} images, but {labels_path} " +
            f"holds {label_count} labels.")
    pixels = np.frombuffer(image_bytes, dtype=np.uint8).reshape(
        count, rows, cols)
    if transpose:
        pixels = pixels.transpose(0, 2, 1)
    labels = np.frombuffer(label_bytes, dtype=np.uint8).astype(np.int64)
    labels = labels - label_offset
    if labels.size and labels.min() < 0:
        raise err.InvalidLabel(
            f"{labels_path}: label below the offset {label_offset}.")
    dataset = LabeledImageSet(np.ascontiguousarray(pixels), labels,
                              tuple(class_names) if class_names else None)
    logging.info('Loaded %s images of %sx%s from %s',
                 count, rows, cols, images_path)
    return dataset


def write_idx(images_path: PathLike,
              labels_path: PathLike,
              dataset: LabeledImageSet,
              compress: bool = False) -> None:
    "Write a grayscale image set as IDX image and label files."
    if dataset.pixels.ndim != 3:
        raise ValueError('IDX files hold single-channel images only.')
    if dataset.labels.size and dataset.labels.max() > 255:
        raise err.InvalidLabel('IDX labels must fit into one byte.')
    count, rows, cols = dataset.pixels.shape
    image_payload = (struct.pack('>4I', IDX_IMAGES_MAGIC, count, rows, cols) +
                     dataset.pixels.tobytes())
    label_payload = (struct.pack('>2I', IDX_LABELS_MAGIC, count) +
                     dataset.labels.astype(np.uint8).tobytes())
    if compress:
        image_payload = gzip.compress(image_payload, mtime=0)
        label_payload = gzip.compress(label_payload, mtime=0)
    pathlib.Path(images_path).write_bytes(image_payload)
    pathlib.Path(labels_path).write_bytes(label_payload)


def load_cifar10(batch_paths: Sequence[PathLike],
                 class_names: Optional[Sequence[str]] = None) -> LabeledImageSet:
    "Read and concatenate CIFAR-10 binary batch files."
    if not batch_paths:
        raise ValueError('No CIFAR-10 batch files given.')
    all_pixels: List[np.ndarray] = []
    all_labels: List[np.ndarray] = []
    for path in batch_paths:
        try:
            payload = pathlib.Path(path).read_bytes()
        except (FileNotFoundError, PermissionError):
            logging.exception('Cannot read CIFAR-10 batch %s', path)
            raise
        if not payload or len(payload) % CIFAR_RECORD_BYTES:
            raise err.TruncatedPayload(
                f"{path}: size {len(payload)} is not a positive multiple " +
                f"of {CIFAR_RECORD_BYTES} bytes.")
        records = np.frombuffer(payload, dtype=np.uint8).reshape(
            -1, CIFAR_RECORD_BYTES)
        labels = records[:, 0].astype(np.int64)
        if labels.max() >= CIFAR_CLASSES:
            raise err.InvalidLabel(
                f"{path}: label {int(labels.max())} outside 0..9.")
        all_pixels.append(records[:, 1:].reshape(-1, 3, CIFAR_SIDE, CIFAR_SIDE))
        all_labels.append(labels)
        logging.info('Loaded %s CIFAR-10 records from %s', records.shape[0], path)
    return LabeledImageSet(np.concatenate(all_pixels), np.concatenate(all_labels),
                           tuple(class_names) if class_names else None)


def load_profile(profile: Union[str, DatasetProfile],
                 images_path: Optional[PathLike] = None,
                 labels_path: Optional[PathLike] = None,
                 batch_paths: Optional[Sequence[PathLike]] = None) -> LabeledImageSet:
    "Load a benchmark with the conventions of its profile."
    if isinstance(profile, str):
        profile = get_profile(profile)
    if profile.loader == 'cifar10':
        if not batch_paths:
            raise err.ContradictoryParameters(
                f"Profile {profile.name} is read from batch files.")
        return load_cifar10(batch_paths, profile.class_names or None)
    if images_path is None or labels_path is None:
        raise err.ContradictoryParameters(
            f"Profile {profile.name} needs an image and a label file.")
    return load_idx(images_path, labels_path, profile.transpose,
                    profile.label_offset, profile.class_names or None)


def subsample(dataset: LabeledImageSet,
              n_per_class: int,
              seed: int) -> LabeledImageSet:
    """Draw n_per_class items of every class present, without
       replacement. The result keeps the original order."""
    parameters.enforce_int_range('n_per_class', n_per_class, 1)
    rng = np.random.default_rng(seed)
    chosen: List[np.ndarray] = []
    for label in np.unique(dataset.labels):
        members = np.flatnonzero(dataset.labels == label)
        if members.shape[0] < n_per_class:
            name = (dataset.class_names[label]
                    if dataset.class_names else str(label))
            raise err.InsufficientClassPopulation(
                f"Class {label} ({name}) has {members.shape[0]} members, " +
                f"{n_per_class} requested.")
        chosen.append(rng.choice(members, size=n_per_class, replace=False))
    indices = np.sort(np.concatenate(chosen)) if chosen else np.zeros(0, np.int64)
    logging.info('Subsampled %s of %s items (seed %s).',
                 indices.shape[0], len(dataset), seed)
    return dataset.take(indices)
