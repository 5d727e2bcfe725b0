#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Automatic Tests for pefusion

To run these tests with coverage:
coverage run --source pefusion -m pytest tests.py
To generate a report afterwards.
coverage html

Tests that need the real Fashion-MNIST files are skipped unless the
environment variable PEFUSION_FASHION_MNIST_DIR points to a directory
with the four original (gzipped) IDX files.
~~~~~~~~~~~~~~~~~~~~~
Released under the Apache License 2.0
"""

# flake8: noqa

from fractions import Fraction
import gzip
import json
import math
import os
import pathlib
import struct
from unittest.mock import patch

from hypothesis import given
from hypothesis import settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
import numpy as np
import pytest

import pefusion
from pefusion import cli
from pefusion import config
from pefusion import datasets
from pefusion import descriptors
from pefusion import err
from pefusion import fusion
from pefusion import hashing
from pefusion import imagefeat
from pefusion import ordinal
from pefusion import parameters
from pefusion import svm

D3 = ordinal.OrdinalConfig(3, 1)
LOG2_6 = math.log2(6)


# Helpers

def blobs(seed=0, per_class=10):
    "Three well separated Gaussian blobs (centers 10 standard deviations apart)."
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [0.0, 10.0]])
    X = np.concatenate([center + rng.standard_normal((per_class, 2))
                        for center in centers])
    y = np.repeat(np.arange(3), per_class)
    return X, y


def full_alpha(model, n):
    "Dual variables of all training samples of a binary model."
    alpha = np.zeros(n)
    alpha[model.support_indices] = np.abs(model.dual_coefs)
    return alpha


def projected_gradient_dual(X, y, C, gamma, iterations=3000):
    """Independent oracle for the SVM dual: accelerated projected
       gradient ascent. The projection onto the box and the hyperplane
       y'a = 0 is found by bisection on the multiplier."""
    K = svm.kernel_matrix(X, X, svm.KernelParams(gamma))
    Q = np.outer(y, y) * K
    step = 1.0 / np.linalg.eigvalsh(Q).max()

    def project(values):
        low, high = -1e3, 1e3
        for _ in range(70):
            middle = (low + high) / 2
            if np.dot(y, np.clip(values - middle * y, 0, C)) > 0:
                low = middle
            else:
                high = middle
        return np.clip(values - (low + high) / 2 * y, 0, C)

    alpha = np.zeros(len(y))
    momentum = alpha.copy()
    t = 1.0
    for _ in range(iterations):
        updated = project(momentum + step * (1 - Q @ momentum))
        t_next = (1 + math.sqrt(1 + 4 * t * t)) / 2
        momentum = updated + (t - 1) / t_next * (updated - alpha)
        alpha, t = updated, t_next
    return svm.dual_objective(alpha, y, K)


def stripes(n_per_class, seed=0, side=28):
    "Horizontal stripes (class 0) and vertical stripes (class 1) with noise."
    rng = np.random.default_rng(seed)
    pattern = (np.arange(side) // 2 % 2 * 200).astype(np.int64)
    horizontal = np.repeat(pattern[:, np.newaxis], side, axis=1)
    images = []
    for label in (0, 1):
        base = horizontal if label == 0 else horizontal.T
        for _ in range(n_per_class):
            noise = rng.integers(0, 40, size=(side, side))
            images.append(np.clip(base + noise, 0, 255).astype(np.uint8))
    labels = np.repeat(np.arange(2), n_per_class).astype(np.int64)
    return datasets.LabeledImageSet(np.stack(images), labels)


@pytest.fixture
def idx_fixture(tmp_path):
    images = tmp_path / 'train-images-idx3-ubyte'
    labels = tmp_path / 'train-labels-idx1-ubyte'
    datasets.write_idx(images, labels, stripes(10))
    return images, labels


# parameters

def test_validate_dict_keys():
    assert parameters.validate_dict_keys({'a': 1}, {'a', 'b'}, {'a'}, 'section [X]') is True
    with pytest.raises(err.InvalidConfiguration) as excinfo:
        parameters.validate_dict_keys({'a': 1, 'c': 2}, {'a', 'b'}, dict_name='section [X]')
    assert "'c'" in str(excinfo.value) and 'section [X]' in str(excinfo.value)
    with pytest.raises(err.InvalidConfiguration):
        parameters.validate_dict_keys({'a': 1}, {'a', 'b'}, {'b'})
    # necessary keys must be allowed:
    with pytest.raises(err.ContradictoryParameters):
        parameters.validate_dict_keys({'a': 1}, {'a'}, {'b'})
    with pytest.raises(AttributeError):
        parameters.validate_dict_keys('not a dict', {'a'})


def test_enforce_int_range():
    assert parameters.enforce_int_range('d', 3, 2, 10) == 3
    with pytest.raises(TypeError):
        parameters.enforce_int_range('d', True, 0)
    with pytest.raises(TypeError):
        parameters.enforce_int_range('d', 3.0, 0)
    with pytest.raises(err.InvalidConfiguration):
        parameters.enforce_int_range('d', 1, 2, 10)
    with pytest.raises(err.InvalidConfiguration):
        parameters.enforce_int_range('d', 11, 2, 10)
    with pytest.raises(err.ContradictoryParameters):
        parameters.enforce_int_range('d', 5, 10, 2)


@pytest.mark.parametrize("value", [0, -1, float('inf'), float('nan')])
def test_enforce_positive_rejects(value):
    with pytest.raises(err.InvalidConfiguration):
        parameters.enforce_positive('gamma', value)


def test_enforce_choice_and_boolean():
    assert parameters.enforce_choice('mode', 'uniform', ('uniform',)) == 'uniform'
    with pytest.raises(err.InvalidConfiguration):
        parameters.enforce_choice('mode', 'rotation', ('uniform',))
    parameters.enforce_boolean(False, 'flag')
    with pytest.raises(ValueError):
        parameters.enforce_boolean('True', 'flag')


# hashing

TESTFILE_SHA256 = '2c26b46b68ffc68ff99b453c1d30413413422d706483bfa0f98a5e886266e7ae'


def test_calculate_file_hash(tmp_path):
    testfile = tmp_path / 'testfile'
    testfile.write_bytes(b'foo')
    assert hashing.calculate_file_hash(testfile) == TESTFILE_SHA256
    assert hashing.calculate_file_hash(testfile, TESTFILE_SHA256.upper()) == TESTFILE_SHA256
    with pytest.raises(err.ChecksumMismatch):
        hashing.calculate_file_hash(testfile, '0' * 64)
    with pytest.raises(FileNotFoundError):
        hashing.calculate_file_hash(tmp_path / 'missing')


def test_calculate_file_hash_mocked_permission():
    with patch('builtins.open', side_effect=PermissionError):
        with pytest.raises(PermissionError):
            hashing.calculate_file_hash('testfile')


def test_checksum_registry(tmp_path):
    testfile = tmp_path / 'testfile'
    testfile.write_bytes(b'foo')
    other = tmp_path / 'other'
    other.write_bytes(b'bar')
    registry_file = tmp_path / 'checksums.txt'
    registry_file.write_text(f"# comment\n\ntestfile {TESTFILE_SHA256}\nother {'1' * 64}\n")
    registry = hashing.load_checksum_registry(registry_file)
    assert registry == {'testfile': TESTFILE_SHA256, 'other': '1' * 64}
    assert hashing.verify_against_registry(testfile, registry) is True
    with pytest.raises(err.ChecksumMismatch):
        hashing.verify_against_registry(other, registry)
    assert hashing.verify_against_registry(registry_file, registry) is False
    registry_file.write_text("testfile\n")
    with pytest.raises(err.InvalidConfiguration) as excinfo:
        hashing.load_checksum_registry(registry_file)
    assert 'line 1' in str(excinfo.value)


def test_bundled_registry_is_valid():
    hashing.load_checksum_registry(cli.BUNDLED_REGISTRY)


def test_fingerprint_is_canonical():
    assert hashing.fingerprint({'a': 1, 'b': [1, 2]}) == hashing.fingerprint({'b': [1, 2], 'a': 1})
    assert hashing.fingerprint({'a': 1}) != hashing.fingerprint({'a': 2})


# ordinal

@pytest.mark.parametrize("window,rank,pattern", [
    ((4, 7, 9), 0, (1, 2, 3)),
    ((9, 10, 6), 4, (3, 1, 2)),
    # ties keep their order of appearance:
    ((5, 5, 5), 0, (1, 2, 3)),
])
def test_ordinal_pattern(window, rank, pattern):
    assert ordinal.ordinal_pattern(window, D3) == rank
    assert ordinal.pattern_tuple(rank, 3) == pattern


def test_ordinal_pattern_wrong_length():
    with pytest.raises(err.DimensionMismatch):
        ordinal.ordinal_pattern((1, 2), D3)
    with pytest.raises(ValueError):
        ordinal.pattern_tuple(6, 3)


def test_ordinal_config_limits():
    assert D3.span == 3 and D3.n_patterns == 6
    assert ordinal.OrdinalConfig(4, 2).span == 7
    with pytest.raises(err.InvalidConfiguration):
        ordinal.OrdinalConfig(1, 1)
    with pytest.raises(err.InvalidConfiguration):
        ordinal.OrdinalConfig(11, 1)
    with pytest.raises(err.InvalidConfiguration):
        ordinal.OrdinalConfig(3, 0)


@pytest.mark.parametrize("series,config,expected", [
    ((4, 7, 9, 10, 6), D3, {(1, 2, 3): 2, (3, 1, 2): 1}),
    (tuple(range(10)), D3, {(1, 2, 3): 8}),
    ((1, 2, 1, 2, 1, 2), ordinal.OrdinalConfig(2, 1), {(1, 2): 3, (2, 1): 2}),
])
def test_pattern_distribution(series, config, expected):
    distribution = ordinal.pattern_distribution(series, config)
    assert distribution.as_tuples() == expected
    assert distribution.total_windows == sum(expected.values())
    assert sum(distribution.probabilities().values()) == Fraction(1)


def test_pattern_distribution_with_delay():
    # windows (0, 2, 4) and (1, 3, 5):
    distribution = ordinal.pattern_distribution((1, 9, 2, 8, 3, 7), ordinal.OrdinalConfig(3, 2))
    assert distribution.total_windows == 2
    assert distribution.as_tuples() == {(1, 2, 3): 1, (3, 2, 1): 1}


def test_insufficient_length():
    with pytest.raises(err.InsufficientLength) as excinfo:
        ordinal.pattern_distribution((1, 2, 3, 4), ordinal.OrdinalConfig(3, 2))
    assert '5' in str(excinfo.value)
    with pytest.raises(err.InsufficientLength):
        ordinal.permutation_entropy((1, 2), D3)


def test_permutation_entropy_worked_example():
    value = ordinal.permutation_entropy((4, 7, 9, 10, 6), D3)
    assert value.raw_bits == pytest.approx(0.9183, abs=1e-4)
    assert value.normalized == pytest.approx(0.3553, abs=1e-4)
    assert value.normalized == pytest.approx(value.raw_bits / LOG2_6)


@pytest.mark.parametrize("series", [(3, 3, 3, 3, 3), tuple(range(12)), tuple(range(12, 0, -1))])
def test_permutation_entropy_single_pattern(series):
    value = ordinal.permutation_entropy(series, D3)
    assert value.raw_bits == 0.0
    assert value.normalized == 0.0


def test_pattern_counts_run_lengths():
    counts = ordinal.pattern_counts(np.array([[4, 7, 9, 10, 6], [1, 2, 3, 4, 5]]), D3)
    assert counts.ranks.shape == counts.counts.shape == (2, 3)
    assert counts.row(0) == {0: 2, 4: 1}
    assert counts.row(1) == {0: 3}
    assert counts.counts.sum(axis=1).tolist() == [3, 3]


def test_pattern_counts_large_dimension():
    config = ordinal.OrdinalConfig(10, 1)
    counts = ordinal.pattern_counts(np.arange(40.0).reshape(2, 20), config)
    assert counts.counts.shape == (2, 11)
    assert counts.row(1) == {0: 11}
    # 169 patches of 16 values hold 7 windows each
    rng = np.random.default_rng(3)
    values = imagefeat.patch_pe(rng.random((28, 28)), imagefeat.PatchConfig(), config)
    assert values.shape == (169,)
    assert np.all(values <= math.log2(7) / math.log2(math.factorial(10)) + 1e-12)


@pytest.mark.parametrize("d", [3, 4])
def test_uniform_noise_has_maximal_entropy(d):
    rng = np.random.default_rng(d)
    value = ordinal.permutation_entropy(rng.random(10_000), ordinal.OrdinalConfig(d, 1))
    assert value.normalized > 0.99


def test_shannon_entropy_base_invariance():
    probabilities = [Fraction(2, 3), Fraction(1, 3)]
    assert ordinal.shannon_entropy(probabilities) == pytest.approx(0.918296, abs=1e-6)
    normalized_bits = ordinal.shannon_entropy(probabilities, 2) / math.log(6, 2)
    normalized_nats = ordinal.shannon_entropy(probabilities, math.e) / math.log(6)
    assert normalized_bits == pytest.approx(normalized_nats)


def test_bidirectional_pe():
    assert ordinal.bidirectional_pe([7] * 8, D3) == 0.0
    series = (0, 0, 1, 0, 0, 2)
    forward = ordinal.pattern_distribution(series, D3)
    backward = ordinal.pattern_distribution(series[::-1], D3)
    # stable tie-breaking depends on the direction:
    assert forward.counts == {0: 2, 1: 1, 3: 1}
    assert backward.counts == {0: 1, 1: 1, 3: 2}
    assert ordinal.bidirectional_pe(series, D3) == pytest.approx(1.5 / LOG2_6)


def test_bidirectional_aggregates():
    rows = np.array([[0, 0, 1, 0, 0, 2], [1, 2, 3, 2, 1, 0]], dtype=float)
    geometric = ordinal.bidirectional_from_sequences(rows, D3, 'geometric')
    arithmetic = ordinal.bidirectional_from_sequences(rows, D3, 'arithmetic')
    assert np.all(geometric <= arithmetic + 1e-15)
    with pytest.raises(err.InvalidConfiguration):
        ordinal.bidirectional_from_sequences(rows, D3, 'harmonic')


@settings(max_examples=200, deadline=None)
@given(series=st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=60),
       d=st.integers(2, 5), tau=st.integers(1, 3))
def test_hypothesis_pe_bounds(series, d, tau):
    config = ordinal.OrdinalConfig(d, tau)
    if len(series) < config.span:
        with pytest.raises(err.InsufficientLength):
            ordinal.permutation_entropy(series, config)
        return
    value = ordinal.permutation_entropy(series, config)
    assert 0.0 <= value.normalized <= 1.0
    assert 0.0 <= value.raw_bits <= math.log2(config.n_patterns) + 1e-12
    assert 0.0 <= ordinal.bidirectional_pe(series, config) <= 1.0


@settings(max_examples=200, deadline=None)
@given(series=st.lists(st.integers(-1000, 1000), min_size=4, max_size=40, unique=True))
def test_hypothesis_pe_tie_free_invariants(series):
    transformed = [value ** 3 + 5 * value for value in series]
    assert ordinal.permutation_entropy(transformed, D3) == ordinal.permutation_entropy(series, D3)
    forward = ordinal.permutation_entropy(series, D3).normalized
    assert ordinal.permutation_entropy(series[::-1], D3).normalized == pytest.approx(forward, abs=1e-12)
    assert ordinal.bidirectional_pe(series, D3) == pytest.approx(forward, abs=1e-12)


# imagefeat

def toy_image():
    return np.array([[1, 5, 2, 8, 3, 9],
                     [4, 4, 6, 1, 7, 2],
                     [9, 3, 8, 2, 6, 5],
                     [2, 7, 1, 9, 4, 3],
                     [6, 1, 5, 3, 8, 7],
                     [3, 8, 4, 6, 2, 1]], dtype=float)


def test_row_and_col_pe():
    image = toy_image()
    rows = imagefeat.row_pe(image, D3)
    for index, row in enumerate(image):
        expected = math.sqrt(ordinal.permutation_entropy(row, D3).normalized *
                             ordinal.permutation_entropy(row[::-1], D3).normalized)
        assert rows[index] == pytest.approx(expected)
    assert np.array_equal(imagefeat.col_pe(image, D3), imagefeat.row_pe(image.T, D3))
    constant_rows = np.repeat(np.arange(6.0)[:, np.newaxis], 6, axis=1)
    assert np.array_equal(imagefeat.row_pe(constant_rows, D3), np.zeros(6))


def test_diagonals():
    config = imagefeat.DirectionalConfig(K=2, ordinal=D3)
    assert imagefeat.diagonal_lengths((6, 6), 2) == [4, 5, 6, 5, 4]
    image = toy_image()
    values = imagefeat.diag_pe(image, config)
    assert values.shape == (5,)
    main = np.array([image[i, i] for i in range(6)])
    assert values[2] == pytest.approx(ordinal.bidirectional_pe(main, D3))
    assert np.array_equal(imagefeat.antidiag_pe(image, config),
                          imagefeat.diag_pe(np.fliplr(image), config))
    # transposing maps offset k to -k:
    assert np.allclose(imagefeat.diag_pe(image.T, config), values[::-1])
    assert np.array_equal(imagefeat.antidiag_pe(np.ones((6, 6)), config), np.zeros(5))


def test_directional_config_too_large():
    with pytest.raises(err.InvalidConfiguration) as excinfo:
        imagefeat.DirectionalConfig(K=26).validate_for((28, 28))
    assert 'directional' in str(excinfo.value)
    imagefeat.DirectionalConfig(K=25).validate_for((28, 28))


def test_directional_config_non_square():
    imagefeat.DirectionalConfig(K=3).validate_for((6, 12))
    with pytest.raises(err.InvalidConfiguration, match='length 2'):
        imagefeat.DirectionalConfig(K=4).validate_for((6, 12))


def test_default_ordinal_configs():
    assert imagefeat.DirectionalConfig().ordinal == ordinal.OrdinalConfig()
    pipeline = fusion.PipelineConfig()
    assert pipeline.ordinal == pipeline.directional.ordinal == D3


def test_entropy_features_ignore_monotone_transforms():
    rng = np.random.default_rng(12)
    image = rng.random((28, 28))
    brighter = np.exp(2.0 * image) - 1.0
    directional = imagefeat.DirectionalConfig()
    patch = imagefeat.PatchConfig()
    for transformed in (brighter, 3.0 * image + 0.5):
        assert np.array_equal(imagefeat.row_pe(transformed, D3), imagefeat.row_pe(image, D3))
        assert np.array_equal(imagefeat.col_pe(transformed, D3), imagefeat.col_pe(image, D3))
        assert np.array_equal(imagefeat.diag_pe(transformed, directional),
                              imagefeat.diag_pe(image, directional))
        assert np.array_equal(imagefeat.antidiag_pe(transformed, directional),
                              imagefeat.antidiag_pe(image, directional))
        assert np.array_equal(imagefeat.patch_pe(transformed, patch, D3),
                              imagefeat.patch_pe(image, patch, D3))


@pytest.mark.parametrize("side,expected", [(28, 169), (32, 225)])
def test_patch_count(side, expected):
    patch = imagefeat.PatchConfig()
    assert np.prod(patch.grid((side, side))) == expected
    values = imagefeat.patch_pe(np.zeros((side, side)), patch, D3)
    assert values.shape == (expected,)
    assert not values.any()


def test_patch_pe_is_forward_only():
    image = toy_image()
    patch = imagefeat.PatchConfig(patch_h=3, patch_w=3, stride=3)
    values = imagefeat.patch_pe(image, patch, D3)
    first = image[:3, :3].ravel()
    assert values[0] == pytest.approx(ordinal.permutation_entropy(first, D3).normalized)
    last = image[3:, 3:].ravel()
    assert values[-1] == pytest.approx(ordinal.permutation_entropy(last, D3).normalized)
    with pytest.raises(err.InvalidConfiguration):
        imagefeat.patch_pe(image, imagefeat.PatchConfig(7, 7, 1), D3)


def test_pearson():
    assert imagefeat.pearson([1, 2, 3], [1, 2, 4]) == pytest.approx(0.98198, abs=1e-5)
    assert imagefeat.pearson([1, 2, 5], [1, 2, 5]) == pytest.approx(1.0)
    assert imagefeat.pearson([1, 2, 5], [9, 8, 5]) == pytest.approx(-1.0)
    assert imagefeat.pearson([1, 1, 1], [1, 2, 3]) == 0.0
    with pytest.raises(err.DimensionMismatch):
        imagefeat.pearson([1, 2], [1, 2, 3])
    with pytest.raises(err.InsufficientLength):
        imagefeat.pearson([1], [1])


def test_adjacent_correlation():
    identical_rows = np.tile(np.arange(28.0), (28, 1))
    assert np.allclose(imagefeat.adjacent_row_corr(identical_rows), np.ones(27))
    assert np.array_equal(imagefeat.adjacent_row_corr(np.zeros((28, 28))), np.zeros(27))
    assert imagefeat.adjacent_col_corr(identical_rows.T).shape == (27,)
    with pytest.raises(err.InsufficientLength):
        imagefeat.adjacent_row_corr(np.zeros((1, 5)))


def test_check_image():
    with pytest.raises(ValueError):
        imagefeat.check_image(np.zeros((2, 2, 2)))
    with pytest.raises(ValueError):
        imagefeat.check_image(np.array([[1.0, np.nan]]))


@settings(max_examples=30, deadline=None)
@given(image=arrays(np.float64, (12, 12), elements=st.floats(0, 1)))
def test_hypothesis_image_feature_ranges(image):
    directional = imagefeat.DirectionalConfig(K=3, ordinal=D3)
    for values in (imagefeat.row_pe(image, D3), imagefeat.col_pe(image, D3),
                   imagefeat.diag_pe(image, directional),
                   imagefeat.antidiag_pe(image, directional),
                   imagefeat.patch_pe(image, imagefeat.PatchConfig(), D3)):
        assert np.all((values >= 0) & (values <= 1))
    for values in (imagefeat.adjacent_row_corr(image), imagefeat.adjacent_col_corr(image)):
        assert np.all((values >= -1) & (values <= 1))
    assert np.array_equal(imagefeat.antidiag_pe(image, directional),
                          imagefeat.diag_pe(np.fliplr(image), directional))


# descriptors

def test_gradients():
    gx, gy = descriptors.gradients(np.full((5, 5), 0.3))
    assert not gx.any() and not gy.any()
    ramp = np.tile(np.arange(6.0), (6, 1))
    gx, gy = descriptors.gradients(ramp)
    assert np.array_equal(gx[:, 1:-1], np.full((6, 4), 2.0))
    # replicated edges:
    assert np.array_equal(gx[:, 0], np.ones(6))
    assert not gy.any()
    spot = np.zeros((3, 3))
    spot[1, 1] = 1.0
    gx, gy = descriptors.gradients(spot)
    assert np.array_equal(gx, [[0, 0, 0], [1, 0, -1], [0, 0, 0]])
    assert np.array_equal(gy, [[0, 1, 0], [0, 0, 0], [0, -1, 0]])


def test_hog_dimensions_and_constant():
    assert descriptors.HogConfig().n_features((28, 28)) == 441
    assert descriptors.hog(np.zeros((28, 28)), descriptors.HogConfig()).shape == (441,)
    assert not descriptors.hog(np.full((28, 28), 0.5), descriptors.HogConfig()).any()
    with pytest.raises(err.GeometryMismatch) as excinfo:
        descriptors.hog(np.zeros((30, 30)), descriptors.HogConfig())
    assert 'hog' in str(excinfo.value)


def test_hog_vertical_edge():
    image = np.zeros((8, 8))
    image[:, 4:] = 1.0
    histograms = descriptors.cell_histograms(image, descriptors.HogConfig())
    assert np.all(histograms[..., 0] > 0)
    assert not histograms[..., 1:].any()


def test_hog_cells_follow_translation():
    rng = np.random.default_rng(4)
    wide = rng.random((28, 32))
    config = descriptors.HogConfig()
    # the left crop shows every pixel one cell further right
    left = descriptors.cell_histograms(wide[:, :28], config)
    right = descriptors.cell_histograms(wide[:, 4:], config)
    assert np.array_equal(left[:, 2:6], right[:, 1:5])
    assert not np.array_equal(left[:, 1:6], right[:, 0:5])


def test_hog_block_normalization():
    rng = np.random.default_rng(3)
    image = rng.random((16, 16))
    config = descriptors.HogConfig(block_cells=2)
    values = descriptors.hog(image, config)
    assert values.shape == (config.n_features((16, 16)),) == (3 * 3 * 4 * 9,)
    blocks = values.reshape(-1, 4 * 9)
    norms = np.linalg.norm(blocks, axis=1)
    assert np.all((norms >= 1 - 1e-6) & (norms <= 1))


@settings(max_examples=40, deadline=None)
@given(image=arrays(np.float64, (8, 12), elements=st.floats(0, 1)),
       soft=st.booleans())
def test_hypothesis_hog_mass_conservation(image, soft):
    config = descriptors.HogConfig(soft_binning=soft)
    histograms = descriptors.cell_histograms(image, config)
    gx, gy = descriptors.gradients(image)
    magnitude = np.hypot(gx, gy)
    per_cell = magnitude.reshape(2, 4, 3, 4).sum(axis=(1, 3))
    assert np.allclose(histograms.sum(axis=-1), per_cell)
    assert np.all(descriptors.hog(image, config) >= 0)


def test_lbp_codes():
    config = descriptors.LbpConfig()
    assert descriptors.lbp_code(np.full((9, 9), 0.25), 4, 4, config) == 2 ** 16 - 1
    peak = np.zeros((9, 9))
    peak[4, 4] = 1.0
    assert descriptors.lbp_code(peak, 4, 4, config) == 0
    with pytest.raises(err.OutOfDomain):
        descriptors.lbp_code(peak, 1, 4, config)


def test_lbp_code_with_interpolation():
    image = np.zeros((5, 5))
    image[1:4, 1:4] = [[1, 9, 1],
                       [9, 5, 1],
                       [1, 1, 9]]
    # neighbors 2 (above) and 4 (left) on the grid, 7 (lower right) interpolated
    code = descriptors.lbp_code(image, 2, 2, descriptors.LbpConfig(P=8, R=1))
    assert code == 2 ** 2 + 2 ** 4 + 2 ** 7


def test_lbp_codes_agree_with_single_code():
    rng = np.random.default_rng(5)
    image = rng.random((10, 10))
    config = descriptors.LbpConfig()
    codes = descriptors.lbp_codes(image, config)
    assert codes.shape == (6, 6)
    assert codes[1, 3] == descriptors.lbp_code(image, 5, 3, config)


def test_uniform_patterns():
    table = descriptors.uniform_lookup(16)
    assert int((table != 17).sum()) == 242
    assert descriptors.is_uniform(0b0000111100000000, 16)
    assert not descriptors.is_uniform(0b0101, 16)
    assert table[0b0000111100000000] == 4
    assert table[0b0101] == 17
    with pytest.raises(ValueError):
        table[0] = 1


def test_lbp_histogram():
    config = descriptors.LbpConfig()
    constant = descriptors.lbp_histogram(np.full((28, 28), 1.0), config)
    assert constant.shape == (18,)
    assert constant[16] == 1.0 and constant.sum() == 1.0
    with pytest.raises(err.GeometryMismatch):
        descriptors.lbp_histogram(np.zeros((4, 4)), config)


def test_lbp_histogram_matches_uniform_lookup():
    rng = np.random.default_rng(8)
    image = rng.random((28, 28))
    config = descriptors.LbpConfig()
    bins = descriptors.uniform_lookup(16)[descriptors.lbp_codes(image, config).ravel()]
    expected = np.bincount(bins, minlength=18) / bins.size
    assert np.array_equal(descriptors.lbp_histogram(image, config), expected)
    # byte-valued input as stored in the datasets
    levels = rng.integers(0, 256, (28, 28)) / 255.0
    bins = descriptors.uniform_lookup(16)[descriptors.lbp_codes(levels, config).ravel()]
    assert np.array_equal(descriptors.lbp_histogram(levels, config),
                          np.bincount(bins, minlength=18) / bins.size)


@settings(max_examples=30, deadline=None)
@given(image=arrays(np.float64, (10, 10), elements=st.floats(0, 1)))
def test_hypothesis_lbp_histogram(image):
    config = descriptors.LbpConfig()
    histogram = descriptors.lbp_histogram(image, config)
    assert histogram.shape == (18,)
    assert histogram.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(histogram >= 0)
    # with P = 4 and R = 1 all neighbors lie on the grid
    on_grid = descriptors.LbpConfig(P=4, R=1)
    levels = np.round(image * 64)
    assert np.array_equal(descriptors.lbp_histogram(levels * 2.0 + 1.0, on_grid),
                          descriptors.lbp_histogram(levels, on_grid))


# fusion

DEFAULT_SEGMENTS = [('row_pe', 28), ('col_pe', 28), ('diag_pe', 21), ('antidiag_pe', 21),
           ('patch_pe', 169), ('row_corr', 27), ('col_corr', 27), ('hog', 441),
           ('lbp', 18)]


def test_default_manifest():
    manifest = fusion.build_manifest(fusion.PipelineConfig())
    assert [(segment.name, segment.length) for segment in manifest.segments] == DEFAULT_SEGMENTS
    assert manifest.total_dim == 780
    assert manifest.fingerprint == fusion.PipelineConfig().fingerprint()


def test_extract_default_image():
    rng = np.random.default_rng(0)
    image = rng.random((28, 28))
    vector, manifest = fusion.extract(image, fusion.PipelineConfig())
    assert vector.shape == (780,)
    again, _ = fusion.extract(image.copy(), fusion.PipelineConfig())
    assert np.array_equal(vector, again)
    hog = manifest.segment('hog')
    assert np.array_equal(vector[hog.offset:hog.offset + hog.length],
                          descriptors.hog(image, descriptors.HogConfig()))


def test_extract_constant_image():
    vector, manifest = fusion.extract(np.full((28, 28), 0.5), fusion.PipelineConfig())
    lbp = manifest.segment('lbp')
    expected = np.zeros(780)
    expected[lbp.offset + 16] = 1.0
    assert np.array_equal(vector, expected)


def test_extract_rgb():
    cifar = config.profile_config('cifar10')
    assert fusion.build_manifest(cifar).total_dim == 2961
    rng = np.random.default_rng(1)
    channel = rng.random((32, 32))
    vector, manifest = fusion.extract(np.stack([channel] * 3), cifar)
    blocks = vector.reshape(3, 987)
    assert np.array_equal(blocks[0], blocks[1]) and np.array_equal(blocks[0], blocks[2])
    assert manifest.names()[:2] == ['row_pe[R]', 'col_pe[R]']
    gray = config.parse_pipeline_config(
        '[GEOMETRY]\nheight = 32\nwidth = 32\nchannels = 3\n')
    luminance, _ = fusion.extract(np.stack([channel] * 3), gray)
    plain, _ = fusion.extract(channel, config.parse_pipeline_config(
        '[GEOMETRY]\nheight = 32\nwidth = 32\n'))
    assert np.allclose(luminance, plain)


def test_pipeline_config_contradictions():
    with pytest.raises(err.ContradictoryParameters):
        fusion.PipelineConfig(ordinal=ordinal.OrdinalConfig(4, 1))
    with pytest.raises(err.ContradictoryParameters):
        fusion.PipelineConfig(channels=2)
    with pytest.raises(err.GeometryMismatch):
        fusion.PipelineConfig(height=30, width=30)


def test_extract_batch():
    config_ = fusion.PipelineConfig()
    empty, manifest = fusion.extract_batch([], config_)
    assert empty.shape == (0, 780) and manifest.total_dim == 780
    rng = np.random.default_rng(2)
    images = [rng.random((28, 28)) for _ in range(4)]
    matrix, _ = fusion.extract_batch(images, config_, threads=2)
    for row, image in zip(matrix, images):
        assert np.array_equal(row, fusion.extract(image, config_)[0])
    with pytest.raises(err.GeometryMismatch) as excinfo:
        fusion.extract_batch(images[:2] + [np.zeros((28, 27))], config_)
    assert 'Image 2' in str(excinfo.value)


@settings(max_examples=15, deadline=None)
@given(d=st.integers(2, 4), K=st.integers(0, 5), patch=st.integers(2, 5),
       stride=st.integers(1, 3), cell=st.sampled_from([2, 4, 8]),
       radius=st.integers(1, 3), seed=st.integers(0, 100))
def test_hypothesis_manifest_matches_vector(d, K, patch, stride, cell, radius, seed):
    ordinal_config = ordinal.OrdinalConfig(d, 1)
    pipeline = fusion.PipelineConfig(
        height=16, width=16, ordinal=ordinal_config,
        directional=imagefeat.DirectionalConfig(K=K, ordinal=ordinal_config),
        patch=imagefeat.PatchConfig(patch, patch, stride),
        hog=descriptors.HogConfig(cell, cell),
        lbp=descriptors.LbpConfig(P=8, R=radius))
    lengths = fusion.segment_lengths(pipeline)
    expected = (16 + 16 + 15 + 15 + 2 * (2 * K + 1) +
                np.prod(pipeline.patch.grid((16, 16))))
    assert sum(length for _, length in lengths[:7]) == expected
    vector, manifest = fusion.extract(np.random.default_rng(seed).random((16, 16)), pipeline)
    assert vector.shape == (manifest.total_dim,) == (sum(length for _, length in lengths),)


def test_pixel_features_and_selection():
    rng = np.random.default_rng(4)
    images = [rng.random((28, 28)) for _ in range(3)]
    pixels, manifest = fusion.pixel_features(images)
    assert pixels.shape == (3, 784) and manifest.names() == ['pixels']
    matrix, full = fusion.extract_batch(images, fusion.PipelineConfig())
    selected, sub = fusion.select_segments(matrix, full, ['lbp', 'hog'])
    assert sub.names() == ['hog', 'lbp'] and selected.shape == (3, 459)
    assert np.array_equal(selected[:, :441], matrix[:, full.segment('hog').offset:
                                                    full.segment('hog').offset + 441])
    with pytest.raises(KeyError):
        fusion.select_segments(matrix, full, ['nope'])


def test_standardizer():
    standardizer = fusion.fit_standardizer(np.array([[0.0], [2.0]]))
    assert standardizer.means.tolist() == [1.0] and standardizer.stds.tolist() == [1.0]
    assert fusion.apply_standardizer(np.array([[0.0], [2.0]]), standardizer).tolist() == [[-1.0], [1.0]]
    rng = np.random.default_rng(6)
    matrix = np.column_stack([rng.normal(5, 3, 50), np.full(50, 7.0)])
    standardized = fusion.apply_standardizer(matrix, fusion.fit_standardizer(matrix))
    assert np.all(np.abs(standardized.mean(axis=0)) < 1e-9)
    assert standardized[:, 0].std() == pytest.approx(1.0, abs=1e-9)
    assert not standardized[:, 1].any()
    with pytest.raises(err.DimensionMismatch):
        fusion.apply_standardizer(np.zeros((2, 3)), standardizer)
    with pytest.raises(err.InsufficientLength):
        fusion.fit_standardizer(np.zeros((1, 3)))


def test_feature_file_round_trip(tmp_path):
    rng = np.random.default_rng(7)
    matrix = rng.random((5, 780)).astype(np.float32)
    manifest = fusion.build_manifest(fusion.PipelineConfig())
    path = tmp_path / 'features.pefm'
    fusion.write_feature_matrix(path, matrix, manifest, [0, 1, 2, 1, 0], 'train', 'fashion-mnist')
    loaded = fusion.read_feature_matrix(path)
    assert np.array_equal(loaded.matrix, matrix)
    assert loaded.manifest == manifest
    assert loaded.labels.tolist() == [0, 1, 2, 1, 0]
    assert (loaded.split, loaded.dataset) == ('train', 'fashion-mnist')
    copy = tmp_path / 'copy.pefm'
    fusion.write_feature_matrix(copy, loaded.matrix, loaded.manifest, loaded.labels,
                                loaded.split, loaded.dataset)
    assert copy.read_bytes() == path.read_bytes()
    assert not list(tmp_path.glob('*.part'))


@pytest.mark.parametrize("corrupt", [
    lambda payload: b'XXXX' + payload[4:],
    lambda payload: payload[:4] + struct.pack('<H', 9) + payload[6:],
    lambda payload: payload[:100],
    lambda payload: payload[:10],
    lambda payload: payload + b'\x00',
    lambda payload: payload[:-2] + b'!!',
])
def test_corrupted_feature_file(tmp_path, corrupt):
    path = tmp_path / 'features.pefm'
    manifest = fusion.FeatureManifest.from_lengths([('a', 2), ('b', 1)], 'f' * 64)
    fusion.write_feature_matrix(path, np.ones((4, 3)), manifest)
    path.write_bytes(corrupt(path.read_bytes()))
    with pytest.raises(err.FileFormatError):
        fusion.read_feature_matrix(path)


# config

def test_config_round_trip():
    for pipeline in (fusion.PipelineConfig(), config.profile_config('cifar10'),
                     fusion.PipelineConfig(hog=descriptors.HogConfig(norm_epsilon=0.1,
                                                                    soft_binning=True))):
        assert config.parse_pipeline_config(config.pipeline_config_to_ini(pipeline)) == pipeline


def test_bundled_profiles():
    assert config.profile_names() == ['cifar10', 'emnist-letters', 'fashion-mnist', 'kmnist']
    for name in ('fashion-mnist', 'kmnist', 'emnist-letters'):
        assert config.profile_config(name) == fusion.PipelineConfig()
    with pytest.raises(err.InvalidConfiguration) as excinfo:
        config.profile_config('mnist')
    assert 'fashion-mnist' in str(excinfo.value)


@pytest.mark.parametrize("text,fragment", [
    ('[ORDINAL]\nd = 20\n', '[ORDINAL]'),
    ('[ORDINAL]\nd = three\n', '[ORDINAL] d'),
    ('[ORDINAL]\ndelay = 2\n', "'delay'"),
    ('[COLOR]\nmode = rgb\n', '[COLOR]'),
    ('[DIRECTIONAL]\nK = 27\n', 'directional'),
    ('no section\n', 'Malformed'),
])
def test_invalid_config(text, fragment):
    with pytest.raises(err.InvalidConfiguration) as excinfo:
        config.parse_pipeline_config(text)
    assert fragment in str(excinfo.value)


def test_partial_config(tmp_path):
    path = tmp_path / 'small.ini'
    path.write_text('[GEOMETRY]\nheight = 16\nwidth = 16\n\n[DIRECTIONAL]\nK = 4\n')
    pipeline = config.load_pipeline_config(path)
    assert pipeline.shape == (16, 16) and pipeline.directional.K == 4
    assert pipeline.lbp == descriptors.LbpConfig()
    with pytest.raises(FileNotFoundError):
        config.load_pipeline_config(tmp_path / 'missing.ini')


# datasets

def test_idx_fixture(tmp_path):
    images = tmp_path / 'images'
    labels = tmp_path / 'labels'
    images.write_bytes(struct.pack('>4I', 0x803, 2, 28, 28) + bytes(range(256)) * 6 + bytes(32))
    labels.write_bytes(struct.pack('>2I', 0x801, 2) + bytes([3, 7]))
    dataset = datasets.load_idx(images, labels)
    assert len(dataset) == 2 and dataset.image_shape == (28, 28)
    assert dataset.labels.tolist() == [3, 7]
    assert dataset.image(0)[0, 1] == 1 / 255
    assert dataset.images.min() >= 0 and dataset.images.max() <= 1
    labels.write_bytes(struct.pack('>2I', 0x801, 3) + bytes([3, 7, 1]))
    with pytest.raises(err.CountMismatch):
        datasets.load_idx(images, labels)


@pytest.mark.parametrize("compress", [False, True])
def test_idx_round_trip(tmp_path, compress):
    original = stripes(4)
    datasets.write_idx(tmp_path / 'i', tmp_path / 'l', original, compress)
    if compress:
        assert (tmp_path / 'i').read_bytes()[:2] == datasets.GZIP_MAGIC
    loaded = datasets.load_idx(tmp_path / 'i', tmp_path / 'l')
    assert np.array_equal(loaded.pixels, original.pixels)
    assert np.array_equal(loaded.labels, original.labels)


@pytest.mark.parametrize("corrupt,error", [
    (lambda payload: payload[:-1], err.TruncatedPayload),
    (lambda payload: payload[:10], err.TruncatedPayload),
    (lambda payload: payload + b'\x00', err.OversizedPayload),
    (lambda payload: struct.pack('>I', 0x802) + payload[4:], err.BadMagic),
    (lambda payload: gzip.compress(payload)[:30], err.TruncatedPayload),
])
def test_corrupted_idx(tmp_path, corrupt, error):
    datasets.write_idx(tmp_path / 'i', tmp_path / 'l', stripes(2))
    (tmp_path / 'i').write_bytes(corrupt((tmp_path / 'i').read_bytes()))
    with pytest.raises(error):
        datasets.load_idx(tmp_path / 'i', tmp_path / 'l')
    assert issubclass(error, err.DatasetFormatError)


def test_compressed_idx_is_read_up_to_declared_size(tmp_path):
    datasets.write_idx(tmp_path / 'i', tmp_path / 'l', stripes(2))
    payload = (tmp_path / 'i').read_bytes()
    declared = len(payload) - 16
    (tmp_path / 'i').write_bytes(gzip.compress(payload + bytes(20_000_000)))
    with patch.object(gzip.GzipFile, 'read', autospec=True,
                      side_effect=gzip.GzipFile.read) as read:
        with pytest.raises(err.OversizedPayload):
            datasets.load_idx(tmp_path / 'i', tmp_path / 'l')
    assert [call.args[1] for call in read.call_args_list] == [16, declared + 1]


def test_emnist_profile(tmp_path):
    pixels = np.arange(2 * 28 * 28, dtype=np.int64).reshape(2, 28, 28) % 251
    raw = datasets.LabeledImageSet(pixels.astype(np.uint8), np.array([1, 26]))
    datasets.write_idx(tmp_path / 'i', tmp_path / 'l', raw)
    letters = datasets.load_profile('emnist-letters', tmp_path / 'i', tmp_path / 'l')
    assert letters.labels.tolist() == [0, 25]
    assert letters.class_names[25] == 'z' and letters.n_classes == 26
    assert np.array_equal(letters.pixels[0], raw.pixels[0].T)
    with pytest.raises(err.InvalidConfiguration):
        datasets.get_profile('mnist')
    with pytest.raises(err.ContradictoryParameters):
        datasets.load_profile('kmnist')


def test_cifar10(tmp_path):
    record = bytes([4]) + bytes(index % 256 for index in range(3072))
    batch = tmp_path / 'data_batch_1.bin'
    batch.write_bytes(record)
    dataset = datasets.load_cifar10([batch])
    assert dataset.pixels.shape == (1, 3, 32, 32) and dataset.labels.tolist() == [4]
    assert dataset.pixels[0, :, 0, 0].tolist() == [record[1], record[1025], record[2049]]
    batch.write_bytes(record[:3072])
    with pytest.raises(err.TruncatedPayload):
        datasets.load_cifar10([batch])
    batch.write_bytes(bytes([10]) + record[1:])
    with pytest.raises(err.InvalidLabel):
        datasets.load_cifar10([batch])


def test_subsample():
    dataset = stripes(20)
    first = datasets.subsample(dataset, 5, seed=7)
    second = datasets.subsample(dataset, 5, seed=7)
    assert len(first) == 10 and first.class_counts().tolist() == [5, 5]
    assert np.array_equal(first.pixels, second.pixels)
    assert not np.array_equal(datasets.subsample(dataset, 5, seed=8).pixels, first.pixels)
    with pytest.raises(err.InsufficientClassPopulation):
        datasets.subsample(dataset, 21, seed=7)


def test_labeled_image_set_checks():
    with pytest.raises(err.CountMismatch):
        datasets.LabeledImageSet(np.zeros((2, 4, 4), np.uint8), np.zeros(3, np.int64))
    with pytest.raises(ValueError):
        datasets.LabeledImageSet(np.zeros((2, 4, 4)), np.zeros(2, np.int64))
    with pytest.raises(err.InvalidLabel):
        datasets.LabeledImageSet(np.zeros((1, 4, 4), np.uint8), np.array([2]), ('a', 'b'))


# svm

@pytest.mark.parametrize("x,y,gamma,expected", [
    ((1.0, 2.0), (1.0, 2.0), 0.5, 1.0),
    ((0.0,), (1.0,), math.log(2), 0.5),
    ((0.0, 0.0), (3.0, 4.0), 0.01, math.exp(-0.25)),
])
def test_rbf_kernel(x, y, gamma, expected):
    params = svm.KernelParams(gamma)
    assert svm.rbf_kernel(np.array(x), np.array(y), params) == pytest.approx(expected)
    assert svm.kernel_matrix(np.array([x]), np.array([y]), params)[0, 0] == pytest.approx(expected)


def test_kernel_matrix_is_psd():
    rng = np.random.default_rng(8)
    points = rng.standard_normal((50, 5))
    K = svm.kernel_matrix(points, points, svm.KernelParams(0.3))
    assert np.allclose(K, K.T)
    assert np.linalg.eigvalsh(K).min() >= -1e-8
    assert np.all((K > 0) & (K <= 1))


def test_kernel_cache_eviction():
    points = np.random.default_rng(9).random((10, 3))
    params = svm.KernelParams(1.0)
    cache = svm.KernelCache(points, params, max_bytes=2 * 10 * 8)
    assert np.allclose(cache.row(3), svm.kernel_matrix(points, points[3:4], params)[:, 0])
    cache.row(3)
    cache.row(4)
    cache.row(5)
    cache.row(3)
    assert (cache.hits, cache.misses) == (1, 4)


def test_two_point_problem():
    X = np.array([[0.0, -1.0], [0.0, 1.0]])
    y = np.array([-1, 1])
    model = svm.smo_train_binary(X, y, C=1000.0, params=svm.KernelParams(10.0))
    assert model.converged
    assert sorted(model.support_indices.tolist()) == [0, 1]
    assert np.array_equal(np.sign(svm.decision_function(model, X)), y)


XOR_X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
XOR_Y = np.array([-1, -1, 1, 1])


def test_xor():
    model = svm.smo_train_binary(XOR_X, XOR_Y, C=10.0, params=svm.KernelParams(1.0))
    assert np.array_equal(np.sign(svm.decision_function(model, XOR_X)), XOR_Y)
    alpha = full_alpha(model, 4)
    assert abs(np.dot(alpha, XOR_Y)) < 1e-6
    # by symmetry all four are support vectors with the same weight
    assert np.allclose(alpha, 2.5027, atol=1e-2)
    K = svm.kernel_matrix(XOR_X, XOR_X, svm.KernelParams(1.0))
    assert svm.dual_objective(alpha, XOR_Y, K) == pytest.approx(5.006, abs=1e-2)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_smo_matches_brute_force_dual(seed):
    if seed == 0:
        X, y, C, gamma = XOR_X, XOR_Y, 10.0, 1.0
    else:
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((6, 2))
        y = np.array([-1, 1, -1, 1, -1, 1])
        C, gamma = 1.0, 0.5
    model = svm.smo_train_binary(X, y, C, svm.KernelParams(gamma), tol=1e-6)
    K = svm.kernel_matrix(X, X, svm.KernelParams(gamma))
    smo_value = svm.dual_objective(full_alpha(model, len(y)), y, K)
    assert smo_value == pytest.approx(projected_gradient_dual(X, y, C, gamma), abs=1e-3)


def assert_kkt(model, X, y, C, tol=2e-3):
    alpha = full_alpha(model, len(y))
    assert np.all((alpha >= 0) & (alpha <= C))
    assert abs(np.dot(alpha, y)) < 1e-6
    margins = y * (svm.kernel_matrix(X, X, model.params) @ (alpha * y) + model.bias)
    assert np.all(margins[alpha == 0] >= 1 - tol)
    assert np.all(margins[alpha == C] <= 1 + tol)
    free = (alpha > 0) & (alpha < C)
    assert np.all(np.abs(margins[free] - 1) <= tol)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), C=st.sampled_from([0.1, 1.0, 10.0]))
def test_hypothesis_smo_kkt(seed, C):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((20, 3))
    y = np.where(X[:, 0] + 0.5 * rng.standard_normal(20) > 0, 1, -1)
    y[:2] = [-1, 1]
    model = svm.smo_train_binary(X, y, C, svm.KernelParams(0.5), seed=seed)
    assert model.converged
    assert_kkt(model, X, y, C)


def test_smo_errors():
    with pytest.raises(err.SingleClassInput):
        svm.smo_train_binary(XOR_X, np.ones(4), 1.0, svm.KernelParams(1.0))
    with pytest.raises(ValueError):
        svm.smo_train_binary(XOR_X, np.array([0, 1, 0, 1]), 1.0, svm.KernelParams(1.0))
    with pytest.raises(err.InvalidConfiguration):
        svm.KernelParams(0.0)


def test_iteration_cap():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((30, 2))
    y = np.where(rng.random(30) > 0.5, 1, -1)
    y[:2] = [-1, 1]
    model = svm.smo_train_binary(X, y, 100.0, svm.KernelParams(5.0), max_passes=1, tol=1e-9)
    assert not model.converged


def test_multiclass_blobs():
    X, y = blobs()
    model = svm.train_multiclass(X, y, 10.0, svm.KernelParams(0.5))
    assert len(model.machines) == 3
    assert np.array_equal(svm.predict_multiclass(model, X), y)
    ovr = svm.train_multiclass(X, y, 10.0, svm.KernelParams(0.5), strategy='ovr', threads=2)
    assert np.array_equal(svm.predict_multiclass(ovr, X), y)
    with pytest.raises(err.DimensionMismatch):
        svm.predict_multiclass(model, np.zeros((1, 3)))
    with pytest.raises(err.SingleClassInput):
        svm.train_multiclass(X[:10], y[:10], 1.0, svm.KernelParams(0.5))


def test_two_classes_reduce_to_sign():
    model = svm.train_multiclass(XOR_X, np.array([3, 3, 8, 8]), 10.0, svm.KernelParams(1.0),
                                 standardize=False)
    decision = svm.decision_function(model.machines[(0, 1)], XOR_X)
    assert np.array_equal(svm.predict_multiclass(model, XOR_X), np.where(decision > 0, 3, 8))


def test_training_order_does_not_change_predictions():
    X, y = blobs(seed=1)
    order = np.random.default_rng(11).permutation(len(y))
    test_points = blobs(seed=2)[0]
    first = svm.train_multiclass(X, y, 1.0, svm.KernelParams(0.5))
    second = svm.train_multiclass(X[order], y[order], 1.0, svm.KernelParams(0.5))
    assert np.array_equal(svm.predict_multiclass(first, test_points),
                          svm.predict_multiclass(second, test_points))


def test_accuracy_non_decreasing_in_C():
    X, y = blobs(seed=3)
    accuracies = [np.mean(svm.predict_multiclass(
        svm.train_multiclass(X, y, C, svm.KernelParams(0.5)), X) == y)
        for C in (0.01, 1.0, 100.0)]
    assert accuracies == sorted(accuracies)
    assert accuracies[-1] == 1.0


def test_stratified_folds():
    y = np.repeat(np.arange(3), 10)
    first = svm.stratified_folds(y, 3, seed=4)
    assert np.array_equal(first, svm.stratified_folds(y, 3, seed=4))
    for fold in range(3):
        assert sorted(np.bincount(y[first == fold], minlength=3).tolist()) == [3, 3, 4]
    assert np.bincount(first).tolist() == [10, 10, 10]
    with pytest.raises(err.InsufficientClassPopulation):
        svm.stratified_folds(y, 11, seed=0)
    assert sorted(svm.stratified_folds(y, 30, seed=0).tolist()) == list(range(30))


def test_leave_one_out():
    X, y = blobs()
    accuracies = svm.kfold_cv(X, y, len(y), 10.0, svm.KernelParams(0.5))
    assert accuracies == [1.0] * 30


def test_mislabeled_point_costs_one_fold():
    X, y = blobs()
    y = y.copy()
    y[0] = 2
    accuracies = svm.kfold_cv(X, y, len(y), 1.0, svm.KernelParams(0.5))
    assert accuracies.count(0.0) == 1 and accuracies.count(1.0) == 29


def test_grid_search():
    X, y = blobs()
    report, model = svm.grid_search(X, y, folds=3, seed=0)
    assert len(report.cells) == 12 and report.fit_count == 36
    assert report.best_cv_accuracy == max(cell.mean_accuracy for cell in report.cells)
    assert (model.C, model.params.gamma) == (report.selected_C, report.selected_gamma)
    single, _ = svm.grid_search(X, y, [10.0], [0.5], folds=3, seed=5)
    assert list(single.cells[0].fold_accuracies) == svm.kfold_cv(X, y, 3, 10.0, svm.KernelParams(0.5), seed=5)
    assert (single.selected_C, single.selected_gamma) == (10.0, 0.5)
    tie, _ = svm.grid_search(X, y, [100.0, 1.0], [0.5], folds=3)
    assert tie.cells[0].mean_accuracy == tie.cells[1].mean_accuracy == 1.0
    assert tie.selected_C == 1.0
    assert json.loads(json.dumps(tie.to_dict()))['selected'] == {'C': 1.0, 'gamma': 0.5}
    with pytest.raises(err.InvalidConfiguration):
        svm.grid_search(X, y, [], [0.5])


def test_evaluation_reports():
    classes = np.arange(10)
    truth = np.repeat(classes, 10)
    perfect = svm.confusion_report(truth, truth, classes)
    assert perfect.accuracy == 1.0
    assert np.array_equal(perfect.confusion, 10 * np.eye(10, dtype=int))
    constant = svm.confusion_report(truth, np.zeros(100, dtype=int), classes)
    assert constant.accuracy == pytest.approx(0.1)
    assert constant.precision[0] == pytest.approx(0.1) and constant.recall[0] == 1.0
    assert not constant.precision[1:].any()
    with pytest.raises(err.InvalidLabel):
        svm.confusion_report(truth, truth + 1, classes)
    X, y = blobs(per_class=20)
    held_out = np.arange(len(y)) % 10 < 3
    model = svm.train_multiclass(X[~held_out], y[~held_out], 10.0, svm.KernelParams(0.5))
    assert svm.evaluate(model, X[held_out], y[held_out]).accuracy == 1.0


def test_model_file_round_trip(tmp_path):
    X, y = blobs()
    model = svm.train_multiclass(X, y, 10.0, svm.KernelParams(0.5), fingerprint='a' * 64)
    path = tmp_path / 'model.pesv'
    svm.save_model(path, model)
    loaded = svm.load_model(path)
    assert loaded.fingerprint == 'a' * 64
    assert np.array_equal(svm.predict_multiclass(loaded, X), svm.predict_multiclass(model, X))
    copy = tmp_path / 'copy.pesv'
    svm.save_model(copy, loaded)
    assert copy.read_bytes() == path.read_bytes()
    payload = path.read_bytes()
    for broken in (b'PESX' + payload[4:], payload[:-4], payload + b'\x00', payload[:30]):
        path.write_bytes(broken)
        with pytest.raises(err.FileFormatError):
            svm.load_model(path)


# cli

def run_cli(*arguments):
    return cli.main([str(argument) for argument in arguments])


def test_parse_grid():
    assert cli.parse_grid(None) == (list(svm.DEFAULT_C_GRID), list(svm.DEFAULT_GAMMA_GRID))
    assert cli.parse_grid('C=10;gamma=0.001') == ([10.0], [0.001])
    assert cli.parse_grid('gamma=0.1, 0.2') == (list(svm.DEFAULT_C_GRID), [0.1, 0.2])
    for malformed in ('C=', 'C=a', 'nu=1', 'C'):
        with pytest.raises(err.InvalidConfiguration):
            cli.parse_grid(malformed)


def test_cli_pipeline(tmp_path, idx_fixture, capsys):
    images, labels = idx_fixture
    train = tmp_path / 'train.pefm'
    assert run_cli('extract', '--dataset', 'fashion-mnist', '--images', images,
                   '--labels', labels, '--split', 'train', '--threads', 2,
                   '--out', train) == 0
    assert 'rows=20 columns=780' in capsys.readouterr().out
    run_manifest = json.loads((tmp_path / 'train.pefm.run.json').read_text())
    assert run_manifest['fingerprint'] == fusion.PipelineConfig().fingerprint()
    assert str(images) in run_manifest['inputs']

    again = tmp_path / 'again.pefm'
    assert run_cli('extract', '--dataset', 'fashion-mnist', '--images', images,
                   '--labels', labels, '--split', 'train', '--out', again) == 0
    assert again.read_bytes() == train.read_bytes()

    model = tmp_path / 'model.pesv'
    report = tmp_path / 'report.json'
    table = tmp_path / 'cells.csv'
    assert run_cli('gridsearch', train, '--grid', 'C=1,10;gamma=0.001', '--folds', 2,
                   '--out', model, '--report', report, '--csv', table) == 0
    content = json.loads(report.read_text())
    assert len(content['cells']) == 2 and content['fit_count'] == 4
    assert table.read_text().splitlines()[0] == 'C,gamma,fold_0,fold_1,mean_accuracy'

    capsys.readouterr()
    evaluation = tmp_path / 'evaluation.json'
    assert run_cli('evaluate', train, '--model', model, '--report', evaluation) == 0
    printed = capsys.readouterr().out.strip().splitlines()[-1]
    assert printed.startswith('accuracy=')
    accuracy = float(printed.split('=')[1])
    assert accuracy >= 0.9
    assert json.loads(evaluation.read_text())['accuracy'] == accuracy

    # a model must not be applied to features of another pipeline
    pixels = tmp_path / 'pixels.pefm'
    assert run_cli('extract', '--dataset', 'fashion-mnist', '--images', images,
                   '--labels', labels, '--features', 'pixels', '--out', pixels) == 0
    assert run_cli('evaluate', pixels, '--model', model) == 2
    assert 'FingerprintMismatch' in capsys.readouterr().err


def test_cli_train_refuses_test_split(tmp_path, idx_fixture, capsys):
    images, labels = idx_fixture
    test = tmp_path / 'test.pefm'
    assert run_cli('extract', '--dataset', 'kmnist', '--images', images, '--labels', labels,
                   '--features', 'pixels', '--split', 'test', '--out', test) == 0
    assert run_cli('train', test, '--out', tmp_path / 'model.pesv') == 2
    assert 'SplitMismatch' in capsys.readouterr().err
    assert not (tmp_path / 'model.pesv').exists()


def test_cli_standardize_and_train(tmp_path, idx_fixture):
    images, labels = idx_fixture
    train = tmp_path / 'train.pefm'
    run_cli('extract', '--dataset', 'fashion-mnist', '--images', images, '--labels', labels,
            '--limit-per-class', 5, '--seed', 7, '--out', train)
    assert fusion.read_feature_matrix(train).matrix.shape == (10, 780)
    assert run_cli('standardize', train, '--apply', train, '--out-dir', tmp_path / 'std') == 0
    standardized = fusion.read_feature_matrix(tmp_path / 'std' / 'train.std.pefm')
    assert np.all(np.abs(standardized.matrix.mean(axis=0)) < 1e-5)
    model = tmp_path / 'model.pesv'
    assert run_cli('train', tmp_path / 'std' / 'train.std.pefm', '--C', 10,
                   '--gamma', 0.001, '--out', model) == 0
    assert svm.load_model(model).fingerprint == standardized.manifest.fingerprint


def test_cli_invalid_config(tmp_path, idx_fixture, capsys):
    images, labels = idx_fixture
    bad = tmp_path / 'bad.ini'
    bad.write_text('[DIRECTIONAL]\nK = 27\n')
    out = tmp_path / 'features.pefm'
    assert run_cli('extract', '--dataset', 'fashion-mnist', '--images', images,
                   '--labels', labels, '--config', bad, '--out', out) == 2
    error = capsys.readouterr().err.strip().splitlines()[-1]
    assert error.startswith('error: InvalidConfiguration:') and 'directional' in error
    assert not out.exists() and not list(tmp_path.glob('features*'))


def test_cli_checksums(tmp_path, idx_fixture, capsys):
    images, labels = idx_fixture
    registry = tmp_path / 'checksums.txt'
    registry.write_text(f"{images.name} {'0' * 64}\n")
    assert run_cli('extract', '--dataset', 'fashion-mnist', '--images', images,
                   '--labels', labels, '--checksums', registry, '--features', 'pixels',
                   '--out', tmp_path / 'out.pefm') == 2
    assert 'ChecksumMismatch' in capsys.readouterr().err


def test_cli_emnist_orientation(tmp_path):
    letters = stripes(2)
    shifted = datasets.LabeledImageSet(letters.pixels.copy(), letters.labels + 1)
    datasets.write_idx(tmp_path / 'images', tmp_path / 'labels', shifted)
    outputs = {}
    for flag in ([], ['--keep-orientation']):
        out = tmp_path / f"letters{len(flag)}.pefm"
        assert run_cli('extract', '--dataset', 'emnist-letters', '--images', tmp_path / 'images',
                       '--labels', tmp_path / 'labels', '--features', 'pixels',
                       '--out', out, *flag) == 0
        outputs[bool(flag)] = fusion.read_feature_matrix(out)
        transposed = json.loads((tmp_path / f"{out.name}.run.json").read_text())['transposed']
        assert transposed is not bool(flag)
    assert outputs[False].labels.tolist() == [0, 0, 1, 1]
    first_stored = letters.pixels[0] / 255.0
    assert np.allclose(outputs[True].matrix[0], first_stored.ravel())
    assert np.allclose(outputs[False].matrix[0], first_stored.T.ravel())


def test_cli_inspect(tmp_path, idx_fixture):
    images, labels = idx_fixture
    table = tmp_path / 'image.csv'
    assert run_cli('inspect', '--dataset', 'fashion-mnist', '--images', images,
                   '--labels', labels, '--index', 3, '--out', table) == 0
    lines = table.read_text().splitlines()
    assert lines[0] == 'segment,index,value' and len(lines) == 781
    assert lines[1].startswith('row_pe,0,')
    assert run_cli('inspect', '--dataset', 'fashion-mnist', '--images', images,
                   '--labels', labels, '--index', 99) == 2


def test_version(capsys):
    assert pefusion.NAME == 'pefusion'
    with pytest.raises(SystemExit) as excinfo:
        cli.main(['--version'])
    assert excinfo.value.code == 0
    assert capsys.readouterr().out.strip() == f"pefusion {pefusion.__version__}"


def test_cli_usage_errors():
    with pytest.raises(SystemExit) as excinfo:
        cli.main([])
    assert excinfo.value.code == 2
    with pytest.raises(SystemExit) as excinfo:
        cli.main(['extract', '--dataset', 'mnist', '--out', 'x'])
    assert excinfo.value.code == 2


# Long running comparison on real data

FASHION_MNIST_DIR = os.environ.get('PEFUSION_FASHION_MNIST_DIR')


@pytest.mark.skipif(not FASHION_MNIST_DIR, reason='PEFUSION_FASHION_MNIST_DIR not set')
def test_fused_features_beat_raw_pixels():
    directory = pathlib.Path(FASHION_MNIST_DIR)
    train = datasets.load_profile('fashion-mnist', directory / 'train-images-idx3-ubyte.gz',
                                  directory / 'train-labels-idx1-ubyte.gz')
    test = datasets.load_profile('fashion-mnist', directory / 't10k-images-idx3-ubyte.gz',
                                 directory / 't10k-labels-idx1-ubyte.gz')
    assert train.class_counts().tolist() == [6000] * 10
    threads = os.cpu_count() or 1
    fused = []
    for seed in (0, 1, 2):
        train_subset = datasets.subsample(train, 200, seed)
        test_subset = datasets.subsample(test, 100, seed)
        accuracies = {}
        for name in ('fused', 'pixels'):
            if name == 'fused':
                X_train = fusion.extract_batch(train_subset.iter_images(), fusion.PipelineConfig(), threads)[0]
                X_test = fusion.extract_batch(test_subset.iter_images(), fusion.PipelineConfig(), threads)[0]
            else:
                X_train = fusion.pixel_features(train_subset.iter_images())[0]
                X_test = fusion.pixel_features(test_subset.iter_images())[0]
            _, model = svm.grid_search(X_train, train_subset.labels, folds=3, seed=seed,
                                       threads=threads)
            accuracies[name] = svm.evaluate(model, X_test, test_subset.labels).accuracy
        if seed == 0:
            assert accuracies['fused'] >= accuracies['pixels'] + 0.01
        fused.append(accuracies['fused'])
    assert max(fused) - min(fused) < 0.02
