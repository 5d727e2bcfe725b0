#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Ordinal patterns and permutation entropy
~~~~~~~~~~~~~~~~~~~~~
Bandt-Pompe permutation entropy of one-dimensional sequences.

Each window of d points (taken every tau steps) is replaced by the
permutation that sorts it ascending. Ties are resolved by order of
appearance (stable sort). Permutations are identified by their
lexicographic rank among all d! permutations, so the pattern (1, 2, 3)
has rank 0 and (3, 2, 1) has rank 5 for d = 3.

All heavy lifting happens in pattern_counts(), which works on many
sequences of equal length at once. The functions for a single series
are thin wrappers around it.

Released under the Apache License 2.0
"""

from dataclasses import dataclass
from fractions import Fraction
import itertools
import logging
import math
from typing import Dict, NamedTuple, Sequence, Tuple, Union

import numpy as np

from pefusion import err
from pefusion import parameters

MAX_EMBEDDING_DIMENSION = 10

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True)
class OrdinalConfig:
    """Embedding dimension d (points per pattern) and delay tau
       (step between the points of a pattern)."""
    d: int = 3
    tau: int = 1

    def __post_init__(self) -> None:
        parameters.enforce_int_range('d', self.d, 2, MAX_EMBEDDING_DIMENSION)
        parameters.enforce_int_range('tau', self.tau, 1)

    @property
    def span(self) -> int:
        "Number of consecutive samples covered by one window."
        return (self.d - 1) * self.tau + 1

    @property
    def n_patterns(self) -> int:
        "Size of the pattern space, i.e. d!"
        return math.factorial(self.d)


@dataclass(frozen=True)
class PatternDistribution:
    "Window count per pattern rank. Ranks without windows are omitted."
    counts: Dict[int, int]
    total_windows: int
    d: int

    def probabilities(self) -> Dict[int, Fraction]:
        "Exact relative frequencies, they sum to exactly 1."
        return {rank: Fraction(count, self.total_windows)
                for rank, count in self.counts.items()}

    def as_tuples(self) -> Dict[Tuple[int, ...], int]:
        "Counts keyed by the 1-based permutation instead of its rank."
        return {pattern_tuple(rank, self.d): count
                for rank, count in self.counts.items()}


@dataclass(frozen=True)
class EntropyValue:
    "Permutation entropy in bits and normalized by log(d!)."
    raw_bits: float
    normalized: float


def _factorials(d: int) -> np.ndarray:
    return np.array([math.factorial(d - 1 - i) for i in range(d)],
                    dtype=np.int64)


def _ranks(permutations: np.ndarray) -> np.ndarray:
    """Lexicographic rank of permutations stored along the last axis
       (Lehmer code weighted by factorials)."""
    d = permutations.shape[-1]
    weights = _factorials(d)
    ranks = np.zeros(permutations.shape[:-1], dtype=np.int64)
    for i in range(d - 1):
        smaller_later = (permutations[..., i + 1:] <
                         permutations[..., i:i + 1]).sum(axis=-1)
        ranks += smaller_later * weights[i]
    return ranks


def pattern_tuple(rank: int, d: int) -> Tuple[int, ...]:
    "The 1-based permutation with the given lexicographic rank."
    if not 0 <= rank < math.factorial(d):
        raise ValueError(f"Rank {rank} is outside of [0, {d}!).")
    permutation = next(itertools.islice(
        itertools.permutations(range(1, d + 1)), rank, None))
    return tuple(permutation)


def ordinal_pattern(window: ArrayLike, config: OrdinalConfig) -> int:
    """Rank of the permutation that sorts the window ascending.
       Equal values keep their order of appearance."""
    values = np.asarray(window, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] != config.d:
        raise err.DimensionMismatch(
            f"Window must contain exactly d = {config.d} values, " +
            f"got shape {values.shape}.")
    permutation = np.argsort(values, kind='stable')
    return int(_ranks(permutation))


def _check_sequences(sequences: np.ndarray, config: OrdinalConfig) -> None:
    if sequences.shape[-1] < config.span:
        raise err.InsufficientLength(
            f"Sequence of length {sequences.shape[-1]} is too short: " +
            f"d = {config.d} and tau = {config.tau} require at least " +
            f"{config.span} values.")


class PatternCounts(NamedTuple):
    """Pattern counts of many sequences in run-length form.

       Row i holds the sorted pattern ranks of sequence i in `ranks`.
       `counts` is the length of a run of equal ranks at the first
       position of the run and 0 everywhere else. Both arrays have shape
       (n_sequences, n_windows), so memory does not depend on d!."""
    ranks: np.ndarray
    counts: np.ndarray
    d: int

    def row(self, index: int) -> Dict[int, int]:
        "Window count per rank for one sequence, ranks without windows omitted."
        present = np.flatnonzero(self.counts[index])
        return {int(self.ranks[index, i]): int(self.counts[index, i])
                for i in present}


def pattern_counts(sequences: np.ndarray, config: OrdinalConfig) -> PatternCounts:
    """Count ordinal patterns for every row of a 2D array of sequences.
       Only ranks that occur are stored (see PatternCounts)."""
    sequences = np.asarray(sequences, dtype=np.float64)
    if sequences.ndim != 2:
        raise err.DimensionMismatch(
            'pattern_counts expects a 2D array with one sequence per row.')
    _check_sequences(sequences, config)
    n_windows = sequences.shape[1] - (config.d - 1) * config.tau
    if sequences.shape[0] == 0:
        empty = np.zeros((0, n_windows), dtype=np.int64)
        return PatternCounts(empty, empty.copy(), config.d)
    windows = np.lib.stride_tricks.sliding_window_view(
        sequences, config.span, axis=1)[..., ::config.tau]
    ranks = np.sort(_ranks(np.argsort(windows, axis=-1, kind='stable')), axis=1)
    # every row starts a new run, so runs never cross rows
    starts = np.ones(ranks.shape, dtype=bool)
    starts[:, 1:] = ranks[:, 1:] != ranks[:, :-1]
    flat_starts = np.flatnonzero(starts)
    counts = np.zeros(ranks.size, dtype=np.int64)
    counts[flat_starts] = np.diff(np.append(flat_starts, ranks.size))
    return PatternCounts(ranks, counts.reshape(ranks.shape), config.d)


def _entropy_bits(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=-1, keepdims=True)
    probabilities = counts / totals
    with np.errstate(divide='ignore', invalid='ignore'):
        terms = np.where(probabilities > 0,
                         probabilities * np.log2(probabilities), 0.0)
    # adding 0.0 turns -0.0 into 0.0
    return -terms.sum(axis=-1) + 0.0


def normalized_entropy_from_counts(counts: PatternCounts) -> np.ndarray:
    """Normalized permutation entropy for each sequence counted by
       pattern_counts(). Zero counts contribute 0."""
    n_patterns = math.factorial(counts.d)
    return np.clip(_entropy_bits(counts.counts) / math.log2(n_patterns),
                   0.0, 1.0)


def shannon_entropy(probabilities: Sequence[float],
                    base: float = 2.0) -> float:
    "Shannon entropy in the given logarithm base (0 * log 0 = 0)."
    total = 0.0
    for p in probabilities:
        if p > 0:
            total -= float(p) * math.log(float(p))
    return total / math.log(base)


def _as_series(series: ArrayLike) -> np.ndarray:
    values = np.asarray(series, dtype=np.float64)
    if values.ndim != 1:
        raise err.DimensionMismatch('Expected a one-dimensional sequence.')
    return values


def pattern_distribution(series: ArrayLike,
                         config: OrdinalConfig) -> PatternDistribution:
    "Distribution of ordinal patterns over all windows of the series."
    values = _as_series(series)
    counts = pattern_counts(values[np.newaxis, :], config)
    distribution = PatternDistribution(
        counts=counts.row(0),
        total_windows=values.shape[0] - (config.d - 1) * config.tau,
        d=config.d)
    logging.debug('%s windows, %s distinct patterns',
                  distribution.total_windows, len(distribution.counts))
    return distribution


def permutation_entropy(series: ArrayLike,
                        config: OrdinalConfig) -> EntropyValue:
    "Permutation entropy in bits and in normalized form."
    values = _as_series(series)
    counts = pattern_counts(values[np.newaxis, :], config)
    raw = float(_entropy_bits(counts.counts)[0])
    normalized = float(normalized_entropy_from_counts(counts)[0])
    return EntropyValue(raw_bits=raw, normalized=normalized)


def bidirectional_from_sequences(sequences: np.ndarray,
                                 config: OrdinalConfig,
                                 aggregate: str = 'geometric') -> np.ndarray:
    """Combine the normalized PE of every row and of the reversed row.
       'geometric' uses sqrt(h * h_rev), 'arithmetic' (h + h_rev) / 2."""
    sequences = np.asarray(sequences, dtype=np.float64)
    forward = normalized_entropy_from_counts(pattern_counts(sequences, config))
    backward = normalized_entropy_from_counts(
        pattern_counts(sequences[:, ::-1], config))
    if aggregate == 'geometric':
        return np.sqrt(forward * backward)
    if aggregate == 'arithmetic':
        return (forward + backward) / 2.0
    raise err.InvalidConfiguration(
        f"Unknown aggregate '{aggregate}', use geometric or arithmetic.")


def bidirectional_pe(series: ArrayLike, config: OrdinalConfig) -> float:
    """Geometric mean of the normalized PE of a series and of its reversal.
       Both directions only differ if the series contains ties."""
    values = _as_series(series)
    return float(bidirectional_from_sequences(values[np.newaxis, :], config)[0])
