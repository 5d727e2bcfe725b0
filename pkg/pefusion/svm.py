#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Support vector machines
~~~~~~~~~~~~~~~~~~~~~
Soft-margin SVM with an RBF kernel, trained on the dual problem

    max  sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j)
    s.t. 0 <= alpha_i <= C,  sum(alpha_i y_i) = 0

by sequential minimal optimization: every step updates the maximal
violating pair of dual variables analytically. Kernel rows are
computed on demand and kept in an LRU cache with a byte budget.

Several classes are handled one-vs-one (default) or one-vs-rest.
Hyperparameters are selected by stratified k-fold cross-validation
over a (C, gamma) grid.

PESV model files:

    b'PESV' | u16 version | u64 header length | UTF-8 JSON header
    per binary machine: n_support x n_features float32 (little-endian)

Released under the Apache License 2.0
"""

from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import itertools
import json
import logging
import math
import pathlib
import struct
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pefusion import err
from pefusion import fusion
from pefusion import parameters

DEFAULT_C_GRID = (1.0, 10.0, 100.0, 200.0)
DEFAULT_GAMMA_GRID = (0.01, 0.001, 0.0001)
DEFAULT_TOLERANCE = 1e-3
DEFAULT_MAX_PASSES = 200
DEFAULT_CACHE_BYTES = 256 * 1024 * 1024

PESV_MAGIC = b'PESV'
PESV_VERSION = 1
_PESV_HEADER = struct.Struct('<4sHQ')

# rows per chunk when evaluating large kernel matrices
_CHUNK_ROWS = 1024


@dataclass(frozen=True)
class KernelParams:
    "Width of the RBF kernel k(x, y) = exp(-gamma |x - y|^2)."
    gamma: float
    kind: str = 'rbf'

    def __post_init__(self) -> None:
        parameters.enforce_positive('gamma', self.gamma)
        parameters.enforce_choice('kind', self.kind, ('rbf',))


def rbf_kernel(x: np.ndarray, y: np.ndarray, params: KernelParams) -> float:
    "exp(-gamma |x - y|^2) for two vectors."
    first = np.asarray(x, dtype=np.float64)
    second = np.asarray(y, dtype=np.float64)
    if first.shape != second.shape:
        raise err.DimensionMismatch(
            f"Kernel of vectors with shapes {first.shape} and {second.shape}.")
    difference = first - second
    return math.exp(-params.gamma * float(np.dot(difference, difference)))


def kernel_matrix(A: np.ndarray, B: np.ndarray, params: KernelParams) -> np.ndarray:
    "Gram matrix k(A[i], B[j]), computed in row chunks."
    first = np.atleast_2d(np.asarray(A, dtype=np.float64))
    second = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if first.shape[1] != second.shape[1]:
        raise err.DimensionMismatch(
            f"Cannot compare {first.shape[1]} with {second.shape[1]} features.")
    second_norms = (second ** 2).sum(axis=1)
    result = np.empty((first.shape[0], second.shape[0]), dtype=np.float64)
    for start in range(0, first.shape[0], _CHUNK_ROWS):
        chunk = first[start:start + _CHUNK_ROWS]
        distances = ((chunk ** 2).sum(axis=1)[:, np.newaxis] + second_norms -
                     2.0 * chunk @ second.T)
        np.maximum(distances, 0.0, out=distances)
        result[start:start + _CHUNK_ROWS] = np.exp(-params.gamma * distances)
    # underflow would leave exact zeros
    np.clip(result, np.finfo(np.float64).tiny, 1.0, out=result)
    return result


class KernelCache:
    """Rows of the training kernel matrix, least recently used rows
       are dropped once the byte budget is exhausted."""

    def __init__(self,
                 X: np.ndarray,
                 params: KernelParams,
                 max_bytes: int = DEFAULT_CACHE_BYTES) -> None:
        self.X = X
        self.params = params
        row_bytes = max(X.shape[0] * 8, 1)
        self.capacity = max(2, max_bytes // row_bytes)
        self.hits = 0
        self.misses = 0
        self._rows: 'OrderedDict[int, np.ndarray]' = OrderedDict()

    def row(self, index: int) -> np.ndarray:
        if index in self._rows:
            self.hits += 1
            self._rows.move_to_end(index)
            return self._rows[index]
        self.misses += 1
        difference = self.X - self.X[index]
        values = np.exp(-self.params.gamma * np.einsum('ij,ij->i',
                                                       difference, difference))
        self._rows[index] = values
        if len(self._rows) > self.capacity:
            self._rows.popitem(last=False)
        return values


@dataclass(frozen=True, eq=False)
class BinarySvmModel:
    """Support vectors (stored as float32), their coefficients
       alpha_i * y_i and the bias of f(x) = sum a_i y_i k(x_i, x) + b."""
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    params: KernelParams
    C: float
    support_indices: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=np.int64))
    iterations: int = 0
    converged: bool = True

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])


def dual_objective(alpha: np.ndarray, y: np.ndarray, K: np.ndarray) -> float:
    "Value of the dual objective sum(alpha) - 1/2 alpha' Q alpha."
    weighted = np.asarray(alpha, dtype=np.float64) * np.asarray(y, dtype=np.float64)
    return float(np.sum(alpha) - 0.5 * weighted @ K @ weighted)


def _check_training_data(X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise err.DimensionMismatch(
            f"{X.shape} samples do not match {y.shape} labels.")
    if X.shape[0] < 2:
        raise err.InsufficientLength('Training needs at least 2 samples.')


def smo_train_binary(X: np.ndarray,
                     y: np.ndarray,
                     C: float,
                     params: KernelParams,
                     tol: float = DEFAULT_TOLERANCE,
                     max_passes: int = DEFAULT_MAX_PASSES,
                     seed: int = 0,
                     cache_bytes: int = DEFAULT_CACHE_BYTES) -> BinarySvmModel:
    """Train a binary SVM with labels -1 / +1.

       Stops once the maximal KKT violation drops to tol, or after
       max_passes * n pair updates. The seed permutes the scan order,
       which decides between equally violating pairs."""
    data = np.asarray(X, dtype=np.float64)
    labels = np.asarray(y)
    _check_training_data(data, labels)
    if not np.all(np.isin(labels, (-1, 1))):
        raise ValueError('Binary labels must be -1 or +1.')
    if np.all(labels == labels[0]):
        raise err.SingleClassInput(
            'Both classes must be present to train a binary SVM.')
    C = parameters.enforce_positive('C', C)
    tol = parameters.enforce_positive('tol', tol)
    parameters.enforce_int_range('max_passes', max_passes, 1)

    n = data.shape[0]
    order = np.random.default_rng(seed).permutation(n)
    data = data[order]
    signs = labels[order].astype(np.float64)
    positive = signs > 0

    cache = KernelCache(data, params, cache_bytes)
    alpha = np.zeros(n, dtype=np.float64)
    # F_t = -y_t * (gradient of the minimized dual)_t, starts at y
    F = signs.copy()
    max_iterations = max_passes * n
    converged = False
    iteration = 0
    for iteration in range(max_iterations):
        at_lower = alpha <= 0.0
        at_upper = alpha >= C
        up = (positive & ~at_upper) | (~positive & ~at_lower)
        low = (positive & ~at_lower) | (~positive & ~at_upper)
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, F, -np.inf)))
        j = int(np.argmin(np.where(low, F, np.inf)))
        gap = F[i] - F[j]
        if gap <= tol:
            converged = True
            break
        K_i = cache.row(i)
        K_j = cache.row(j)
        eta = max(K_i[i] + K_j[j] - 2.0 * K_i[j], 1e-12)
        room_i = C - alpha[i] if positive[i] else alpha[i]
        room_j = alpha[j] if positive[j] else C - alpha[j]
        step = min(room_i, room_j, gap / eta)
        alpha[i] += signs[i] * step
        alpha[j] -= signs[j] * step
        for index in (i, j):
            if alpha[index] < C * 1e-12:
                alpha[index] = 0.0
            elif alpha[index] > C * (1.0 - 1e-12):
                alpha[index] = C
        F -= step * (K_i - K_j)
    else:
        logging.warning('SMO stopped after %s iterations without reaching ' +
                        'tol = %s.', max_iterations, tol)
        iteration = max_iterations

    free = (alpha > 0.0) & (alpha < C)
    if free.any():
        bias = float(F[free].mean())
    else:
        up = (positive & (alpha < C)) | (~positive & (alpha > 0.0))
        low = (positive & (alpha > 0.0)) | (~positive & (alpha < C))
        bounds = [F[up].max()] if up.any() else []
        bounds += [F[low].min()] if low.any() else []
        bias = float(np.mean(bounds))

    support = np.flatnonzero(alpha > 0.0)
    original = order[support]
    by_original = np.argsort(original)
    support = support[by_original]
    logging.debug('SMO: %s iterations, %s support vectors, cache %s hits / ' +
                  '%s misses', iteration, support.shape[0],
                  cache.hits, cache.misses)
    return BinarySvmModel(
        support_vectors=data[support].astype(np.float32),
        dual_coefs=alpha[support] * signs[support],
        bias=bias,
        params=params,
        C=C,
        support_indices=original[by_original],
        iterations=iteration,
        converged=converged)


def decision_function(model: BinarySvmModel, X: np.ndarray) -> np.ndarray:
    "Decision values f(x) for every row of X."
    data = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if data.shape[1] != model.n_features:
        raise err.DimensionMismatch(
            f"Model expects {model.n_features} features, got {data.shape[1]}.")
    if model.support_vectors.shape[0] == 0:
        return np.full(data.shape[0], model.bias)
    return (kernel_matrix(data, model.support_vectors, model.params) @
            model.dual_coefs + model.bias)


# Multiclass

@dataclass(frozen=True, eq=False)
class MulticlassModel:
    """Binary machines keyed by class index pairs (i < j) for
       one-vs-one, or by (i, -1) for one-vs-rest."""
    classes: np.ndarray
    machines: Dict[Tuple[int, int], BinarySvmModel]
    C: float
    params: KernelParams
    strategy: str = 'ovo'
    standardizer: Optional[fusion.Standardizer] = None
    fingerprint: str = ''
    n_features: int = 0

    @property
    def n_classes(self) -> int:
        return int(self.classes.shape[0])

    def expected_keys(self) -> List[Tuple[int, int]]:
        if self.strategy == 'ovr':
            return [(index, -1) for index in range(self.n_classes)]
        return list(itertools.combinations(range(self.n_classes), 2))


def _pair_seed(seed: int, first: int, second: int) -> int:
    return int(np.random.SeedSequence([seed, first + 1, second + 1]).generate_state(1)[0])


def train_multiclass(X: np.ndarray,
                     y: np.ndarray,
                     C: float,
                     params: KernelParams,
                     seed: int = 0,
                     strategy: str = 'ovo',
                     standardize: bool = True,
                     tol: float = DEFAULT_TOLERANCE,
                     threads: int = 1,
                     cache_bytes: int = DEFAULT_CACHE_BYTES,
                     fingerprint: str = '') -> MulticlassModel:
    """Train all binary machines. With standardize=True the
       standardizer is fitted on X and stored in the model."""
    data = np.asarray(X, dtype=np.float64)
    labels = np.asarray(y, dtype=np.int64)
    _check_training_data(data, labels)
    parameters.enforce_choice('strategy', strategy, ('ovo', 'ovr'))
    parameters.enforce_int_range('threads', threads, 1)
    classes = np.unique(labels)
    if classes.shape[0] < 2:
        raise err.SingleClassInput('At least two classes are required.')
    standardizer = fusion.fit_standardizer(data) if standardize else None
    if standardizer is not None:
        data = fusion.apply_standardizer(data, standardizer)
    class_index = np.searchsorted(classes, labels)

    if strategy == 'ovo':
        keys = list(itertools.combinations(range(classes.shape[0]), 2))
    else:
        keys = [(index, -1) for index in range(classes.shape[0])]

    def train_one(key: Tuple[int, int]) -> BinarySvmModel:
        first, second = key
        if second < 0:
            rows = np.arange(labels.shape[0])
            signs = np.where(class_index == first, 1, -1)
        else:
            rows = np.flatnonzero((class_index == first) | (class_index == second))
            signs = np.where(class_index[rows] == first, 1, -1)
        return smo_train_binary(data[rows], signs, C, params, tol=tol,
                                seed=_pair_seed(seed, first, second),
                                cache_bytes=cache_bytes)

    with ThreadPoolExecutor(max_workers=threads) as executor:
        machines = dict(zip(keys, executor.map(train_one, keys)))
    logging.debug('Trained %s binary machines (C=%s, gamma=%s).',
                  len(machines), C, params.gamma)
    return MulticlassModel(classes=classes, machines=machines, C=float(C),
                           params=params, strategy=strategy,
                           standardizer=standardizer, fingerprint=fingerprint,
                           n_features=data.shape[1])


def predict_multiclass(model: MulticlassModel, X: np.ndarray) -> np.ndarray:
    """Class labels by majority vote of the pairwise machines. Ties go
       to the larger sum of |decision| over the contests a class won,
       then to the smaller class index."""
    data = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if data.shape[1] != model.n_features:
        raise err.DimensionMismatch(
            f"Model expects {model.n_features} features, got {data.shape[1]}.")
    if model.standardizer is not None:
        data = fusion.apply_standardizer(data, model.standardizer)
    n_samples = data.shape[0]
    if model.strategy == 'ovr':
        scores = np.column_stack(
            [decision_function(model.machines[(index, -1)], data)
             for index in range(model.n_classes)])
        return model.classes[np.argmax(scores, axis=1)]

    votes = np.zeros((n_samples, model.n_classes), dtype=np.int64)
    confidence = np.zeros((n_samples, model.n_classes), dtype=np.float64)
    rows = np.arange(n_samples)
    for (first, second), machine in sorted(model.machines.items()):
        decision = decision_function(machine, data)
        winner = np.where(decision > 0, first, second)
        votes[rows, winner] += 1
        confidence[rows, winner] += np.abs(decision)
    leading = votes == votes.max(axis=1, keepdims=True)
    best = np.argmax(np.where(leading, confidence, -np.inf), axis=1)
    return model.classes[best]


# Evaluation

@dataclass(frozen=True, eq=False)
class EvaluationReport:
    "Accuracy, confusion matrix (rows: true, columns: predicted)."
    classes: np.ndarray
    accuracy: float
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray

    def to_dict(self) -> dict:
        return {'classes': [int(label) for label in self.classes],
                'accuracy': self.accuracy,
                'confusion': self.confusion.tolist(),
                'precision': [float(value) for value in self.precision],
                'recall': [float(value) for value in self.recall]}


def confusion_report(y_true: np.ndarray,
                     y_pred: np.ndarray,
                     classes: np.ndarray) -> EvaluationReport:
    "Summarize predictions of a classifier over the given classes."
    truth = np.asarray(y_true, dtype=np.int64)
    predicted = np.asarray(y_pred, dtype=np.int64)
    classes = np.asarray(classes, dtype=np.int64)
    if truth.shape != predicted.shape or truth.ndim != 1 or truth.size == 0:
        raise err.DimensionMismatch(
            f"{truth.shape} true labels for {predicted.shape} predictions.")
    for name, values in (('true', truth), ('predicted', predicted)):
        unknown = np.setdiff1d(values, classes)
        if unknown.size:
            raise err.InvalidLabel(
                f"{name} labels {unknown.tolist()} are not among the " +
                "classes of the model.")
    k = classes.shape[0]
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (np.searchsorted(classes, truth),
                          np.searchsorted(classes, predicted)), 1)
    correct = np.diag(confusion).astype(np.float64)
    predicted_totals = confusion.sum(axis=0)
    true_totals = confusion.sum(axis=1)
    precision = np.divide(correct, predicted_totals,
                          out=np.zeros(k), where=predicted_totals > 0)
    recall = np.divide(correct, true_totals,
                       out=np.zeros(k), where=true_totals > 0)
    return EvaluationReport(classes, float(np.trace(confusion) / truth.shape[0]),
                            confusion, precision, recall)


def evaluate(model: MulticlassModel,
             X_test: np.ndarray,
             y_test: np.ndarray) -> EvaluationReport:
    "Predict X_test and compare with y_test."
    predictions = predict_multiclass(model, X_test)
    report = confusion_report(y_test, predictions, model.classes)
    logging.info('Test accuracy: %.4f', report.accuracy)
    return report


# Cross-validation and grid search

def stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold number of every sample. Members of each class are shuffled
       and dealt round-robin. folds == len(y) means leave-one-out."""
    labels = np.asarray(y, dtype=np.int64)
    parameters.enforce_int_range('folds', folds, 2)
    rng = np.random.default_rng(seed)
    if folds == labels.shape[0]:
        return rng.permutation(labels.shape[0])
    if folds > labels.shape[0]:
        raise err.InsufficientClassPopulation(
            f"{folds} folds for only {labels.shape[0]} samples.")
    assignment = np.empty(labels.shape[0], dtype=np.int64)
    position = 0
    for label in np.unique(labels):
        members = np.flatnonzero(labels == label)
        if members.shape[0] < folds:
            raise err.InsufficientClassPopulation(
                f"Class {label} has {members.shape[0]} members, fewer " +
                f"than {folds} folds.")
        shuffled = rng.permutation(members)
        assignment[shuffled] = (position + np.arange(shuffled.shape[0])) % folds
        position += shuffled.shape[0]
    return assignment


def kfold_cv(X: np.ndarray,
             y: np.ndarray,
             folds: int,
             C: float,
             params: KernelParams,
             seed: int = 0,
             strategy: str = 'ovo',
             tol: float = DEFAULT_TOLERANCE,
             threads: int = 1) -> List[float]:
    """Accuracy of every fold, in fold order. The standardizer is
       fitted on the training part of each fold only."""
    data = np.asarray(X, dtype=np.float64)
    labels = np.asarray(y, dtype=np.int64)
    _check_training_data(data, labels)
    assignment = stratified_folds(labels, folds, seed)
    accuracies = []
    for fold in range(folds):
        held_out = assignment == fold
        model = train_multiclass(data[~held_out], labels[~held_out], C, params,
                                 seed=seed, strategy=strategy, tol=tol,
                                 threads=threads)
        predictions = predict_multiclass(model, data[held_out])
        accuracies.append(float(np.mean(predictions == labels[held_out])))
    logging.debug('CV C=%s gamma=%s: %s', C, params.gamma, accuracies)
    return accuracies


@dataclass(frozen=True)
class GridCell:
    C: float
    gamma: float
    fold_accuracies: Tuple[float, ...]

    @property
    def mean_accuracy(self) -> float:
        return float(sum(self.fold_accuracies) / len(self.fold_accuracies))


@dataclass(frozen=True)
class GridSearchReport:
    cells: Tuple[GridCell, ...]
    folds: int
    selected_C: float
    selected_gamma: float
    fit_count: int

    @property
    def best_cv_accuracy(self) -> float:
        return max(cell.mean_accuracy for cell in self.cells)

    def to_dict(self) -> dict:
        return {'cells': [{'C': cell.C, 'gamma': cell.gamma,
                           'fold_accuracies': list(cell.fold_accuracies),
                           'mean_accuracy': cell.mean_accuracy}
                          for cell in self.cells],
                'folds': self.folds,
                'selected': {'C': self.selected_C, 'gamma': self.selected_gamma},
                'best_cv_accuracy': self.best_cv_accuracy,
                'fit_count': self.fit_count}


def grid_search(X: np.ndarray,
                y: np.ndarray,
                C_grid: Sequence[float] = DEFAULT_C_GRID,
                gamma_grid: Sequence[float] = DEFAULT_GAMMA_GRID,
                folds: int = 3,
                seed: int = 0,
                strategy: str = 'ovo',
                tol: float = DEFAULT_TOLERANCE,
                threads: int = 1,
                fingerprint: str = '') -> Tuple[GridSearchReport, MulticlassModel]:
    """Cross-validate every (C, gamma) pair and refit the best one on
       all data. Equal mean accuracies go to the smaller C, then to
       the smaller gamma."""
    if not C_grid or not gamma_grid:
        raise err.InvalidConfiguration('The C and gamma grids must not be empty.')
    cells = []
    for C, gamma in itertools.product(C_grid, gamma_grid):
        accuracies = kfold_cv(X, y, folds, C, KernelParams(gamma), seed=seed,
                              strategy=strategy, tol=tol, threads=threads)
        cells.append(GridCell(float(C), float(gamma), tuple(accuracies)))
        logging.info('C=%s gamma=%s: mean CV accuracy %.4f',
                     C, gamma, cells[-1].mean_accuracy)
    best = min(cells, key=lambda cell: (-cell.mean_accuracy, cell.C, cell.gamma))
    report = GridSearchReport(cells=tuple(cells), folds=folds,
                              selected_C=best.C, selected_gamma=best.gamma,
                              fit_count=len(cells) * folds)
    model = train_multiclass(X, y, best.C, KernelParams(best.gamma), seed=seed,
                             strategy=strategy, tol=tol, threads=threads,
                             fingerprint=fingerprint)
    return report, model


# PESV files

def save_model(path: Union[pathlib.Path, str], model: MulticlassModel) -> None:
    "Write a PESV model file."
    keys = model.expected_keys()
    header = {
        'classes': [int(label) for label in model.classes],
        'strategy': model.strategy,
        'kernel': model.params.kind,
        'C': model.C,
        'gamma': model.params.gamma,
        'fingerprint': model.fingerprint,
        'n_features': model.n_features,
        'standardizer': (model.standardizer.to_dict()
                         if model.standardizer is not None else None),
        'machines': [{'pair': list(key),
                      'bias': model.machines[key].bias,
                      'C': model.machines[key].C,
                      'dual_coefs': [float(value)
                                     for value in model.machines[key].dual_coefs],
                      'support_indices': [int(value) for value in
                                          model.machines[key].support_indices],
                      'iterations': model.machines[key].iterations,
                      'converged': model.machines[key].converged}
                     for key in keys]}
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')
    blocks = [np.ascontiguousarray(model.machines[key].support_vectors,
                                   dtype='<f4').tobytes() for key in keys]
    payload = b''.join([_PESV_HEADER.pack(PESV_MAGIC, PESV_VERSION,
                                          len(header_bytes)),
                        header_bytes] + blocks)
    fusion.atomic_write(path, payload)
    logging.info('Saved model with %s machines to %s', len(keys), path)


def load_model(path: Union[pathlib.Path, str]) -> MulticlassModel:
    "Read a PESV model file written by save_model()."
    payload = pathlib.Path(path).read_bytes()
    if len(payload) < _PESV_HEADER.size:
        raise err.FileFormatError(f"{path} is too short for a PESV header.")
    magic, version, header_length = _PESV_HEADER.unpack_from(payload)
    if magic != PESV_MAGIC:
        raise err.FileFormatError(f"{path} is not a PESV file.")
    if version != PESV_VERSION:
        raise err.FileFormatError(f"{path} has unsupported PESV version {version}.")
    position = _PESV_HEADER.size + header_length
    if position > len(payload):
        raise err.FileFormatError(f"{path}: truncated header.")
    try:
        header = json.loads(payload[_PESV_HEADER.size:position].decode('utf-8'))
        n_features = int(header['n_features'])
        params = KernelParams(float(header['gamma']), header['kernel'])
        machines = {}
        for entry in header['machines']:
            dual_coefs = np.asarray(entry['dual_coefs'], dtype=np.float64)
            block_size = dual_coefs.shape[0] * n_features * 4
            if position + block_size > len(payload):
                raise err.FileFormatError(f"{path}: truncated support vectors.")
            vectors = np.frombuffer(payload, dtype='<f4',
                                    count=dual_coefs.shape[0] * n_features,
                                    offset=position)
            position += block_size
            machines[tuple(entry['pair'])] = BinarySvmModel(
                support_vectors=vectors.reshape(-1, n_features).astype(np.float32),
                dual_coefs=dual_coefs,
                bias=float(entry['bias']),
                params=params,
                C=float(entry['C']),
                support_indices=np.asarray(entry['support_indices'], dtype=np.int64),
                iterations=int(entry['iterations']),
                converged=bool(entry['converged']))
        standardizer = (fusion.Standardizer.from_dict(header['standardizer'])
                        if header['standardizer'] is not None else None)
        model = MulticlassModel(
            classes=np.asarray(header['classes'], dtype=np.int64),
            machines=machines, C=float(header['C']), params=params,
            strategy=header['strategy'], standardizer=standardizer,
            fingerprint=str(header['fingerprint']), n_features=n_features)
    except err.FileFormatError:
        raise
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError,
            ValueError) as malformed:
        raise err.FileFormatError(f"{path}: malformed model header.") from malformed
    if position != len(payload):
        raise err.FileFormatError(f"{path}: unexpected trailing bytes.")
    if sorted(machines) != sorted(model.expected_keys()):
        raise err.FileFormatError(f"{path}: incomplete set of binary machines.")
    return model
