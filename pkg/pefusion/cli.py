#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Command line interface
~~~~~~~~~~~~~~~~~~~~~
    pefusion extract      images -> PEFM feature matrix
    pefusion standardize  fit on one PEFM file, apply to others
    pefusion train        PEFM -> PESV model with fixed C and gamma
    pefusion gridsearch   PEFM -> PESV model + cross-validation report
    pefusion evaluate     PESV + PEFM -> accuracy and confusion matrix
    pefusion inspect      fused feature vector of one image as CSV

Exit code 0 on success, 2 on any usage or data error. Errors are
reported as one line on stderr:  error: <ExceptionName>: <message>

Every command that writes a file also writes a run manifest
<output>.run.json (inputs with checksums, fingerprint, seed, duration).
Only the run manifest contains timing information, so repeated runs
with identical inputs produce byte-identical outputs.

Released under the Apache License 2.0
"""

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import pathlib
import sys
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pefusion import _version
from pefusion import config
from pefusion import datasets
from pefusion import err
from pefusion import fusion
from pefusion import hashing
from pefusion import svm

EXIT_SUCCESS = 0
EXIT_FAILURE = 2

BUNDLED_REGISTRY = config.PROFILE_DIRECTORY / 'checksums.txt'


class Run:
    "Outputs of the current command, removed again if it fails."

    def __init__(self, command: str) -> None:
        self.command = command
        self.started = time.monotonic()
        self.created: List[pathlib.Path] = list()

    def output(self, path: Any) -> pathlib.Path:
        target = pathlib.Path(path)
        self.created.append(target)
        return target

    def discard(self) -> None:
        for path in self.created:
            for leftover in (path, path.with_name(path.name + '.part')):
                if leftover.exists():
                    leftover.unlink()
                    logging.info('Removed incomplete output %s', leftover)

    def write_manifest(self,
                       primary_output: pathlib.Path,
                       inputs: Sequence[pathlib.Path],
                       **details: Any) -> None:
        sidecar = self.output(primary_output.with_name(
            primary_output.name + '.run.json'))
        manifest = {
            'command': self.command,
            'version': _version.__version__,
            'inputs': {str(path): hashing.calculate_file_hash(path)
                       for path in inputs},
            'outputs': [str(path) for path in self.created
                        if path != sidecar],
            'duration_seconds': round(time.monotonic() - self.started, 3)}
        manifest.update(details)
        write_json(sidecar, manifest)


def write_json(path: pathlib.Path, content: Dict[str, Any]) -> None:
    text = json.dumps(content, indent=2, sort_keys=True) + '\n'
    fusion.atomic_write(path, text.encode('utf-8'))


def write_csv(path: pathlib.Path, header: Sequence[str],
              rows: Sequence[Sequence[Any]]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    fusion.atomic_write(path, buffer.getvalue().encode('utf-8'))


def parse_grid(text: Optional[str]) -> Tuple[List[float], List[float]]:
    """Parse 'C=1,10,100;gamma=0.01,0.001'. A parameter that is not
       mentioned keeps its default grid."""
    grid = {'C': list(svm.DEFAULT_C_GRID), 'gamma': list(svm.DEFAULT_GAMMA_GRID)}
    for part in (text or '').split(';'):
        if not part.strip():
            continue
        key, separator, values = part.partition('=')
        key = key.strip()
        if not separator or key not in grid:
            raise err.InvalidConfiguration(
                f"Malformed grid entry '{part.strip()}'. Expected " +
                "C=<values> or gamma=<values>.")
        try:
            grid[key] = [float(value) for value in values.split(',')
                         if value.strip()]
        except ValueError as malformed:
            raise err.InvalidConfiguration(
                f"Grid values for {key} must be numbers.") from malformed
        if not grid[key]:
            raise err.InvalidConfiguration(f"Empty grid for {key}.")
    return grid['C'], grid['gamma']


# Loading inputs

def _dataset_inputs(args: argparse.Namespace) -> List[pathlib.Path]:
    profile = datasets.get_profile(args.dataset)
    if profile.loader == 'cifar10':
        if not args.batches:
            raise err.ContradictoryParameters(
                f"--batches is required for profile {profile.name}.")
        return [pathlib.Path(path) for path in args.batches]
    if not args.images or not args.labels:
        raise err.ContradictoryParameters(
            f"--images and --labels are required for profile {profile.name}.")
    return [pathlib.Path(args.images), pathlib.Path(args.labels)]


def load_dataset(args: argparse.Namespace
                 ) -> Tuple[datasets.LabeledImageSet, List[pathlib.Path]]:
    "Read, verify and optionally subsample the images named on the command line."
    inputs = _dataset_inputs(args)
    if args.checksums:
        registry_path = (BUNDLED_REGISTRY if args.checksums == 'bundled'
                         else pathlib.Path(args.checksums))
        registry = hashing.load_checksum_registry(registry_path)
        for path in inputs:
            hashing.verify_against_registry(path, registry)
    profile = datasets.get_profile(args.dataset)
    if args.keep_orientation and profile.transpose:
        logging.warning('Images of %s are used in stored orientation.', profile.name)
        profile = dataclasses.replace(profile, transpose=False)
    if profile.loader == 'cifar10':
        dataset = datasets.load_profile(profile, batch_paths=inputs)
    else:
        dataset = datasets.load_profile(profile, inputs[0], inputs[1])
    if args.limit_per_class:
        dataset = datasets.subsample(dataset, args.limit_per_class, args.seed)
    return dataset, inputs


def pipeline_config(args: argparse.Namespace) -> fusion.PipelineConfig:
    if args.config:
        return config.load_pipeline_config(args.config)
    return config.profile_config(args.dataset)


def read_labeled_features(path: str) -> fusion.FeatureFile:
    features = fusion.read_feature_matrix(path)
    if features.labels is None:
        raise err.FileFormatError(f"{path} contains no labels.")
    return features


# Commands

def cmd_extract(args: argparse.Namespace, run: Run) -> None:
    dataset, inputs = load_dataset(args)
    if args.features == 'pixels':
        matrix, manifest = fusion.pixel_features(dataset.iter_images())
    else:
        pipeline = pipeline_config(args)
        matrix, manifest = fusion.extract_batch(dataset.iter_images(), pipeline,
                                                threads=args.threads)
    out = run.output(args.out)
    fusion.write_feature_matrix(out, matrix, manifest, labels=dataset.labels,
                                split=args.split, dataset=args.dataset)
    run.write_manifest(out, inputs, dataset=args.dataset,
                       fingerprint=manifest.fingerprint, seed=args.seed,
                       features=args.features, split=args.split,
                       limit_per_class=args.limit_per_class,
                       transposed=(datasets.get_profile(args.dataset).transpose and
                                   not args.keep_orientation),
                       shape=list(matrix.shape))
    print(f"rows={matrix.shape[0]} columns={matrix.shape[1]}")


def cmd_standardize(args: argparse.Namespace, run: Run) -> None:
    train = fusion.read_feature_matrix(args.train)
    standardizer = fusion.fit_standardizer(train.matrix)
    fingerprint = hashing.fingerprint({'base': train.manifest.fingerprint,
                                       'standardizer': standardizer.to_dict()})
    out_dir = pathlib.Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    sources = [pathlib.Path(args.train)] + [pathlib.Path(path) for path in args.apply]
    outputs = list()
    for source in sources:
        features = (train if source == sources[0]
                    else fusion.read_feature_matrix(source))
        if features.manifest.fingerprint != train.manifest.fingerprint:
            raise err.FingerprintMismatch(
                f"{source}: features built with different pipeline config.")
        manifest = fusion.FeatureManifest(features.manifest.segments,
                                          features.manifest.total_dim,
                                          fingerprint)
        target = run.output(out_dir / f"{source.stem}.std{source.suffix}")
        fusion.write_feature_matrix(
            target, fusion.apply_standardizer(features.matrix, standardizer),
            manifest, features.labels, features.split, features.dataset)
        outputs.append(target)
    run.write_manifest(outputs[0], sources, fingerprint=fingerprint,
                       base_fingerprint=train.manifest.fingerprint,
                       standardizer=standardizer.to_dict())


def _training_features(args: argparse.Namespace) -> fusion.FeatureFile:
    features = read_labeled_features(args.features)
    if features.split == 'test':
        raise err.SplitMismatch(
            f"{args.features} is marked as test split and cannot be " +
            "used for training.")
    return features


def cmd_train(args: argparse.Namespace, run: Run) -> None:
    features = _training_features(args)
    model = svm.train_multiclass(
        features.matrix, features.labels, args.C, svm.KernelParams(args.gamma),
        seed=args.seed, strategy=args.strategy, threads=args.threads,
        fingerprint=features.manifest.fingerprint)
    out = run.output(args.out)
    svm.save_model(out, model)
    run.write_manifest(out, [pathlib.Path(args.features)],
                       fingerprint=features.manifest.fingerprint,
                       seed=args.seed, C=args.C, gamma=args.gamma,
                       strategy=args.strategy)


def cmd_gridsearch(args: argparse.Namespace, run: Run) -> None:
    features = _training_features(args)
    C_grid, gamma_grid = parse_grid(args.grid)
    report, model = svm.grid_search(
        features.matrix, features.labels, C_grid, gamma_grid,
        folds=args.folds, seed=args.seed, strategy=args.strategy,
        threads=args.threads, fingerprint=features.manifest.fingerprint)
    out = run.output(args.out)
    svm.save_model(out, model)
    report_path = run.output(args.report or out.with_name(out.name + '.report.json'))
    content = report.to_dict()
    content['fingerprint'] = features.manifest.fingerprint
    write_json(report_path, content)
    if args.csv:
        write_csv(run.output(args.csv),
                  ['C', 'gamma'] + [f"fold_{fold}" for fold in range(args.folds)] +
                  ['mean_accuracy'],
                  [[cell.C, cell.gamma] + list(cell.fold_accuracies) +
                   [cell.mean_accuracy] for cell in report.cells])
    run.write_manifest(out, [pathlib.Path(args.features)],
                       fingerprint=features.manifest.fingerprint,
                       seed=args.seed, folds=args.folds)
    print(f"C={report.selected_C} gamma={report.selected_gamma} " +
          f"cv_accuracy={report.best_cv_accuracy}")


def cmd_evaluate(args: argparse.Namespace, run: Run) -> None:
    model = svm.load_model(args.model)
    features = read_labeled_features(args.features)
    if model.fingerprint != features.manifest.fingerprint:
        raise err.FingerprintMismatch(
            'features built with different pipeline config')
    if features.split == 'train':
        logging.warning('%s is marked as training split.', args.features)
    report = svm.evaluate(model, features.matrix, features.labels)
    if args.report:
        write_json(run.output(args.report), report.to_dict())
    if args.csv:
        write_csv(run.output(args.csv),
                  ['class', 'precision', 'recall', 'support'],
                  [[int(label), float(precision), float(recall), int(support)]
                   for label, precision, recall, support in zip(
                       report.classes, report.precision, report.recall,
                       report.confusion.sum(axis=1))])
    print(f"accuracy={report.accuracy}")


def cmd_inspect(args: argparse.Namespace, run: Run) -> None:
    dataset, _ = load_dataset(args)
    if not 0 <= args.index < len(dataset):
        raise err.OutOfDomain(
            f"Index {args.index} outside of 0..{len(dataset) - 1}.")
    vector, manifest = fusion.extract(dataset.image(args.index),
                                      pipeline_config(args))
    rows = [[segment.name, position, float(vector[segment.offset + position])]
            for segment in manifest.segments
            for position in range(segment.length)]
    header = ['segment', 'index', 'value']
    if args.out:
        write_csv(run.output(args.out), header, rows)
    else:
        writer = csv.writer(sys.stdout, lineterminator='\n')
        writer.writerow(header)
        writer.writerows(rows)


# Argument parsing

def _add_dataset_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--dataset', required=True,
                        choices=sorted(datasets.PROFILES),
                        help='dataset profile')
    parser.add_argument('--images', help='IDX image file')
    parser.add_argument('--labels', help='IDX label file')
    parser.add_argument('--batches', nargs='+', help='CIFAR-10 batch files')
    parser.add_argument('--checksums',
                        help="checksum registry, 'bundled' for the shipped one")
    parser.add_argument('--config', help='pipeline configuration (INI)')
    parser.add_argument('--limit-per-class', type=int, default=None,
                        help='class-balanced subsample of this many images')
    parser.add_argument('--seed', type=int, default=0)
    parser.add_argument('--keep-orientation', action='store_true',
                        help='do not transpose EMNIST images')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='pefusion',
        description='Permutation entropy feature fusion and SVM classification')
    parser.add_argument('--version', action='version',
                        version=f"%(prog)s {_version.__version__}")
    parser.add_argument('--verbose', action='store_true')
    parser.add_argument('--quiet', action='store_true')
    threads = os.cpu_count() or 1
    commands = parser.add_subparsers(dest='command', required=True)

    extract = commands.add_parser('extract', help='compute a feature matrix')
    _add_dataset_arguments(extract)
    extract.add_argument('--features', choices=('fused', 'pixels'),
                         default='fused')
    extract.add_argument('--split', choices=('train', 'test'))
    extract.add_argument('--threads', type=int, default=threads)
    extract.add_argument('--out', required=True)
    extract.set_defaults(handler=cmd_extract)

    standardize = commands.add_parser('standardize',
                                      help='fit and apply a standardizer')
    standardize.add_argument('train')
    standardize.add_argument('--apply', nargs='*', default=list())
    standardize.add_argument('--out-dir', required=True)
    standardize.set_defaults(handler=cmd_standardize)

    for name, handler in (('train', cmd_train), ('gridsearch', cmd_gridsearch)):
        command = commands.add_parser(name, help=f"{name} an SVM")
        command.add_argument('features')
        command.add_argument('--strategy', choices=('ovo', 'ovr'), default='ovo')
        command.add_argument('--seed', type=int, default=0)
        command.add_argument('--threads', type=int, default=threads)
        command.add_argument('--out', required=True)
        command.set_defaults(handler=handler)
        if name == 'train':
            command.add_argument('--C', type=float, default=10.0)
            command.add_argument('--gamma', type=float, default=0.001)
        else:
            command.add_argument('--grid')
            command.add_argument('--folds', type=int, default=3)
            command.add_argument('--report')
            command.add_argument('--csv')

    evaluate = commands.add_parser('evaluate', help='test a model')
    evaluate.add_argument('features')
    evaluate.add_argument('--model', required=True)
    evaluate.add_argument('--report')
    evaluate.add_argument('--csv')
    evaluate.set_defaults(handler=cmd_evaluate)

    inspect = commands.add_parser('inspect',
                                  help='fused features of a single image')
    _add_dataset_arguments(inspect)
    inspect.add_argument('--index', type=int, default=0)
    inspect.add_argument('--out')
    inspect.set_defaults(handler=cmd_inspect)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(level=level, format='%(levelname)s: %(message)s')

    run = Run(args.command)
    try:
        args.handler(args, run)
    except (err.PefusionException, OSError, KeyError, TypeError,
            ValueError) as failure:
        run.discard()
        message = ' '.join(str(failure).split())
        print(f"error: {type(failure).__name__}: {message}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_SUCCESS


if __name__ == '__main__':
    sys.exit(main())
