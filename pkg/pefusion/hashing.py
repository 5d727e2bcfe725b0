#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Hash functionality for pefusion
~~~~~~~~~~~~~~~~~~~~~
* SHA-256 checksums of dataset files and a plain text registry of
  expected values.
* Fingerprints of configurations, so files produced with different
  pipeline settings can be told apart.

Released under the Apache License 2.0
"""


import hashlib
import json
import logging
import pathlib
from typing import Dict, Optional, Union

from pefusion import err

CHUNK_SIZE = 1 << 20


def calculate_file_hash(file_path: Union[pathlib.Path, str],
                        expected_hash: Optional[str] = None) -> str:
    """Calculate the SHA-256 hash of a file.
       If you provide expected_hash this will raise ChecksumMismatch
       in case it does not match the calculated hash."""
    h = hashlib.sha256()
    try:
        with open(pathlib.Path(file_path), 'rb') as file:
            for chunk in iter(lambda: file.read(CHUNK_SIZE), b''):
                h.update(chunk)
    except FileNotFoundError:
        logging.exception(
            'Cannot calculate hash: File not found or not readable.')
        raise
    except PermissionError:
        logging.exception(
            'Cannot calculate file hash: insufficient permissions.')
        raise
    calculated_hash = h.hexdigest()
    if expected_hash and expected_hash.strip().lower() != calculated_hash:
        mismatch_message = ("Mismatch between calculated and expected " +
                            f"sha256 hash for {file_path}")
        logging.error(mismatch_message)
        raise err.ChecksumMismatch(mismatch_message)
    return calculated_hash


def load_checksum_registry(registry_path: Union[pathlib.Path, str]
                           ) -> Dict[str, str]:
    """Read a registry of expected checksums.
       One 'name sha256' pair per line. Empty lines and lines
       starting with # are ignored."""
    registry: Dict[str, str] = dict()
    text = pathlib.Path(registry_path).read_text(encoding='utf-8')
    for line_number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split()
        if len(parts) != 2 or len(parts[1]) != 64:
            raise err.InvalidConfiguration(
                f"Malformed line {line_number} in checksum registry " +
                f"{registry_path}")
        registry[parts[0]] = parts[1].lower()
    logging.debug('%s checksums in registry.', len(registry))
    return registry


def verify_against_registry(file_path: Union[pathlib.Path, str],
                            registry: Dict[str, str]) -> bool:
    """Compare a file with the registry entry for its basename.
       Returns False if the file is not registered and raises
       ChecksumMismatch if it is registered with another checksum."""
    name = pathlib.Path(file_path).name
    if name not in registry:
        logging.warning('No registered checksum for %s', name)
        return False
    calculate_file_hash(file_path, registry[name])
    logging.info('Checksum of %s verified.', name)
    return True


def fingerprint(mapping: dict) -> str:
    """SHA-256 of the canonical JSON form of a mapping
       (sorted keys, no whitespace)."""
    canonical = json.dumps(mapping, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()
