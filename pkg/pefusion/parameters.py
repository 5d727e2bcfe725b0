#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Check Parameters
~~~~~~~~~~~~~~~~~~~~~
Checks for user supplied parameters, mostly values read from
configuration files and command line flags.

Released under the Apache License 2.0
"""

import logging
import math
from typing import Iterable, Optional, Union

from pefusion import err


def convert_to_set(convert_this: Union[list, set, str, tuple]) -> set:
    """ Convert a string, a tuple, or a list into a set
        (i.e. no duplicates, unordered)"""

    if isinstance(convert_this, set):
        return convert_this
    if isinstance(convert_this, str):
        return {convert_this}
    if isinstance(convert_this, (list, tuple)):
        return set(convert_this)
    raise TypeError('The function calling this expects a set.')


def validate_dict_keys(dict_to_check: dict,
                       allowed_keys: Union[list, set, str, tuple],
                       necessary_keys: Optional[Union[list, set, str, tuple]] = None,
                       dict_name: Optional[str] = None) -> bool:
    """Check a dictionary (for example a section of a configuration file)
       for misspelled and for missing keys.
       Raises InvalidConfiguration naming the key and the dictionary."""

    dict_name = dict_name if dict_name else 'dictionary'
    allowed = convert_to_set(allowed_keys)
    necessary = convert_to_set(necessary_keys) if necessary_keys else set()

    if necessary - allowed:
        raise err.ContradictoryParameters(
            "Contradiction: Not all necessary keys are in the allowed keys set!")

    try:
        found_keys = set(dict_to_check.keys())
    except AttributeError as no_dict:
        raise AttributeError('Expected a dictionary for the dict_to_check ' +
                             'parameter!') from no_dict

    for key in sorted(found_keys - allowed):
        msg = f"Unknown key '{key}' in {dict_name}"
        logging.error(msg)
        raise err.InvalidConfiguration(msg)

    for key in sorted(necessary - found_keys):
        msg = f"Necessary key '{key}' missing in {dict_name}"
        logging.error(msg)
        raise err.InvalidConfiguration(msg)

    logging.debug('Keys of %s are valid.', dict_name)
    return True


def enforce_int_range(parameter_name: str,
                      given_value: int,
                      minimum_value: int,
                      maximum_value: Optional[int] = None) -> int:
    """Check that an integer lies within [minimum_value, maximum_value].
       The maximum is optional. Booleans are not accepted as integers."""
    if type(given_value) != int:  # pylint: disable=unidiomatic-typecheck
        raise TypeError(f"{parameter_name} must be an integer.")
    if maximum_value is not None and minimum_value > maximum_value:
        raise err.ContradictoryParameters(
            "Minimum must not be larger than maximum value.")
    if given_value < minimum_value:
        raise err.InvalidConfiguration(
            f"{parameter_name} = {given_value} is below the minimum " +
            f"of {minimum_value}.")
    if maximum_value is not None and given_value > maximum_value:
        raise err.InvalidConfiguration(
            f"{parameter_name} = {given_value} is above the maximum " +
            f"of {maximum_value}.")
    return given_value


def enforce_positive(parameter_name: str,
                     given_value: Union[int, float]) -> float:
    "Check that a number is finite and strictly positive."
    if isinstance(given_value, bool) or not isinstance(given_value, (int, float)):
        raise TypeError(f"{parameter_name} must be numeric.")
    if not math.isfinite(given_value) or given_value <= 0:
        raise err.InvalidConfiguration(
            f"{parameter_name} must be a positive number, got {given_value}.")
    return float(given_value)


def enforce_choice(parameter_name: str,
                   given_value: str,
                   choices: Iterable[str]) -> str:
    "Check that a string is one of the allowed choices."
    choices = tuple(choices)
    if given_value not in choices:
        raise err.InvalidConfiguration(
            f"{parameter_name} must be one of {', '.join(choices)}, " +
            f"got '{given_value}'.")
    return given_value


def enforce_boolean(parameter_value: bool,
                    parameter_name: Optional[str] = None) -> None:
    """Raise a ValueError if the parameter is not of type bool."""
    if type(parameter_value) != bool:  # pylint: disable=unidiomatic-typecheck
        parameter_name = parameter_name if parameter_name else 'parameter'
        raise ValueError(f"Value of {parameter_name} must be boolean," +
                         "i.e True / False (without quotation marks).")
