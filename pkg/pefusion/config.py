#!/usr/bin/env python3
# -*- coding: utf-8 -*-

"""
Pipeline configuration files
~~~~~~~~~~~~~~~~~~~~~
A PipelineConfig is stored as an INI file with one section per
sub-configuration. Keys are case sensitive. Missing sections or
keys fall back to the Fashion-MNIST defaults, unknown ones are
rejected.

    [GEOMETRY]     height, width, channels
    [ORDINAL]      d, tau
    [DIRECTIONAL]  K, aggregate
    [PATCH]        patch_h, patch_w, stride, bidirectional
    [HOG]          cell_h, cell_w, n_bins, block_cells, norm_epsilon,
                   soft_binning
    [LBP]          P, R, mode
    [PIPELINE]     channel_mode

Released under the Apache License 2.0
"""

import configparser
import logging
import pathlib
from typing import Any, Callable, Dict, Union

from pefusion import err
from pefusion import parameters
from pefusion.descriptors import HogConfig, LbpConfig
from pefusion.fusion import PipelineConfig
from pefusion.imagefeat import DirectionalConfig, PatchConfig
from pefusion.ordinal import OrdinalConfig

PROFILE_DIRECTORY = pathlib.Path(__file__).parent / 'profiles'

# section -> key -> converter
_SCHEMA: Dict[str, Dict[str, str]] = {
    'GEOMETRY': {'height': 'int', 'width': 'int', 'channels': 'int'},
    'ORDINAL': {'d': 'int', 'tau': 'int'},
    'DIRECTIONAL': {'K': 'int', 'aggregate': 'str'},
    'PATCH': {'patch_h': 'int', 'patch_w': 'int', 'stride': 'int',
              'bidirectional': 'bool'},
    'HOG': {'cell_h': 'int', 'cell_w': 'int', 'n_bins': 'int',
            'block_cells': 'int', 'norm_epsilon': 'float',
            'soft_binning': 'bool'},
    'LBP': {'P': 'int', 'R': 'int', 'mode': 'str'},
    'PIPELINE': {'channel_mode': 'str'},
}


def _new_parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None)
    # keep K, P and R upper case
    parser.optionxform = str  # type: ignore[assignment, method-assign]
    return parser


def _section_values(parser: configparser.ConfigParser,
                    section: str) -> Dict[str, Any]:
    if not parser.has_section(section):
        return dict()
    options = dict(parser.items(section))
    parameters.validate_dict_keys(options, set(_SCHEMA[section]),
                                  dict_name=f"section [{section}]")
    getters: Dict[str, Callable[[str, str], Any]] = {
        'int': parser.getint,
        'float': parser.getfloat,
        'bool': parser.getboolean,
        'str': parser.get}
    values = dict()
    for key in options:
        try:
            values[key] = getters[_SCHEMA[section][key]](section, key)
        except ValueError as invalid:
            raise err.InvalidConfiguration(
                f"[{section}] {key}: {invalid}") from invalid
    return values


def _build(section: str, factory: Callable[..., Any], values: Dict[str, Any]) -> Any:
    try:
        return factory(**values)
    except (err.InvalidConfiguration, TypeError, ValueError) as invalid:
        if isinstance(invalid, err.PefusionException) and \
                not isinstance(invalid, err.InvalidConfiguration):
            raise
        raise err.InvalidConfiguration(f"[{section}] {invalid}") from invalid


def _from_parser(parser: configparser.ConfigParser) -> PipelineConfig:
    for section in parser.sections():
        if section not in _SCHEMA:
            raise err.InvalidConfiguration(
                f"Unknown section [{section}]. Known sections: " +
                ', '.join(_SCHEMA))
    ordinal = _build('ORDINAL', OrdinalConfig, _section_values(parser, 'ORDINAL'))
    directional = _build('DIRECTIONAL', DirectionalConfig,
                         dict(_section_values(parser, 'DIRECTIONAL'),
                              ordinal=ordinal))
    return PipelineConfig(
        ordinal=ordinal,
        directional=directional,
        patch=_build('PATCH', PatchConfig, _section_values(parser, 'PATCH')),
        hog=_build('HOG', HogConfig, _section_values(parser, 'HOG')),
        lbp=_build('LBP', LbpConfig, _section_values(parser, 'LBP')),
        **_section_values(parser, 'GEOMETRY'),
        **_section_values(parser, 'PIPELINE'))


def parse_pipeline_config(text: str) -> PipelineConfig:
    "Read a pipeline configuration from the text of an INI file."
    parser = _new_parser()
    try:
        parser.read_string(text)
    except configparser.Error as malformed:
        raise err.InvalidConfiguration(
            f"Malformed configuration: {malformed}") from malformed
    return _from_parser(parser)


def load_pipeline_config(path: Union[pathlib.Path, str]) -> PipelineConfig:
    "Read a pipeline configuration file."
    config_path = pathlib.Path(path)
    try:
        text = config_path.read_text(encoding='utf-8')
    except FileNotFoundError:
        logging.exception('Configuration file %s not found.', config_path)
        raise
    config = parse_pipeline_config(text)
    logging.debug('Loaded pipeline configuration from %s', config_path)
    return config


def _ini_value(value: Any) -> str:
    if isinstance(value, bool):
        return 'yes' if value else 'no'
    return repr(value) if isinstance(value, float) else str(value)


def pipeline_config_to_ini(config: PipelineConfig) -> str:
    "INI text that parse_pipeline_config() turns back into config."
    objects = {'GEOMETRY': config, 'ORDINAL': config.ordinal,
               'DIRECTIONAL': config.directional, 'PATCH': config.patch,
               'HOG': config.hog, 'LBP': config.lbp, 'PIPELINE': config}
    lines = []
    for section, keys in _SCHEMA.items():
        lines.append(f"[{section}]")
        source = objects[section]
        for key in keys:
            lines.append(f"{key} = {_ini_value(getattr(source, key))}")
        lines.append('')
    return '\n'.join(lines)


def profile_names() -> list:
    return sorted(path.stem for path in PROFILE_DIRECTORY.glob('*.ini'))


def profile_config(profile_name: str) -> PipelineConfig:
    "Default pipeline configuration bundled for a dataset profile."
    path = PROFILE_DIRECTORY / f"{profile_name}.ini"
    if not path.is_file():
        raise err.InvalidConfiguration(
            f"No bundled configuration for profile '{profile_name}'. " +
            f"Known profiles: {', '.join(profile_names())}")
    return load_pipeline_config(path)
