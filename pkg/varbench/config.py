"""Experiment configuration.

A configuration is a properties file::

    source_tree = .
    output_dir = out
    analysis.pipeline = FeatureEffects( \\
        PcFinder(cmComponent(), bmComponent()))
    code.extractor = cpp
    build.extractor = kbuild

Every recognized key is validated when the file is loaded and has a
documented default (see :data:`SCHEMA`). Unknown keys and repeated keys are
reported as warnings and kept.
"""

from collections import namedtuple
from pathlib import Path
import hashlib
import logging

from varbench.buildmodel import BUILD_EXTRACTORS
from varbench.exceptions import (ConfigSyntaxError, InvalidValue,
                                 MissingRequired)
from varbench.util import LOG_LEVELS, warn

logger = logging.getLogger(__name__)

__all__ = ['Config', 'SCHEMA', 'PIPELINE_KINDS', 'PRESETS', 'load_config',
           'load_config_file', 'parse_bool']

PIPELINE_KINDS = ('code', 'build', 'vm')
PRESETS = ('feature_effects', 'dead_blocks', 'metrics')
CODE_EXTRACTORS = ('cpp',)
VM_EXTRACTORS = ('kconfig',)

_TRUE = {'true', 'yes', 'on', '1'}
_FALSE = {'false', 'no', 'off', '0'}


def parse_bool(value):
    text = value.strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE:
        return False
    raise ValueError(f'expected a boolean, got {value!r}')


def _positive(value):
    try:
        number = int(value)
    except ValueError:
        raise ValueError(f'expected a positive integer, got {value!r}') \
            from None
    if number < 1:
        raise ValueError(f'expected a positive integer, got {number}')
    return number


def _text(value):
    if not value:
        raise ValueError('empty value')
    return value


def _choice(*choices):
    def parse(value):
        if value not in choices:
            raise ValueError(f'expected one of {", ".join(choices)}, '
                             f'got {value!r}')
        return value
    return parse


def _names(value):
    return tuple(item.strip() for item in value.split(',') if item.strip())


def _level(value):
    if value.lower() not in LOG_LEVELS:
        raise ValueError(f'expected one of error, warn, info, debug, got '
                         f'{value!r}')
    return value.lower()


Setting = namedtuple('Setting', ['default', 'parse', 'doc'])

#: Recognized keys. A default of None means the key is absent unless set.
SCHEMA = {
    'source_tree': Setting(None, _text, 'product line root (required)'),
    'output_dir': Setting(None, _text, 'result directory (required)'),
    'analysis.pipeline': Setting(None, _text, 'pipeline DSL text'),
    'analysis.preset': Setting(None, _choice(*PRESETS),
                               'programmed pipeline'),
    'analysis.output.intermediate_results': Setting(
        '', _names, 'components whose tables are written as well'),
    'analysis.output.format': Setting('csv', _choice('csv', 'json'),
                                      'result file format'),
    'analysis.sequential_components': Setting(
        '', _names, 'components that wait for complete inputs'),
    'code.extractor': Setting(None, _choice(*CODE_EXTRACTORS),
                              'code extractor; absent disables the pipeline'),
    'code.patterns': Setting('**/*.c, **/*.h', _names, 'discovery globs'),
    'code.parallel': Setting('true', parse_bool,
                             'extract in `jobs` worker processes'),
    'build.extractor': Setting(None, _choice(*sorted(BUILD_EXTRACTORS)),
                               'build extractor; absent disables the '
                               'pipeline'),
    'build.root': Setting('.', _text, 'build tree root below source_tree'),
    'build.tristate': Setting('true', parse_bool, 'tristate encoding'),
    'build.missing_file_pc': Setting('true', parse_bool,
                                     'PC of files without build entry'),
    'build.pclist_file': Setting('presence_conditions.txt', _text,
                                 'listing read by the pclist extractor'),
    'build.parallel': Setting('true', parse_bool,
                              'run the build pipeline in its own task'),
    'vm.extractor': Setting(None, _choice(*VM_EXTRACTORS),
                            'variability model extractor; absent disables '
                            'the pipeline'),
    'vm.files': Setting('Kconfig', _names, 'top-level Kconfig files'),
    'vm.allow_undeclared': Setting('false', parse_bool,
                                   'auto-declare unknown names as bool'),
    'vm.parallel': Setting('true', parse_bool,
                           'run the vm pipeline in its own task'),
    'cache.dir': Setting(None, _text, 'cache directory (default is '
                         '<output_dir>/cache)'),
    'cache.ignore_fingerprint': Setting('false', parse_bool,
                                        'accept stale caches'),
    'variability.prefix': Setting('CONFIG_', str, 'canonicalization prefix'),
    'jobs': Setting('1', _positive, 'worker processes'),
    'pipeline.buffer': Setting('64', _positive, 'stream buffer capacity'),
    'pipeline.sequential': Setting('false', parse_bool, 'single-task mode'),
    'output.keep_partial': Setting('false', parse_bool,
                                   'keep result files of failed runs'),
    'log.level': Setting('info', _level, 'run.log level'),
    'log.file': Setting('run.log', _text, 'log file inside output_dir'),
    'log.progress': Setting('false', parse_bool, 'progress bars'),
    'archive': Setting('false', parse_bool, 'archive after the run'),
    'archive.path': Setting(None, _text, 'archive location (default is '
                            '<output_dir>/experiment.zip)'),
    'archive.include_sources': Setting('true', parse_bool,
                                       'copy source_tree into the archive'),
    'archive.overwrite': Setting('false', parse_bool,
                                 'replace an existing archive'),
}
for _kind in PIPELINE_KINDS:
    SCHEMA[f'{_kind}.cache.read'] = Setting('false', parse_bool,
                                            f'read the {_kind} cache')
    SCHEMA[f'{_kind}.cache.write'] = Setting('false', parse_bool,
                                             f'write the {_kind} cache')


def _parse_properties(text):
    """``[(line number, key, value), ...]`` of a properties text."""
    lines = text.splitlines()
    pairs, i = [], 0
    while i < len(lines):
        number, line = i + 1, lines[i].strip()
        i += 1
        if not line or line[0] in '#!':
            continue
        while line.endswith('\\') and i < len(lines):
            line = line[:-1] + lines[i].strip()
            i += 1
        if line.endswith('\\'):
            line = line[:-1]
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigSyntaxError(number, line)
        pairs.append((number, key, value.strip()))
    return pairs


def _merge(raw, pairs, origin):
    """Copy of `raw` with the override `pairs` applied."""
    raw = dict(raw)
    for pair in pairs:
        if isinstance(pair, str):
            key, sep, value = pair.partition('=')
            if not sep or not key.strip():
                raise ConfigSyntaxError(0, pair)
            key, value = key.strip(), value.strip()
        else:
            key, value = pair
            value = str(value)
        if key not in SCHEMA:
            warn(logger, f'unknown configuration key {key}')
        if key in raw and raw[key] != value:
            logger.warning('%s: %s value %r replaces %r', key, origin,
                           value, raw[key])
        raw[key] = value
    return raw


class Config(object):
    """Validated configuration.

    Values are kept as text (:attr:`raw`) and parsed on validation; item
    access returns the typed value, with defaults filled in.

    :param raw: key to text value, in file order
    :type raw: dict
    :param base_dir: directory relative paths resolve against (default is
                     the working directory)
    :type base_dir: str or pathlib.Path, optional
    """

    def __init__(self, raw, base_dir=None):
        self.raw = dict(raw)
        self.base_dir = Path(base_dir) if base_dir is not None else Path('.')
        self.values = self._validate()

    def _validate(self):
        values = {}
        for key, setting in SCHEMA.items():
            text = self.raw.get(key, setting.default)
            if text is None:
                values[key] = None
                continue
            try:
                values[key] = setting.parse(text)
            except ValueError as e:
                raise InvalidValue(key, str(e)) from None
        for key in ('source_tree', 'output_dir'):
            if values[key] is None:
                raise MissingRequired(key)
        pipeline, preset = values['analysis.pipeline'], \
            values['analysis.preset']
        if pipeline is None and preset is None:
            raise MissingRequired('analysis.pipeline or analysis.preset')
        if pipeline is not None and preset is not None:
            raise InvalidValue('analysis.pipeline', 'set either '
                               'analysis.pipeline or analysis.preset, '
                               'not both')
        if values['pipeline.sequential'] and values['jobs'] != 1:
            raise InvalidValue('pipeline.sequential', 'single-task mode '
                               'needs jobs = 1')
        return values

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        value = self.values.get(key)
        return default if value is None else value

    def path(self, key):
        """Typed path value, resolved against :attr:`base_dir`."""
        value = self.values.get(key)
        if value is None:
            if key == 'cache.dir':
                return self.path('output_dir') / 'cache'
            if key == 'archive.path':
                return self.path('output_dir') / 'experiment.zip'
            return None
        return self.base_dir / value

    def active(self, kind):
        """True if the `kind` pipeline has an extractor."""
        return self.values[f'{kind}.extractor'] is not None

    def with_overrides(self, pairs, origin='override'):
        """Copy with `pairs` applied, re-validated.

        :param pairs: ``(key, value)`` tuples or ``key=value`` strings
        :param origin: where the values come from, for the log notice
        """
        return Config(_merge(self.raw, pairs, origin), self.base_dir)

    def effective(self):
        """``{key: text}`` of every set or defaulted key, sorted."""
        items = {key: setting.default for key, setting in SCHEMA.items()
                 if setting.default is not None}
        items.update(self.raw)
        return dict(sorted(items.items()))

    def to_properties(self):
        return ''.join(f'{key} = {value}\n'
                       for key, value in self.effective().items())

    def fingerprint(self):
        """SHA-256 over the sorted effective ``key=value`` lines."""
        text = ''.join(f'{key}={value}\n'
                       for key, value in self.effective().items())
        return hashlib.sha256(text.encode('utf-8')).hexdigest()


def load_config(text, base_dir=None, overrides=(), origin='override'):
    """Parse properties text, apply `overrides` and validate the result.

    :param overrides: ``(key, value)`` tuples or ``key=value`` strings that
                      replace file values before validation

    :raises ConfigSyntaxError: on a line that is not ``key = value``
    :raises InvalidValue: on a value that does not validate
    :raises MissingRequired: if a required key is absent
    """
    raw, seen = {}, {}
    for number, key, value in _parse_properties(text):
        if key in seen:
            warn(logger, f'line {number}: {key} repeats line {seen[key]}; '
                 f'the later value is used')
        elif key not in SCHEMA:
            warn(logger, f'line {number}: unknown configuration key {key}')
        seen[key] = number
        raw[key] = value
    return Config(_merge(raw, overrides, origin), base_dir)


def load_config_file(path, overrides=()):
    """Load a configuration file; relative paths resolve against its
    directory."""
    path = Path(path)
    return load_config(path.read_text(encoding='utf-8'), path.parent,
                       overrides)
