"""Exceptions raised by varbench.

Every error class carries the process exit code of its category
(:attr:`VarbenchError.exit_code`): 1 configuration, 2 extraction and cache,
3 analysis, 4 IO and archives. Constructor arguments are kept in ``args`` so
that errors raised inside worker processes survive pickling.
"""


class VarbenchError(Exception):
    """Base class of all varbench errors."""
    exit_code = 1


class ConfigError(VarbenchError, ValueError):
    exit_code = 1


class ConfigSyntaxError(ConfigError):
    def __init__(self, line, text=''):
        super().__init__(line, text)
        self.line, self.text = line, text

    def __str__(self):
        return f'line {self.line}: expected "key = value", got {self.text!r}'


class InvalidValue(ConfigError):
    def __init__(self, key, reason):
        super().__init__(key, reason)
        self.key, self.reason = key, reason

    def __str__(self):
        return f'invalid value for {self.key}: {self.reason}'


class MissingRequired(ConfigError):
    def __init__(self, key):
        super().__init__(key)
        self.key = key

    def __str__(self):
        return f'missing required key: {self.key}'


class PipelineError(ConfigError):
    """Base class of pipeline wiring errors."""


class PipelineSyntaxError(PipelineError):
    def __init__(self, position, reason):
        super().__init__(position, reason)
        self.position, self.reason = position, reason

    def __str__(self):
        return f'pipeline syntax error at position {self.position}: ' \
               f'{self.reason}'


class UnknownComponent(PipelineError):
    def __init__(self, name, position=0):
        super().__init__(name, position)
        self.name, self.position = name, position

    def __str__(self):
        return f'unknown component {self.name!r} at position {self.position}'


class ArityMismatch(PipelineError):
    def __init__(self, name, position, reason):
        super().__init__(name, position, reason)
        self.name, self.position, self.reason = name, position, reason

    def __str__(self):
        return f'{self.name} at position {self.position}: {self.reason}'


class KindMismatch(PipelineError):
    def __init__(self, name, position, expected, given):
        super().__init__(name, position, expected, given)
        self.name, self.position = name, position
        self.expected, self.given = expected, given

    def __str__(self):
        return f'{self.name} at position {self.position} expects ' \
               f'{self.expected}, got {self.given}'


class MissingInput(PipelineError):
    _long_names = {'code': 'code model', 'build': 'build model',
                   'vm': 'variability model'}

    def __init__(self, kind, component=''):
        super().__init__(kind, component)
        self.kind, self.component = kind, component

    def __str__(self):
        who = self.component or 'the pipeline'
        name = self._long_names.get(self.kind, self.kind)
        return f'{who} requires the {name} ({self.kind}) pipeline, but ' \
               f'{self.kind}.extractor is not configured'


class ExtractionError(VarbenchError):
    exit_code = 2


class MalformedExpression(ExtractionError, ValueError):
    def __init__(self, file, line, reason=''):
        super().__init__(file, line, reason)
        self.file, self.line, self.reason = file, line, reason

    def __str__(self):
        return f'{self.file}:{self.line}: malformed expression ' \
               f'({self.reason})'


class UnbalancedDirectives(ExtractionError):
    def __init__(self, file, line, reason=''):
        super().__init__(file, line, reason)
        self.file, self.line, self.reason = file, line, reason

    def __str__(self):
        return f'{self.file}:{self.line}: unbalanced directives ' \
               f'({self.reason})'


class MissingMakefile(ExtractionError):
    def __init__(self, root, names=('Makefile', 'Kbuild')):
        super().__init__(root, names)
        self.root, self.names = root, tuple(names)

    def __str__(self):
        return f'no {" or ".join(self.names)} in {self.root}'


class UnbalancedConditional(ExtractionError):
    def __init__(self, file, line, reason=''):
        super().__init__(file, line, reason)
        self.file, self.line, self.reason = file, line, reason

    def __str__(self):
        return f'{self.file}:{self.line}: unbalanced conditional ' \
               f'({self.reason})'


class KconfigParseError(ExtractionError):
    def __init__(self, file, line, reason):
        super().__init__(file, line, reason)
        self.file, self.line, self.reason = file, line, reason

    def __str__(self):
        return f'{self.file}:{self.line}: {self.reason}'


class UndeclaredFeature(ExtractionError):
    def __init__(self, name, file, line):
        super().__init__(name, file, line)
        self.name, self.file, self.line = name, file, line

    def __str__(self):
        return f'{self.file}:{self.line}: reference to undeclared feature ' \
               f'{self.name}'


class FormulaSyntaxError(ExtractionError, ValueError):
    def __init__(self, position, reason, text=''):
        super().__init__(position, reason, text)
        self.position, self.reason, self.text = position, reason, text

    def __str__(self):
        return f'formula syntax error at position {self.position}: ' \
               f'{self.reason} in {self.text!r}'


class CacheError(ExtractionError):
    """Base class of cache read failures."""


class MissingCache(CacheError):
    def __init__(self, kind, path):
        super().__init__(kind, path)
        self.kind, self.path = kind, path

    def __str__(self):
        return f'no {self.kind} cache at {self.path}'


class VersionMismatch(CacheError):
    def __init__(self, path, found, expected):
        super().__init__(path, found, expected)
        self.path, self.found, self.expected = path, found, expected

    def __str__(self):
        return f'{self.path}: cache format version {self.found}, ' \
               f'expected {self.expected}'


class FingerprintMismatch(CacheError):
    def __init__(self, kind, path):
        super().__init__(kind, path)
        self.kind, self.path = kind, path

    def __str__(self):
        return f'{self.kind} cache {self.path} does not match the current ' \
               f'sources (set cache.ignore_fingerprint = true to reuse it)'


class AnalysisError(VarbenchError):
    exit_code = 3


class UnmappedVariable(AnalysisError, LookupError):
    def __init__(self, name):
        super().__init__(name)
        self.name = name

    def __str__(self):
        return f'assignment does not map variable {self.name}'


class TooLarge(AnalysisError):
    def __init__(self, count, limit):
        super().__init__(count, limit)
        self.count, self.limit = count, limit

    def __str__(self):
        return f'{self.count} variables exceed the enumeration limit of ' \
               f'{self.limit}'


class ArchiveError(VarbenchError):
    exit_code = 4


class ArchiveExists(ArchiveError):
    def __init__(self, path):
        super().__init__(path)
        self.path = path

    def __str__(self):
        return f'{self.path} exists (set archive.overwrite = true to ' \
               f'replace it)'


class ArchiveVerificationError(ArchiveError):
    def __init__(self, path, reason):
        super().__init__(path, reason)
        self.path, self.reason = path, reason

    def __str__(self):
        return f'{self.path}: {self.reason}'


class OutputError(VarbenchError, OSError):
    exit_code = 4

    def __init__(self, path, reason):
        super().__init__(path, reason)
        self.path, self.reason = path, reason

    def __str__(self):
        return f'{self.path}: {self.reason}'
