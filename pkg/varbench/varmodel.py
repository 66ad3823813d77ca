#!/usr/bin/env python
"""Variability model: features and constraints from a Kconfig subset.

Declarations become feature variables; tristate features get a ``_MODULE``
companion. ``depends on`` and ``select`` lines become implications, and the
model's constraint is their conjunction::

    config NET
        bool "Networking"

    config TCP
        tristate "TCP/IP"
        depends on NET

translates to ``!(TCP && TCP_MODULE)`` and ``(TCP || TCP_MODULE) -> NET``.
Defaults are read but constrain nothing.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
import logging
import posixpath
import re

from varbench.exceptions import (KconfigParseError, UndeclaredFeature,
                                 FormulaSyntaxError, TooLarge)
from varbench.formula import (TRUE, Variable, Negation, Conjunction,
                              Disjunction, conjunction, disjunction, simplify,
                              parse_formula, substitute, variables, truth_table,
                              assignment_matrix)
from varbench.util import warn

logger = logging.getLogger(__name__)

__all__ = ['FeatureKind', 'VariabilityModel', 'extract_varmodel',
           'valid_configurations', 'VM_EXTRACTORS']

CHUNK_ROWS = 2 ** 16


class FeatureKind(Enum):
    BOOL = 'Bool'
    TRISTATE = 'Tristate'


@dataclass(frozen=True)
class VariabilityModel:
    """Features and constraints of a product line.

    :param features: feature name to :class:`FeatureKind`
    :param constraint: simplified conjunction of `constraints`
    :param constraints: the translated constraints in declaration order
    :param source_positions: constraint index to ``(file, line)``
    :param sources: Kconfig files read, in reading order
    """
    features: dict
    constraint: object = TRUE
    constraints: tuple = ()
    source_positions: dict = field(default_factory=dict)
    sources: tuple = ()

    def variables(self):
        """Feature variables plus ``_MODULE`` companions, sorted."""
        names = list(self.features)
        names += [f'{name}_MODULE' for name, kind in self.features.items()
                  if kind is FeatureKind.TRISTATE]
        return sorted(names)


class _Entry(object):
    __slots__ = ('name', 'kind', 'file', 'line', 'attributes')

    def __init__(self, name, file, line):
        self.name, self.file, self.line = name, file, line
        self.kind = None
        # (keyword, file, line, formulas...)
        self.attributes = []


_NAME = re.compile(r'[A-Za-z0-9_]+')
_ENTRY = re.compile(r'(config|menuconfig)\s+(\S+)')
_SOURCE = re.compile(r'source\s+"([^"]+)"')
_SELECT = re.compile(r'select\s+(\S+)(?:\s+if\s+(.+))?')
_IF = re.compile(r'\s+if\s+')
_TYPES = {'bool': FeatureKind.BOOL, 'tristate': FeatureKind.TRISTATE,
          'def_bool': FeatureKind.BOOL, 'def_tristate': FeatureKind.TRISTATE}
_CONSTANTS = {'y': True, 'n': False, 'm': True}
_UNSUPPORTED = {'menu', 'endmenu', 'choice', 'endchoice', 'if', 'endif',
                'comment', 'int', 'hex', 'string', 'range', 'imply',
                'visible', 'option', 'modules', 'optional', 'orsource',
                'rsource', 'osource'}


def _indent(line):
    return len(line.expandtabs(8)) - len(line.expandtabs(8).lstrip())


def _lines(text):
    """``(line number, raw line)`` with backslash continuations spliced."""
    pending, first = '', None
    for number, raw in enumerate(text.splitlines(), 1):
        if first is None:
            first = number
        if raw.endswith('\\'):
            pending += raw[:-1]
            continue
        yield first, pending + raw
        pending, first = '', None
    if first is not None:
        yield first, pending


class _KconfigReader(object):
    def __init__(self, root):
        self.root = Path(root) if root is not None else None
        self.entries = {}
        self.sources = []

    def path(self, rel):
        return self.root / rel if self.root is not None else Path(rel)

    def expression(self, text, file, line):
        try:
            f = parse_formula(text)
        except FormulaSyntaxError as e:
            raise KconfigParseError(
                file, line, f'unsupported expression {text!r} '
                f'({e.reason})') from None
        for name, value in _CONSTANTS.items():
            f = substitute(f, name, value)
        for name in variables(f):
            if name.startswith('__'):
                raise KconfigParseError(file, line,
                                        f'reserved feature name {name}')
        return f

    def read(self, rel, including=()):
        if rel in including:
            raise KconfigParseError(including[-1], 0,
                                    f'source cycle through {rel}')
        try:
            text = self.path(rel).read_text(encoding='utf-8')
        except FileNotFoundError:
            where = including[-1] if including else rel
            raise KconfigParseError(where, 0,
                                    f'cannot read {rel}') from None
        self.sources.append(rel)
        entry, help_indent = None, None

        for number, raw in _lines(text):
            stripped = raw.strip()
            if help_indent is not None:
                if not stripped or _indent(raw) > help_indent:
                    continue
                help_indent = None
            if not stripped or stripped.startswith('#'):
                continue
            keyword = stripped.split(None, 1)[0]

            if keyword in ('config', 'menuconfig'):
                m = _ENTRY.fullmatch(stripped)
                if m is None or not _NAME.fullmatch(m.group(2)):
                    raise KconfigParseError(rel, number,
                                            f'bad {keyword} line')
                name = m.group(2)
                if name.startswith('__'):
                    raise KconfigParseError(rel, number,
                                            f'reserved feature name {name}')
                entry = self.entries.setdefault(name,
                                                _Entry(name, rel, number))
            elif keyword == 'source':
                m = _SOURCE.fullmatch(stripped)
                if m is None:
                    raise KconfigParseError(rel, number, 'bad source line')
                target = posixpath.normpath(
                    posixpath.join(posixpath.dirname(rel), m.group(1)))
                self.read(target, including + (rel,))
                entry = None
            elif keyword == 'mainmenu':
                entry = None
            elif keyword in _UNSUPPORTED or entry is None:
                what = keyword if keyword in _UNSUPPORTED else \
                    f'{keyword} outside a config entry'
                raise KconfigParseError(
                    rel, number, f'unsupported construct: {what} (see the '
                    f'Kconfig subset in the documentation)')
            else:
                help_indent = self.attribute(entry, keyword, stripped, rel,
                                             number, _indent(raw))

    def attribute(self, entry, keyword, text, file, line, indent):
        """Record one attribute line; returns the help indentation when a
        help block starts."""
        rest = text[len(keyword):].strip()
        if keyword in ('help', '---help---'):
            return indent
        if keyword in _TYPES:
            kind = _TYPES[keyword]
            if entry.kind is not None and entry.kind is not kind:
                raise KconfigParseError(file, line,
                                        f'conflicting types for {entry.name}')
            entry.kind = kind
            entry.attributes.append(('type', file, line))
            if keyword.startswith('def_'):
                self.default(entry, rest, file, line)
        elif keyword == 'prompt':
            pass
        elif keyword == 'default':
            self.default(entry, rest, file, line)
        elif keyword == 'depends':
            if not rest.startswith('on '):
                raise KconfigParseError(file, line, 'expected "depends on"')
            expr = self.expression(rest[3:].strip(), file, line)
            entry.attributes.append(('depends', file, line, expr))
        elif keyword == 'select':
            m = _SELECT.fullmatch(text)
            if m is None or not _NAME.fullmatch(m.group(1)):
                raise KconfigParseError(file, line, 'bad select line')
            cond = TRUE if m.group(2) is None else \
                self.expression(m.group(2), file, line)
            entry.attributes.append(('select', file, line,
                                     Variable(m.group(1)), cond))
        else:
            raise KconfigParseError(file, line,
                                    f'unsupported construct: {keyword}')
        return None

    def default(self, entry, rest, file, line):
        if not rest:
            raise KconfigParseError(file, line, 'default without value')
        parts = _IF.split(rest, 1)
        exprs = [self.expression(part, file, line) for part in parts]
        entry.attributes.append(('default', file, line, *exprs))


class _Translator(object):
    def __init__(self, features, allow_undeclared):
        self.features = features
        self.allow_undeclared = allow_undeclared

    def declared(self, name, file, line):
        if name not in self.features:
            if not self.allow_undeclared:
                raise UndeclaredFeature(name, file, line)
            warn(logger, f'{file}:{line}: undeclared feature {name} '
                 f'declared as bool')
            self.features[name] = FeatureKind.BOOL

    def selected(self, name):
        """``name`` is y or m."""
        if self.features[name] is FeatureKind.TRISTATE:
            return disjunction(Variable(name), Variable(f'{name}_MODULE'))
        return Variable(name)

    def translate(self, f, file, line):
        """Replace every feature reference by its y-or-m condition."""
        if isinstance(f, Variable):
            self.declared(f.name, file, line)
            return self.selected(f.name)
        if isinstance(f, Negation):
            return Negation(self.translate(f.operand, file, line))
        if isinstance(f, (Conjunction, Disjunction)):
            return type(f)(tuple(self.translate(op, file, line)
                                 for op in f.operands))
        return f


def extract_varmodel(files, root=None, allow_undeclared=False):
    """Translate Kconfig-subset files into a variability model.

    :param files: top-level Kconfig files, read in order; ``source`` lines
                  resolve relative to the including file
    :type files: list of str
    :param root: directory the paths are relative to (default is the
                 working directory)
    :type root: str or pathlib.Path, optional
    :param allow_undeclared: declare unknown references as bool features
                             with a warning instead of failing
    :type allow_undeclared: bool, optional
    :rtype: VariabilityModel
    :raises KconfigParseError: on syntax outside the subset
    :raises UndeclaredFeature: on references to undeclared names
    """
    reader = _KconfigReader(root)
    for rel in files:
        reader.read(posixpath.normpath(str(rel).replace('\\', '/')))

    features = {}
    for entry in reader.entries.values():
        if entry.kind is None:
            raise KconfigParseError(entry.file, entry.line,
                                    f'{entry.name} has no type')
        features[entry.name] = entry.kind

    translator = _Translator(features, allow_undeclared)
    constraints, positions = [], {}

    def add(formula, file, line):
        positions[len(constraints)] = (file, line)
        constraints.append(simplify(formula))

    for entry in reader.entries.values():
        own = translator.selected(entry.name)
        if entry.kind is FeatureKind.TRISTATE:
            file, line = next((a[1], a[2]) for a in entry.attributes
                              if a[0] == 'type')
            add(Negation(Conjunction((Variable(entry.name),
                                      Variable(f'{entry.name}_MODULE')))),
                file, line)
        for keyword, file, line, *exprs in entry.attributes:
            if keyword == 'depends':
                add(disjunction(Negation(own),
                                translator.translate(exprs[0], file, line)),
                    file, line)
            elif keyword == 'select':
                target, cond = exprs
                translator.declared(target.name, file, line)
                premise = conjunction(own,
                                      translator.translate(cond, file, line))
                add(disjunction(Negation(premise),
                                translator.selected(target.name)),
                    file, line)
            elif keyword == 'default':
                for expr in exprs:
                    translator.translate(expr, file, line)

    model = VariabilityModel(features, simplify(conjunction(*constraints)),
                             tuple(constraints), positions,
                             tuple(reader.sources))
    logger.info('variability model: %d features, %d constraints',
                len(features), len(constraints))
    return model


VM_EXTRACTORS = {'kconfig': extract_varmodel}


def valid_configurations(vm, bound=16, extra=()):
    """Every assignment satisfying ``vm.constraint``.

    Assignments run in binary counting order over the sorted variable names,
    false before true.

    :param vm: the model to enumerate
    :type vm: VariabilityModel
    :param bound: maximum number of features; up to ``2 * bound`` variables
                  (companions included) are enumerated
    :type bound: int, optional
    :param extra: further unconstrained variables to enumerate
    :type extra: iterable of str, optional
    :returns: list of dicts mapping variable names to booleans
    :raises TooLarge: if there are more than ``2 * bound`` variables
    """
    names = sorted(set(vm.variables()) | set(extra))
    if len(names) > 2 * bound:
        raise TooLarge(len(names), 2 * bound)
    total = 2 ** len(names)
    valid = []
    for start in range(0, total, CHUNK_ROWS):
        matrix = assignment_matrix(len(names), start,
                                   min(start + CHUNK_ROWS, total))
        rows = matrix[truth_table(vm.constraint, names, matrix)]
        valid.extend(dict(zip(names, map(bool, row))) for row in rows)
    return valid


if __name__ == '__main__':
    import argparse
    from varbench.formula import render
    parser = argparse.ArgumentParser(description='Translate Kconfig files '
                                     'into propositional constraints.')
    parser.add_argument('files', nargs='+')
    parser.add_argument('--allow-undeclared', action='store_true')
    parser.add_argument('--count', action='store_true',
                        help='count the valid configurations')
    args = parser.parse_args()

    vm = extract_varmodel(args.files, allow_undeclared=args.allow_undeclared)
    for i, c in enumerate(vm.constraints):
        file, line = vm.source_positions[i]
        print(f'{file}:{line}\t{render(c)}')
    if args.count:
        print(f'{len(valid_configurations(vm))} valid configurations')
