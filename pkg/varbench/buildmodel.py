#!/usr/bin/env python
"""Build model: presence conditions of source files from Kbuild Makefiles.

Only the pattern subset used to select objects is understood::

    obj-y += main.o util.o
    obj-$(CONFIG_NET) += net/
    ifeq ($(CONFIG_DRIVER),y)
    obj-y += driver.o
    endif

Nothing is evaluated by Make; every other line is recorded as unresolved.
"""

from collections import defaultdict, namedtuple
from dataclasses import dataclass
from pathlib import Path
import logging
import posixpath
import re

from varbench.exceptions import (MissingMakefile, UnbalancedConditional,
                                 FormulaSyntaxError)
from varbench.formula import (TRUE, Variable, Negation, conjunction,
                              disjunction, simplify, render, parse_formula)
from varbench.util import normalize_path

logger = logging.getLogger(__name__)

__all__ = ['BuildModel', 'BuildOptions', 'Unresolved', 'extract_build',
           'extract_pclist', 'lookup_pc', 'BUILD_EXTRACTORS',
           'MAKEFILE_NAMES']

MAKEFILE_NAMES = ('Kbuild', 'Makefile')

Unresolved = namedtuple('Unresolved', ['file', 'line', 'text'])


@dataclass(frozen=True)
class BuildModel:
    """Presence condition per source file.

    :param entries: relative source path to simplified presence condition
    :param unresolved: skipped constructs, sorted by file then line
    :param sources: relative paths of the build files that were read
    """
    entries: dict
    unresolved: tuple = ()
    sources: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'entries', dict(sorted(self.entries.items())))
        object.__setattr__(self, 'unresolved',
                           tuple(sorted(Unresolved(*u)
                                        for u in self.unresolved)))
        object.__setattr__(self, 'sources', tuple(sorted(self.sources)))


@dataclass(frozen=True)
class BuildOptions:
    prefix: str = 'CONFIG_'
    tristate: bool = True
    root: str = '.'
    pclist_file: str = 'presence_conditions.txt'


_ASSIGN = re.compile(r'obj-(?:(y|m)|\$\(([^()]*)\))\s*(?:\+=|:=|=)\s*(.*)')
_IFEQ = re.compile(r'(ifeq|ifneq)\s*\(\s*\$\(([A-Za-z_]\w*)\)\s*,\s*(y?)\s*\)')
_IFDEF = re.compile(r'(ifdef|ifndef)\s+([A-Za-z_]\w*)')
_CONDITIONAL = re.compile(r'(ifeq|ifneq|ifdef|ifndef)\b')


def _logical_lines(text):
    """``(line number, text)`` with continuations spliced and comments
    removed; blank lines are dropped."""
    lines, pending, first = [], '', None
    for number, raw in enumerate(text.splitlines(), 1):
        if first is None:
            first = number
        if raw.endswith('\\'):
            pending += raw[:-1] + ' '
            continue
        line = (pending + raw).split('#', 1)[0].strip()
        if line:
            lines.append((first, line))
        pending, first = '', None
    if pending.strip():
        lines.append((first, pending.split('#', 1)[0].strip()))
    return lines


class _KbuildWalker(object):
    def __init__(self, tree, opts):
        self.tree, self.opts = Path(tree), opts
        self.conditions = defaultdict(list)
        self.unresolved = []
        self.sources = []

    def feature(self, reference):
        """Canonical feature name of ``CONFIG_X``, or None."""
        prefix = self.opts.prefix
        if prefix and not reference.startswith(prefix):
            return None
        name = reference[len(prefix):]
        if not name or name.startswith('__'):
            return None
        return name

    def selected(self, name):
        """``X`` is built in or as a module."""
        if self.opts.tristate:
            return Variable(name) | Variable(f'{name}_MODULE')
        return Variable(name)

    def makefile(self, directory):
        for name in MAKEFILE_NAMES:
            candidate = posixpath.join(directory, name) if directory else name
            if (self.tree / candidate).is_file():
                return candidate
        return None

    def condition_of(self, line):
        """Condition opened by a conditional directive; None if the form
        is not understood."""
        m = _IFEQ.fullmatch(line)
        if m:
            keyword, reference, value = m.groups()
            name = self.feature(reference)
            if name is None:
                return None
            if value == 'y':
                cond = Variable(name)
            else:
                # ifneq ($(CONFIG_X),) holds when X is y or m
                cond = self.selected(name)
                keyword = 'ifneq' if keyword == 'ifeq' else 'ifeq'
            return Negation(cond) if keyword == 'ifneq' else cond
        m = _IFDEF.fullmatch(line)
        if m:
            keyword, reference = m.groups()
            name = self.feature(reference)
            if name is None:
                return None
            cond = self.selected(name)
            return Negation(cond) if keyword == 'ifndef' else cond
        return None

    def walk(self, directory, inherited, visiting, where=None):
        makefile = self.makefile(directory)
        if makefile is None:
            if where is None:
                raise MissingMakefile(str(self.tree / directory)
                                      if directory else str(self.tree))
            self.unresolved.append(where._replace(
                text=f'{where.text}: no Makefile or Kbuild'))
            return
        if directory in visiting:
            self.unresolved.append(where._replace(
                text=f'{where.text}: recursion cycle'))
            return
        visiting = visiting | {directory}
        self.sources.append(makefile)
        logger.debug('reading %s', makefile)

        text = (self.tree / makefile).read_text(encoding='utf-8',
                                                errors='replace')
        # each open conditional: [condition, in else branch, opening line]
        stack = []
        for number, line in _logical_lines(text):
            keyword = _CONDITIONAL.match(line)
            if keyword:
                cond = self.condition_of(line)
                if cond is None:
                    self.unresolved.append(Unresolved(makefile, number, line))
                stack.append([cond, False, number])
                continue
            if line == 'else' or line.startswith('else '):
                if not stack:
                    raise UnbalancedConditional(makefile, number,
                                                'else without if')
                if stack[-1][1]:
                    raise UnbalancedConditional(makefile, number,
                                                'second else')
                if line != 'else':
                    self.unresolved.append(Unresolved(makefile, number, line))
                stack[-1][1] = True
                continue
            if line == 'endif':
                if not stack:
                    raise UnbalancedConditional(makefile, number,
                                                'endif without if')
                stack.pop()
                continue

            m = _ASSIGN.fullmatch(line)
            if m is None:
                self.unresolved.append(Unresolved(makefile, number, line))
                continue
            flag, reference, items = m.groups()
            if flag:
                assigned = TRUE
            else:
                name = self.feature(reference)
                if name is None:
                    self.unresolved.append(Unresolved(makefile, number, line))
                    continue
                assigned = self.selected(name)
            # not understood conditions hold in both branches
            active = [TRUE if c is None else Negation(c) if in_else else c
                      for c, in_else, _ in stack]
            cond = simplify(conjunction(inherited, *active, assigned))
            for item in items.split():
                self.item(directory, item, cond, visiting,
                          Unresolved(makefile, number, item))

        if stack:
            raise UnbalancedConditional(makefile, stack[-1][2],
                                        'missing endif')

    def item(self, directory, item, cond, visiting, where):
        if item.endswith('/'):
            target = normalize_path(posixpath.join(directory, item))
            if target is None:
                self.unresolved.append(where._replace(
                    text=f'{item}: path leaves the source tree'))
                return
            self.walk(target, cond, visiting, where)
        elif item.endswith('.o'):
            source = normalize_path(posixpath.join(directory, item[:-2]
                                                   + '.c'))
            if source is None:
                self.unresolved.append(where._replace(
                    text=f'{item}: path leaves the source tree'))
                return
            self.conditions[source].append(cond)
        else:
            self.unresolved.append(where)

    def model(self):
        entries = {path: simplify(disjunction(*conds))
                   for path, conds in self.conditions.items()}
        return BuildModel(entries, self.unresolved, sorted(set(self.sources)))


def extract_build(tree, opts=None):
    """Mine file presence conditions from the Kbuild files below `tree`.

    Extraction starts at the ``Kbuild`` or ``Makefile`` of ``opts.root``
    (relative to `tree`); entry paths are relative to `tree`.

    :param tree: product line root
    :type tree: str or pathlib.Path
    :param opts: build options
    :type opts: BuildOptions, optional
    :rtype: BuildModel
    :raises MissingMakefile: if the start directory has no build file
    :raises UnbalancedConditional: on ``else``/``endif`` without ``if`` or a
                                   missing ``endif``
    """
    opts = opts or BuildOptions()
    walker = _KbuildWalker(tree, opts)
    start = '' if opts.root in ('', '.') else normalize_path(opts.root)
    if start is None:
        raise MissingMakefile(str(Path(tree) / opts.root))
    walker.walk(start, TRUE, frozenset())
    model = walker.model()
    logger.info('build model: %d files, %d unresolved lines',
                len(model.entries), len(model.unresolved))
    for entry in model.unresolved:
        logger.debug('unresolved %s:%d: %s', *entry)
    return model


def extract_pclist(tree, opts=None):
    """Read presence conditions from a ``path = formula`` listing.

    The listing is the hand-off format of build systems that are not
    driven by Makefiles; formulas use the text form of
    :func:`~varbench.formula.render`.

    :raises MissingMakefile: if the listing does not exist
    """
    opts = opts or BuildOptions()
    tree = Path(tree)
    listing = normalize_path(opts.pclist_file)
    if listing is None or not (tree / listing).is_file():
        raise MissingMakefile(str(tree), (opts.pclist_file,))
    conditions, unresolved = defaultdict(list), []
    text = (tree / listing).read_text(encoding='utf-8', errors='replace')
    for number, line in _logical_lines(text):
        path, sep, formula = line.partition('=')
        path = normalize_path(path.strip())
        if not sep or path is None:
            unresolved.append(Unresolved(listing, number, line))
            continue
        try:
            pc = parse_formula(formula.strip())
        except FormulaSyntaxError:
            unresolved.append(Unresolved(listing, number, line))
            continue
        conditions[path].append(pc)
    entries = {path: simplify(disjunction(*conds))
               for path, conds in conditions.items()}
    return BuildModel(entries, unresolved, (listing,))


BUILD_EXTRACTORS = {'kbuild': extract_build, 'pclist': extract_pclist}


def lookup_pc(model, file, missing=TRUE, diagnostics=None):
    """Presence condition of `file`, or `missing` if it has no entry.

    :param diagnostics: collector noting every miss, optional
    :type diagnostics: varbench.util.Diagnostics
    """
    try:
        return model.entries[file]
    except KeyError:
        if diagnostics is not None:
            diagnostics.note('build', 'missing_build_entry',
                             f'{file}: no build entry, using '
                             f'{render(missing)}')
        return missing


if __name__ == '__main__':
    import argparse
    parser = argparse.ArgumentParser(description='Print the file presence '
                                     'conditions of a Kbuild tree.')
    parser.add_argument('--tree', type=str, default='.')
    parser.add_argument('--boolean', action='store_true',
                        help='no _MODULE companions')
    args = parser.parse_args()

    model = extract_build(args.tree, BuildOptions(tristate=not args.boolean))
    for path, pc in model.entries.items():
        print(f'{path}\t{render(pc)}')
    for file, line, text in model.unresolved:
        print(f'unresolved {file}:{line}\t{text}')
