#!/usr/bin/env python
"""Code model: conditional blocks of C-preprocessor source files.

Every source file becomes an element tree. The root element spans the whole
file; each ``#if``/``#ifdef``/``#ifndef``/``#elif``/``#else`` branch becomes a
:class:`CodeBlock` carrying its own condition and its presence condition (the
conjunction of all enclosing conditions). Extraction is shallow: no macro
expansion, no ``#include`` resolution.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache
from multiprocessing import Pool
from pathlib import Path
from tqdm import tqdm
import logging
import re

from varbench import istarmap  # noqa: F401
from varbench.exceptions import MalformedExpression, UnbalancedDirectives
from varbench.formula import (TRUE, Formula, Variable, Negation,
                              conjunction, disjunction, simplify, render,
                              parse_formula)
from varbench.util import fnv1a64, sha256_bytes

logger = logging.getLogger(__name__)

__all__ = ['BranchKind', 'CodeElement', 'CodeBlock', 'CodeModel',
           'ExtractOptions', 'parse_cpp_condition', 'extract_file',
           'extract_path', 'presence_conditions', 'iter_blocks',
           'discover_sources', 'element_to_dict', 'element_from_dict',
           'CodeExtractor', 'OPAQUE_ATOM']

OPAQUE_ATOM = re.compile(r'U_[0-9a-f]{16}')
DEFAULT_PATTERNS = ('**/*.c', '**/*.h')


class BranchKind(Enum):
    IF = 'If'
    ELIF = 'Elif'
    ELSE = 'Else'
    IFDEF = 'Ifdef'
    IFNDEF = 'Ifndef'


@dataclass(frozen=True)
class CodeElement:
    """A node of a file's element tree.

    :param file: path of the file, relative to the source tree
    :param line_start: first line (1-based, inclusive)
    :param line_end: last line (inclusive)
    :param condition: the element's own condition
    :param presence_condition: simplified conjunction of all conditions from
                               the root down to this element
    :param children: nested elements in source order
    """
    file: str
    line_start: int
    line_end: int
    condition: Formula
    presence_condition: Formula
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, 'children', tuple(self.children))

    @property
    def block_id(self):
        return self.file, self.line_start


@dataclass(frozen=True)
class CodeBlock(CodeElement):
    branch_kind: BranchKind


@dataclass(frozen=True)
class CodeModel:
    file: str
    root: CodeElement
    unknown_atoms: frozenset = frozenset()
    # SHA-256 of the bytes the model was extracted from
    source_fingerprint: str = field(default=None, compare=False)


@dataclass(frozen=True)
class ExtractOptions:
    prefix: str = 'CONFIG_'


_CPP_TOKEN = re.compile(r'''
    (?P<ws>\s+)
  | (?P<ident>[A-Za-z_]\w*)
  | (?P<number>\.?\d(?:[eEpP][+-]|[\w.])*)
  | (?P<char>'(?:\\.|[^'\\])*')
  | (?P<string>"(?:\\.|[^"\\])*")
  | (?P<op>&&|\|\||==|!=|<=|>=|<<|>>|[-+*/%<>!~&|^?:(),#])
  | (?P<other>.)
''', re.X | re.S)

_NOT_FEATURES = {'true', 'false', 'defined'}


class _CppConditionParser(object):
    """Recursive descent over token ranges ``[lo, hi)``.

    Every range that is not ``!``, ``&&``, ``||``, parentheses, an identifier
    or a ``defined`` test becomes one opaque atom named after the hash of its
    source text.
    """

    def __init__(self, text, opts, file, line, atoms):
        self.text, self.opts = text, opts
        self.file, self.line = file, line
        self.atoms = atoms
        self.tokens = [(m.lastgroup, m.group(), m.start(), m.end())
                       for m in _CPP_TOKEN.finditer(text)
                       if m.lastgroup != 'ws']
        self.match = {}

    def malformed(self, reason):
        return MalformedExpression(self.file, self.line, reason)

    def parse(self):
        if not self.tokens:
            raise self.malformed('empty expression')
        opened = []
        for i, token in enumerate(self.tokens):
            if token[1] == '(':
                opened.append(i)
            elif token[1] == ')':
                if not opened:
                    raise self.malformed('unbalanced parentheses')
                self.match[opened.pop()] = i
        if opened:
            raise self.malformed('unbalanced parentheses')
        return self.expression(0, len(self.tokens))

    def top_level(self, lo, hi):
        i = lo
        while i < hi:
            yield i
            i = self.match[i] + 1 if self.tokens[i][1] == '(' else i + 1

    def split(self, lo, hi, operator):
        bounds, start = [], lo
        for i in self.top_level(lo, hi):
            if self.tokens[i][1] == operator:
                bounds.append((start, i))
                start = i + 1
        bounds.append((start, hi))
        return bounds

    def expression(self, lo, hi):
        if lo >= hi:
            raise self.malformed('empty expression')
        if any(self.tokens[i][1] in '?:,' for i in self.top_level(lo, hi)):
            return self.opaque(lo, hi)
        parts = self.split(lo, hi, '||')
        if len(parts) == 1:
            return self.conjunction(lo, hi)
        return disjunction(*(self.conjunction(a, b) for a, b in parts))

    def conjunction(self, lo, hi):
        parts = self.split(lo, hi, '&&')
        if len(parts) == 1:
            return self.unary(lo, hi)
        return conjunction(*(self.unary(a, b) for a, b in parts))

    def unary(self, lo, hi):
        if lo >= hi:
            raise self.malformed('missing operand')
        for i in self.top_level(lo, hi):
            kind, value = self.tokens[i][:2]
            if (kind == 'op' and value not in '!(') or \
                    (value == '!' and i > lo and self.tokens[i - 1][1] != '!'):
                return self.opaque(lo, hi)
        if self.tokens[lo][1] == '!':
            return Negation(self.unary(lo + 1, hi))
        return self.primary(lo, hi)

    def primary(self, lo, hi):
        first = self.tokens[lo]
        if first[1] == '(' and self.match[lo] == hi - 1:
            return self.expression(lo + 1, hi - 1)
        values = [token[1] for token in self.tokens[lo:hi]]
        kinds = [token[0] for token in self.tokens[lo:hi]]
        if kinds == ['ident'] and values[0] != 'defined':
            return self.feature(values[0], lo, hi)
        if values[0] == 'defined':
            if kinds[1:] == ['ident']:
                return self.feature(values[1], lo, hi)
            if len(values) == 4 and values[1] == '(' and kinds[2] == 'ident' \
                    and values[3] == ')':
                return self.feature(values[2], lo, hi)
        return self.opaque(lo, hi)

    def feature(self, identifier, lo, hi):
        name = identifier
        prefix = self.opts.prefix
        if prefix and name.startswith(prefix):
            name = name[len(prefix):]
        if not name or name.startswith('__') or name in _NOT_FEATURES:
            return self.opaque(lo, hi)
        return Variable(name)

    def opaque(self, lo, hi):
        source = self.text[self.tokens[lo][2]:self.tokens[hi - 1][3]].strip()
        name = f'U_{fnv1a64(source)}'
        self.atoms.add(name)
        return Variable(name)


def parse_cpp_condition(text, opts=None, file='<string>', line=0,
                        atoms=None):
    """Translate a ``#if`` expression into a simplified formula.

    :param text: expression following ``#if``/``#elif``
    :type text: str
    :param opts: extraction options (canonicalization prefix)
    :type opts: ExtractOptions, optional
    :param file: file name used in error messages
    :param line: line number used in error messages
    :param atoms: set receiving the names of opaque atoms, optional
    :raises MalformedExpression: on unbalanced parentheses or an empty
                                 (sub)expression
    """
    opts = opts or ExtractOptions()
    atoms = set() if atoms is None else atoms
    return simplify(_CppConditionParser(text, opts, file, line,
                                        atoms).parse())


_LEXICAL = re.compile(r'''
    //[^\n]*
  | /\*.*?(?:\*/|\Z)
  | "(?:\\.|[^"\\\n])*"?
  | '(?:\\.|[^'\\\n])*'?
''', re.X | re.S)

_DIRECTIVE = re.compile(r'#\s*([A-Za-z_]\w*)?(.*)', re.S)
_IDENTIFIER = re.compile(r'[A-Za-z_]\w*')


def _logical_lines(source):
    """Splice backslash continuations.

    :returns: list of ``(first line, last line, text)`` and the number of
              physical lines
    """
    physical = source.split('\n')
    if source.endswith('\n'):
        physical.pop()
    physical = [line[:-1] if line.endswith('\r') else line
                for line in physical]
    logical, i = [], 0
    while i < len(physical):
        start, text = i, physical[i]
        while text.endswith('\\') and i + 1 < len(physical):
            i += 1
            text = text[:-1] + physical[i]
        if text.endswith('\\'):
            text = text[:-1]
        logical.append((start + 1, i + 1, text))
        i += 1
    return logical, len(physical)


def _strip_comments(lines):
    """Blank out comments; return code text per logical line plus the
    indices of lines that start inside a block comment."""
    joined = '\n'.join(lines)
    pieces, hidden = [], set()
    pos, line = 0, 0
    for m in _LEXICAL.finditer(joined):
        line += joined.count('\n', pos, m.start())
        pieces.append(joined[pos:m.start()])
        token = m.group()
        if token.startswith('/'):
            newlines = token.count('\n')
            hidden.update(range(line + 1, line + newlines + 1))
            line += newlines
            pieces.append(' ' + '\n' * newlines)
        else:
            pieces.append(token)
        pos = m.end()
    pieces.append(joined[pos:])
    return ''.join(pieces).split('\n'), hidden


class _Frame(object):
    """An open branch while the tree is being built."""
    __slots__ = ('kind', 'condition', 'pc', 'start', 'chain', 'opener',
                 'has_else', 'children')

    def __init__(self, kind, condition, pc, start, chain, opener,
                 has_else=False):
        self.kind, self.condition, self.pc = kind, condition, pc
        self.start, self.chain, self.opener = start, chain, opener
        self.has_else = has_else
        self.children = []


def extract_file(source, file, opts=None):
    """Build the element tree of one source file.

    :param source: file content
    :type source: str
    :param file: relative path recorded in every element
    :type file: str
    :param opts: extraction options
    :type opts: ExtractOptions, optional
    :returns: the file's code model
    :rtype: CodeModel
    :raises UnbalancedDirectives: on ``#elif``/``#else``/``#endif`` without
                                  an open ``#if`` or an unterminated block
    :raises MalformedExpression: on a malformed condition
    """
    opts = opts or ExtractOptions()
    logical, nlines = _logical_lines(source)
    code, hidden = _strip_comments([text for _, _, text in logical])
    atoms = set()
    root_children, stack = [], []

    def condition(text, line):
        return parse_cpp_condition(text, opts, file, line, atoms)

    def parent_pc():
        return stack[-1].pc if stack else TRUE

    def siblings():
        return stack[-1].children if stack else root_children

    def close(end):
        frame = stack.pop()
        siblings().append(CodeBlock(file, frame.start, end, frame.condition,
                                    frame.pc, tuple(frame.children),
                                    frame.kind))
        return frame

    def open_branch(kind, cond, start, chain, opener, has_else=False):
        pc = simplify(conjunction(parent_pc(), cond))
        stack.append(_Frame(kind, cond, pc, start, chain, opener, has_else))

    for index, (start, end, _) in enumerate(logical):
        if index in hidden:
            continue
        text = code[index].lstrip()
        if not text.startswith('#'):
            continue
        keyword, rest = _DIRECTIVE.match(text).groups()
        rest = rest.strip()

        if keyword in ('if', 'ifdef', 'ifndef'):
            if keyword == 'if':
                raw, kind = condition(rest, start), BranchKind.IF
            else:
                ident = _IDENTIFIER.match(rest)
                if ident is None:
                    raise MalformedExpression(file, start,
                                              f'#{keyword} without identifier')
                raw = condition(f'defined({ident.group()})', start)
                kind = BranchKind.IFDEF
                if keyword == 'ifndef':
                    raw, kind = simplify(Negation(raw)), BranchKind.IFNDEF
            open_branch(kind, raw, start, [raw], start)
        elif keyword == 'elif':
            if not stack:
                raise UnbalancedDirectives(file, start, '#elif without #if')
            if stack[-1].has_else:
                raise UnbalancedDirectives(file, start, '#elif after #else')
            frame = close(start - 1)
            raw = condition(rest, start)
            cond = simplify(conjunction(
                raw, *(Negation(c) for c in frame.chain)))
            open_branch(BranchKind.ELIF, cond, start, frame.chain + [raw],
                        frame.opener)
        elif keyword == 'else':
            if not stack:
                raise UnbalancedDirectives(file, start, '#else without #if')
            if stack[-1].has_else:
                raise UnbalancedDirectives(file, start, 'second #else')
            frame = close(start - 1)
            cond = simplify(Negation(disjunction(*frame.chain)))
            open_branch(BranchKind.ELSE, cond, start, frame.chain,
                        frame.opener, has_else=True)
        elif keyword == 'endif':
            if not stack:
                raise UnbalancedDirectives(file, start, '#endif without #if')
            close(end)

    if stack:
        raise UnbalancedDirectives(file, stack[-1].opener,
                                   'unterminated conditional at end of file')
    root = CodeElement(file, 1, max(1, nlines), TRUE, TRUE,
                       tuple(root_children))
    return CodeModel(file, root, frozenset(atoms))


def extract_path(root, relpath, opts=None):
    """Read ``root/relpath`` and extract it; the worker-process entry point."""
    data = (Path(root) / relpath).read_bytes()
    model = extract_file(data.decode('utf-8', errors='replace'), relpath, opts)
    return replace(model, source_fingerprint=sha256_bytes(data))


def iter_blocks(element):
    """Depth-first pre-order over the blocks below `element`."""
    stack = list(reversed(element.children))
    while stack:
        block = stack.pop()
        yield block
        stack.extend(reversed(block.children))


def presence_conditions(model):
    """``[((file, line_start), pc), ...]`` in pre-order, root excluded."""
    return [(block.block_id, block.presence_condition)
            for block in iter_blocks(model.root)]


def discover_sources(root, patterns=DEFAULT_PATTERNS):
    """Sorted relative POSIX paths of the files matching any glob."""
    root = Path(root)
    found = set()
    for pattern in patterns:
        for path in root.glob(pattern):
            if path.is_file():
                found.add(path.relative_to(root).as_posix())
    return sorted(found)


def element_to_dict(element):
    data = {'kind': 'element',
            'line_start': element.line_start,
            'line_end': element.line_end,
            'condition': render(element.condition),
            'presence_condition': render(element.presence_condition),
            'children': [element_to_dict(child)
                         for child in element.children]}
    if isinstance(element, CodeBlock):
        data['kind'] = 'block'
        data['branch'] = element.branch_kind.value
    return data


# formulas are immutable; the same PC texts recur across a whole tree
_parse_cached = lru_cache(maxsize=1 << 16)(parse_formula)


def element_from_dict(data, file):
    children = tuple(element_from_dict(child, file)
                     for child in data['children'])
    args = (file, data['line_start'], data['line_end'],
            _parse_cached(data['condition']),
            _parse_cached(data['presence_condition']), children)
    if data['kind'] == 'block':
        return CodeBlock(*args, BranchKind(data['branch']))
    return CodeElement(*args)


class CodeExtractor(object):
    """Extract every matching file of a source tree.

    :param source_tree: root directory of the product line
    :type source_tree: str or pathlib.Path
    :param patterns: discovery globs relative to `source_tree`
    :type patterns: list of str, optional
    :param opts: extraction options
    :type opts: ExtractOptions, optional
    :param nproc: number of worker processes (default is 1, no pool)
    :type nproc: int, optional
    :param progress: show a progress bar
    :type progress: bool, optional
    """

    def __init__(self, source_tree, patterns=DEFAULT_PATTERNS, opts=None,
                 nproc=1, progress=False):
        self.source_tree = Path(source_tree)
        self.patterns = tuple(patterns)
        self.opts = opts or ExtractOptions()
        self.nproc, self.progress = nproc, progress

    def files(self):
        return discover_sources(self.source_tree, self.patterns)

    def iter_models(self, pool=None, files=None):
        """Yield code models as workers finish them (in any order).

        :param pool: worker pool to use; one with `nproc` workers is
                     created when omitted and `nproc` > 1
        :type pool: multiprocessing.Pool, optional
        """
        files = self.files() if files is None else files
        logger.info('extracting %d code files', len(files))
        inputs = [(self.source_tree, rel, self.opts) for rel in files]
        bar = tqdm(total=len(files), desc='code extraction',
                   disable=not self.progress)
        try:
            if pool is None and self.nproc > 1:
                with Pool(self.nproc) as p:
                    for model in p.istarmap_unordered(extract_path, inputs):
                        bar.update()
                        yield model
            elif pool is not None:
                for model in pool.istarmap_unordered(extract_path, inputs):
                    bar.update()
                    yield model
            else:
                for args in inputs:
                    model = extract_path(*args)
                    bar.update()
                    yield model
        finally:
            bar.close()

    def run(self):
        """Extract all files; models sorted by path."""
        return sorted(self.iter_models(), key=lambda m: m.file)


if __name__ == '__main__':
    import argparse
    parser = argparse.ArgumentParser(description='Print the presence '
                                     'conditions of C source files.')
    parser.add_argument('files', nargs='+')
    parser.add_argument('--prefix', type=str, default='CONFIG_')
    args = parser.parse_args()

    for path in args.files:
        model = extract_path('.', path, ExtractOptions(args.prefix))
        for (file, line), pc in presence_conditions(model):
            print(f'{file}:{line}\t{render(pc)}')
