"""Propositional formulas.

Formulas are immutable trees of frozen dataclasses. The operators ``&``, ``|``
and ``~`` build raw nodes; :func:`simplify` applies the cheap structural
rewrites every component relies on, and :func:`render` / :func:`parse_formula`
convert to and from the text form used in result files and caches::

    >>> f = Variable('A') & ~Variable('B')
    >>> render(f)
    '(A && !B)'
"""

from dataclasses import dataclass
import re
import numpy as np

from varbench.exceptions import FormulaSyntaxError, UnmappedVariable

__all__ = ['Formula', 'Constant', 'Variable', 'Negation', 'Conjunction',
           'Disjunction', 'TRUE', 'FALSE', 'conjunction', 'disjunction',
           'evaluate', 'variables', 'substitute', 'simplify', 'render',
           'parse_formula', 'truth_table', 'assignment_matrix']


class Formula(object):
    """Base class of all formula nodes."""
    __slots__ = ()

    def __and__(self, other):
        return Conjunction((self, other))

    def __or__(self, other):
        return Disjunction((self, other))

    def __invert__(self):
        return Negation(self)

    def __str__(self):
        return render(self)


@dataclass(frozen=True, repr=False)
class Constant(Formula):
    value: bool

    def __repr__(self):
        return 'TRUE' if self.value else 'FALSE'


@dataclass(frozen=True)
class Variable(Formula):
    name: str

    def __post_init__(self):
        if not self.name:
            raise ValueError('variable names must be non-empty')


@dataclass(frozen=True)
class Negation(Formula):
    operand: Formula


@dataclass(frozen=True)
class Conjunction(Formula):
    operands: tuple

    def __post_init__(self):
        object.__setattr__(self, 'operands', tuple(self.operands))
        if len(self.operands) < 2:
            raise ValueError('a conjunction needs at least two operands')


@dataclass(frozen=True)
class Disjunction(Formula):
    operands: tuple

    def __post_init__(self):
        object.__setattr__(self, 'operands', tuple(self.operands))
        if len(self.operands) < 2:
            raise ValueError('a disjunction needs at least two operands')


TRUE = Constant(True)
FALSE = Constant(False)


def conjunction(*operands):
    """Conjoin `operands`; no operand gives ``TRUE``, one gives itself."""
    if not operands:
        return TRUE
    if len(operands) == 1:
        return operands[0]
    return Conjunction(operands)


def disjunction(*operands):
    """Disjoin `operands`; no operand gives ``FALSE``, one gives itself."""
    if not operands:
        return FALSE
    if len(operands) == 1:
        return operands[0]
    return Disjunction(operands)


def evaluate(f, assignment):
    """Evaluate `f` under `assignment`, a mapping of names to booleans.

    :raises UnmappedVariable: if a variable of `f` is missing.
    """
    if isinstance(f, Constant):
        return f.value
    if isinstance(f, Variable):
        try:
            return bool(assignment[f.name])
        except KeyError:
            raise UnmappedVariable(f.name) from None
    if isinstance(f, Negation):
        return not evaluate(f.operand, assignment)
    # no short-circuit: every variable must be mapped
    values = [evaluate(op, assignment) for op in f.operands]
    if isinstance(f, Conjunction):
        return all(values)
    return any(values)


def variables(f):
    """Names of the variables of `f` in first-occurrence order."""
    seen = {}
    stack = [f]
    while stack:
        node = stack.pop()
        if isinstance(node, Variable):
            seen.setdefault(node.name, None)
        elif isinstance(node, Negation):
            stack.append(node.operand)
        elif isinstance(node, (Conjunction, Disjunction)):
            stack.extend(reversed(node.operands))
    return list(seen)


def _replace(f, name, constant):
    if isinstance(f, Variable):
        return constant if f.name == name else f
    if isinstance(f, Negation):
        return Negation(_replace(f.operand, name, constant))
    if isinstance(f, (Conjunction, Disjunction)):
        return type(f)(tuple(_replace(op, name, constant)
                             for op in f.operands))
    return f


def substitute(f, name, value):
    """Replace variable `name` by the constant `value` and simplify."""
    return simplify(_replace(f, name, TRUE if value else FALSE))


def simplify(f):
    """Constant folding, double negation, flattening, dedupe and collapse.

    Deliberately no further minimization: ``A && !A`` stays as it is.
    """
    if isinstance(f, (Constant, Variable)):
        return f
    if isinstance(f, Negation):
        inner = simplify(f.operand)
        if isinstance(inner, Constant):
            return FALSE if inner.value else TRUE
        if isinstance(inner, Negation):
            return inner.operand
        return Negation(inner)

    kind = type(f)
    # absorbing constant for this kind, e.g. FALSE for a conjunction
    absorbing = isinstance(f, Disjunction)
    operands, seen = [], set()
    for op in f.operands:
        op = simplify(op)
        if isinstance(op, Constant):
            if op.value == absorbing:
                return op
            continue
        for item in (op.operands if isinstance(op, kind) else (op,)):
            if item not in seen:
                seen.add(item)
                operands.append(item)
    if not operands:
        return Constant(not absorbing)
    if len(operands) == 1:
        return operands[0]
    return kind(tuple(operands))


def render(f):
    """Text form: ``true``, ``false``, names, ``!x``, ``(a && b)``,
    ``(a || b)``; n-ary nodes are nested to the left."""
    if isinstance(f, Constant):
        return 'true' if f.value else 'false'
    if isinstance(f, Variable):
        return f.name
    if isinstance(f, Negation):
        return '!' + render(f.operand)
    op = ' && ' if isinstance(f, Conjunction) else ' || '
    text = render(f.operands[0])
    for operand in f.operands[1:]:
        text = f'({text}{op}{render(operand)})'
    return text


_TOKEN = re.compile(r'\s*(?:(&&)|(\|\|)|([!()])|([A-Za-z0-9_]+))')


def _tokenize(text):
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        match = _TOKEN.match(text, pos)
        if match is None:
            pos = len(text) - len(text[pos:].lstrip())
            raise FormulaSyntaxError(pos, 'unexpected character', text)
        tokens.append((match.group(match.lastindex), match.start(
            match.lastindex)))
        pos = match.end()
    return tokens


class _FormulaParser(object):
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.index = 0

    def peek(self):
        if self.index < len(self.tokens):
            return self.tokens[self.index][0]
        return None

    def position(self):
        if self.index < len(self.tokens):
            return self.tokens[self.index][1]
        return len(self.text)

    def take(self, expected=None):
        token = self.peek()
        if token is None or (expected is not None and token != expected):
            want = expected or 'an operand'
            raise FormulaSyntaxError(self.position(), f'expected {want}',
                                     self.text)
        self.index += 1
        return token

    def parse(self):
        f = self.disjunction()
        if self.peek() is not None:
            raise FormulaSyntaxError(self.position(), 'trailing input',
                                     self.text)
        return f

    def _chain(self, kind, operator, operand):
        acc = operand()
        while self.peek() == operator:
            self.take()
            right = operand()
            # same-kind left operands are flattened, mirroring render()
            if isinstance(acc, kind):
                acc = kind(acc.operands + (right,))
            else:
                acc = kind((acc, right))
        return acc

    def disjunction(self):
        return self._chain(Disjunction, '||', self.conjunction)

    def conjunction(self):
        return self._chain(Conjunction, '&&', self.unary)

    def unary(self):
        if self.peek() == '!':
            self.take()
            return Negation(self.unary())
        if self.peek() == '(':
            self.take()
            f = self.disjunction()
            self.take(')')
            return f
        token = self.take()
        if token in ('&&', '||', ')'):
            self.index -= 1
            raise FormulaSyntaxError(self.position(), 'expected an operand',
                                     self.text)
        if token == 'true':
            return TRUE
        if token == 'false':
            return FALSE
        return Variable(token)


def parse_formula(text):
    """Parse the text form produced by :func:`render`.

    Unparenthesized chains are accepted too, with the usual precedence
    ``!`` > ``&&`` > ``||``.

    :raises FormulaSyntaxError: on malformed text.
    """
    return _FormulaParser(text).parse()


def assignment_matrix(n, start=0, stop=None):
    """Rows ``start:stop`` of the 2**n assignments in binary counting order.

    Column ``i`` holds variable ``i``; the first variable is the most
    significant bit, so rows run false-before-true.
    """
    stop = 2 ** n if stop is None else stop
    rows = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((rows[:, None] >> shifts) & 1).astype(bool)


def _table(f, columns, rows):
    if isinstance(f, Constant):
        return np.full(rows, f.value)
    if isinstance(f, Variable):
        try:
            return columns[f.name]
        except KeyError:
            raise UnmappedVariable(f.name) from None
    if isinstance(f, Negation):
        return ~_table(f.operand, columns, rows)
    parts = [_table(op, columns, rows) for op in f.operands]
    if isinstance(f, Conjunction):
        return np.logical_and.reduce(parts)
    return np.logical_or.reduce(parts)


def truth_table(f, names, matrix=None):
    """Vectorized evaluation of `f` over every assignment of `names`.

    :param f: formula to evaluate
    :type f: Formula
    :param names: variable order; must cover the variables of `f`
    :type names: list of str
    :param matrix: precomputed slice of :func:`assignment_matrix`, optional
    :type matrix: numpy.ndarray
    :returns: boolean vector with one entry per assignment row
    :rtype: numpy.ndarray
    """
    names = list(names)
    if matrix is None:
        matrix = assignment_matrix(len(names))
    columns = {name: matrix[:, i] for i, name in enumerate(names)}
    return np.asarray(_table(f, columns, matrix.shape[0]), dtype=bool)
