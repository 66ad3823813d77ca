"""Clause form of formulas: Tseitin conversion and DIMACS text."""

from dataclasses import dataclass, field
from typing import NamedTuple

from varbench.formula import (Constant, Variable, Negation, Conjunction,
                              simplify, variables)

__all__ = ['Literal', 'CnfProblem', 'to_cnf', 'to_dimacs', 'parse_dimacs',
           'AUX_PREFIX']

AUX_PREFIX = '__t'


class Literal(NamedTuple):
    name: str
    positive: bool = True

    def __neg__(self):
        return Literal(self.name, not self.positive)

    def __str__(self):
        return ('+' if self.positive else '-') + self.name


@dataclass(frozen=True)
class CnfProblem:
    """A clause set plus the name/index bijection used for DIMACS.

    :param clauses: tuple of clauses, each a tuple of :class:`Literal`
    :param var_map: variable name to positive index, in index order
    :param internal: names of auxiliary variables introduced by conversion
    """
    clauses: tuple
    var_map: dict
    internal: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        clauses = tuple(tuple(Literal(*lit) for lit in clause)
                        for clause in self.clauses)
        object.__setattr__(self, 'clauses', clauses)
        indices = list(self.var_map.values())
        if sorted(indices) != list(range(1, len(indices) + 1)):
            raise ValueError('var_map must number variables 1..n')
        for clause in clauses:
            for lit in clause:
                if lit.name not in self.var_map:
                    raise ValueError(f'literal {lit} not in var_map')

    @classmethod
    def from_clauses(cls, clauses):
        """Build a problem numbering variables by first appearance.

        Literals may be :class:`Literal` values or ``(name, polarity)``
        pairs.
        """
        var_map = {}
        for clause in clauses:
            for name, _ in clause:
                var_map.setdefault(name, len(var_map) + 1)
        internal = frozenset(name for name in var_map
                             if name.startswith(AUX_PREFIX))
        return cls(tuple(tuple(clause) for clause in clauses), var_map,
                   internal)

class _TseitinEncoder(object):
    def __init__(self, var_map):
        self.var_map = var_map
        self.clauses = []
        self.internal = []
        self._gates = {}

    def _fresh(self):
        name = f'{AUX_PREFIX}{len(self.internal)}'
        self.internal.append(name)
        self.var_map[name] = len(self.var_map) + 1
        return Literal(name)

    def literal(self, f):
        if isinstance(f, Variable):
            return Literal(f.name)
        if isinstance(f, Negation):
            return -self.literal(f.operand)
        if f in self._gates:
            return self._gates[f]
        inputs = [self.literal(op) for op in f.operands]
        t = self._fresh()
        if isinstance(f, Conjunction):
            for lit in inputs:
                self.clauses.append((-t, lit))
            self.clauses.append((t,) + tuple(-lit for lit in inputs))
        else:
            self.clauses.append((-t,) + tuple(inputs))
            for lit in inputs:
                self.clauses.append((-lit, t))
        self._gates[f] = t
        return t


def to_cnf(f):
    """Tseitin transformation of `f` into an equisatisfiable clause set.

    Auxiliary variables are named ``__t0``, ``__t1``, ... and numbered after
    the variables of `f`; equal subformulas share one auxiliary.
    """
    f = simplify(f)
    if isinstance(f, Constant):
        return CnfProblem(() if f.value else ((),), {})
    var_map = {name: i for i, name in enumerate(variables(f), 1)}
    encoder = _TseitinEncoder(var_map)
    root = encoder.literal(f)
    clauses = encoder.clauses + [(root,)]
    return CnfProblem(tuple(clauses), var_map, frozenset(encoder.internal))


def to_dimacs(problem):
    """DIMACS CNF text, with ``c <index> <name>`` comments for var_map."""
    lines = [f'c {index} {name}' for name, index in problem.var_map.items()]
    lines.append(f'p cnf {len(problem.var_map)} {len(problem.clauses)}')
    for clause in problem.clauses:
        ints = [str(problem.var_map[lit.name] * (1 if lit.positive else -1))
                for lit in clause]
        lines.append(' '.join(ints + ['0']))
    return '\n'.join(lines) + '\n'


def parse_dimacs(text):
    """Read DIMACS CNF text back into a :class:`CnfProblem`.

    Names come from ``c <index> <name>`` comments where present, otherwise
    index ``i`` is called ``x<i>``.
    """
    names, clauses, current = {}, [], []
    nvars = 0
    for number, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith('c'):
            parts = line.split()
            if len(parts) == 3 and parts[1].isdigit():
                names[int(parts[1])] = parts[2]
            continue
        if line.startswith('%'):
            break
        if line.startswith('p'):
            parts = line.split()
            if len(parts) != 4 or parts[1] != 'cnf':
                raise ValueError(f'line {number}: bad problem line {line!r}')
            nvars = int(parts[2])
            continue
        for token in line.split():
            value = int(token)
            if value == 0:
                clauses.append(current)
                current = []
            else:
                current.append(value)
    if current:
        clauses.append(current)

    used = [abs(v) for clause in clauses for v in clause]
    nvars = max([nvars] + used)
    var_map = {names.get(i, f'x{i}'): i for i in range(1, nvars + 1)}
    index_to_name = {i: name for name, i in var_map.items()}
    literal_clauses = tuple(
        tuple(Literal(index_to_name[abs(v)], v > 0) for v in clause)
        for clause in clauses)
    internal = frozenset(name for name in var_map
                         if name.startswith(AUX_PREFIX))
    return CnfProblem(literal_clauses, var_map, internal)
