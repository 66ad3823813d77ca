"""A small DPLL satisfiability solver.

Unit propagation and pure-literal elimination, branching on the lowest
variable index with ``True`` tried first. Search state lives on an explicit
stack, so :func:`solve` is reentrant and safe to call from several threads.
"""

from dataclasses import dataclass

from varbench.cnf import to_cnf
from varbench.formula import Constant, Negation, simplify

__all__ = ['Sat', 'Unsat', 'UNSAT', 'solve', 'is_satisfiable',
           'is_tautology']


@dataclass(frozen=True)
class Sat:
    model: dict

    def __bool__(self):
        return True


@dataclass(frozen=True)
class Unsat:
    def __bool__(self):
        return False


UNSAT = Unsat()


def _assign(clauses, literals):
    """Make every literal in `literals` true; None on an empty clause."""
    result = []
    for clause in clauses:
        if any(lit in literals for lit in clause):
            continue
        reduced = tuple(lit for lit in clause if -lit not in literals)
        if not reduced:
            return None
        result.append(reduced)
    return result


def _propagate(clauses, assignment):
    while True:
        units = {clause[0] for clause in clauses if len(clause) == 1}
        if units:
            if any(-lit in units for lit in units):
                return None
            for lit in units:
                assignment[abs(lit)] = lit > 0
            clauses = _assign(clauses, units)
            if clauses is None:
                return None
            continue

        seen = {lit for clause in clauses for lit in clause}
        pure = {lit for lit in seen if -lit not in seen}
        if not pure:
            return clauses
        for lit in pure:
            assignment[abs(lit)] = lit > 0
        clauses = [clause for clause in clauses
                   if not any(lit in pure for lit in clause)]


def _dpll(clauses):
    stack = [(clauses, {})]
    while stack:
        clauses, assignment = stack.pop()
        clauses = _propagate(clauses, assignment)
        if clauses is None:
            continue
        if not clauses:
            return assignment
        var = min(abs(lit) for clause in clauses for lit in clause)
        for value in (False, True):
            lit = var if value else -var
            branch = _assign(clauses, {lit})
            if branch is not None:
                stack.append((branch, {**assignment, var: value}))
    return None


def solve(problem):
    """Decide satisfiability of a :class:`~varbench.cnf.CnfProblem`.

    :returns: :class:`Sat` with a model over every variable of
              ``problem.var_map`` (auxiliaries included), or :data:`UNSAT`.
    """
    clauses = [tuple(index if lit.positive else -index
                     for lit in clause
                     for index in (problem.var_map[lit.name],))
               for clause in problem.clauses]
    if any(not clause for clause in clauses):
        return UNSAT
    assignment = _dpll(clauses)
    if assignment is None:
        return UNSAT
    return Sat({name: assignment.get(index, True)
                for name, index in problem.var_map.items()})


def is_satisfiable(f):
    f = simplify(f)
    if isinstance(f, Constant):
        return f.value
    return bool(solve(to_cnf(f)))


def is_tautology(f):
    return not is_satisfiable(Negation(f))
