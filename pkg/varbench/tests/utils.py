"""Helpers shared by the tests: random formulas, random product lines and
brute-force oracles over truth tables."""

import numpy as np

from varbench.buildmodel import BuildModel
from varbench.codemodel import extract_file, iter_blocks
from varbench.formula import (TRUE, FALSE, Variable, Negation, Conjunction,
                              Disjunction, truth_table, variables,
                              assignment_matrix)
from varbench.solver import is_tautology

NAMES = tuple('ABCDEFGHIJ')


def random_formula(rng, names=NAMES[:6], depth=4, constants=True):
    """Random raw (unsimplified) formula over `names`.

    Parameters
    ----------
    rng : numpy.random.Generator
    names : sequence of str
      variable names to draw from
    depth : int
      maximum nesting depth
    constants : bool
      allow ``true``/``false`` leaves
    """
    roll = rng.random()
    if depth == 0 or roll < 0.25:
        if constants and roll < 0.02:
            return TRUE if rng.random() < 0.5 else FALSE
        return Variable(str(rng.choice(names)))
    if roll < 0.45:
        return Negation(random_formula(rng, names, depth - 1, constants))
    kind = Conjunction if roll < 0.75 else Disjunction
    width = int(rng.integers(2, 4))
    return kind(tuple(random_formula(rng, names, depth - 1, constants)
                      for _ in range(width)))


def brute_satisfiable(f):
    names = variables(f)
    return bool(truth_table(f, names, assignment_matrix(len(names))).any())


def brute_tautology(f):
    names = variables(f)
    return bool(truth_table(f, names, assignment_matrix(len(names))).all())


def brute_equivalent(f, g):
    names = sorted(set(variables(f)) | set(variables(g)))
    matrix = assignment_matrix(len(names))
    return bool(np.array_equal(truth_table(f, names, matrix),
                               truth_table(g, names, matrix)))


def _cpp_condition(rng, features, depth):
    roll = rng.random()
    name = str(rng.choice(features))
    if depth == 0 or roll < 0.4:
        if rng.random() < 0.5:
            return f'defined(CONFIG_{name})'
        return f'CONFIG_{name}'
    if roll < 0.55:
        return f'!defined(CONFIG_{name})'
    operator = ' && ' if roll < 0.8 else ' || '
    parts = [_cpp_condition(rng, features, depth - 1) for _ in range(2)]
    return '(' + operator.join(parts) + ')'


def random_source(rng, features, blocks=6, depth=3):
    """C text with at most `blocks` conditional blocks (chains included)."""
    lines, budget = [], [blocks]

    def emit(level):
        while budget[0] > 0 and rng.random() < 0.7:
            budget[0] -= 1
            lines.append('#if ' + _cpp_condition(rng, features, 2))
            lines.append(f'int v{len(lines)};')
            if level < depth and rng.random() < 0.4:
                emit(level + 1)
            if budget[0] > 0 and rng.random() < 0.3:
                budget[0] -= 1
                lines.append('#elif ' + _cpp_condition(rng, features, 1))
                lines.append(f'int v{len(lines)};')
            if budget[0] > 0 and rng.random() < 0.3:
                budget[0] -= 1
                lines.append('#else')
                lines.append(f'int v{len(lines)};')
            lines.append('#endif')
            if level > 0:
                return

    while budget[0] > 0:
        emit(0)
    return '\n'.join(lines) + '\n'


def random_spl(rng, nfeatures=6, nfiles=3, blocks=20):
    """Random product line: code models and a build model.

    Returns
    -------
    (list of CodeModel, BuildModel, tuple of feature names)
    """
    features = NAMES[:nfeatures]
    per_file = max(1, blocks // nfiles)
    models = [extract_file(random_source(rng, features, per_file),
                           f'src/f{i}.c') for i in range(nfiles)]
    entries = {}
    for model in models:
        if rng.random() < 0.8:
            entries[model.file] = random_formula(rng, features, 2,
                                                 constants=False)
    return models, BuildModel(entries), features


def toggle_effect(pcs, feature, names):
    """Assignments over `names` where toggling `feature` changes the set of
    satisfied presence conditions."""
    matrix = assignment_matrix(len(names))
    column = list(names).index(feature)
    flipped = matrix.copy()
    flipped[:, column] = ~flipped[:, column]
    changed = np.zeros(matrix.shape[0], dtype=bool)
    for pc in pcs:
        changed |= truth_table(pc, names, matrix) != \
            truth_table(pc, names, flipped)
    return changed


def block_pcs(models):
    return [block.presence_condition for model in models
            for block in iter_blocks(model.root)]


def solver_equivalent(f, g):
    """Equivalence decided by the solver rather than by truth tables."""
    both = Conjunction((f, g))
    neither = Conjunction((Negation(f), Negation(g)))
    return is_tautology(Disjunction((both, neither)))
