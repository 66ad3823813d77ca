"""Tests of the formula core: simplification, text form, truth tables."""

import numpy as np
import pytest

from varbench.exceptions import FormulaSyntaxError, UnmappedVariable
from varbench.formula import (TRUE, FALSE, Variable, Negation, Conjunction,
                              Disjunction, conjunction, disjunction, evaluate,
                              variables, substitute, simplify, render,
                              parse_formula, truth_table, assignment_matrix)
from varbench.tests.utils import random_formula, brute_equivalent

A, B, C = Variable('A'), Variable('B'), Variable('C')


def test_operators_build_raw_nodes():
    assert (A & B) == Conjunction((A, B))
    assert (A | B) == Disjunction((A, B))
    assert ~A == Negation(A)


def test_nary_constructors():
    assert conjunction() == TRUE
    assert disjunction() == FALSE
    assert conjunction(A) == A
    assert disjunction(A, B) == Disjunction((A, B))


def test_connectives_need_two_operands():
    with pytest.raises(ValueError):
        Conjunction((A,))


@pytest.mark.parametrize('raw, simplified', [
    (A & TRUE, A),
    (A & FALSE, FALSE),
    (A | TRUE, TRUE),
    (A | FALSE, A),
    (~~A, A),
    (~TRUE, FALSE),
    ((A & B) & C, Conjunction((A, B, C))),
    (A & (B | (C | A)), Conjunction((A, Disjunction((B, C, A))))),
    (A & A & B, Conjunction((A, B))),
    (Conjunction((TRUE, TRUE)), TRUE),
])
def test_simplify(raw, simplified):
    assert simplify(raw) == simplified


def test_simplify_keeps_contradictions():
    assert simplify(A & ~A) == Conjunction((A, Negation(A)))


def test_simplify_is_idempotent(rng):
    for _ in range(200):
        f = simplify(random_formula(rng))
        assert simplify(f) == f


def test_simplify_preserves_meaning(rng):
    for _ in range(200):
        f = random_formula(rng)
        assert brute_equivalent(f, simplify(f))


def test_evaluate():
    f = (A & ~B) | C
    assert evaluate(f, {'A': True, 'B': False, 'C': False})
    assert not evaluate(f, {'A': True, 'B': True, 'C': False})


def test_evaluate_reports_unmapped_variables():
    with pytest.raises(UnmappedVariable) as err:
        evaluate(A | B, {'A': True})
    assert err.value.name == 'B'
    assert isinstance(err.value, LookupError)


def test_variables_in_first_occurrence_order():
    assert variables((C & A) | ~B | A) == ['C', 'A', 'B']


def test_substitute():
    assert substitute(A & B, 'A', True) == B
    assert substitute(A & B, 'A', False) == FALSE
    assert substitute(A | ~B, 'B', True) == A


@pytest.mark.parametrize('f, text', [
    (TRUE, 'true'),
    (FALSE, 'false'),
    (A, 'A'),
    (~A, '!A'),
    (A & B, '(A && B)'),
    (Conjunction((A, B, C)), '((A && B) && C)'),
    (~(A | B), '!(A || B)'),
])
def test_render(f, text):
    assert render(f) == text
    assert str(f) == text


def test_parse_precedence():
    assert parse_formula('A || B && !C') == \
        Disjunction((A, Conjunction((B, Negation(C)))))


def test_parse_constants():
    assert parse_formula('true && A') == Conjunction((TRUE, A))


def test_render_parse_round_trip(rng):
    for _ in range(300):
        f = simplify(random_formula(rng))
        assert parse_formula(render(f)) == f


def test_names_may_start_with_a_digit():
    f = Conjunction((Variable('64BIT'), Negation(Variable('8250'))))
    assert render(f) == '(64BIT && !8250)'
    assert parse_formula(render(f)) == f
    assert parse_formula('64BIT || false') == Disjunction((Variable('64BIT'),
                                                           FALSE))


@pytest.mark.parametrize('text, position', [
    ('A &&', 4),
    ('(A || B', 7),
    ('A B', 2),
    ('A & B', 2),
    ('', 0),
])
def test_parse_errors_are_positioned(text, position):
    with pytest.raises(FormulaSyntaxError) as err:
        parse_formula(text)
    assert err.value.position == position


def test_assignment_matrix_counts_in_binary():
    m = assignment_matrix(2)
    np.testing.assert_array_equal(m, [[False, False], [False, True],
                                      [True, False], [True, True]])
    np.testing.assert_array_equal(assignment_matrix(3, 2, 4),
                                  assignment_matrix(3)[2:4])


def test_truth_table():
    np.testing.assert_array_equal(truth_table(A & ~B, ['A', 'B']),
                                  [False, False, True, False])
    np.testing.assert_array_equal(truth_table(TRUE, ['A']), [True, True])


def test_truth_table_matches_evaluate(rng):
    names = ['A', 'B', 'C', 'D']
    matrix = assignment_matrix(len(names))
    for _ in range(50):
        f = random_formula(rng, names)
        table = truth_table(f, names, matrix)
        for row, value in zip(matrix, table):
            assert evaluate(f, dict(zip(names, row))) == value


def test_truth_table_needs_every_variable():
    with pytest.raises(UnmappedVariable):
        truth_table(A & B, ['A'])
