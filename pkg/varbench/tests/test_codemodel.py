"""Tests of the C preprocessor extractor."""

import json
from itertools import combinations

import pytest

from varbench.codemodel import (BranchKind, CodeBlock, CodeExtractor,
                                ExtractOptions, OPAQUE_ATOM, discover_sources,
                                element_from_dict, element_to_dict,
                                extract_file, extract_path, iter_blocks,
                                parse_cpp_condition, presence_conditions)
from varbench.data.files import MINI_SPL
from varbench.exceptions import MalformedExpression, UnbalancedDirectives
from varbench.formula import (TRUE, Variable, Negation, conjunction,
                              disjunction, parse_formula, render, simplify)
from varbench.solver import is_satisfiable, is_tautology
from varbench.tests.datafiles import DRIVER_ELEMENTS
from varbench.tests.utils import random_source, solver_equivalent
from varbench.util import fnv1a64


def opaque(text):
    return f'U_{fnv1a64(text)}'


def blocks(source, opts=None):
    model = extract_file(source, 'snippet.c', opts)
    return [(b.line_start, b.line_end, b.branch_kind.value,
             render(b.presence_condition)) for b in iter_blocks(model.root)]


SNIPPETS = {
    'empty': ('', []),
    'no directives': ('int x;\n', []),
    'ifdef': ('#ifdef CONFIG_A\nx\n#endif\n', [(1, 3, 'Ifdef', 'A')]),
    'ifndef': ('#ifndef CONFIG_A\n#endif\n', [(1, 2, 'Ifndef', '!A')]),
    'if defined': ('#if defined(CONFIG_A) && !defined(CONFIG_B)\n#endif\n',
                   [(1, 2, 'If', '(A && !B)')]),
    'nested': ('#ifdef CONFIG_A\n#ifdef CONFIG_B\nx\n#endif\n#endif\n',
               [(1, 5, 'Ifdef', 'A'), (2, 4, 'Ifdef', '(A && B)')]),
    'if elif else': ('#if defined(CONFIG_A)\na\n#elif defined(CONFIG_B)\nb\n'
                     '#else\nc\n#endif\n',
                     [(1, 2, 'If', 'A'), (3, 4, 'Elif', '(B && !A)'),
                      (5, 7, 'Else', '!(A || B)')]),
    'elif chain': ('#if CONFIG_A\n#elif CONFIG_B\n#elif CONFIG_C\n#endif\n',
                   [(1, 1, 'If', 'A'), (2, 2, 'Elif', '(B && !A)'),
                    (3, 4, 'Elif', '((C && !A) && !B)')]),
    'ifdef else': ('#ifdef CONFIG_A\n#else\n#endif\n',
                   [(1, 1, 'Ifdef', 'A'), (2, 3, 'Else', '!A')]),
    'ifndef else': ('#ifndef CONFIG_A\n#else\n#endif\n',
                    [(1, 1, 'Ifndef', '!A'), (2, 3, 'Else', 'A')]),
    'bare names': ('#if CONFIG_A || CONFIG_B\n#endif\n',
                   [(1, 2, 'If', '(A || B)')]),
    'defined without parens': ('#if defined CONFIG_A\n#endif\n',
                               [(1, 2, 'If', 'A')]),
    'unprefixed name': ('#ifdef FOO\n#endif\n', [(1, 2, 'Ifdef', 'FOO')]),
    'block comment': ('/*\n#ifdef CONFIG_A\n#endif\n*/\n', []),
    'line comment after directive': ('#ifdef CONFIG_A // #endif\n#endif\n',
                                     [(1, 2, 'Ifdef', 'A')]),
    'string over continuation': ('char *s = "x\\\n#ifdef CONFIG_A";\n', []),
    'directive continuation': ('#if defined(CONFIG_A) && \\\n'
                               '    defined(CONFIG_B)\nx\n#endif\n',
                               [(1, 4, 'If', '(A && B)')]),
    'comment opened mid-line': ('int x; /* start\n#ifdef CONFIG_A\n*/\n', []),
    'comment before hash': ('/* c */ #ifdef CONFIG_A\n#endif\n',
                            [(1, 2, 'Ifdef', 'A')]),
    'spaces after hash': ('#  ifdef CONFIG_A\n#  endif\n',
                          [(1, 2, 'Ifdef', 'A')]),
    'comparison': ('#if CONFIG_A > 2\n#endif\n',
                   [(1, 2, 'If', opaque('CONFIG_A > 2'))]),
    'partly opaque': ('#if defined(CONFIG_A) || (X > 2)\n#endif\n',
                      [(1, 2, 'If', f'(A || {opaque("X > 2")})')]),
    'function-like macro': ('#if IS_ENABLED(CONFIG_A)\n#endif\n',
                            [(1, 2, 'If', opaque('IS_ENABLED(CONFIG_A)'))]),
    'number': ('#if 0\n#endif\n', [(1, 2, 'If', opaque('0'))]),
    'reserved name': ('#if defined(__KERNEL__)\n#endif\n',
                      [(1, 2, 'If', opaque('defined(__KERNEL__)'))]),
    'bare prefix': ('#if CONFIG_\n#endif\n', [(1, 2, 'If', opaque('CONFIG_'))]),
    'ternary': ('#if CONFIG_A ? CONFIG_B : CONFIG_C\n#endif\n',
                [(1, 2, 'If', opaque('CONFIG_A ? CONFIG_B : CONFIG_C'))]),
    'literal true': ('#if true\n#endif\n', [(1, 2, 'If', opaque('true'))]),
    'nested elif': ('#ifdef CONFIG_A\n#if CONFIG_B\n#elif CONFIG_C\n#endif\n'
                    '#endif\n',
                    [(1, 5, 'Ifdef', 'A'), (2, 2, 'If', '(A && B)'),
                     (3, 4, 'Elif', '((A && C) && !B)')]),
    'nested else': ('#ifdef CONFIG_A\n#ifdef CONFIG_B\n#else\n#endif\n'
                    '#endif\n',
                    [(1, 5, 'Ifdef', 'A'), (2, 2, 'Ifdef', '(A && B)'),
                     (3, 4, 'Else', '(A && !B)')]),
    'crlf': ('#ifdef CONFIG_A\r\nx\r\n#endif\r\n', [(1, 3, 'Ifdef', 'A')]),
    'no final newline': ('#ifdef CONFIG_A\n#endif', [(1, 2, 'Ifdef', 'A')]),
    'other directives': ('#define X 1\n#ifdef CONFIG_A\n#include <a.h>\n'
                         '#endif\n', [(2, 4, 'Ifdef', 'A')]),
    'double negation': ('#if !!defined(CONFIG_A)\n#endif\n',
                        [(1, 2, 'If', 'A')]),
    'negated group': ('#if !(defined(CONFIG_A) || defined(CONFIG_B))\n'
                      '#endif\n', [(1, 2, 'If', '!(A || B)')]),
    'parenthesized name': ('#if (CONFIG_A)\n#endif\n', [(1, 2, 'If', 'A')]),
    'null directive': ('#\n#ifdef CONFIG_A\n#endif\n',
                       [(2, 3, 'Ifdef', 'A')]),
    'siblings': ('#ifdef CONFIG_A\n#endif\nx\n#ifndef CONFIG_B\n#endif\n',
                 [(1, 2, 'Ifdef', 'A'), (4, 5, 'Ifndef', '!B')]),
}


@pytest.mark.parametrize('name', sorted(SNIPPETS))
def test_snippet(name):
    source, expected = SNIPPETS[name]
    assert blocks(source) == expected


def test_corpus_size():
    assert len(SNIPPETS) >= 30


@pytest.mark.parametrize('name', sorted(SNIPPETS))
def test_chains_are_exclusive_and_covering(name):
    """Branches of a chain with ``#else`` exclude each other and cover every
    configuration of their parent."""
    model = extract_file(SNIPPETS[name][0], 'snippet.c')
    elements = [model.root] + list(iter_blocks(model.root))
    for element in elements:
        chain = []
        for child in element.children:
            if child.branch_kind in (BranchKind.IF, BranchKind.IFDEF,
                                     BranchKind.IFNDEF):
                chain = [child]
            else:
                chain.append(child)
            if child.branch_kind is BranchKind.ELSE:
                conditions = [b.condition for b in chain]
                assert is_tautology(disjunction(*conditions))
                for a, b in combinations(conditions, 2):
                    assert not is_satisfiable(conjunction(a, b))


def test_opaque_atoms_are_recorded():
    model = extract_file('#if CONFIG_A > 2 || defined(CONFIG_B)\n#endif\n',
                         'a.c')
    assert model.unknown_atoms == frozenset({opaque('CONFIG_A > 2')})
    assert OPAQUE_ATOM.fullmatch(opaque('CONFIG_A > 2'))


def test_opaque_atoms_are_stable():
    first = parse_cpp_condition('X  >  2')
    assert first == parse_cpp_condition('  X  >  2 ')
    assert first != parse_cpp_condition('X > 2')


def test_custom_prefix():
    opts = ExtractOptions('CFG_')
    assert blocks('#ifdef CFG_A\n#endif\n', opts) == [(1, 2, 'Ifdef', 'A')]
    assert blocks('#ifdef CONFIG_A\n#endif\n', opts) == \
        [(1, 2, 'Ifdef', 'CONFIG_A')]


@pytest.mark.parametrize('text, expected', [
    ('defined(CONFIG_A) && !defined(CONFIG_B)', 'A && !B'),
    ('CONFIG_A || CONFIG_B && CONFIG_C', 'A || B && C'),
    ('(CONFIG_A || CONFIG_B) && CONFIG_C', '(A || B) && C'),
])
def test_parse_cpp_condition(text, expected):
    assert parse_cpp_condition(text) == simplify(parse_formula(expected))


@pytest.mark.parametrize('source, line', [
    ('#if (defined(CONFIG_A)\n#endif\n', 1),
    ('x\n#if\n#endif\n', 2),
    ('#if CONFIG_A &&\n#endif\n', 1),
    ('#if ()\n#endif\n', 1),
    ('#ifdef\n#endif\n', 1),
    ('#ifdef CONFIG_A\n#elif CONFIG_B)\n#endif\n', 2),
])
def test_malformed(source, line):
    with pytest.raises(MalformedExpression) as err:
        extract_file(source, 'bad.c')
    assert (err.value.file, err.value.line) == ('bad.c', line)


@pytest.mark.parametrize('source, line', [
    ('#endif\n', 1),
    ('x\n#else\n', 2),
    ('#elif CONFIG_A\n', 1),
    ('#ifdef CONFIG_A\n#else\n#else\n#endif\n', 3),
    ('#ifdef CONFIG_A\n#else\n#elif CONFIG_B\n#endif\n', 3),
    ('#ifdef CONFIG_A\n#endif\n#ifdef CONFIG_B\n', 3),
    ('#ifdef CONFIG_A\n#ifdef CONFIG_B\n#endif\n', 1),
])
def test_unbalanced(source, line):
    with pytest.raises(UnbalancedDirectives) as err:
        extract_file(source, 'bad.c')
    assert err.value.line == line


def test_root_element():
    model = extract_file('a\nb\nc\n', 'a.c')
    assert (model.root.line_start, model.root.line_end) == (1, 3)
    assert model.root.condition == TRUE
    assert not isinstance(model.root, CodeBlock)
    assert extract_file('', 'e.c').root.line_end == 1


def test_presence_conditions_in_pre_order():
    model = extract_file('#ifdef CONFIG_A\n#ifdef CONFIG_B\n#endif\n#endif\n'
                         '#ifdef CONFIG_C\n#endif\n', 'p.c')
    a, b, c = Variable('A'), Variable('B'), Variable('C')
    assert presence_conditions(model) == [(('p.c', 1), a),
                                          (('p.c', 2), conjunction(a, b)),
                                          (('p.c', 5), c)]


def test_driver_golden():
    source = open(f'{MINI_SPL}/src/driver.c', encoding='utf-8').read()
    model = extract_file(source, 'src/driver.c')
    with open(DRIVER_ELEMENTS, encoding='utf-8') as f:
        golden = json.load(f)
    assert element_to_dict(model.root) == golden
    assert model.unknown_atoms == frozenset()


def test_driver_against_hand_written_formulas():
    model = extract_path(MINI_SPL, 'src/driver.c')
    serial, debug, legacy, net = (Variable(n) for n in
                                  ('SERIAL', 'DEBUG', 'LEGACY', 'NET'))
    expected = {4: serial,
                6: serial & debug & ~legacy,
                10: ~serial & legacy,
                12: ~serial & ~legacy,
                22: ~net,
                24: net,
                28: net | serial}
    found = dict((line, pc) for (_, line), pc in presence_conditions(model))
    assert sorted(found) == sorted(expected)
    for line, pc in expected.items():
        assert solver_equivalent(found[line], pc), line


def test_presence_condition_invariant(rng):
    """Every block's PC is its parent's PC conjoined with its condition."""
    features = ['A', 'B', 'C', 'D', 'E']
    for i in range(40):
        model = extract_file(random_source(rng, features, 10), f'r{i}.c')
        stack = [(model.root, TRUE)]
        while stack:
            element, parent_pc = stack.pop()
            assert solver_equivalent(element.presence_condition,
                                 conjunction(parent_pc, element.condition))
            assert element.line_start <= element.line_end
            previous = element.line_start - 1
            for child in element.children:
                assert element.line_start <= child.line_start
                assert child.line_end <= element.line_end
                assert child.line_start > previous
                previous = child.line_end
                stack.append((child, element.presence_condition))


def test_extraction_is_deterministic(rng):
    source = random_source(rng, ['A', 'B', 'C'], 12)
    assert extract_file(source, 'x.c') == extract_file(source, 'x.c')


def test_element_dict_round_trip():
    model = extract_path(MINI_SPL, 'src/driver.c')
    data = element_to_dict(model.root)
    assert element_from_dict(data, model.file) == model.root
    assert json.loads(json.dumps(data)) == data


def test_discover_sources():
    found = discover_sources(MINI_SPL)
    assert len(found) == 12
    assert found == sorted(found)
    assert 'src/driver.c' in found and 'include/net.h' in found
    assert discover_sources(MINI_SPL, ['src/*.c', '**/main.c']) == \
        ['src/debug.c', 'src/driver.c', 'src/main.c', 'src/util.c']


def test_undecodable_bytes_are_replaced(tmp_path):
    (tmp_path / 'latin.c').write_bytes(b'/* \xe9t\xe9 */\n#ifdef CONFIG_A\n'
                                       b'#endif\n')
    model = extract_path(tmp_path, 'latin.c')
    assert [b.line_start for b in iter_blocks(model.root)] == [2]


def test_extractor_runs_sorted():
    models = CodeExtractor(MINI_SPL).run()
    assert [m.file for m in models] == discover_sources(MINI_SPL)
    assert sum(len(list(iter_blocks(m.root))) for m in models) == 23


def test_extractor_pool_matches_serial():
    serial = CodeExtractor(MINI_SPL).run()
    parallel = CodeExtractor(MINI_SPL, nproc=2).run()
    assert serial == parallel


def test_negated_ifdef_condition_is_simplified():
    model = extract_file('#ifndef CONFIG_A\n#endif\n', 'n.c')
    (block,) = model.root.children
    assert block.condition == Negation(Variable('A'))
