#!/usr/bin/env python
"""Analyses over extracted models.

Each analysis is a component class that receives its non-stream inputs
through :meth:`Component.start`, is fed code models one file at a time
through :meth:`Component.consume` and produces its output with
:meth:`Component.result`. Outputs never depend on the order in which code
models arrive; tables are sorted on their key columns before they are
emitted. The module-level functions wrap the components for direct use::

    table, index = pc_finder(models, build)
    effects = feature_effects(index)
"""

from collections import defaultdict, namedtuple
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple
import logging
import numpy as np

from varbench.codemodel import OPAQUE_ATOM, iter_blocks
from varbench.buildmodel import lookup_pc
from varbench.exceptions import MissingInput
from varbench.formula import (TRUE, FALSE, Formula, Negation, conjunction,
                              disjunction, simplify, substitute, variables,
                              render)
from varbench.solver import is_satisfiable
from varbench.util import snake_case

logger = logging.getLogger(__name__)

__all__ = ['Kind', 'ColumnKind', 'Column', 'Param', 'ResultTable',
           'PcRecord', 'FeatureEffect', 'PcIndex', 'AnalysisOptions',
           'Component', 'PcFinder', 'FeatureEffects', 'DeadBlocks',
           'BlockMetrics', 'BuildUnresolved', 'COMPONENTS', 'pc_finder',
           'feature_effects', 'dead_blocks', 'block_metrics',
           'build_unresolved', 'is_feature']


class Kind(Enum):
    """What flows along a pipeline edge."""
    CODE = 'code model stream'
    BUILD = 'build model'
    VM = 'variability model'
    PC_INDEX = 'presence-condition index'
    TABLE = 'result table'


class ColumnKind(Enum):
    TEXT = 'Text'
    INT = 'Int'
    FORMULA = 'Formula'


Column = namedtuple('Column', ['name', 'kind'])
Param = namedtuple('Param', ['name', 'kind', 'required'])


def _sortable(value):
    return render(value) if isinstance(value, Formula) else value


@dataclass(frozen=True)
class ResultTable:
    """Named, typed rows produced by a component.

    :param name: component instance name, also the output file stem
    :param columns: tuple of :class:`Column`
    :param rows: tuple of row tuples, one value per column
    :param key: names of the columns the rows are sorted on
    """
    name: str
    columns: tuple
    rows: tuple
    key: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'columns',
                           tuple(Column(*c) for c in self.columns))
        object.__setattr__(self, 'rows', tuple(tuple(r) for r in self.rows))
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f'{self.name}: row {row!r} does not match '
                                 f'{len(self.columns)} columns')

    @classmethod
    def build(cls, name, columns, rows, key):
        """Sort `rows` on the `key` columns (remaining columns break ties)
        and build the table."""
        names = [c[0] for c in columns]
        positions = [names.index(k) for k in key]

        def order(row):
            cells = tuple(_sortable(v) for v in row)
            return tuple(cells[i] for i in positions) + cells

        return cls(name, columns, sorted(rows, key=order), tuple(key))

    def text_rows(self):
        """Rows with formulas rendered to text."""
        return [[render(v) if c.kind is ColumnKind.FORMULA else v
                 for v, c in zip(row, self.columns)] for row in self.rows]


class PcRecord(NamedTuple):
    feature: str
    pc: Formula
    origin: tuple


class FeatureEffect(NamedTuple):
    feature: str
    effect: Formula


@dataclass(frozen=True)
class PcIndex:
    """Distinct combined presence conditions per feature.

    :param index: feature name to tuple of PCs, sorted by their text form
    :param table: the ``(file, line, pc)`` table they were collected from
    """
    index: dict
    table: ResultTable


@dataclass(frozen=True)
class AnalysisOptions:
    missing_file_pc: Formula = TRUE


def is_feature(name):
    """True for selectable features, False for companions and opaque
    atoms."""
    return not name.endswith('_MODULE') and not OPAQUE_ATOM.fullmatch(name)


def has_opaque(f):
    return any(OPAQUE_ATOM.fullmatch(name) for name in variables(f))


class Component(object):
    """Base class of analysis components.

    :param name: instance name (output file stem)
    :type name: str
    :param options: analysis settings
    :type options: AnalysisOptions, optional
    :param diagnostics: collector for run diagnostics
    :type diagnostics: varbench.util.Diagnostics, optional
    """
    inputs = ()
    output = Kind.TABLE

    def __init__(self, name=None, options=None, diagnostics=None):
        self.name = name or snake_case(type(self).__name__)
        self.options = options or AnalysisOptions()
        self.diagnostics = diagnostics
        self.items = 0

    @classmethod
    def stream_input(cls):
        """Name of the code-stream parameter, or None."""
        return next((p.name for p in cls.inputs if p.kind is Kind.CODE),
                    None)

    def note(self, kind, message):
        if self.diagnostics is not None:
            self.diagnostics.note(type(self).__name__, kind, message)

    def start(self, **inputs):
        pass

    def consume(self, model):
        self.items += 1

    def result(self):
        return self.table()

    def table(self):
        raise NotImplementedError


class PcFinder(Component):
    """Presence conditions of all code blocks, conjoined with the build
    presence condition of their file when a build model is given."""
    inputs = (Param('code', Kind.CODE, True),
              Param('build', Kind.BUILD, False))
    output = Kind.PC_INDEX
    columns = (Column('file', ColumnKind.TEXT), Column('line', ColumnKind.INT),
               Column('pc', ColumnKind.FORMULA))

    def __init__(self, name=None, options=None, diagnostics=None):
        super().__init__(name, options, diagnostics)
        self.build = None
        self.rows = []

    def start(self, build=None, **inputs):
        self.build = build

    def combined(self, file, pc):
        if self.build is None:
            return pc
        file_pc = lookup_pc(self.build, file, self.options.missing_file_pc,
                            self.diagnostics)
        return simplify(conjunction(pc, file_pc))

    def consume(self, model):
        super().consume(model)
        for block in iter_blocks(model.root):
            self.rows.append((block.file, block.line_start,
                              self.combined(block.file,
                                            block.presence_condition)))

    def records(self):
        """One :class:`PcRecord` per feature occurrence in a combined PC;
        ``false`` PCs are left out."""
        records = []
        for file, line, pc in self.rows:
            if pc == FALSE:
                continue
            for name in variables(pc):
                if is_feature(name):
                    records.append(PcRecord(name, pc, (file, line)))
        return sorted(records, key=lambda r: (r.feature, render(r.pc),
                                              r.origin))

    def index(self):
        pcs = defaultdict(dict)
        for record in self.records():
            pcs[record.feature].setdefault(record.pc, None)
        return {feature: tuple(sorted(found, key=render))
                for feature, found in sorted(pcs.items())}

    def table(self):
        return ResultTable.build(self.name, self.columns, self.rows,
                                 ('file', 'line'))

    def result(self):
        return PcIndex(self.index(), self.table())


def _effect(pc, feature):
    """Condition under which toggling `feature` flips `pc`."""
    high = substitute(pc, feature, True)
    low = substitute(pc, feature, False)
    return disjunction(conjunction(high, Negation(low)),
                       conjunction(Negation(high), low))


class FeatureEffects(Component):
    """Feature-effect constraint of every feature in a PC index."""
    inputs = (Param('index', Kind.PC_INDEX, True),)
    columns = (Column('feature', ColumnKind.TEXT),
               Column('effect', ColumnKind.FORMULA))

    def __init__(self, name=None, options=None, diagnostics=None):
        super().__init__(name, options, diagnostics)
        self.effects = []

    def start(self, index=None, **inputs):
        pcs = index.index if isinstance(index, PcIndex) else index
        for feature, found in sorted(pcs.items()):
            if not found:
                continue
            effect = simplify(disjunction(*(_effect(pc, feature)
                                            for pc in found)))
            self.effects.append(FeatureEffect(feature, effect))
        self.items = len(self.effects)

    def table(self):
        return ResultTable.build(self.name, self.columns, self.effects,
                                 ('feature',))


class DeadBlocks(PcFinder):
    """Blocks that no valid configuration includes."""
    inputs = (Param('code', Kind.CODE, True),
              Param('build', Kind.BUILD, True),
              Param('vm', Kind.VM, True))
    output = Kind.TABLE
    columns = PcFinder.columns + (Column('verdict', ColumnKind.TEXT),)

    def start(self, build=None, vm=None, **inputs):
        if build is None:
            raise MissingInput('build', type(self).__name__)
        if vm is None:
            raise MissingInput('vm', type(self).__name__)
        self.build, self.vm = build, vm

    def consume(self, model):
        Component.consume(self, model)
        for block in iter_blocks(model.root):
            pc = self.combined(block.file, block.presence_condition)
            if has_opaque(block.presence_condition):
                self.note('undecidable', f'{block.file}:{block.line_start}: '
                          f'opaque condition, reported alive')
                verdict = 'Alive'
            elif is_satisfiable(conjunction(self.vm.constraint, pc)):
                verdict = 'Alive'
            else:
                verdict = 'Dead'
                logger.info('dead block %s:%d', block.file, block.line_start)
            self.rows.append((block.file, block.line_start, pc, verdict))

    def result(self):
        return self.table()


class BlockMetrics(Component):
    """Block count, nesting depth and conditionally compiled lines per
    file."""
    inputs = (Param('code', Kind.CODE, True),)
    columns = (Column('file', ColumnKind.TEXT),
               Column('block_count', ColumnKind.INT),
               Column('max_nesting_depth', ColumnKind.INT),
               Column('variable_loc', ColumnKind.INT))

    def __init__(self, name=None, options=None, diagnostics=None):
        super().__init__(name, options, diagnostics)
        self.rows = []

    @staticmethod
    def depth(element):
        if not element.children:
            return 0
        return 1 + max(BlockMetrics.depth(c) for c in element.children)

    def consume(self, model):
        super().consume(model)
        covered = np.zeros(model.root.line_end + 1, dtype=bool)
        count = 0
        for block in iter_blocks(model.root):
            covered[block.line_start:block.line_end + 1] = True
            count += 1
        self.rows.append((model.file, count, self.depth(model.root),
                          int(covered.sum())))

    def table(self):
        return ResultTable.build(self.name, self.columns, self.rows,
                                 ('file',))


class BuildUnresolved(Component):
    """Build-file lines the build extractor skipped."""
    inputs = (Param('build', Kind.BUILD, True),)
    columns = (Column('file', ColumnKind.TEXT), Column('line', ColumnKind.INT),
               Column('text', ColumnKind.TEXT))

    def __init__(self, name=None, options=None, diagnostics=None):
        super().__init__(name, options, diagnostics)
        self.rows = []

    def start(self, build=None, **inputs):
        if build is None:
            raise MissingInput('build', type(self).__name__)
        self.rows = [tuple(u) for u in build.unresolved]
        for file, line, text in build.unresolved:
            self.note('unresolved', f'{file}:{line}: {text}')
        self.items = len(self.rows)

    def table(self):
        return ResultTable.build(self.name, self.columns, self.rows,
                                 ('file', 'line'))


COMPONENTS = {cls.__name__: cls for cls in
              (PcFinder, FeatureEffects, DeadBlocks, BlockMetrics,
               BuildUnresolved)}


def _run(component, code=(), **inputs):
    component.start(**inputs)
    for model in code:
        component.consume(model)
    return component.result()


def pc_finder(code, build=None, missing=TRUE, diagnostics=None):
    """Combined presence conditions of all blocks.

    :param code: code models, any order
    :type code: iterable of varbench.codemodel.CodeModel
    :param build: build model, optional
    :type build: varbench.buildmodel.BuildModel
    :param missing: PC of files without build entry
    :returns: ``(table, index)``; the index maps every feature to its
              distinct combined PCs, ``false`` PCs excluded
    """
    finder = PcFinder(options=AnalysisOptions(missing),
                      diagnostics=diagnostics)
    out = _run(finder, code, build=build)
    return out.table, out.index


def feature_effects(index):
    return _run(FeatureEffects(), index=index)


def dead_blocks(code, build, vm, missing=TRUE, diagnostics=None):
    """Dead/Alive verdict of every block.

    :raises MissingInput: if `build` or `vm` is None
    """
    return _run(DeadBlocks(options=AnalysisOptions(missing),
                           diagnostics=diagnostics), code, build=build, vm=vm)


def block_metrics(code):
    return _run(BlockMetrics(), code)


def build_unresolved(build):
    return _run(BuildUnresolved(), build=build)
