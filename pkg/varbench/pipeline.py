"""Pipeline graphs: the wiring of extractors and analysis components.

A pipeline is written as nested calls; the outermost call is the sink::

    FeatureEffects(PcFinder(cmComponent(), bmComponent()))

``cmComponent()``, ``bmComponent()`` and ``vmComponent()`` stand for the code,
build and variability model extractors; every other name is looked up in
:data:`varbench.analysis.COMPONENTS`. The same graph can be programmed with
:class:`PipelineBuilder`, which is how the presets are defined.
"""

from dataclasses import dataclass
from pathlib import Path
import csv
import json
import logging
import re

from varbench.analysis import COMPONENTS, Kind
from varbench.exceptions import (PipelineSyntaxError, UnknownComponent,
                                 ArityMismatch, KindMismatch, MissingInput,
                                 InvalidValue, OutputError)
from varbench.util import snake_case

logger = logging.getLogger(__name__)

__all__ = ['Node', 'PipelineGraph', 'PipelineBuilder', 'TERMINALS',
           'parse_pipeline_dsl', 'preset', 'graph_for', 'check_inputs',
           'write_table']

#: terminal name -> (pipeline kind, model kind)
TERMINALS = {'cmComponent': ('code', Kind.CODE),
             'bmComponent': ('build', Kind.BUILD),
             'vmComponent': ('vm', Kind.VM)}
TERMINAL_OF = {kind: name for name, (kind, _) in TERMINALS.items()}


@dataclass(frozen=True)
class Node:
    """A component instance.

    :param id: position in :attr:`PipelineGraph.nodes`
    :param component: terminal or registered component name
    :param name: instance name; the pipeline kind for terminals
    :param inputs: ``(parameter, producer id)`` pairs in parameter order
    :param position: offset of the call in the pipeline text
    """
    id: int
    component: str
    name: str
    inputs: tuple = ()
    position: int = 0

    @property
    def is_terminal(self):
        return self.component in TERMINALS

    @property
    def output(self):
        if self.is_terminal:
            return TERMINALS[self.component][1]
        return COMPONENTS[self.component].output


@dataclass(frozen=True)
class PipelineGraph:
    """Nodes in creation order (producers first) and the sink's id."""
    nodes: tuple
    sink: int

    def __len__(self):
        return len(self.nodes)

    def edges(self):
        """``(producer id, consumer id, parameter)`` triples."""
        return [(source, node.id, param) for node in self.nodes
                for param, source in node.inputs]

    def terminals(self):
        """Pipeline kinds of the extractors the graph uses."""
        return [TERMINALS[n.component][0] for n in self.nodes
                if n.is_terminal]

    def analyses(self):
        return [n for n in self.nodes if not n.is_terminal]

    def consumers(self, node_id):
        return [(consumer, param) for source, consumer, param in self.edges()
                if source == node_id]

    def find(self, name):
        """Analysis nodes whose instance or component name is `name`."""
        return [n for n in self.analyses()
                if name in (n.name, n.component)]

    def render(self, node_id=None):
        """Canonical pipeline text."""
        node = self.nodes[self.sink if node_id is None else node_id]
        args = ', '.join(self.render(source) for _, source in node.inputs)
        return f'{node.component}({args})'

    def describe(self):
        lines = [f'pipeline: {self.render()}']
        for node in self.nodes:
            if node.is_terminal:
                lines.append(f'  {node.name}: {node.component}() -> '
                             f'{node.output.value}')
                continue
            inputs = ', '.join(f'{param}={self.nodes[source].name}'
                               for param, source in node.inputs)
            mark = ' [sink]' if node.id == self.sink else ''
            lines.append(f'  {node.name}: {node.component}({inputs}) -> '
                         f'{node.output.value}{mark}')
        return '\n'.join(lines)


class PipelineBuilder(object):
    """Programmatic construction of a :class:`PipelineGraph`::

        b = PipelineBuilder()
        b.add('FeatureEffects', b.add('PcFinder', b.code(), b.build()))
        graph = b.graph()

    Terminals are shared: calling :meth:`code` twice returns the same node.
    """

    def __init__(self):
        self.nodes = []
        self._terminals = {}
        self._names = {}

    def _instance_name(self, component):
        base = snake_case(component)
        count = self._names.get(base, 0) + 1
        self._names[base] = count
        return base if count == 1 else f'{base}_{count}'

    def terminal(self, component, position=0):
        if component not in self._terminals:
            kind = TERMINALS[component][0]
            node = Node(len(self.nodes), component, kind, (), position)
            self.nodes.append(node)
            self._terminals[component] = node.id
        return self._terminals[component]

    def code(self):
        return self.terminal('cmComponent')

    def build(self):
        return self.terminal('bmComponent')

    def vm(self):
        return self.terminal('vmComponent')

    def add(self, component, *inputs, position=0, positions=None):
        """Add an analysis component fed by the nodes `inputs`.

        Each input fills the first unfilled parameter of its kind.

        :returns: the new node's id
        :raises UnknownComponent: if `component` is not registered
        :raises KindMismatch: if an input fits no unfilled parameter
        :raises ArityMismatch: on too many inputs or a missing required one
        """
        if component in TERMINALS:
            if inputs:
                raise ArityMismatch(component, position,
                                    'takes no arguments')
            return self.terminal(component, position)
        try:
            cls = COMPONENTS[component]
        except KeyError:
            raise UnknownComponent(component, position) from None
        positions = positions or [position] * len(inputs)
        filled = {}
        for source, where in zip(inputs, positions):
            kind = self.nodes[source].output
            free = [p for p in cls.inputs if p.name not in filled]
            match = next((p for p in free if p.kind is kind), None)
            if match is None:
                if not free:
                    raise ArityMismatch(component, where,
                                        f'takes at most {len(cls.inputs)} '
                                        f'arguments')
                expected = ' or '.join(p.kind.value for p in free)
                raise KindMismatch(component, where, expected, kind.value)
            filled[match.name] = source
        for param in cls.inputs:
            if param.required and param.name not in filled:
                raise ArityMismatch(component, position,
                                    f'missing {param.kind.value} input '
                                    f'{param.name!r}')
        node = Node(len(self.nodes), component,
                    self._instance_name(component),
                    tuple((p.name, filled[p.name]) for p in cls.inputs
                          if p.name in filled), position)
        self.nodes.append(node)
        return node.id

    def graph(self, sink=None):
        sink = len(self.nodes) - 1 if sink is None else sink
        if sink < 0 or self.nodes[sink].is_terminal:
            position = self.nodes[sink].position if sink >= 0 else 0
            raise PipelineSyntaxError(position, 'the outermost call must be '
                                      'an analysis component')
        return PipelineGraph(tuple(self.nodes), sink)


_DSL_TOKEN = re.compile(r'\s*(?:([A-Za-z_][A-Za-z0-9_]*)|([(),]))')


class _DslParser(object):
    def __init__(self, text):
        self.text = text
        self.tokens = []
        pos, end = 0, len(text.rstrip())
        while pos < end:
            m = _DSL_TOKEN.match(text, pos)
            if m is None:
                start = len(text) - len(text[pos:].lstrip())
                raise PipelineSyntaxError(start, 'unexpected character '
                                          f'{text[start]!r}')
            self.tokens.append((m.group(m.lastindex), m.start(m.lastindex),
                                m.lastindex == 1))
            pos = m.end()
        self.index = 0
        self.builder = PipelineBuilder()

    def peek(self):
        if self.index < len(self.tokens):
            return self.tokens[self.index]
        return (None, len(self.text), False)

    def expect(self, token=None, ident=False):
        value, position, is_ident = self.peek()
        if value is None or (ident and not is_ident) or \
                (token is not None and value != token):
            want = 'a component name' if ident else repr(token)
            found = 'end of input' if value is None else repr(value)
            raise PipelineSyntaxError(position, f'expected {want}, found '
                                      f'{found}')
        self.index += 1
        return value, position

    def call(self):
        name, position = self.expect(ident=True)
        self.expect('(')
        args, positions = [], []
        if self.peek()[0] != ')':
            while True:
                positions.append(self.peek()[1])
                args.append(self.call())
                if self.peek()[0] != ',':
                    break
                self.expect(',')
        self.expect(')')
        return self.builder.add(name, *args, position=position,
                                positions=positions)

    def parse(self):
        sink = self.call()
        value, position, _ = self.peek()
        if value is not None:
            raise PipelineSyntaxError(position, 'trailing input')
        return self.builder.graph(sink)


def parse_pipeline_dsl(text):
    """Parse pipeline text into a validated graph.

    Grammar: ``expr := NAME '(' [expr (',' expr)*] ')'``; whitespace is
    insignificant.

    :raises PipelineSyntaxError: with the offending position
    :raises UnknownComponent: for names that are not registered
    :raises ArityMismatch: on too many or missing arguments
    :raises KindMismatch: if an argument's kind fits no parameter
    """
    if not text.strip():
        raise PipelineSyntaxError(0, 'empty pipeline')
    return _DslParser(text).parse()


def preset(name):
    """The programmed pipelines selectable with ``analysis.preset``."""
    b = PipelineBuilder()
    if name == 'feature_effects':
        b.add('FeatureEffects', b.add('PcFinder', b.code(), b.build()))
    elif name == 'dead_blocks':
        b.add('DeadBlocks', b.code(), b.build(), b.vm())
    elif name == 'metrics':
        b.add('BlockMetrics', b.code())
    else:
        raise InvalidValue('analysis.preset', f'unknown preset {name!r}')
    return b.graph()


def check_inputs(graph, active):
    """Drop optional inputs whose extractor is not configured.

    :param active: pipeline kinds with a configured extractor
    :returns: the graph without edges from inactive terminals
    :raises MissingInput: if a required input's extractor is not configured
    """
    nodes = []
    for node in graph.nodes:
        if node.is_terminal:
            nodes.append(node)
            continue
        params = {p.name: p for p in COMPONENTS[node.component].inputs}
        kept = []
        for param, source in node.inputs:
            producer = graph.nodes[source]
            if producer.is_terminal and producer.name not in active:
                if params[param].required:
                    raise MissingInput(producer.name, node.component)
                logger.info('%s: %s pipeline not configured, %r receives '
                            'nothing', node.name, producer.name, param)
                continue
            kept.append((param, source))
        nodes.append(Node(node.id, node.component, node.name, tuple(kept),
                          node.position))
    return PipelineGraph(tuple(nodes), graph.sink)


def graph_for(config):
    """Graph of a configuration, checked against its extractors."""
    if config['analysis.preset'] is not None:
        graph = preset(config['analysis.preset'])
    else:
        graph = parse_pipeline_dsl(config['analysis.pipeline'])
    active = [kind for kind in TERMINAL_OF if config.active(kind)]
    graph = check_inputs(graph, active)
    for key in ('analysis.output.intermediate_results',
                'analysis.sequential_components'):
        for name in config[key]:
            if not graph.find(name):
                raise InvalidValue(key, f'no component {name!r} in the '
                                   f'pipeline {graph.render()}')
    return graph


def write_table(table, fmt, path):
    """Write a :class:`~varbench.analysis.ResultTable` as CSV or JSON.

    CSV files are UTF-8 with a header row, LF line endings and every text
    cell quoted; formulas are rendered to text.

    :raises OutputError: if the file cannot be written
    """
    path = Path(path)
    rows = table.text_rows()
    try:
        with open(path, 'w', encoding='utf-8', newline='') as f:
            if fmt == 'csv':
                writer = csv.writer(f, quoting=csv.QUOTE_NONNUMERIC,
                                    lineterminator='\n')
                writer.writerow([c.name for c in table.columns])
                writer.writerows(rows)
            elif fmt == 'json':
                document = {'name': table.name,
                            'columns': [{'name': c.name, 'kind': c.kind.value}
                                        for c in table.columns],
                            'rows': rows}
                f.write(json.dumps(document, indent=2) + '\n')
            else:
                raise ValueError(f'unknown table format {fmt!r}')
    except OSError as e:
        raise OutputError(str(path), e.strerror or str(e)) from e
    return path
