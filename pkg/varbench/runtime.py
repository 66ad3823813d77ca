"""Execution of configured experiments.

:func:`run` extracts the models a pipeline needs and runs its analysis
components:

* every extraction pipeline runs as its own task (thread);
* code extraction fans out to ``jobs`` worker processes;
* code models stream to the components through bounded buffers, so analyses
  start while extraction is still running;
* ``pipeline.sequential = true`` runs everything in one task, in order.

Result tables, ``run_report.json`` and ``run.log`` are written to
``output_dir``.
"""

from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from multiprocessing import Pool
import json
import logging
import queue
import threading
import time

from varbench import __version__
from varbench.analysis import COMPONENTS, AnalysisOptions, PcIndex
from varbench.buildmodel import BUILD_EXTRACTORS, BuildOptions
from varbench.cache import cache_read, cache_write, iter_code_cache
from varbench.codemodel import CodeExtractor, ExtractOptions
from varbench.exceptions import VarbenchError
from varbench.formula import TRUE, FALSE
from varbench.pipeline import graph_for, write_table
from varbench.util import Diagnostics, attach_log_file, detach_log_file
from varbench.varmodel import VM_EXTRACTORS

logger = logging.getLogger(__name__)

__all__ = ['RunReport', 'ModelStream', 'Cancelled', 'run']


class Cancelled(Exception):
    """Raised in tasks stopped because another task failed."""


class ModelStream(object):
    """Bounded buffer between a producer and one consumer.

    :param capacity: maximum number of buffered models
    :param cancelled: event that stops blocked producers and consumers
    """
    _END = object()

    def __init__(self, capacity, cancelled):
        self._queue = queue.Queue(capacity)
        self._cancelled = cancelled

    def put(self, model):
        while True:
            if self._cancelled.is_set():
                raise Cancelled()
            try:
                self._queue.put(model, timeout=0.05)
                return
            except queue.Full:
                continue

    def close(self):
        self.put(self._END)

    def __iter__(self):
        while True:
            if self._cancelled.is_set():
                raise Cancelled()
            try:
                model = self._queue.get(timeout=0.05)
            except queue.Empty:
                continue
            if model is self._END:
                return
            yield model


@dataclass
class RunReport:
    """Outcome of a run, written as ``run_report.json``."""
    status: str = 'running'
    exit_code: int = 0
    failed_component: str = None
    error: str = None
    config_fingerprint: str = ''
    tool_version: str = __version__
    components: dict = field(default_factory=dict)
    extractor_invocations: dict = field(default_factory=dict)
    opaque_atoms: int = 0
    diagnostics: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    archive: str = None

    @property
    def ok(self):
        return self.status == 'success'

    def to_dict(self):
        return asdict(self)

    def write(self, path):
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(json.dumps(self.to_dict(), indent=2, sort_keys=True)
                    + '\n')


class _Failure(object):
    """First failure of a run; later ones are consequences."""

    def __init__(self):
        self.lock = threading.Lock()
        self.component, self.error = None, None
        self.cancelled = threading.Event()

    def record(self, component, error):
        with self.lock:
            if self.component is None:
                self.component, self.error = component, error
        self.cancelled.set()


def _settings(config):
    missing = TRUE if config['build.missing_file_pc'] else FALSE
    return {'tree': config.path('source_tree'),
            'cache_dir': config.path('cache.dir'),
            'ignore': config['cache.ignore_fingerprint'],
            'extract': ExtractOptions(config['variability.prefix']),
            'build': BuildOptions(config['variability.prefix'],
                                  config['build.tristate'],
                                  config['build.root'],
                                  config['build.pclist_file']),
            'analysis': AnalysisOptions(missing)}


class _Execution(object):
    """State shared by the tasks of one run."""

    def __init__(self, config, graph, report, diagnostics):
        self.config, self.graph = config, graph
        self.report, self.diagnostics = report, diagnostics
        self.settings = _settings(config)
        self.failure = _Failure()
        self.lock = threading.Lock()
        self.atoms = set()
        self.tables = {}
        self.pool = None
        kinds = set(graph.terminals())
        self.active = [k for k in ('code', 'build', 'vm') if k in kinds
                       and config.active(k)]
        for kind in self.active:
            report.extractor_invocations[kind] = 0

    def read_cache(self, kind):
        return self.config[f'{kind}.cache.read']

    def write_cache(self, kind):
        return (self.config[f'{kind}.cache.write'] or self.config['archive']) \
            and not self.read_cache(kind)

    def timed(self, name, items, started):
        with self.lock:
            self.report.components[name] = {
                'seconds': round(time.perf_counter() - started, 6),
                'items': items}

    def count(self, kind, n=1):
        with self.lock:
            self.report.extractor_invocations[kind] += n

    def extract_build(self):
        started, cfg = time.perf_counter(), self.config
        tree = self.settings['tree']
        if self.read_cache('build'):
            model = cache_read('build', self.settings['cache_dir'], tree,
                               ignore_fingerprint=self.settings['ignore'])
        else:
            extractor = BUILD_EXTRACTORS[cfg['build.extractor']]
            model = extractor(tree, self.settings['build'])
            self.count('build')
            if self.write_cache('build'):
                cache_write(model, 'build', self.settings['cache_dir'], tree)
        self.timed('bmComponent', len(model.entries), started)
        return model

    def extract_vm(self):
        started, cfg = time.perf_counter(), self.config
        tree = self.settings['tree']
        if self.read_cache('vm'):
            model = cache_read('vm', self.settings['cache_dir'], tree,
                               ignore_fingerprint=self.settings['ignore'])
        else:
            extractor = VM_EXTRACTORS[cfg['vm.extractor']]
            model = extractor(cfg['vm.files'], tree,
                              cfg['vm.allow_undeclared'])
            self.count('vm')
            if self.write_cache('vm'):
                cache_write(model, 'vm', self.settings['cache_dir'], tree)
        self.timed('vmComponent', len(model.features), started)
        return model

    def code_models(self):
        """Yield code models from the cache or the extractor."""
        cfg, tree = self.config, self.settings['tree']
        if self.read_cache('code'):
            yield from iter_code_cache(self.settings['cache_dir'], tree,
                                       cfg['code.patterns'],
                                       self.settings['ignore'])
            return
        extractor = CodeExtractor(tree, cfg['code.patterns'],
                                  self.settings['extract'], 1,
                                  cfg['log.progress'])
        extracted = []
        for model in extractor.iter_models(self.pool):
            self.count('code')
            if self.write_cache('code'):
                extracted.append(model)
            yield model
        if self.write_cache('code'):
            cache_write(extracted, 'code', self.settings['cache_dir'], tree)

    def produce_code(self, streams):
        started, items = time.perf_counter(), 0
        try:
            for model in self.code_models():
                items += 1
                with self.lock:
                    self.atoms.update(model.unknown_atoms)
                for stream in streams:
                    stream.put(model)
            for stream in streams:
                stream.close()
        finally:
            self.timed('cmComponent', items, started)

    def component(self, node):
        cls = COMPONENTS[node.component]
        return cls(node.name, self.settings['analysis'], self.diagnostics)

    def publish(self, node, result):
        table = result.table if isinstance(result, PcIndex) else result
        with self.lock:
            self.tables[node.name] = table

    def analyse(self, node, inputs, stream):
        """Run one component; `inputs` maps parameters to futures."""
        started = time.perf_counter()
        component = self.component(node)
        sequential = node.name in self.sequential or \
            node.component in self.sequential
        waits_on_analysis = any(not self.graph.nodes[src].is_terminal
                                for _, src in node.inputs)
        buffered = None
        if stream is not None and (sequential or waits_on_analysis):
            buffered = list(stream)
        values = {param: future.result() for param, future in inputs.items()}
        component.start(**values)
        for model in buffered if buffered is not None else (stream or ()):
            component.consume(model)
        result = component.result()
        self.publish(node, result)
        self.timed(node.name, component.items, started)
        return result

    @property
    def sequential(self):
        return set(self.config['analysis.sequential_components'])


def _task(execution, name, future, function, *args):
    """Run `function` and settle `future`; the first error cancels the
    run."""
    try:
        future.set_result(function(*args))
    except Cancelled as e:
        future.set_exception(e)
    except BaseException as e:
        execution.failure.record(name, e)
        future.set_exception(Cancelled())


def _run_parallel(execution):
    graph, config = execution.graph, execution.config
    futures = {node.id: Future() for node in graph.nodes}
    streams = {}
    for consumer in graph.analyses():
        code_param = COMPONENTS[consumer.component].stream_input()
        for param, source in consumer.inputs:
            if param == code_param:
                streams[consumer.id] = ModelStream(
                    config['pipeline.buffer'], execution.failure.cancelled)

    tasks = []
    for node in graph.nodes:
        if not node.is_terminal:
            code_param = COMPONENTS[node.component].stream_input()
            inputs = {param: futures[source] for param, source in node.inputs
                      if param != code_param}
            tasks.append((node.name, futures[node.id], execution.analyse,
                          node, inputs, streams.get(node.id)))
        elif node.name not in execution.active:
            futures[node.id].set_result(None)
        elif node.name == 'code':
            consumers = [streams[c] for c, _ in graph.consumers(node.id)
                         if c in streams]
            tasks.append((node.component, futures[node.id],
                          execution.produce_code, consumers))
        else:
            extract = execution.extract_build if node.name == 'build' \
                else execution.extract_vm
            if config[f'{node.name}.parallel']:
                tasks.append((node.component, futures[node.id], extract))
            else:
                _task(execution, node.component, futures[node.id], extract)

    with ThreadPoolExecutor(max_workers=max(1, len(tasks))) as executor:
        running = [executor.submit(_task, execution, *task) for task in tasks]
        for done in running:
            done.result()


def _run_sequential(execution):
    graph = execution.graph
    results = {}
    for node in graph.nodes:
        name = node.component if node.is_terminal else node.name
        try:
            if node.is_terminal:
                if node.name not in execution.active:
                    results[node.id] = None
                elif node.name == 'code':
                    started = time.perf_counter()
                    models = list(execution.code_models())
                    for model in models:
                        execution.atoms.update(model.unknown_atoms)
                    execution.timed(name, len(models), started)
                    results[node.id] = models
                elif node.name == 'build':
                    results[node.id] = execution.extract_build()
                else:
                    results[node.id] = execution.extract_vm()
                continue
            stream_param = COMPONENTS[node.component].stream_input()
            inputs, stream = {}, None
            for param, source in node.inputs:
                if param == stream_param:
                    stream = results[source]
                else:
                    inputs[param] = _done(results[source])
            results[node.id] = execution.analyse(node, inputs, stream)
        except BaseException as e:
            execution.failure.record(name, e)
            return


def _done(value):
    future = Future()
    future.set_result(value)
    return future


def _write_outputs(execution, output_dir):
    config, graph = execution.config, execution.graph
    fmt = config['analysis.output.format']
    wanted = [graph.nodes[graph.sink]]
    for name in config['analysis.output.intermediate_results']:
        wanted.extend(graph.find(name))
    written = []
    for node in wanted:
        path = output_dir / f'{node.name}.{fmt}'
        if path.name in written:
            continue
        write_table(execution.tables[node.name], fmt, path)
        written.append(path.name)
        logger.info('wrote %s', path)
    return sorted(written)


def run(config):
    """Run the experiment of `config`.

    Errors do not propagate: the report's ``status``, ``exit_code``,
    ``failed_component`` and ``error`` describe them.

    :param config: validated configuration
    :type config: varbench.config.Config
    :returns: the run report, also written to ``run_report.json``
    :rtype: RunReport
    """
    output_dir = config.path('output_dir')
    output_dir.mkdir(parents=True, exist_ok=True)
    handler = attach_log_file(output_dir / config['log.file'],
                              config['log.level'])
    diagnostics = Diagnostics()
    report = RunReport(config_fingerprint=config.fingerprint())
    execution = None
    logger.info('varbench %s, configuration %s', __version__,
                report.config_fingerprint[:12])
    try:
        graph = graph_for(config)
        logger.info('pipeline %s', graph.render())
        execution = _Execution(config, graph, report, diagnostics)
        if config['pipeline.sequential']:
            _run_sequential(execution)
        elif 'code' in execution.active and config['code.parallel'] and \
                config['jobs'] > 1 and not execution.read_cache('code'):
            # the pool forks before any pipeline thread starts
            with Pool(config['jobs']) as pool:
                execution.pool = pool
                _run_parallel(execution)
        else:
            _run_parallel(execution)
        failure = execution.failure
        if failure.error is not None:
            raise failure.error
        report.outputs = _write_outputs(execution, output_dir)
        report.status = 'success'
    except Exception as e:
        if execution is not None:
            report.failed_component = execution.failure.component
        report.status = 'failed'
        report.exit_code = _exit_code(e, report.failed_component)
        report.error = str(e)
        logger.error('run failed%s: %s',
                     f' in {report.failed_component}'
                     if report.failed_component else '', e)
        if execution is not None and config['output.keep_partial']:
            report.outputs = _write_partial(execution, output_dir)
        else:
            _remove_tables(execution, config, output_dir)
            report.outputs = []
    finally:
        if execution is not None:
            report.opaque_atoms = len(execution.atoms)
        report.diagnostics = diagnostics.to_list()
        for entry in diagnostics.entries():
            logger.debug('diagnostic %s', entry)
        report.write(output_dir / 'run_report.json')
        detach_log_file(handler)

    if config['archive']:
        from varbench.archive import archive_run
        try:
            report.archive = str(archive_run(report, config))
        except (VarbenchError, OSError) as e:
            report.status = 'failed'
            report.exit_code = getattr(e, 'exit_code', 4)
            report.failed_component = 'archive'
            report.error = str(e)
            logger.error('archiving failed: %s', e)
        report.write(output_dir / 'run_report.json')
    return report


def _remove_tables(execution, config, output_dir):
    fmt = config['analysis.output.format']
    names = execution.tables if execution is not None else {}
    for name in names:
        path = output_dir / f'{name}.{fmt}'
        if path.is_file():
            path.unlink()


def _write_partial(execution, output_dir):
    """Write the tables completed before a failure."""
    fmt = execution.config['analysis.output.format']
    written = []
    for name, table in sorted(execution.tables.items()):
        try:
            write_table(table, fmt, output_dir / f'{name}.{fmt}')
            written.append(f'{name}.{fmt}')
        except OSError as e:
            logger.warning('partial result %s not written: %s', name, e)
    return written


def _exit_code(error, component):
    """Exit code of `error`; unexpected errors count against their
    component's category."""
    if isinstance(error, VarbenchError):
        return error.exit_code
    if isinstance(error, OSError):
        return 4
    if component in ('cmComponent', 'bmComponent', 'vmComponent'):
        return 2
    return 3 if component else 1
