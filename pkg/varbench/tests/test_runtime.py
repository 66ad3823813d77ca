"""Tests of experiment execution: concurrency, caches and failures."""

import json
import threading
import time

import pytest

from varbench.exceptions import MalformedExpression
from varbench.runtime import Cancelled, ModelStream, RunReport, _exit_code, \
    run


def outputs(report, config):
    directory = config.path('output_dir')
    return {name: (directory / name).read_bytes() for name in report.outputs}


def test_metrics_run(experiment):
    config = experiment('metrics')
    report = run(config)
    assert report.ok and report.exit_code == 0
    assert report.outputs == ['block_metrics.csv']
    assert report.extractor_invocations == {'code': 12}
    assert report.components['block_metrics']['items'] == 12
    assert report.components['cmComponent']['items'] == 12
    out = config.path('output_dir')
    lines = (out / 'block_metrics.csv').read_text().splitlines()
    assert lines[0] == '"file","block_count","max_nesting_depth",' \
                       '"variable_loc"'
    assert lines[1] == '"include/debug.h",2,1,5'
    saved = json.loads((out / 'run_report.json').read_text())
    assert saved['status'] == 'success'
    assert saved['config_fingerprint'] == config.fingerprint()
    assert (out / 'run.log').read_text().count('varbench') >= 1


def test_opaque_atoms_are_counted(experiment):
    report = run(experiment('metrics'))
    assert report.opaque_atoms == 1


def test_dead_blocks_run(experiment):
    config = experiment('dead_blocks')
    report = run(config)
    assert report.ok
    assert report.extractor_invocations == {'code': 12, 'build': 1, 'vm': 1}
    text = (config.path('output_dir') / 'dead_blocks.csv').read_text()
    assert text.count('"Dead"') == 5
    kinds = {d['kind'] for d in report.diagnostics}
    assert {'missing_build_entry', 'undecidable'} <= kinds


@pytest.mark.parametrize('extra', [
    ('jobs=4',),
    ('jobs=8',),
    ('jobs=4', 'code.parallel=false'),
    ('pipeline.sequential=true',),
    ('build.parallel=false',),
    ('pipeline.buffer=1', 'jobs=2'),
    ('analysis.sequential_components=PcFinder',),
])
def test_results_do_not_depend_on_scheduling(experiment, extra):
    reference = experiment('feature_effects', output='reference')
    expected = outputs(run(reference), reference)
    config = experiment('feature_effects', *extra, output='variant')
    report = run(config)
    assert report.ok, report.error
    assert outputs(report, config) == expected


def test_intermediate_results(experiment):
    config = experiment('feature_effects',
                        'analysis.output.intermediate_results=PcFinder',
                        'analysis.output.format=json')
    report = run(config)
    assert report.outputs == ['feature_effects.json', 'pc_finder.json']
    document = json.loads(
        (config.path('output_dir') / 'pc_finder.json').read_text())
    assert len(document['rows']) == 23
    assert [c['name'] for c in document['columns']] == ['file', 'line', 'pc']


def test_cached_run_matches_extraction(experiment, tmp_path):
    first = experiment('feature_effects', 'code.cache.write=true',
                       'build.cache.write=true', output='first')
    expected = outputs(run(first), first)
    cache = first.path('cache.dir')
    assert (cache / 'code' / 'src__driver.c.json').is_file()
    second = experiment('feature_effects', 'code.cache.read=true',
                        'build.cache.read=true', f'cache.dir={cache}',
                        'jobs=4', output='second')
    report = run(second)
    assert report.ok, report.error
    assert report.extractor_invocations == {'code': 0, 'build': 0}
    assert outputs(report, second) == expected


def test_stale_cache_fails(experiment, mini_spl):
    first = experiment('metrics', 'code.cache.write=true', output='first')
    assert run(first).ok
    (mini_spl / 'src' / 'util.c').write_text('int clamped;\n')
    second = experiment('metrics', 'code.cache.read=true',
                        f'cache.dir={first.path("cache.dir")}',
                        output='second')
    report = run(second)
    assert report.status == 'failed'
    assert (report.exit_code, report.failed_component) == (2, 'cmComponent')
    assert 'does not match the current sources' in report.error
    allowed = second.with_overrides(['cache.ignore_fingerprint=true'])
    assert run(allowed).ok


@pytest.mark.parametrize('jobs', [1, 4])
def test_extraction_failure(experiment, mini_spl, jobs):
    (mini_spl / 'src' / 'broken.c').write_text('int x;\n#if (CONFIG_A\n'
                                               '#endif\n')
    config = experiment('feature_effects', f'jobs={jobs}')
    report = run(config)
    assert report.status == 'failed'
    assert (report.exit_code, report.failed_component) == (2, 'cmComponent')
    assert 'src/broken.c:2' in report.error
    out = config.path('output_dir')
    assert not (out / 'feature_effects.csv').exists()
    saved = json.loads((out / 'run_report.json').read_text())
    assert saved['status'] == 'failed' and saved['outputs'] == []


def test_vm_failure(experiment, mini_spl):
    with open(mini_spl / 'Kconfig', 'a') as f:
        f.write('\nchoice\n')
    report = run(experiment('dead_blocks'))
    assert (report.exit_code, report.failed_component) == (2, 'vmComponent')


def test_missing_input_fails_before_extraction(experiment):
    config = experiment('feature_effects',
                        'analysis.pipeline=DeadBlocks(cmComponent(), '
                        'bmComponent(), vmComponent())')
    report = run(config)
    assert report.status == 'failed'
    assert report.exit_code == 1
    assert report.failed_component is None
    assert report.extractor_invocations == {}


def test_keep_partial(experiment, mini_spl):
    (mini_spl / 'src' / 'broken.c').write_text('#endif\n')
    config = experiment('metrics', 'output.keep_partial=true')
    report = run(config)
    assert report.status == 'failed'
    assert report.outputs == []


@pytest.mark.parametrize('error, component, code', [
    (MalformedExpression('a.c', 1), 'cmComponent', 2),
    (PermissionError('denied'), 'pc_finder', 4),
    (RuntimeError('boom'), 'bmComponent', 2),
    (RuntimeError('boom'), 'pc_finder', 3),
    (RuntimeError('boom'), None, 1),
])
def test_exit_codes(error, component, code):
    assert _exit_code(error, component) == code


def test_report_defaults(tmp_path):
    report = RunReport()
    assert not report.ok
    report.write(tmp_path / 'r.json')
    assert json.loads((tmp_path / 'r.json').read_text())['status'] == \
        'running'


def test_stream_delivers_in_order():
    stream = ModelStream(2, threading.Event())
    produced = list(range(10))

    def produce():
        for item in produced:
            stream.put(item)
        stream.close()

    thread = threading.Thread(target=produce)
    thread.start()
    assert list(stream) == produced
    thread.join()


def test_stream_cancellation_unblocks():
    cancelled = threading.Event()
    stream = ModelStream(1, cancelled)
    stream.put('first')
    timer = threading.Timer(0.1, cancelled.set)
    timer.start()
    with pytest.raises(Cancelled):
        stream.put('second')
    with pytest.raises(Cancelled):
        list(stream)


@pytest.mark.slow
def test_thousand_files(mini_spl, experiment):
    """A thousand files extract and analyse within half a minute."""
    generated = mini_spl / 'src' / 'generated'
    generated.mkdir()
    features = ['NET', 'TCP', 'UDP', 'DEBUG', 'SERIAL', 'LEGACY']
    for i in range(988):
        lines = []
        for j in range(8):
            a, b = features[(i + j) % 6], features[(i * 7 + j) % 6]
            lines += [f'#if defined(CONFIG_{a}) && !defined(CONFIG_{b})',
                      f'int v{j};', '#else', f'int w{j};', '#endif']
        (generated / f'g{i:04d}.c').write_text('\n'.join(lines) + '\n')
    config = experiment('feature_effects', 'jobs=8')
    started = time.perf_counter()
    report = run(config)
    assert report.ok, report.error
    assert report.extractor_invocations['code'] == 1000
    assert time.perf_counter() - started < 30


@pytest.mark.slow
@pytest.mark.parametrize('jobs', [1, 4, 8])
def test_repeated_runs_are_identical(experiment, jobs):
    reference = experiment('feature_effects', 'jobs=1', output='reference')
    expected = outputs(run(reference), reference)
    for attempt in range(20):
        config = experiment('feature_effects', f'jobs={jobs}',
                            output=f'run{attempt}')
        report = run(config)
        assert report.ok, report.error
        assert outputs(report, config) == expected
