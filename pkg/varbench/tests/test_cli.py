"""Tests of the ``varbench`` command."""

import json
import zipfile

import pytest

from varbench import __version__
from varbench.cli import EX_USAGE, main


@pytest.fixture
def properties(mini_spl):
    return lambda name: str(mini_spl / f'{name}.properties')


def test_run(properties, tmp_path, capsys):
    out = tmp_path / 'out'
    assert main(['run', properties('metrics'), '--output-dir', str(out)]) == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed == [str(out / 'block_metrics.csv')]
    assert (out / 'run_report.json').is_file()


def test_run_with_archive(properties, tmp_path, capsys):
    out = tmp_path / 'out'
    code = main(['run', properties('feature_effects'), '--jobs', '4',
                 '--archive', '--output-dir', str(out)])
    assert code == 0
    printed = capsys.readouterr().out.splitlines()
    assert printed == [str(out / 'feature_effects.csv'),
                       str(out / 'experiment.zip')]
    with zipfile.ZipFile(out / 'experiment.zip') as zf:
        assert 'results/feature_effects.csv' in zf.namelist()


def test_run_failure(properties, mini_spl, tmp_path, capsys):
    (mini_spl / 'src' / 'broken.c').write_text('#else\n')
    code = main(['run', properties('metrics'), '-D',
                 f'output_dir={tmp_path / "out"}'])
    assert code == 2
    captured = capsys.readouterr()
    assert captured.out == ''
    assert 'varbench: cmComponent: ' in captured.err


def test_validate(properties, capsys):
    assert main(['validate', properties('dead_blocks')]) == 0
    out = capsys.readouterr().out
    assert out.startswith('pipeline: DeadBlocks(cmComponent(), '
                          'bmComponent(), vmComponent())')


@pytest.mark.parametrize('override', [
    'analysis.pipeline=FeatureEffects(PcFindr(cmComponent()))',
    'analysis.output.format=xml',
    'jobs=0',
])
def test_validate_rejects(properties, capsys, override):
    assert main(['validate', properties('feature_effects'),
                 '-D', override]) == 1
    assert capsys.readouterr().err.startswith('varbench: ')


def test_command_line_completes_the_file(mini_spl, tmp_path, capsys):
    path = mini_spl / 'partial.properties'
    path.write_text('source_tree = .\nanalysis.preset = metrics\n'
                    'code.extractor = cpp\njobs = 0\n')
    assert main(['validate', str(path), '--jobs', '4']) == 1
    assert 'output_dir' in capsys.readouterr().err
    assert main(['validate', str(path), '--output-dir', str(tmp_path),
                 '--jobs', '4']) == 0
    out = capsys.readouterr().out
    assert out.startswith('pipeline: BlockMetrics(')


@pytest.mark.parametrize('argv', [
    [],
    ['frobnicate'],
    ['run'],
    ['run', 'x.properties', '--jobs', 'four'],
    ['unpack', 'only-one-argument'],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == EX_USAGE
    assert 'usage: varbench' in capsys.readouterr().err


def test_version(capsys):
    assert main(['--version']) == 0
    assert capsys.readouterr().out.strip() == f'varbench {__version__}'


def test_missing_configuration_file(tmp_path, capsys):
    assert main(['validate', str(tmp_path / 'absent.properties')]) == 4


def test_inspect_cache(properties, tmp_path, capsys):
    out = tmp_path / 'out'
    main(['run', properties('metrics'), '--output-dir', str(out),
          '-D', 'code.cache.write=true'])
    capsys.readouterr()
    assert main(['inspect-cache', str(out / 'cache')]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary['code']['files'] == 12
    assert main(['inspect-cache', str(tmp_path / 'nothing')]) == 2


def test_unpack(properties, tmp_path, capsys):
    out = tmp_path / 'out'
    main(['run', properties('metrics'), '--archive', '--output-dir',
          str(out)])
    archive = out / 'experiment.zip'
    assert main(['unpack', str(archive), str(tmp_path / 'unpacked')]) == 0
    assert (tmp_path / 'unpacked' / 'results' / 'block_metrics.csv').is_file()

    (tmp_path / 'corrupt.zip').write_bytes(archive.read_bytes()[:100])
    assert main(['unpack', str(tmp_path / 'corrupt.zip'),
                 str(tmp_path / 'again')]) == 4
    assert not (tmp_path / 'again').exists()
