"""Human-readable caches of extracted models.

Layout below the cache directory::

    code/<path with / replaced by __>.json   one document per source file
    build.json
    vm.json

Documents are JSON with sorted keys and LF line endings; formulas are kept
in their text form. Each document records the format version and a
fingerprint of the input files it was extracted from.
"""

from pathlib import Path
import json
import logging

from varbench.buildmodel import BuildModel, Unresolved
from varbench.codemodel import (CodeModel, discover_sources, element_to_dict,
                                element_from_dict, iter_blocks)
from varbench.exceptions import (MissingCache, VersionMismatch,
                                 FingerprintMismatch, OutputError)
from varbench.formula import parse_formula, render
from varbench.util import file_digest, tree_fingerprint
from varbench.varmodel import FeatureKind, VariabilityModel

logger = logging.getLogger(__name__)

__all__ = ['CACHE_VERSION', 'CACHE_KINDS', 'cache_write', 'cache_read',
           'iter_code_cache', 'inspect_cache', 'code_cache_name']

CACHE_VERSION = 1
CACHE_KINDS = ('code', 'build', 'vm')


def code_cache_name(relpath):
    return relpath.replace('/', '__') + '.json'


def _dump(document, path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(json.dumps(document, sort_keys=True, indent=2) + '\n')
    except OSError as e:
        raise OutputError(str(path), e.strerror or str(e)) from e
    return path


def _load(path, kind):
    try:
        document = json.loads(Path(path).read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise MissingCache(kind, str(path)) from None
    version = document.get('version')
    if version != CACHE_VERSION:
        raise VersionMismatch(str(path), version, CACHE_VERSION)
    return document


def _fingerprint(tree, sources):
    try:
        return tree_fingerprint(Path(tree), sources)
    except OSError:
        return None


def _code_document(model, tree):
    digest = model.source_fingerprint or file_digest(Path(tree) / model.file)
    return {'version': CACHE_VERSION, 'kind': 'code', 'file': model.file,
            'source_fingerprint': digest,
            'unknown_atoms': sorted(model.unknown_atoms),
            'root': element_to_dict(model.root)}


def _build_document(model, tree):
    return {'version': CACHE_VERSION, 'kind': 'build',
            'sources': list(model.sources),
            'source_fingerprint': _fingerprint(tree, model.sources),
            'entries': {path: render(pc)
                        for path, pc in model.entries.items()},
            'unresolved': [list(u) for u in model.unresolved]}


def _vm_document(model, tree):
    return {'version': CACHE_VERSION, 'kind': 'vm',
            'sources': list(model.sources),
            'source_fingerprint': _fingerprint(tree, model.sources),
            'features': {name: kind.value
                         for name, kind in model.features.items()},
            'constraint': render(model.constraint),
            'constraints': [render(c) for c in model.constraints],
            'source_positions': [list(model.source_positions[i])
                                 for i in range(len(model.constraints))]}


def cache_write(models, kind, directory, tree):
    """Serialize extracted models.

    :param models: iterable of code models for ``code``; the model itself
                   for ``build`` and ``vm``
    :param kind: ``code``, ``build`` or ``vm``
    :type kind: str
    :param directory: cache directory
    :param tree: source tree the models were extracted from
    :returns: list of written paths
    """
    directory = Path(directory)
    if kind == 'code':
        target = directory / 'code'
        if target.is_dir():
            for stale in target.glob('*.json'):
                stale.unlink()
        written = [_dump(_code_document(m, tree),
                         target / code_cache_name(m.file))
                   for m in sorted(models, key=lambda m: m.file)]
    elif kind == 'build':
        written = [_dump(_build_document(models, tree),
                         directory / 'build.json')]
    elif kind == 'vm':
        written = [_dump(_vm_document(models, tree), directory / 'vm.json')]
    else:
        raise ValueError(f'unknown cache kind {kind!r}')
    logger.info('wrote %d %s cache file(s) to %s', len(written), kind,
                directory)
    return written


def _read_code_document(path, tree, ignore_fingerprint):
    document = _load(path, 'code')
    file, digest = document['file'], document['source_fingerprint']
    if not ignore_fingerprint:
        try:
            found = file_digest(Path(tree) / file)
        except OSError:
            found = None
        if found != digest:
            raise FingerprintMismatch('code', str(path))
    return CodeModel(file, element_from_dict(document['root'], file),
                     frozenset(document['unknown_atoms']), digest)


def iter_code_cache(directory, tree=None, patterns=('**/*.c', '**/*.h'),
                    ignore_fingerprint=False):
    """Yield cached code models one document at a time.

    The cached file set is checked against the discovered sources before
    the first document is read.

    :raises MissingCache: if there are no code documents
    :raises FingerprintMismatch: if a source was added, removed or changed
    """
    target = Path(directory) / 'code'
    paths = sorted(target.glob('*.json')) if target.is_dir() else []
    if not paths:
        raise MissingCache('code', str(target))
    discovered = None
    if not ignore_fingerprint:
        discovered = set(discover_sources(tree, patterns))
        if {code_cache_name(f) for f in discovered} != \
                {p.name for p in paths}:
            raise FingerprintMismatch('code', str(target))
    for path in paths:
        model = _read_code_document(path, tree, ignore_fingerprint)
        if discovered is not None and model.file not in discovered:
            raise FingerprintMismatch('code', str(path))
        yield model


def _check_sources(document, kind, path, tree, ignore_fingerprint):
    if ignore_fingerprint:
        return
    found = _fingerprint(tree, document['sources'])
    if found is None or found != document['source_fingerprint']:
        raise FingerprintMismatch(kind, str(path))


def cache_read(kind, directory, tree=None, patterns=('**/*.c', '**/*.h'),
               ignore_fingerprint=False):
    """Load cached models instead of extracting them.

    :param tree: source tree to check fingerprints against
    :param patterns: discovery globs; the cached code files must be exactly
                     the discovered ones
    :param ignore_fingerprint: accept caches of other sources
    :returns: list of code models sorted by path, or the build/vm model
    :raises MissingCache: if the cache does not exist
    :raises VersionMismatch: on another cache format version
    :raises FingerprintMismatch: if the sources changed
    """
    directory = Path(directory)
    if kind == 'code':
        return list(iter_code_cache(directory, tree, patterns,
                                    ignore_fingerprint))
    if kind == 'build':
        path = directory / 'build.json'
        document = _load(path, kind)
        _check_sources(document, kind, path, tree, ignore_fingerprint)
        entries = {p: parse_formula(pc)
                   for p, pc in document['entries'].items()}
        return BuildModel(entries,
                          [Unresolved(*u) for u in document['unresolved']],
                          document['sources'])
    if kind == 'vm':
        path = directory / 'vm.json'
        document = _load(path, kind)
        _check_sources(document, kind, path, tree, ignore_fingerprint)
        positions = {i: tuple(p)
                     for i, p in enumerate(document['source_positions'])}
        return VariabilityModel(
            {name: FeatureKind(value)
             for name, value in document['features'].items()},
            parse_formula(document['constraint']),
            tuple(parse_formula(c) for c in document['constraints']),
            positions, tuple(document['sources']))
    raise ValueError(f'unknown cache kind {kind!r}')


def inspect_cache(directory):
    """Summary per cached kind: format version and model size."""
    directory = Path(directory)
    summary = {}
    code = sorted((directory / 'code').glob('*.json')) \
        if (directory / 'code').is_dir() else []
    if code:
        files, blocks, versions = 0, 0, set()
        for path in code:
            document = json.loads(path.read_text(encoding='utf-8'))
            versions.add(document.get('version'))
            root = element_from_dict(document['root'], document['file'])
            files += 1
            blocks += sum(1 for _ in iter_blocks(root))
        summary['code'] = {'version': sorted(versions), 'files': files,
                           'blocks': blocks}
    for kind, key in (('build', 'entries'), ('vm', 'features')):
        path = directory / f'{kind}.json'
        if path.is_file():
            document = json.loads(path.read_text(encoding='utf-8'))
            summary[kind] = {'version': [document.get('version')],
                             key: len(document[key]),
                             'sources': len(document['sources'])}
    return summary
