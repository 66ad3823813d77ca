"""Experiment archives.

An archive bundles everything needed to repeat a run on another machine::

    manifest.json       tool version, configuration fingerprint, file hashes
    config.properties   effective configuration
    input/              copy of the source tree (archive.include_sources)
    cache/              model caches of every active pipeline
    results/            result tables
    run.log
    run_report.json

Entries are stored in sorted order with a fixed timestamp, so two archives of
the same run differ only in the manifest's ``created`` field. Unpacking the
archive and running :func:`rerun_config` replays the experiment from the
caches.
"""

from datetime import datetime, timezone
from pathlib import Path, PurePosixPath
import json
import logging
import os
import zipfile

from varbench import __version__
from varbench.analysis import COMPONENTS
from varbench.config import PIPELINE_KINDS, load_config
from varbench.exceptions import ArchiveExists, ArchiveVerificationError
from varbench.util import sha256_bytes

logger = logging.getLogger(__name__)

__all__ = ['ARCHIVE_FORMAT', 'archive_run', 'read_manifest',
           'unpack_archive', 'rerun_config']

ARCHIVE_FORMAT = 1
MANIFEST = 'manifest.json'
_DATE_TIME = (1980, 1, 1, 0, 0, 0)


def _inside(path, directory):
    try:
        Path(path).resolve().relative_to(Path(directory).resolve())
        return True
    except ValueError:
        return False


def _tree_entries(root, prefix, skip=()):
    """``{arcname: path}`` of the files below `root`."""
    root = Path(root)
    entries = {}
    if not root.is_dir():
        return entries
    for path in sorted(root.rglob('*')):
        if not path.is_file() or any(_inside(path, s) for s in skip):
            continue
        entries[f'{prefix}/{path.relative_to(root).as_posix()}'] = path
    return entries


def _collect(report, config, out):
    output_dir = config.path('output_dir')
    cache_dir = config.path('cache.dir')
    entries = {}
    if config['archive.include_sources']:
        entries.update(_tree_entries(config.path('source_tree'), 'input',
                                     (output_dir, cache_dir, out)))
    entries.update(_tree_entries(cache_dir, 'cache', (out,)))
    for name in report.outputs:
        entries[f'results/{name}'] = output_dir / name
    for name in (config['log.file'], 'run_report.json'):
        if (output_dir / name).is_file():
            entries[name if name == 'run_report.json' else 'run.log'] = \
                output_dir / name
    contents = {arcname: path.read_bytes() for arcname, path in
                entries.items()}
    contents['config.properties'] = config.to_properties().encode('utf-8')
    return contents


def archive_run(report, config, out=None):
    """Bundle a finished run into a zip archive.

    :param report: report of the run
    :type report: varbench.runtime.RunReport
    :param config: configuration of the run
    :type config: varbench.config.Config
    :param out: archive path (default is ``archive.path``)
    :returns: path of the archive
    :raises ArchiveExists: if `out` exists and ``archive.overwrite`` is off
    """
    out = Path(out) if out is not None else config.path('archive.path')
    if out.exists() and not config['archive.overwrite']:
        raise ArchiveExists(str(out))
    contents = _collect(report, config, out)
    manifest = {'tool_version': __version__,
                'format': ARCHIVE_FORMAT,
                'config_fingerprint': config.fingerprint(),
                'created': datetime.now(timezone.utc).isoformat(
                    timespec='seconds'),
                'include_sources': config['archive.include_sources'],
                'components': sorted(COMPONENTS),
                'status': report.status,
                'files': [{'path': name, 'sha256': sha256_bytes(data)}
                          for name, data in sorted(contents.items())]}
    contents[MANIFEST] = (json.dumps(manifest, indent=2, sort_keys=True)
                          + '\n').encode('utf-8')

    out.parent.mkdir(parents=True, exist_ok=True)
    partial = out.with_name(out.name + '.part')
    with zipfile.ZipFile(partial, 'w', zipfile.ZIP_DEFLATED) as zf:
        for name in sorted(contents):
            info = zipfile.ZipInfo(name, date_time=_DATE_TIME)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            zf.writestr(info, contents[name])
    os.replace(partial, out)
    logger.info('archived %d files to %s', len(contents), out)
    return out


def _safe(name):
    path = PurePosixPath(name)
    return name and not path.is_absolute() and '..' not in path.parts \
        and '\\' not in name and ':' not in path.parts[0]


def read_manifest(archive):
    """Manifest of `archive`, after checking every entry against it.

    :raises ArchiveVerificationError: on an unsafe path, an entry missing
                                      from the manifest or from the archive,
                                      or a hash mismatch
    """
    archive = str(archive)
    try:
        zf = zipfile.ZipFile(archive)
    except (zipfile.BadZipFile, FileNotFoundError) as e:
        raise ArchiveVerificationError(archive, str(e)) from None
    with zf:
        names = zf.namelist()
        for name in names:
            if not _safe(name):
                raise ArchiveVerificationError(archive, f'unsafe entry '
                                               f'{name!r}')
        if MANIFEST not in names:
            raise ArchiveVerificationError(archive, 'no manifest.json')
        manifest = json.loads(zf.read(MANIFEST).decode('utf-8'))
        listed = {f['path']: f['sha256'] for f in manifest['files']}
        for name in names:
            if name != MANIFEST and name not in listed:
                raise ArchiveVerificationError(archive, f'{name} is not '
                                               f'listed in the manifest')
        for name, digest in sorted(listed.items()):
            if name not in names:
                raise ArchiveVerificationError(archive, f'{name} is listed '
                                               f'but missing')
            if sha256_bytes(zf.read(name)) != digest:
                raise ArchiveVerificationError(archive, f'{name} does not '
                                               f'match its hash')
    return manifest


def unpack_archive(archive, dest):
    """Verify `archive` and extract it into `dest`.

    Nothing is extracted unless every entry verifies.

    :returns: the manifest
    :rtype: dict
    """
    manifest = read_manifest(archive)
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(archive) as zf:
        zf.extractall(dest)
    logger.info('unpacked %d files to %s', len(manifest['files']) + 1, dest)
    return manifest


def rerun_config(unpacked_dir, output_dir):
    """Configuration replaying an unpacked archive from its caches.

    :param unpacked_dir: directory :func:`unpack_archive` extracted into
    :param output_dir: where the replay writes its results
    :rtype: varbench.config.Config
    """
    unpacked_dir = Path(unpacked_dir).resolve()
    manifest = json.loads((unpacked_dir / MANIFEST).read_text(
        encoding='utf-8'))
    text = (unpacked_dir / 'config.properties').read_text(encoding='utf-8')
    config = load_config(text, unpacked_dir)
    pairs = [('source_tree', 'input'),
             ('output_dir', str(Path(output_dir).resolve())),
             ('cache.dir', 'cache'),
             ('cache.ignore_fingerprint',
              'false' if manifest['include_sources'] else 'true'),
             ('archive', 'false')]
    for kind in PIPELINE_KINDS:
        if config.active(kind):
            pairs += [(f'{kind}.cache.read', 'true'),
                      (f'{kind}.cache.write', 'false')]
    return config.with_overrides(pairs, origin='rerun')
