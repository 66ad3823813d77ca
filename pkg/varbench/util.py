"""Functions used by other modules."""

from collections import namedtuple
import hashlib
import logging
import posixpath
import re
import threading
import warnings

FNV_OFFSET = 0xcbf29ce484222325
FNV_PRIME = 0x100000001b3

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'
LOG_LEVELS = {'error': logging.ERROR, 'warn': logging.WARNING,
              'warning': logging.WARNING, 'info': logging.INFO,
              'debug': logging.DEBUG}


def fnv1a64(text):
    """64-bit FNV-1a hash of the UTF-8 bytes of `text` as 16 hex digits."""
    h = FNV_OFFSET
    for byte in text.encode('utf-8', 'surrogateescape'):
        h = ((h ^ byte) * FNV_PRIME) & 0xffffffffffffffff
    return f'{h:016x}'


def sha256_bytes(data):
    return hashlib.sha256(data).hexdigest()


def file_digest(path):
    with open(path, 'rb') as f:
        return sha256_bytes(f.read())


def fingerprint(pairs):
    """Hash over sorted ``(path, content hash)`` pairs."""
    h = hashlib.sha256()
    for path, digest in sorted(pairs):
        h.update(f'{path}\0{digest}\n'.encode('utf-8'))
    return h.hexdigest()


def tree_fingerprint(root, relpaths):
    return fingerprint((rel, file_digest(root / rel)) for rel in relpaths)


def normalize_path(path):
    """Forward slashes, no ``.``/``..`` segments; None if it escapes."""
    norm = posixpath.normpath(path.replace('\\', '/'))
    if norm == '.' or norm.startswith('../') or norm == '..' \
            or norm.startswith('/'):
        return None
    return norm


def snake_case(name):
    return re.sub(r'(?<=[a-z0-9])([A-Z])', r'_\1', name).lower()


def warn(logger, msg):
    """Report a soft problem to both the warnings system and the log."""
    warnings.warn(msg)
    logger.warning(msg)


Diagnostic = namedtuple('Diagnostic', ['component', 'kind', 'message'])


class Diagnostics(object):
    """Thread-safe collector of run diagnostics.

    Entries are kept sorted when reported, so the report does not depend on
    the order in which concurrent tasks noted them.
    """

    def __init__(self, logger=None):
        self._entries = []
        self._lock = threading.Lock()
        self._logger = logger or logging.getLogger('varbench')

    def note(self, component, kind, message):
        with self._lock:
            self._entries.append(Diagnostic(component, kind, message))
        self._logger.debug('%s: %s: %s', component, kind, message)

    def __len__(self):
        return len(self._entries)

    def entries(self, kind=None):
        with self._lock:
            items = sorted(set(self._entries))
        if kind is not None:
            items = [d for d in items if d.kind == kind]
        return items

    def to_list(self):
        return [d._asdict() for d in self.entries()]


def attach_log_file(path, level='info'):
    """Add a plain-text log file handler to the ``varbench`` logger."""
    handler = logging.FileHandler(path, mode='w', encoding='utf-8')
    handler.setLevel(LOG_LEVELS[level])
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger = logging.getLogger('varbench')
    handler.previous_level = logger.level
    logger.addHandler(handler)
    if logger.getEffectiveLevel() > handler.level:
        logger.setLevel(handler.level)
    return handler


def detach_log_file(handler):
    logger = logging.getLogger('varbench')
    logger.removeHandler(handler)
    logger.setLevel(handler.previous_level)
    handler.close()
