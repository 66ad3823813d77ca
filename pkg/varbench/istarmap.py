# starmap-style imap_unordered for multiprocessing.Pool
# based on istarmap.py for Python 3.8+, copyright 2019, 2020 Darkonaut
# https://stackoverflow.com/a/57364423
# Used under CC BY-SA 4.0

import multiprocessing.pool as mpp


def istarmap_unordered(self, func, iterable, chunksize=1):
    """starmap-version of imap_unordered; results as workers finish."""
    self._check_running()
    if chunksize < 1:
        raise ValueError(f'Chunksize must be 1+, not {chunksize:n}')

    task_batches = mpp.Pool._get_tasks(func, iterable, chunksize)
    result = mpp.IMapUnorderedIterator(self)
    self._taskqueue.put(
        (
            self._guarded_task_generation(result._job,
                                          mpp.starmapstar,
                                          task_batches),
            result._set_length
        ))
    return (item for chunk in result for item in chunk)


mpp.Pool.istarmap_unordered = istarmap_unordered
