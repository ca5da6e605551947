import csv
import json
import logging
import os

import pandas as pd
from ruamel.yaml import YAML
from ruamel.yaml.error import YAMLError

from batchq import TraceParseError, require
from batchq.model import TaskRecord, Trace, Workload

_log = logging.getLogger(__name__)

TRACE_COLUMNS = ['job', 'task_index', 'server', 'start', 'finish']


def sidecar_path(trace_path):
    """
    >>> sidecar_path('/tmp/fut_0.csv')
    '/tmp/fut_0.json'
    """
    return os.path.splitext(trace_path)[0] + '.json'


def write_trace(trace, path):
    """
    Writes the task records of a trace as CSV, and the workload, server count, policy and seed
    to the JSON sidecar next to it.

    :param Trace trace: Trace to write
    :param str path: CSV destination
    """
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(TRACE_COLUMNS)
        for r in trace.task_records:
            writer.writerow([r.job, r.task_index, r.server, repr(float(r.start)), repr(float(r.finish))])
    meta = {'workload': trace.workload.to_dict(),
            'servers': trace.servers,
            'policy': trace.policy,
            'seed': trace.rng_seed}
    with open(sidecar_path(path), 'w') as f:
        json.dump(meta, f, indent=2, sort_keys=True)
        f.write('\n')


def _parse_record(path, line, row):
    if len(row) != len(TRACE_COLUMNS):
        raise TraceParseError('%s, line %i: expected %i fields, got %i' % (path, line, len(TRACE_COLUMNS), len(row)))
    try:
        return TaskRecord(int(row[0]), int(row[1]), int(row[2]), float(row[3]), float(row[4]))
    except ValueError as e:
        raise TraceParseError('%s, line %i: %s' % (path, line, e))


def read_trace(path):
    """
    Reads a trace written by ``write_trace``.

    :param str path: Trace CSV, with its JSON sidecar alongside
    :rtype: Trace
    :raises TraceParseError: on a missing or malformed file, naming the offending line
    """
    meta_path = sidecar_path(path)
    try:
        with open(meta_path) as f:
            meta = YAML(typ='safe').load(f)
        workload = Workload.from_dict(meta['workload'])
        servers, policy, seed = int(meta['servers']), str(meta['policy']), int(meta.get('seed', 0))
    except (IOError, OSError, YAMLError) as e:
        raise TraceParseError('Cannot read trace metadata %s: %s' % (meta_path, e))
    except (KeyError, TypeError, ValueError) as e:
        raise TraceParseError('Invalid trace metadata in %s: %s' % (meta_path, e))
    records = []
    try:
        with open(path, newline='') as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header != TRACE_COLUMNS:
                raise TraceParseError('%s, line 1: expected header %s, got %s'
                                      % (path, ','.join(TRACE_COLUMNS), header and ','.join(header)))
            for row in reader:
                if row:
                    records.append(_parse_record(path, reader.line_num, row))
    except (IOError, OSError) as e:
        raise TraceParseError('Cannot read trace %s: %s' % (path, e))
    except csv.Error as e:
        raise TraceParseError('%s, line %i: %s' % (path, reader.line_num, e))
    _log.debug('Read %i task records from %s', len(records), path)
    return Trace(workload, servers, policy, tuple(records), seed)


def write_table(rows, columns, path):
    """
    Writes dict rows as CSV with a header, in the order given.

    :param list[dict] rows: Table rows
    :param list[str] columns: Column order
    :param str path: Destination
    """
    frame = pd.DataFrame(rows, columns=columns)
    frame.to_csv(path, index=False)
    _log.info('Wrote %i rows to %s', len(frame), path)
    return frame


def aggregate_table(summary, keys, value_columns):
    """
    Mean and standard error of every value column per group, groups in order of first appearance.

    :param pandas.DataFrame summary: Per-seed rows
    :param list[str] keys: Grouping columns
    :param list[str] value_columns: Columns to aggregate
    :rtype: pandas.DataFrame
    """
    grouped = summary.groupby(keys, sort=False, dropna=False)
    table = grouped.size().rename('seeds').to_frame()
    for column in value_columns:
        table[column + '_mean'] = grouped[column].mean()
        table[column + '_se'] = grouped[column].sem()
    return table.reset_index()


def prepare_output_dir(path):
    """
    Creates the output directory if needed and checks it is writable. Returns its absolute path,
    since Toil workers do not share our working directory.
    """
    path = os.path.abspath(path)
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        require(False, 'Cannot create output directory %s: %s', path, e)
    require(os.access(path, os.W_OK), 'Output directory %s is not writable', path)
    return path
