import os

import pandas as pd
import pytest

from batchq import TraceParseError, UserError
from batchq.distributions import Exponential
from batchq.engine import EngineConfig, LIFO, ServerBank, simulate
from batchq.files import aggregate_table, prepare_output_dir, read_trace, sidecar_path, write_table, write_trace
from batchq.workloads import SizeLaw, WorkloadSpec, generate


def _trace():
    workload = generate(WorkloadSpec(12, SizeLaw('choice', values=(1, 3), probs=(0.5, 0.5)), seed=5).with_rho(0.7),
                        [1.0, 2.0])
    return simulate(workload, ServerBank.of([Exponential(1.0), Exponential(2.0)]), LIFO(), EngineConfig(seed=5))


def test_write_and_read_trace(tmpdir):
    trace = _trace()
    path = os.path.join(str(tmpdir), 'lifo_5.csv')
    write_trace(trace, path)
    assert os.path.exists(sidecar_path(path))
    with open(path) as f:
        assert f.readline().strip() == 'job,task_index,server,start,finish'
    # floats are written with repr, so they read back exactly
    assert read_trace(path) == trace


def _write_bad(tmpdir, lines):
    trace = _trace()
    path = os.path.join(str(tmpdir), 'bad.csv')
    write_trace(trace, path)
    with open(path, 'w') as f:
        f.write('\n'.join(lines) + '\n')
    return path


def test_malformed_row(tmpdir):
    path = _write_bad(tmpdir, ['job,task_index,server,start,finish', '1,1,1,0.0,1.0', '2,1,1,oops,2.0'])
    with pytest.raises(TraceParseError, match='line 3'):
        read_trace(path)
    path = _write_bad(tmpdir, ['job,task_index,server,start,finish', '1,1,1,0.0'])
    with pytest.raises(TraceParseError, match='line 2'):
        read_trace(path)


def test_bad_header(tmpdir):
    path = _write_bad(tmpdir, ['job,server,start,finish'])
    with pytest.raises(TraceParseError, match='line 1'):
        read_trace(path)


def test_missing_sidecar(tmpdir):
    path = os.path.join(str(tmpdir), 'orphan.csv')
    with open(path, 'w') as f:
        f.write('job,task_index,server,start,finish\n')
    with pytest.raises(TraceParseError, match='metadata'):
        read_trace(path)
    assert issubclass(TraceParseError, UserError)


def test_write_table(tmpdir):
    path = os.path.join(str(tmpdir), 'table.csv')
    frame = write_table([{'b': 2, 'a': 1}, {'a': 3}], ['a', 'b'], path)
    assert list(frame.columns) == ['a', 'b']
    with open(path) as f:
        assert f.read().splitlines() == ['a,b', '1,2.0', '3,']


def test_aggregate_table():
    summary = pd.DataFrame({'rho': [0.5, 0.5, 0.5, 0.8], 'policy': ['fut', 'fut', 'fut', 'fut'],
                            'x': [1.0, 2.0, 3.0, 4.0]})
    table = aggregate_table(summary, ['rho', 'policy'], ['x'])
    assert table['seeds'].tolist() == [3, 1]
    assert table['x_mean'].tolist() == [2.0, 4.0]
    assert table['x_se'].iloc[0] == pytest.approx(1 / 3 ** 0.5)


def test_prepare_output_dir(tmpdir):
    path = prepare_output_dir(os.path.join(str(tmpdir), 'a', 'b'))
    assert os.path.isdir(path) and os.path.isabs(path)
    blocker = os.path.join(str(tmpdir), 'file')
    open(blocker, 'w').close()
    with pytest.raises(UserError):
        prepare_output_dir(os.path.join(blocker, 'sub'))
