import os
import shutil
import tempfile
import unittest

from toil.job import Job

from batchq.engine import ServerBank
from batchq.distributions import Deterministic
from batchq.model import Workload


class ToilWorkflowTest(unittest.TestCase):
    """
    This class handles creating a tmpdir and Toil options suitable for a unittest.
    """
    def setUp(self):
        super(ToilWorkflowTest, self).setUp()
        self.tmpdir = tempfile.mkdtemp(prefix='batchq-test-')
        self.options = Job.Runner.getDefaultOptions(os.path.join(self.tmpdir, 'jobstore'))
        self.options.workDir = self.tmpdir
        self.options.clean = 'always'

    def tearDown(self):
        super(ToilWorkflowTest, self).tearDown()
        shutil.rmtree(self.tmpdir, ignore_errors=True)


try:
    import pytest
except ImportError:
    # noinspection PyUnusedLocal
    def _mark_test(name, test_item):
        return test_item
else:
    def _mark_test(name, test_item):
        return getattr(pytest.mark, name)(test_item)


def slow(test_item):
    """
    Use as a decorator before long-running Monte-Carlo tests; ``make test_fast`` skips them.
    """
    return _mark_test('slow', test_item)


def hand_workload(dues=(10, 10)):
    """Two jobs at time 0: job 1 of two tasks, job 2 of one task."""
    return Workload.from_arrays([0, 0], [2, 1], list(dues))


def unit_servers(m=1):
    return ServerBank.of([Deterministic(1.0)] * m)
