"""
Toil fan-out of independent trials: a root job spreads the trials over child jobs, and a single
follow-on job merges their rows and writes the output files.
"""
import logging
import os
import shutil
import tempfile

from toil.job import Job

from batchq import partitions

_log = logging.getLogger(__name__)


def run_partition(job, func, trials, *args):
    """
    Runs a batch of trials in one job.

    :param JobFunctionWrappingJob job: passed automatically by Toil
    :param function func: Trial function, called as func(trial, *args)
    :param list trials: Trials of this batch
    :return: One result per trial
    :rtype: list
    """
    return [func(trial, *args) for trial in trials]


def map_job(job, func, inputs, partition_size, *args):
    """
    Spawns one child job per partition of the inputs and returns promises of their results.

    :param JobFunctionWrappingJob job: passed automatically by Toil
    :param function func: Trial function, called as func(trial, *args)
    :param list inputs: Trials
    :param int partition_size: Trials per child job
    :param list args: Arguments passed to every call of func
    :rtype: list[Promise]
    """
    return [job.addChildJobFn(run_partition, func, partition, *args).rv()
            for partition in partitions(inputs, max(1, partition_size))]


def merge_job(job, write, batches, *args):
    """
    Flattens the results of all batches and hands them to ``write``.

    :param JobFunctionWrappingJob job: passed automatically by Toil
    :param function write: Called as write(rows, *args)
    :param list[list] batches: Results of run_partition
    """
    rows = [row for batch in batches for row in batch]
    _log.info('Merging %i trial results', len(rows))
    write(rows, *args)


def fan_out_job(job, func, inputs, partition_size, func_args, write, write_args):
    """Root job: runs ``func`` over the inputs in children, then ``write`` once in a follow-on."""
    batches = map_job(job, func, inputs, partition_size, *func_args)
    job.addFollowOnJobFn(merge_job, write, batches, *write_args)


def run_trials(func, inputs, func_args, write, write_args, cores, log_level='INFO'):
    """
    Runs trials and writes their results. With one core the trials run in-process in order;
    otherwise they run as a Toil workflow on the single-machine batch system.

    :param function func: Trial function, called as func(trial, *func_args)
    :param list inputs: Trials
    :param tuple func_args: Extra arguments of func
    :param function write: Called once as write(rows, *write_args)
    :param tuple write_args: Extra arguments of write
    :param int cores: Parallelism
    :param str log_level: Log level of the Toil workflow
    """
    if cores <= 1:
        write([func(trial, *func_args) for trial in inputs], *write_args)
        return
    work_dir = tempfile.mkdtemp(prefix='batchq-')
    try:
        options = Job.Runner.getDefaultOptions(os.path.join(work_dir, 'jobstore'))
        options.workDir = work_dir
        options.maxCores = cores
        options.clean = 'always'
        options.logLevel = log_level
        partition_size = -(-len(inputs) // cores)
        _log.info('Running %i trials as a Toil workflow on %i cores', len(inputs), cores)
        root = Job.wrapJobFn(fan_out_job, func, inputs, partition_size, func_args, write, write_args)
        Job.Runner.startToil(root, options)
    finally:
        shutil.rmtree(work_dir, ignore_errors=True)
