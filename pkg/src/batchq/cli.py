"""
Command-line entry point.

Exit codes: 0 success (every checked ordering or inequality holds), 1 a violation was found,
2 invalid configuration, arguments or trace files, 3 a theorem hypothesis does not hold.
"""
import argparse
import json
import logging
import os
import sys

import pandas as pd

from batchq import ConfigError, HypothesisError, TraceParseError, UserError
from batchq.bounds import factor_two_report, fut_gap_bound
from batchq.config import load_scenario
from batchq.coupling import check_coupling_hypotheses
from batchq.experiments import (Trial, all_hold, couple_trials, read_couple_rows, run_couple_trial,
                                run_simulation_trial, simulation_trials, trial_workload, write_couple_outputs,
                                write_simulation_outputs)
from batchq.files import prepare_output_dir, read_trace, write_table
from batchq.jobs import run_trials
from batchq.orderings import (check_arrival_prefix, check_due_prefix, check_fewest_prefix,
                              check_weak_work_efficiency)
from batchq.validators import require_valid_trace

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_HYPOTHESIS = 0, 1, 2, 3

ORDERINGS = {
    'fewest': check_fewest_prefix,
    'due': check_due_prefix,
    'arrival': check_arrival_prefix,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _add_run_options(parser):
    parser.add_argument('--config', required=True, help='Scenario file (JSON or YAML).')
    parser.add_argument('--out', default=None, help='Output directory, overrides the scenario\'s "output".')
    parser.add_argument('--seeds', type=int, default=None, help='Number of seeds, overrides the scenario.')
    parser.add_argument('--base-seed', type=int, default=None, help='First seed, overrides the scenario.')
    parser.add_argument('--emit-traces', action='store_true',
                        help='Write a trace CSV (or coupling audit) per trial.')
    parser.add_argument('--jobs', type=int, default=1,
                        help='Parallelism. Above 1, trials run as a Toil workflow.\n'
                             'The BATCHQ_THREADS environment variable overrides this.')


def create_parser():
    parser = _Parser(prog='batchq', description='Simulate and verify scheduling of batch jobs on parallel servers.',
                     formatter_class=argparse.RawTextHelpFormatter)
    parser.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])
    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND')
    subparsers.required = True
    for name, text in [('simulate', 'Simulate every policy of a scenario on every seed.'),
                       ('sweep', 'Like simulate, over the scenario\'s rho sweep.'),
                       ('couple', 'Build coupled pairs of the scenario\'s two policies and check them.'),
                       ('bounds', 'Evaluate the FUT gap bound, and factor-2 margins from a summary.')]:
        sub = subparsers.add_parser(name, help=text, description=text, formatter_class=argparse.RawTextHelpFormatter)
        _add_run_options(sub)
        if name == 'bounds':
            sub.add_argument('--summary', default=None, help='summary.csv of a simulate or sweep run.')
    check = subparsers.add_parser('check', help='Check an ordering between two stored traces.')
    check.add_argument('trace_p', help='Trace CSV of the work-conserving policy P.')
    check.add_argument('trace_pi', help='Trace CSV of the compared policy.')
    check.add_argument('--ordering', choices=sorted(ORDERINGS) + ['wwe'], default='fewest')
    check.add_argument('--variant', choices=['gamma', 'xi'], default='gamma',
                       help='Compare unassigned (gamma) or remaining (xi) tasks of P.')
    check.add_argument('--out', default=None, help='Also write the report to this JSON file.')
    return parser


def _cores(args):
    cores = os.environ.get('BATCHQ_THREADS')
    if cores:
        try:
            return int(cores)
        except ValueError:
            raise ConfigError('BATCHQ_THREADS must be an integer, got %r' % cores)
    return args.jobs


def _scenario(args):
    scenario = load_scenario(args.config).override(output=args.out, seeds=args.seeds, base_seed=args.base_seed)
    out_dir = prepare_output_dir(scenario.output)
    return scenario, out_dir


def _trace_dir(args, out_dir, name):
    return prepare_output_dir(os.path.join(out_dir, name)) if args.emit_traces else None


def cmd_simulate(args, sweep=False):
    scenario, out_dir = _scenario(args)
    if sweep and not scenario.rho_grid:
        raise ConfigError('The scenario has no rho sweep')
    trials = simulation_trials(scenario)
    run_trials(run_simulation_trial, trials, (scenario, _trace_dir(args, out_dir, 'traces')),
               write_simulation_outputs, (scenario, out_dir), _cores(args), args.log_level)
    log.info('Wrote %i summary rows to %s', len(trials), out_dir)
    return EXIT_OK


def cmd_couple(args):
    scenario, out_dir = _scenario(args)
    if len(scenario.policies) != 2:
        raise ConfigError('Coupling needs exactly two policies, P and pi; got %i' % len(scenario.policies))
    check_coupling_hypotheses(scenario.servers, scenario.engine)
    trials = couple_trials(scenario)
    run_trials(run_couple_trial, trials, (scenario, _trace_dir(args, out_dir, 'audits')),
               write_couple_outputs, (scenario, out_dir), _cores(args), args.log_level)
    rows = read_couple_rows(out_dir)
    if all_hold(rows):
        log.info('All checks hold on %i coupled pairs', len(rows))
        return EXIT_OK
    log.error('Some checks fail, see %s', os.path.join(out_dir, 'couple.csv'))
    return EXIT_VIOLATION


def _read_valid_trace(path):
    trace = read_trace(path)
    try:
        require_valid_trace(trace)
    except UserError as e:
        raise TraceParseError('%s: %s' % (path, e))
    return trace


def cmd_check(args):
    trace_p, trace_pi = _read_valid_trace(args.trace_p), _read_valid_trace(args.trace_pi)
    if trace_p.workload != trace_pi.workload:
        raise ConfigError('The two traces are of different workloads')
    if args.ordering == 'wwe':
        report = check_weak_work_efficiency(trace_p, trace_pi)
    else:
        report = ORDERINGS[args.ordering](trace_p, trace_pi, args.variant == 'gamma')
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    print(text)
    if args.out:
        with open(args.out, 'w') as f:
            f.write(text + '\n')
    return EXIT_OK if report.holds else EXIT_VIOLATION


def cmd_bounds(args):
    scenario, out_dir = _scenario(args)
    rates = list(scenario.servers.rates.values())
    rows = []
    for rho in scenario.rhos:
        for seed in range(scenario.base_seed, scenario.base_seed + scenario.seeds):
            workload = trial_workload(scenario, Trial(0, rho, seed))
            bound = fut_gap_bound(workload, rates, scenario.servers.classes)
            rows.append({'rho': '' if rho is None else rho, 'seed': seed, 'n': workload.n,
                         'gap_bound_exact': bound.average, 'gap_bound_coarse': bound.coarse,
                         'warnings': ';'.join(bound.warnings)})
    write_table(rows, ['rho', 'seed', 'n', 'gap_bound_exact', 'gap_bound_coarse', 'warnings'],
                os.path.join(out_dir, 'bounds.csv'))
    if args.summary:
        write_table(factor_two_rows(args.summary), FACTOR_TWO_COLUMNS, os.path.join(out_dir, 'factor_two.csv'))
    return EXIT_OK


FACTOR_TWO_COLUMNS = ['rho', 'policy', 'metric', 'mean_fcfs', 'mean_other', 'margin', 'holds']


def factor_two_rows(summary_path):
    """
    Factor-2 margins of FCFS against every other policy of a summary, for the maximum delay and
    the 2-norm of delay.
    """
    try:
        summary = pd.read_csv(summary_path, keep_default_na=False)
    except (IOError, OSError, ValueError) as e:
        raise ConfigError('Cannot read summary %s: %s' % (summary_path, e))
    if 'fcfs' not in set(summary['policy']):
        raise ConfigError('The summary %s has no FCFS runs' % summary_path)
    rows = []
    for rho, group in summary.groupby('rho', sort=False):
        fcfs = group[group['policy'] == 'fcfs']
        for policy, other in group[group['policy'] != 'fcfs'].groupby('policy', sort=False):
            for column in ('d_max_c', 'p2_norm'):
                if column not in summary:
                    continue
                report = factor_two_report(fcfs[column].to_numpy(), other[column].to_numpy())
                rows.append({'rho': rho, 'policy': policy, 'metric': column, 'mean_fcfs': report.mean_fcfs,
                             'mean_other': report.mean_other, 'margin': report.margin, 'holds': report.holds})
    return rows


COMMANDS = {
    'simulate': cmd_simulate,
    'sweep': lambda args: cmd_simulate(args, sweep=True),
    'couple': cmd_couple,
    'check': cmd_check,
    'bounds': cmd_bounds,
}


def main(argv=None):
    """
    Runs one command and returns its exit code.

    :param list[str] argv: Arguments, defaults to sys.argv[1:]
    :rtype: int
    """
    try:
        args = create_parser().parse_args(argv)
    except ConfigError as e:
        print('batchq: %s' % e, file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return COMMANDS[args.command](args)
    except HypothesisError as e:
        print('batchq: hypothesis refused: %s' % e, file=sys.stderr)
        return EXIT_HYPOTHESIS
    except UserError as e:
        print('batchq: %s' % e, file=sys.stderr)
        return EXIT_CONFIG


if __name__ == '__main__':
    sys.exit(main())
