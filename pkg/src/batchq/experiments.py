"""
Trials of a scenario: one simulation (or one coupled pair) per traffic intensity, policy and seed.
Trial functions are module level and take picklable arguments so they can run as Toil jobs.
"""
import logging
import os
from dataclasses import dataclass, replace

import pandas as pd

from batchq.bounds import fut_gap_bound
from batchq.coupling import (Claim, coupled_simulate, sch1_hypotheses_hold, sch2_hypotheses_hold,
                             verify_near_optimality, write_audit_csv)
from batchq.engine import EDD, FCFS, FUT, simulate
from batchq.files import aggregate_table, write_table, write_trace
from batchq.metrics import SCH1, SCH2, SUMMARY_COLUMNS, SYM, empirical_ccdf, get_metric, summarize
from batchq.orderings import check_arrival_prefix, check_due_prefix, check_fewest_prefix, check_weak_work_efficiency
from batchq.workloads import generate

_log = logging.getLogger(__name__)

GAP_COLUMNS = ['gap_bound_exact', 'gap_bound_coarse']


@dataclass(frozen=True)
class Trial:
    index: int
    rho: float
    seed: int
    policy: object = None
    partner: object = None


def _rho_label(rho):
    return '' if rho is None else rho


def simulation_trials(scenario):
    trials = []
    for rho in scenario.rhos:
        for policy in scenario.policies:
            for seed in range(scenario.base_seed, scenario.base_seed + scenario.seeds):
                trials.append(Trial(len(trials), rho, seed, policy))
    return trials


def couple_trials(scenario):
    policy_p, policy_pi = scenario.policies
    trials = []
    for rho in scenario.rhos:
        for seed in range(scenario.base_seed, scenario.base_seed + scenario.seeds):
            trials.append(Trial(len(trials), rho, seed, policy_p, policy_pi))
    return trials


def trial_workload(scenario, trial):
    """The workload of a trial; it depends on the seed and rho only, so policies share it."""
    rates = list(scenario.servers.rates.values())
    return generate(scenario.workload_at(trial.rho).with_seed(trial.seed), rates)


def summary_columns(scenario):
    columns = ['rho', 'policy', 'seed', 'n']
    for name in scenario.metrics:
        columns.extend(column for column, _ in SUMMARY_COLUMNS[name])
    return columns + GAP_COLUMNS


def _file_stem(trial):
    tag = trial.policy.tag.replace(':', '-').replace(',', '_')
    rho = '' if trial.rho is None else 'rho%s_' % trial.rho
    return '%s%s_%i' % (rho, tag, trial.seed)


def run_simulation_trial(trial, scenario, trace_dir=None):
    """
    Simulates one (rho, policy, seed) combination.

    :param Trial trial: What to run
    :param Scenario scenario: Scenario
    :param str trace_dir: Where to write the trace, None for no trace
    :return: Summary row
    :rtype: dict
    """
    workload = trial_workload(scenario, trial)
    trace = simulate(workload, scenario.servers, trial.policy, replace(scenario.engine, seed=trial.seed))
    row = {'index': trial.index, 'rho': _rho_label(trial.rho), 'policy': trial.policy.tag, 'seed': trial.seed,
           'n': workload.n}
    row.update(summarize(trace, scenario.metrics))
    bound = fut_gap_bound(workload, list(scenario.servers.rates.values()), scenario.servers.classes)
    row['gap_bound_exact'] = bound.average
    row['gap_bound_coarse'] = bound.coarse
    if trace_dir is not None:
        write_trace(trace, os.path.join(trace_dir, _file_stem(trial) + '.csv'))
    return row


def matched_claims(policy_p, metrics):
    """
    The near-optimality claims that apply to P for the given metrics.

    :return: (metric name, Claim) pairs
    :rtype: list[tuple[str, Claim]]
    """
    matched = []
    for name in metrics:
        metric = get_metric(name)
        if policy_p == FUT():
            if name == 'd_avg':
                matched.append((name, Claim.FUT_AVG))
            elif SYM in metric.classes:
                matched.append((name, Claim.SYM))
        elif policy_p == EDD():
            if name == 'l_max':
                matched.append((name, Claim.EDD_LMAX))
            elif metric.classes & {SYM, SCH1}:
                matched.append((name, Claim.SCH1))
        elif policy_p == FCFS():
            if name == 'd_max':
                matched.append((name, Claim.FCFS_DMAX))
            elif metric.classes & {SYM, SCH2}:
                matched.append((name, Claim.SCH2))
    return matched


def couple_columns(scenario):
    columns = ['rho', 'seed', 'policy_p', 'policy_pi', 'holds_wwe', 'holds_prefix']
    return columns + ['holds_near_opt_' + name for name, _ in matched_claims(scenario.policies[0], scenario.metrics)]


def _prefix_report(pair):
    policy = pair.trace_p.policy
    if policy == FUT().tag:
        return check_fewest_prefix(pair.trace_p, pair.trace_pi, True)
    if policy == EDD().tag:
        return check_due_prefix(pair.trace_p, pair.trace_pi, True)
    if policy == FCFS().tag:
        return check_arrival_prefix(pair.trace_p, pair.trace_pi, True)
    return None


def run_couple_trial(trial, scenario, audit_dir=None):
    """
    Builds one coupled pair and checks the orderings and near-optimality claims that apply.
    Checks that do not apply are left empty.

    :param Trial trial: What to run; ``policy`` is P and ``partner`` is pi
    :param Scenario scenario: Scenario
    :param str audit_dir: Where to write the coupling audit and both traces, None for neither
    :rtype: dict
    """
    workload = trial_workload(scenario, trial)
    engine = replace(scenario.engine, seed=trial.seed)
    pair = coupled_simulate(workload, scenario.servers, trial.policy, trial.partner, trial.seed, engine, engine)
    prefix = _prefix_report(pair)
    row = {'index': trial.index, 'rho': _rho_label(trial.rho), 'seed': trial.seed, 'policy_p': trial.policy.tag,
           'policy_pi': trial.partner.tag, 'holds_wwe': check_weak_work_efficiency(pair.trace_p, pair.trace_pi).holds,
           'holds_prefix': '' if prefix is None else prefix.holds}
    for name, claim in matched_claims(trial.policy, scenario.metrics):
        if (claim is Claim.SCH1 and not sch1_hypotheses_hold(workload)
                or claim is Claim.SCH2 and not sch2_hypotheses_hold(workload)):
            row['holds_near_opt_' + name] = ''
        else:
            row['holds_near_opt_' + name] = verify_near_optimality(pair, name, claim)
    if audit_dir is not None:
        stem = _file_stem(trial)
        write_audit_csv(pair, os.path.join(audit_dir, 'audit_%s.csv' % stem))
        write_trace(pair.trace_p, os.path.join(audit_dir, 'p_%s.csv' % stem))
        write_trace(pair.trace_pi, os.path.join(audit_dir, 'pi_%s.csv' % stem))
    return row


def all_hold(rows):
    """Whether every applicable check of the couple rows holds."""
    return all(value is True for row in rows for key, value in row.items()
               if key.startswith('holds_') and value != '')


def _ordered(rows):
    return [{k: v for k, v in row.items() if k != 'index'} for row in sorted(rows, key=lambda r: r['index'])]


def ccdf_rows(summary, scenario):
    rows = []
    for (rho, policy), group in summary.groupby(['rho', 'policy'], sort=False):
        for name in scenario.ccdf_metrics:
            for column, _ in SUMMARY_COLUMNS[name]:
                grid, survival = empirical_ccdf(group[column].to_numpy(), scenario.ccdf_points)
                rows.extend({'rho': rho, 'policy': policy, 'metric': column, 't': t, 'survival': s}
                            for t, s in zip(grid.tolist(), survival.tolist()))
    return rows


def write_simulation_outputs(rows, scenario, out_dir):
    """
    Writes summary.csv, aggregate.csv and, when requested, ccdf.csv.

    :param list[dict] rows: Rows of run_simulation_trial, in any order
    :param Scenario scenario: Scenario
    :param str out_dir: Output directory
    """
    columns = summary_columns(scenario)
    summary = write_table(_ordered(rows), columns, os.path.join(out_dir, 'summary.csv'))
    values = [c for c in columns if c not in ('rho', 'policy', 'seed', 'n')]
    write_table(aggregate_table(summary, ['rho', 'policy'], values).to_dict('records'),
                ['rho', 'policy', 'seeds'] + [c + suffix for c in values for suffix in ('_mean', '_se')],
                os.path.join(out_dir, 'aggregate.csv'))
    if scenario.ccdf_metrics:
        write_table(ccdf_rows(summary, scenario), ['rho', 'policy', 'metric', 't', 'survival'],
                    os.path.join(out_dir, 'ccdf.csv'))


def write_couple_outputs(rows, scenario, out_dir):
    return write_table(_ordered(rows), couple_columns(scenario), os.path.join(out_dir, 'couple.csv'))


def read_couple_rows(out_dir):
    """Reads couple.csv back into rows with boolean checks, empty cells as ''."""
    frame = pd.read_csv(os.path.join(out_dir, 'couple.csv'), dtype=str, keep_default_na=False)
    rows = frame.to_dict('records')
    for row in rows:
        for key, value in row.items():
            if key.startswith('holds_') and value != '':
                row[key] = value == 'True'
    return rows
