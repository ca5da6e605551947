import csv
import os

import pytest

from batchq import HypothesisError
from batchq.coupling import (AUDIT_COLUMNS, Claim, check_coupling_hypotheses, coupled_simulate,
                             marginal_fidelity_test, sch1_hypotheses_hold, sch2_hypotheses_hold, verify_near_optimality,
                             write_audit_csv)
from batchq.distributions import Deterministic, Exponential, ParetoLomax, ShiftedExponential
from batchq.engine import EDD, FCFS, FUT, LIFO, EngineConfig, RandomOrder, ServerBank, replay_conformance
from batchq.model import Workload
from batchq.orderings import check_arrival_prefix, check_due_prefix, check_fewest_prefix, check_weak_work_efficiency
from batchq.test import slow
from batchq.validators import validate_trace
from batchq.workloads import DueLaw, SizeLaw, WorkloadSpec, generate

EXPONENTIAL_BANK = ServerBank.of([Exponential(0.6), Exponential(1.0), Exponential(1.4)])
NBU_BANK = ServerBank.of([ShiftedExponential.with_service_rate(mu) for mu in (1.4, 1.0, 0.6)])


def _workload(seed, n=5, due_law=None):
    spec = WorkloadSpec(n, SizeLaw('choice', values=(1, 2, 5), probs=(0.4, 0.3, 0.3)), due_law or DueLaw(),
                        seed=seed)
    return generate(spec.with_rho(0.9), [0.6, 1.0, 1.4])


def _records(trace):
    return [(r.job, r.task_index, r.server, r.start, r.finish) for r in trace.task_records]


def test_hypotheses():
    check_coupling_hypotheses(NBU_BANK, EngineConfig())
    with pytest.raises(HypothesisError, match='NBU'):
        check_coupling_hypotheses(ServerBank.of([ParetoLomax(14.0 / 3, 3)]), EngineConfig())
    with pytest.raises(HypothesisError, match='work-conserving'):
        coupled_simulate(_workload(0), NBU_BANK, FUT(), LIFO(), 0, EngineConfig(idle_injection=((1, 0, 1),)))


@pytest.mark.parametrize('bank', [ServerBank.of([Exponential(1.0)]), EXPONENTIAL_BANK, NBU_BANK,
                                  ServerBank.of([Deterministic(1.0)] * 2)])
def test_same_policy_gives_identical_traces(bank):
    for seed in range(3):
        pair = coupled_simulate(_workload(seed, n=8), bank, FUT(), FUT(), seed)
        assert _records(pair.trace_p) == _records(pair.trace_pi)
        assert all(entry.consumed and entry.chi == 0 for entry in pair.audit)


def test_fut_lifo_pairs():
    for seed in range(20):
        workload = _workload(seed)
        pair = coupled_simulate(workload, EXPONENTIAL_BANK, FUT(), LIFO(), seed)
        assert validate_trace(pair.trace_p) == []
        assert replay_conformance(pair.trace_p, FUT(), EngineConfig(seed=seed)) == []
        assert check_weak_work_efficiency(pair.trace_p, pair.trace_pi).holds
        assert check_fewest_prefix(pair.trace_p, pair.trace_pi, True).holds
        assert verify_near_optimality(pair, 'd_avg', Claim.FUT_AVG)
        assert verify_near_optimality(pair, 'makespan', Claim.SYM)


def test_pi_side_is_an_ordinary_run():
    from batchq.engine import simulate
    workload = _workload(3, n=10)
    pair = coupled_simulate(workload, NBU_BANK, FUT(), LIFO(), 3)
    assert pair.trace_pi == simulate(workload, NBU_BANK, LIFO(), EngineConfig(seed=3))


def test_nbu_pairs_on_ten_jobs():
    for seed in range(10):
        pair = coupled_simulate(_workload(seed, n=10), NBU_BANK, FUT(), LIFO(), seed)
        assert check_weak_work_efficiency(pair.trace_p, pair.trace_pi).holds
        assert verify_near_optimality(pair, 'd_avg', Claim.FUT_AVG)


def test_deterministic_servers():
    bank = ServerBank.of([Deterministic(1.0), Deterministic(2.0)])
    for seed in range(5):
        pair = coupled_simulate(_workload(seed), bank, FUT(), RandomOrder(), seed)
        assert check_weak_work_efficiency(pair.trace_p, pair.trace_pi).holds


def test_edd_fcfs_pairs():
    due_law = DueLaw('arrival_plus_choice', offsets=(0.0, 3.0, 8.0), probs=(0.3, 0.4, 0.3))
    for seed in range(10):
        pair = coupled_simulate(_workload(seed, due_law=due_law), EXPONENTIAL_BANK, EDD(), FCFS(), seed)
        assert check_due_prefix(pair.trace_p, pair.trace_pi, True).holds
        assert verify_near_optimality(pair, 'l_max', Claim.EDD_LMAX)


def test_fcfs_pairs():
    for seed in range(10):
        for partner in (LIFO(), RandomOrder()):
            pair = coupled_simulate(_workload(seed), NBU_BANK, FCFS(), partner, seed)
            assert check_arrival_prefix(pair.trace_p, pair.trace_pi, True).holds
            assert verify_near_optimality(pair, 'd_max', Claim.FCFS_DMAX)


def test_identical_pair_near_optimality():
    pair = coupled_simulate(_workload(1), NBU_BANK, FUT(), FUT(), 1)
    assert verify_near_optimality(pair, 'd_avg', 'fut_avg')


def test_mismatched_claims_rejected():
    pair = coupled_simulate(_workload(1), NBU_BANK, FUT(), LIFO(), 1)
    with pytest.raises(HypothesisError):
        verify_near_optimality(pair, 'l_max', Claim.FUT_AVG)
    with pytest.raises(HypothesisError):
        verify_near_optimality(pair, 'l_max', Claim.EDD_LMAX)
    with pytest.raises(HypothesisError):
        verify_near_optimality(pair, 'd_max', Claim.SYM)


def test_sch1_hypotheses():
    assert sch1_hypotheses_hold(Workload.from_arrays([0, 1, 2], [1, 1, 1], [5, 1, 3]))
    assert sch1_hypotheses_hold(Workload.from_arrays([0, 1, 2], [1, 2, 2], [1, 2, 3]))
    assert not sch1_hypotheses_hold(Workload.from_arrays([0, 1, 2], [1, 2, 2], [1, 3, 2]))
    assert not sch1_hypotheses_hold(Workload.from_arrays([0, 1], [2, 1], [1, 2]))
    pair = coupled_simulate(Workload.from_arrays([0, 0], [2, 1], [1, 2]), NBU_BANK, EDD(), FCFS(), 0)
    with pytest.raises(HypothesisError, match='Sch-1'):
        verify_near_optimality(pair, 'rms_tardiness', Claim.SCH1)


def test_sch2_hypotheses():
    assert sch2_hypotheses_hold(Workload.from_arrays([0, 1, 2], [3, 3, 3]))
    assert sch2_hypotheses_hold(Workload.from_arrays([0, 1, 2], [1, 2, 2]))
    assert not sch2_hypotheses_hold(Workload.from_arrays([0, 1], [2, 1]))
    pair = coupled_simulate(Workload.from_arrays([0, 0], [2, 1]), NBU_BANK, FCFS(), LIFO(), 0)
    with pytest.raises(HypothesisError, match='Sch-2'):
        verify_near_optimality(pair, 'p2_norm', Claim.SCH2)
    with pytest.raises(HypothesisError):
        verify_near_optimality(pair, 'l_max', Claim.SCH2)


@pytest.mark.parametrize('bank', [EXPONENTIAL_BANK, NBU_BANK])
def test_fcfs_equal_sizes_extends_to_sym_and_sch2(bank):
    for seed in range(30):
        spec = WorkloadSpec(12, SizeLaw('constant', k=3), seed=seed)
        workload = generate(spec.with_rho(0.9), [0.6, 1.0, 1.4])
        for partner in (LIFO(), RandomOrder(), FUT()):
            pair = coupled_simulate(workload, bank, FCFS(), partner, seed)
            for metric in ('p2_norm', 'd_avg', 'makespan'):
                assert verify_near_optimality(pair, metric, Claim.SCH2), (seed, partner, metric)


def test_audit_csv(tmpdir):
    pair = coupled_simulate(_workload(2, n=10), NBU_BANK, FUT(), LIFO(), 2)
    path = os.path.join(str(tmpdir), 'audit.csv')
    write_audit_csv(pair, path)
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == AUDIT_COLUMNS
    assert len(rows) - 1 == len(pair.consumed)
    for row in rows[1:]:
        chi, residual, duration = float(row[3]), float(row[4]), float(row[5])
        assert chi >= 0
        # NBU residuals never exceed the pi-task's own service time
        assert residual <= duration + 1e-12


def test_fidelity_rejects_few_seeds():
    with pytest.raises(ValueError):
        marginal_fidelity_test(_workload(0), NBU_BANK, FUT(), 10)


def test_fidelity_deterministic():
    bank = ServerBank.of([Deterministic(1.0), Deterministic(0.5)])
    report = marginal_fidelity_test(_workload(0), bank, FUT(), 100)
    assert report.passed
    assert report.mean_difference == pytest.approx(0, abs=1e-9)


@slow
@pytest.mark.parametrize('bank', [EXPONENTIAL_BANK, NBU_BANK,
                                  ServerBank.of([Deterministic(1.0 / mu) for mu in (0.6, 1.0, 1.4)])])
def test_fidelity_at_default_tolerances(bank):
    report = marginal_fidelity_test(_workload(0, n=10), bank, FUT(), 200)
    assert report.passed
