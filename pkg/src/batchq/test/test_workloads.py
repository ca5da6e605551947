import numpy as np
import pytest

from batchq.engine import substream
from batchq.workloads import (WORKLOAD_STREAM, ArrivalLaw, DueLaw, SizeLaw, WorkloadSpec, generate, mean_gap_for_rho,
                              rho_for_mean_gap)


def test_mean_gap_for_rho():
    assert mean_gap_for_rho(1, 5.5, [1, 1, 1]) == pytest.approx(11.0 / 3)
    assert mean_gap_for_rho(0.5, 1, [1, 1]) == 2
    assert rho_for_mean_gap(2, 1, [1, 1]) == 0.5
    for rho, size in ((0, 1), (-1, 1), (0.5, 0)):
        with pytest.raises(ValueError):
            mean_gap_for_rho(rho, size, [1, 1])


def test_paired_arrivals():
    workload = generate(WorkloadSpec(2, seed=4))
    assert workload.arrivals.tolist() == [0, 0]
    workload = generate(WorkloadSpec(4, arrival_law=ArrivalLaw(mean_gap=2.0), seed=7))
    gap = substream(7, WORKLOAD_STREAM, 0).exponential(2.0, 1)[0]
    assert workload.arrivals.tolist() == [0, 0, gap, gap]
    assert generate(WorkloadSpec(5, seed=7)).arrivals.size == 5


def test_sizes_and_dues():
    workload = generate(WorkloadSpec(3))
    assert workload.sizes.tolist() == [1, 1, 1]
    assert workload.dues.tolist() == workload.arrivals.tolist()
    spec = WorkloadSpec(200, SizeLaw('choice', values=(1, 10), probs=(0.5, 0.5)),
                        DueLaw('arrival_plus_choice', offsets=(0.0, 50.0), probs=(0.5, 0.5)), seed=1)
    workload = generate(spec)
    assert set(workload.sizes.tolist()) == {1, 10}
    assert set((workload.dues - workload.arrivals).round(9).tolist()) == {0.0, 50.0}
    workload = generate(WorkloadSpec(3, due_law=DueLaw('arrival_plus', offset=2.5)))
    np.testing.assert_allclose(workload.dues - workload.arrivals, [2.5] * 3)


def test_explicit_overrides():
    spec = WorkloadSpec(3, arrival_law=ArrivalLaw('explicit', times=(0, 1, 1)), sizes=(2, 1, 3), dues=(4, 2, 9))
    workload = generate(spec)
    assert workload.arrivals.tolist() == [0, 1, 1]
    assert workload.sizes.tolist() == [2, 1, 3]
    assert workload.dues.tolist() == [4, 2, 9]
    with pytest.raises(ValueError):
        WorkloadSpec(2, sizes=(1, 2, 3))
    with pytest.raises(ValueError):
        WorkloadSpec(2, sizes=(1, 0))


@pytest.mark.parametrize('n, times', [(2, (0,)), (2, (0.5, 1.0)), (3, (0, 2, 1)), (1, ()), (2, (0, float('nan')))])
def test_explicit_arrivals_validated(n, times):
    with pytest.raises(ValueError):
        WorkloadSpec(n, arrival_law=ArrivalLaw('explicit', times=times))


def test_laws_validated():
    for make in (lambda: SizeLaw('constant', k=0),
                 lambda: SizeLaw('choice', values=(1, 2), probs=(0.5, 0.6)),
                 lambda: SizeLaw('geometric'),
                 lambda: DueLaw('arrival_plus', offset=-1),
                 lambda: ArrivalLaw('paired_exponential'),
                 lambda: ArrivalLaw('paired_exponential', mean_gap=1, rho=0.5),
                 lambda: ArrivalLaw('paired_exponential', rho=0),
                 lambda: ArrivalLaw('poisson'),
                 lambda: WorkloadSpec(0)):
        with pytest.raises(ValueError):
            make()


def test_rho_resolution():
    spec = WorkloadSpec(10, SizeLaw('choice', values=(1, 10), probs=(0.5, 0.5))).with_rho(0.8)
    mus = [0.6, 1.0, 1.4]
    assert spec.rho(mus) == 0.8
    assert spec.mean_gap(mus) == pytest.approx(2 * 5.5 / (0.8 * 3.0))
    with pytest.raises(ValueError):
        spec.mean_gap()
    assert WorkloadSpec(10, arrival_law=ArrivalLaw(mean_gap=2.0)).rho([1, 1]) == 0.5
    assert WorkloadSpec(10, arrival_law=ArrivalLaw('poisson', rate=1.0)).rho([1, 1]) is None


def test_generation_is_deterministic():
    spec = WorkloadSpec(50, SizeLaw('choice', values=(1, 10), probs=(0.5, 0.5)), seed=3).with_rho(0.5)
    assert generate(spec, [1, 1]) == generate(spec, [1, 1])
    assert generate(spec, [1, 1]) != generate(spec.with_seed(4), [1, 1])
    # the size stream does not depend on the arrival law
    other = generate(spec.with_rho(0.9), [1, 1])
    assert other.sizes.tolist() == generate(spec, [1, 1]).sizes.tolist()


def test_traffic_intensity():
    mus = [0.6, 1.0, 1.4]
    spec = WorkloadSpec(10000, SizeLaw('choice', values=(1, 10), probs=(0.5, 0.5)), seed=2).with_rho(0.8)
    workload = generate(spec, mus)
    horizon = workload.arrivals[-1]
    rho = workload.total_tasks / horizon / sum(mus)
    # two jobs per exponential gap; the relative error of the rate is about 1.5 / sqrt(n)
    assert rho == pytest.approx(0.8, rel=0.05)


def test_from_dict():
    spec = WorkloadSpec.from_dict({'n': 4, 'size_law': {'kind': 'choice', 'values': [1, 10], 'probs': [0.5, 0.5]},
                                   'due_law': {'kind': 'equal_to_arrival'},
                                   'arrival_law': {'kind': 'paired_exponential', 'rho': 0.8}})
    assert spec.size_law.values == (1, 10)
    assert spec.arrival_law.rho == 0.8
    spec = WorkloadSpec.from_dict({'n': 2, 'sizes': [3, 1], 'dues': [5, 1]})
    assert spec.sizes == (3, 1) and spec.dues == (5.0, 1.0)
    assert np.isclose(spec.mean_size, 2)
