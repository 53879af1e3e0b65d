import math

import pytest

from busdrive import oracle
from busdrive.batch import (
    BatchError,
    OmegaGrid,
    batch_report_json,
    compute_bounds,
    omega_sensitivity,
    run_batch,
)
from busdrive.formulations import build_sp1_model, verify_schedule
from busdrive.instance import fixture_t1, fixture_t2, with_fleet
from busdrive.mip import branch_and_bound_solve
from busdrive.network import build_network


def test_omega_grid_validation():
    assert OmegaGrid().values == (0.5, 1.0, 1.5)
    assert OmegaGrid.parse("0.1,0.2").values == (0.1, 0.2)
    assert OmegaGrid.linspace(0.1, 3.0, 0.1).values[-1] == pytest.approx(3.0)
    assert len(OmegaGrid.linspace(0.1, 3.0, 0.1).values) == 30
    for bad in ((), (1.0, 0.5), (-1.0,), (1.0, 1.0)):
        with pytest.raises(ValueError):
            OmegaGrid(bad)


def test_no_sensors_reduces_to_cost_only():
    inst = with_fleet(fixture_t2(100), max_ib=0)
    net = build_network(inst)
    b = run_batch(inst, net)
    sp1 = branch_and_bound_solve(build_sp1_model(net, inst)[0], mipgap=0)
    assert b.combined_objective == pytest.approx(sp1.objective)
    r = compute_bounds(inst, net, 0).report
    assert r.r_ds == r.r_bs == 0
    assert r.lower_bound == pytest.approx(r.c_nb) and r.upper_bound == pytest.approx(r.c_nb)


@pytest.mark.parametrize("fixture,delta", [(fixture_t1, 100), (fixture_t2, 10), (fixture_t2, 1000)])
def test_sandwich_on_fixtures(fixture, delta):
    inst = fixture(delta)
    net = build_network(inst)
    b = run_batch(inst, net, mipgap=0)
    r = compute_bounds(inst, net, 0).report
    z = oracle.solve_full(net, inst).objective
    assert r.lower_bound <= z + 1e-9 <= b.combined_objective + 2e-9 <= r.upper_bound + 3e-9
    assert verify_schedule(b.schedules, net, inst) == []
    assert b.combined_objective == pytest.approx(b.evaluation.total_cost - delta * b.sensing.score)


def test_t2_batch_relocates_ib():
    inst = fixture_t2(1000)
    net = build_network(inst)
    b = run_batch(inst, net, mipgap=0)
    assert b.ib_schedules and b.ib_schedules[0].relocations >= 1


def test_zero_delta_bounds():
    inst = fixture_t1(0.0)
    net = build_network(inst)
    r = compute_bounds(inst, net, 0).report
    assert r.lower_bound == pytest.approx(r.c_nb)
    assert r.gap_defined and r.worst_case_gap >= 0


def test_undefined_gap_flag():
    r = compute_bounds(fixture_t1(100), build_network(fixture_t1(100)), 0).report
    assert not r.gap_defined
    assert r.to_json_dict()["worst_case_gap"] == "undefined"


def test_refining_grid_never_hurts():
    inst = fixture_t2(40)
    net = build_network(inst)
    coarse = run_batch(inst, net, OmegaGrid((1.0,)), 0, anchors=False)
    fine = run_batch(inst, net, OmegaGrid((0.5, 1.0, 1.5)), 0, anchors=False)
    assert fine.combined_objective <= coarse.combined_objective + 1e-9


def test_trace_and_json():
    inst = fixture_t1(100)
    b = run_batch(inst, build_network(inst), mipgap=0)
    omegas = [w for w, _, _ in b.per_omega_trace]
    assert omegas[:3] == [0.5, 1.0, 1.5] and 0.0 in omegas and math.inf in omegas
    text = batch_report_json(b)
    assert '"inf"' in text and text.endswith("\n")


def test_infeasible_nb_stage_everywhere():
    inst = with_fleet(fixture_t2(100), total=1, max_ib=1)
    with pytest.raises(BatchError, match="no feasible batch schedule"):
        run_batch(inst, build_network(inst))


def test_omega_sensitivity_rows():
    inst = fixture_t1(100)
    net = build_network(inst)
    kind, rows = omega_sensitivity(inst, net, 0.5, 1.5, 0.5, mipgap=0)
    assert kind == "lower_bound"  # 52 binaries exceed the enumeration cap
    assert [r.omega for r in rows] == [0.5, 1.0, 1.5]
    best = run_batch(inst, net, OmegaGrid((0.5, 1.0, 1.5)), 0, anchors=False)
    assert min(r.objective for r in rows) == pytest.approx(best.combined_objective)
    assert all(r.gap is None or r.gap >= -1e-9 for r in rows)


def test_omega_sensitivity_exact_reference():
    inst = oracle.micro_instance(3)
    net = build_network(inst)
    kind, rows = omega_sensitivity(inst, net, 1.0, 1.0, 0.5, mipgap=0)
    assert kind == "exact" and len(rows) == 1
