from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from busdrive.instance import (
    InstanceError,
    RelocationOption,
    SensingSpec,
    TimetabledTrip,
    fixture_t1,
    fixture_t2,
    generate_synthetic_instance,
)
from busdrive.network import (
    ArcKind,
    TimedNode,
    arc_coverage,
    build_network,
    restrict_single_line,
    trace_coverage,
)


def test_t1_arc_census():
    net = build_network(fixture_t1())
    assert net.counts() == {"Service": 2, "Relocation": 8, "Wait": 10, "PullOut": 2, "PullIn": 2}
    outs = {a.head.terminal for a in net.arcs if a.kind is ArcKind.PULL_OUT}
    ins = {a.tail.terminal for a in net.arcs if a.kind is ArcKind.PULL_IN}
    assert outs == ins == {"A", "B"}


def test_t1_arc_costs():
    net = build_network(fixture_t1())
    by_kind = {}
    for a in net.arcs:
        by_kind.setdefault(a.kind, set()).add((a.head.terminal, round(a.cost, 9)))
    # 1 money per step, relocations add a fixed 2, pull-out adds the fixed 10
    assert by_kind[ArcKind.SERVICE] == {("B", 2.0), ("A", 2.0)}
    assert by_kind[ArcKind.RELOCATION] == {("A", 4.0), ("B", 4.0)}
    assert by_kind[ArcKind.WAIT] == {("A", 0.0), ("B", 0.0)}
    assert by_kind[ArcKind.PULL_OUT] == {("A", 10.0), ("B", 12.0)}
    pull_in = {net.arcs[i].tail.terminal: net.arcs[i].cost for i in net.of_kind(ArcKind.PULL_IN)}
    assert pull_in == pytest.approx({"A": 0.0, "B": 2.0})


def test_t2_relocation_every_step():
    inst = fixture_t2()
    net = build_network(inst)
    times = sorted(a.tail.t for a in net.arcs
                   if a.kind is ArcKind.RELOCATION and a.tail.terminal == "B" and a.head.terminal == "C")
    assert times == list(range(inst.horizon.start, inst.horizon.end))


def test_no_relocation_options_single_line():
    inst = fixture_t1()
    inst = replace(inst, relocations=(), trips=(replace(inst.trips[0], to_terminal="A"),
                                              replace(inst.trips[1], from_terminal="A")))
    net = build_network(inst)
    assert net.counts()["Relocation"] == 0


def test_missing_depot_pair_is_named():
    inst = replace(fixture_t1(), relocations=(RelocationOption("A", "B", 2),))
    inst = replace(inst, trips=(inst.trips[0],))
    with pytest.raises(InstanceError, match="B->A"):
        build_network(inst)


def test_time_strictly_increases():
    net = build_network(fixture_t2())
    for a in net.arcs:
        if a.tail.t is not None and a.head.t is not None:
            assert a.head.t > a.tail.t


def test_coverage_t1_first_trip():
    inst = fixture_t1()
    net = build_network(inst)
    first = next(a for a in net.arcs if a.trip_ref == "t1")
    assert arc_coverage(first, inst) == {("g1", 0)}
    wait = next(a for a in net.arcs if a.kind is ArcKind.WAIT)
    assert arc_coverage(wait, inst) == frozenset()


def test_coverage_entry_fraction_picks_period():
    inst = fixture_t1()  # delta_k = 3
    assert trace_coverage((("g1", 0.75),), 2, 4, inst) == {("g1", 1)}


def test_coverage_spans_boundary():
    inst = fixture_t1()
    # occupied from step 2 to 4 crosses the boundary at 3
    assert trace_coverage((("g1", 0.0),), 2, 4, inst) == {("g1", 0), ("g1", 1)}


def test_restrict_t2_drops_all_relocations():
    inst = fixture_t2()
    net = build_network(inst)
    r = restrict_single_line(net, inst)
    assert r.counts()["Relocation"] == 0
    assert r.counts()["PullOut"] == net.counts()["PullOut"]


def test_restrict_single_line_identity_and_idempotence():
    inst = fixture_t1()
    net = build_network(inst)
    assert restrict_single_line(net, inst).arcs == net.arcs
    inst2 = generate_synthetic_instance(4, 3, 3, 3)
    net2 = build_network(inst2)
    once = restrict_single_line(net2, inst2)
    assert restrict_single_line(once, inst2).arcs == once.arcs
    assert once.counts()["Relocation"] < net2.counts()["Relocation"]


def test_csv_export_header():
    text = build_network(fixture_t1()).to_csv()
    assert text.splitlines()[0] == "kind,from_terminal,from_t,to_terminal,to_t,cost,n_covered_pairs"
    assert len(text.splitlines()) == 1 + 24


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(2, 3))
def test_arc_count_formula(seed, lines, headway):
    inst = generate_synthetic_instance(seed, lines, 2, headway)
    net = build_network(inst)
    c = net.counts()
    assert c["Wait"] == len(inst.terminals) * (inst.horizon.n_points - 1)
    assert c["Service"] == len(inst.trips)
    for idx in net.of_kind(ArcKind.SERVICE):
        trip = next(t for t in inst.trips if t.id == net.arcs[idx].trip_ref)
        if trip.grid_trace:
            assert net.arcs[idx].coverage
    expected_reloc = sum(max(0, inst.horizon.n_points - r.duration_steps) for r in inst.relocations)
    assert c["Relocation"] == expected_reloc


def test_depot_layers_have_no_time():
    net = build_network(fixture_t1())
    assert net.source("A") == TimedNode("A", None, "source")
    assert net.sink("A").t is None
