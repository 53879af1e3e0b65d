import pytest
from hypothesis import given
from hypothesis import strategies as st

from busdrive.instance import DEFAULT_PWL, PiecewiseConcave, fixture_t1
from busdrive.network import ArcKind, build_network
from busdrive.sensing import (
    PathError,
    coverage_counts,
    effective_sensing_value,
    sensing_profile,
    sensing_score,
)


@pytest.mark.parametrize("q,expected", [(0, 0.0), (1, 1.0), (2, 1.366), (3, 1.732), (5, 1.732)])
def test_default_envelope_values(q, expected):
    assert effective_sensing_value(q, DEFAULT_PWL) == pytest.approx(expected, abs=1e-9)


def _t1_round_trip():
    net = build_network(fixture_t1())
    find = lambda kind, tail_t, head_term: next(  # noqa: E731
        a for a in net.arcs if a.kind is kind and a.tail.t == tail_t and a.head.terminal == head_term)
    out = next(a for a in net.arcs if a.kind is ArcKind.PULL_OUT and a.head.terminal == "A")
    back = next(a for a in net.arcs if a.kind is ArcKind.PULL_IN and a.tail.terminal == "A")
    return [out, find(ArcKind.SERVICE, 0, "B"), find(ArcKind.WAIT, 2, "B"), find(ArcKind.SERVICE, 3, "A"), back]


def test_t1_single_ib_counts():
    path = _t1_round_trip()
    assert coverage_counts([path]) == {("g1", 0): 1, ("g1", 1): 1}
    assert coverage_counts([]) == {}


def test_duplicate_paths_double_counts():
    path = _t1_round_trip()
    assert coverage_counts([path, path]) == {("g1", 0): 2, ("g1", 1): 2}


def test_disconnected_path_rejected():
    path = _t1_round_trip()
    with pytest.raises(PathError, match="break"):
        coverage_counts([path[:2] + path[3:]])


def test_t1_score_and_rate():
    prof = sensing_profile([_t1_round_trip()], fixture_t1())
    assert prof.score == pytest.approx(1.0)
    assert prof.coverage_rate == 1.0
    assert sum(r.contribution for r in prof.rows) == pytest.approx(prof.score)
    assert prof.breakdown_csv().splitlines()[0] == "grid_id,k,mu,q,r,contribution"


def test_single_pair_cap():
    phi, rows = sensing_score({("g", 0): 3}, {("g", 0): 1.0}, DEFAULT_PWL)
    assert phi == pytest.approx(1.732)
    assert sensing_score({}, {("g", 0): 1.0}, DEFAULT_PWL)[0] == 0.0


@given(st.integers(1, 50))
def test_diminishing_gain(q):
    f = DEFAULT_PWL
    assert f(q + 1) - f(q) <= f(q) - f(q - 1) + 1e-12
    assert f(q + 1) >= f(q)
    assert f(q) <= 1.732 + 1e-12


@given(
    st.dictionaries(st.tuples(st.sampled_from("abc"), st.integers(0, 2)), st.integers(0, 6), max_size=9),
    st.floats(0.01, 100),
)
def test_weight_scaling_is_linear(q, c):
    weights = {(g, k): 1.0 / 9 for g in "abc" for k in range(3)}
    base = sensing_score(q, weights, DEFAULT_PWL)[0]
    scaled = sensing_score(q, {p: c * w for p, w in weights.items()}, DEFAULT_PWL)[0]
    assert scaled == pytest.approx(c * base, rel=1e-9, abs=1e-12)


@given(st.dictionaries(st.tuples(st.sampled_from("ab"), st.integers(0, 1)), st.integers(0, 4), max_size=4),
       st.dictionaries(st.tuples(st.sampled_from("ab"), st.integers(0, 1)), st.integers(0, 4), max_size=4))
def test_more_coverage_never_lowers_score(q, extra):
    weights = {(g, k): 0.25 for g in "ab" for k in range(2)}
    more = {p: q.get(p, 0) + extra.get(p, 0) for p in set(q) | set(extra)}
    assert sensing_score(more, weights, DEFAULT_PWL)[0] >= sensing_score(q, weights, DEFAULT_PWL)[0] - 1e-12


def test_non_concave_segments_flagged():
    assert PiecewiseConcave(((0.5, 0.0), (1.0, 0.0))).violations()
    assert DEFAULT_PWL.violations() == []
