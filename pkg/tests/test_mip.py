import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from busdrive.mip import (
    MipModel,
    ModelError,
    Status,
    TooManyBinaries,
    branch_and_bound_solve,
    brute_force_solve,
    lp_relax_solve,
)
from busdrive.mip.simplex import solve_bounded


def test_lp_single_bound():
    m = MipModel()
    x = m.add_var("x", lower=0, upper=10)
    m.add_constr({x: 1}, ">=", 3)
    m.set_objective({x: 1})
    for engine in ("simplex", "highs"):
        sol = lp_relax_solve(m, engine)
        assert sol.status is Status.OPTIMAL
        assert sol.value(x) == pytest.approx(3)


def test_lp_infeasible_pair():
    m = MipModel()
    x = m.add_var("x", lower=0, upper=10)
    m.add_constr({x: 1}, ">=", 2)
    m.add_constr({x: 1}, "<=", 1)
    m.set_objective({x: 1})
    for engine in ("simplex", "highs"):
        assert lp_relax_solve(m, engine).status is Status.INFEASIBLE
    assert branch_and_bound_solve(m).status is Status.INFEASIBLE
    assert brute_force_solve(m).status is Status.INFEASIBLE


def test_lp_unbounded():
    m = MipModel()
    x = m.add_var("x", lower=0)
    m.set_objective({x: 1}, "max")
    assert lp_relax_solve(m, "simplex").status is Status.UNBOUNDED
    assert lp_relax_solve(m, "highs").status is Status.UNBOUNDED


def _knapsack():
    m = MipModel("knap")
    w, v = [3, 4, 2], [5, 6, 3]
    xs = [m.add_binary(f"x{i}") for i in range(3)]
    m.add_constr(zip(xs, w), "<=", 6)
    m.set_objective(zip(xs, v), "max")
    return m, w, v


def test_knapsack_matches_enumeration():
    m, w, v = _knapsack()
    best = max(
        sum(vi * b for vi, b in zip(v, bits))
        for bits in itertools.product((0, 1), repeat=3)
        if sum(wi * b for wi, b in zip(w, bits)) <= 6
    )
    assert best == 9
    assert brute_force_solve(m).objective == pytest.approx(best)
    sol = branch_and_bound_solve(m, mipgap=0)
    assert sol.status is Status.OPTIMAL
    assert sol.objective == pytest.approx(best)


def test_pure_lp_bnb_equals_relaxation():
    m = MipModel()
    x = m.add_var("x", upper=4)
    y = m.add_var("y", upper=4)
    m.add_constr({x: 1, y: 2}, "<=", 6)
    m.set_objective({x: 3, y: 2}, "max")
    assert branch_and_bound_solve(m).objective == pytest.approx(lp_relax_solve(m).objective)
    assert brute_force_solve(m).objective == pytest.approx(lp_relax_solve(m).objective)


def test_brute_force_refuses_large_models():
    m = MipModel()
    for i in range(30):
        m.add_binary(f"b{i}")
    with pytest.raises(TooManyBinaries):
        brute_force_solve(m, max_binaries=24)


def test_undeclared_variable_rejected():
    m = MipModel()
    m.add_binary("a")
    with pytest.raises(ModelError):
        m.add_constr({5: 1.0}, "<=", 1)


def test_dump_lp_sections():
    m, *_ = _knapsack()
    text = m.dump_lp()
    for section in ("Maximize", "Subject To", "Bounds", "Binaries", "End"):
        assert section in text


def random_micro_model(seed: int) -> MipModel:
    rng = np.random.default_rng(seed)
    m = MipModel(f"micro{seed}")
    n_bin = int(rng.integers(3, 13))
    n_cont = int(rng.integers(0, 4))
    bins = [m.add_binary(f"b{i}") for i in range(n_bin)]
    conts = [m.add_var(f"c{i}", lower=0, upper=float(rng.integers(1, 6))) for i in range(n_cont)]
    allv = bins + conts
    for r in range(int(rng.integers(1, 21))):
        k = int(rng.integers(1, min(len(allv), 5) + 1))
        vs = rng.choice(allv, size=k, replace=False)
        coefs = rng.integers(-4, 5, size=k).astype(float)
        coefs[coefs == 0] = 1.0
        sense = str(rng.choice(["<=", ">=", "="], p=[0.6, 0.3, 0.1]))
        rhs = float(rng.integers(-2, 6))
        m.add_constr(zip(vs.tolist(), coefs.tolist()), sense, rhs, f"r{r}")
    obj = rng.integers(-5, 6, size=len(allv)).astype(float)
    m.set_objective(zip(allv, obj.tolist()), str(rng.choice(["min", "max"])))
    return m


@pytest.mark.parametrize("seed", range(50))
def test_bnb_equals_brute_force_on_micro_models(seed):
    m = random_micro_model(seed)
    oracle = brute_force_solve(m)
    sol = branch_and_bound_solve(m, mipgap=0)
    assert sol.status.value in ("Optimal", "Infeasible")
    assert (oracle.status is Status.INFEASIBLE) == (sol.status is Status.INFEASIBLE)
    if oracle.status is Status.OPTIMAL:
        assert sol.objective == pytest.approx(oracle.objective, abs=1e-6)
        assert m.is_feasible(sol.x)
        relax = lp_relax_solve(m)
        if m.sense == "min":
            assert relax.objective <= oracle.objective + 1e-6
        else:
            assert relax.objective >= oracle.objective - 1e-6


def test_bnb_deterministic():
    m = random_micro_model(11)
    a, b = branch_and_bound_solve(m, mipgap=0), branch_and_bound_solve(m, mipgap=0)
    assert a.objective == b.objective and a.nodes_explored == b.nodes_explored
    assert np.array_equal(a.x, b.x)


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 4),
    st.integers(1, 4),
    st.integers(0, 2**31 - 1),
)
def test_simplex_agrees_with_highs(n, m_rows, seed):
    rng = np.random.default_rng(seed)
    A = rng.integers(-3, 4, size=(m_rows, n)).astype(float)
    row_lo = np.full(m_rows, -np.inf)
    row_hi = rng.integers(0, 8, size=m_rows).astype(float)
    lb, ub = np.zeros(n), np.full(n, 5.0)
    c = rng.integers(-4, 5, size=n).astype(float)
    model = MipModel()
    xs = [model.add_var(f"x{i}", upper=5.0) for i in range(n)]
    for r in range(m_rows):
        model.add_constr(zip(xs, A[r]), "<=", row_hi[r])
    model.set_objective(zip(xs, c))
    st_s, _, obj_s = solve_bounded(c, A, row_lo, row_hi, lb, ub)
    ref = lp_relax_solve(model, "highs")
    assert (st_s == "optimal") == (ref.status is Status.OPTIMAL)
    if st_s == "optimal":
        assert obj_s == pytest.approx(ref.objective, abs=1e-6)
