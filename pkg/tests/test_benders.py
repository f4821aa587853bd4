import numpy as np
import pytest

from helpers import box_sup, build_csp, depot_loop, fixed_energies, tight_synthetic
from solarbus.benders import (BendersError, MainProblemState, SolveError, benders_solve,
                              build_subproblem, feasibility_cut, optimality_cut, solve_monolithic)
from solarbus.instance import FleetParams
from solarbus.lpcore import Status, solve


def assert_valid_ray(lp, y):
    for yi, s in zip(y, lp.senses):
        assert (s != "G" or yi >= -1e-9) and (s != "L" or yi <= 1e-9)
    assert y @ lp.rhs - box_sup(lp.A.T @ y, lp.lb, lp.ub) > 1e-9


def pinned(csp, x):
    """The monolithic LP with the sizing fixed to ``x``."""
    lp = csp.lp.copy()
    lp.lb[csp.first_stage] = x
    lp.ub[csp.first_stage] = x
    return lp


def feasible_sizings(csp, rng, n=3):
    """Sizings with feasible recourse: optima for randomly re-priced first-stage terms."""
    out = []
    for _ in range(n):
        lp = csp.lp.copy()
        lp.c[csp.first_stage] *= rng.uniform(0.05, 20.0, csp.first_stage.size)
        res = solve(lp)
        assert res.optimal
        out.append(res.x[csp.first_stage])
    return out


@pytest.fixture(scope="module")
def small():
    # seed 15: one depot, one opened terminal station, three buses, two scenarios
    inst = tight_synthetic(15, n_scenarios=2, n_depots=1)
    return build_csp(inst)


@pytest.fixture(scope="module")
def pool(small):
    return feasible_sizings(small, np.random.default_rng(0))


def mix(pool, rng, jitter=False):
    """Convex mix of feasible sizings (feasible); ``jitter`` scales it at random."""
    x = sum(l * p for l, p in zip(rng.dirichlet(np.ones(len(pool))), pool))
    if jitter:
        x = x * rng.uniform(0.5, 2.0, x.size)
    return x


def test_fixture_shape(small):
    assert len(small.locations) == 2 and small.scenario_ids == [0, 1]
    assert all(len(small.opportunities.buses(s)) == 3 for s in small.scenario_ids)


def test_matches_monolithic(small):
    mono = solve_monolithic(small).objective
    plan, log = benders_solve(small, gap_tol=1e-9)
    assert log.converged and log.status == "optimal"
    assert abs(plan.objective - mono) <= 1e-6 * max(1.0, abs(mono))
    assert plan.violations == [] and plan.solver == "benders"


def test_bounds_and_cut_validity(small):
    gap = 1e-7
    plan, log = benders_solve(small, gap_tol=gap)
    lbs = [r.lower_bound for r in log.records]
    ubs = [r.upper_bound for r in log.records]
    assert all(b >= a - 1e-9 for a, b in zip(lbs, lbs[1:]))
    assert all(b <= a for a, b in zip(ubs, ubs[1:]))
    assert ubs[-1] - lbs[-1] <= gap + 1e-9
    x = np.array([{"z": plan.z, "a": plan.a, "c": plan.c, "d": plan.d}[k][j]
                  for k, j in small.first_stage_tags()])
    zeta = {sp_.scenario_id: None for sp_ in plan.scenarios}
    for sid in zeta:
        sub = build_subproblem(small, sid, x)
        zeta[sid] = solve(sub.lp).objective
    for cut in log.cuts:
        assert cut.slack(x, zeta[cut.scenario_id]) >= -1e-6


def test_loose_tolerance_stays_close(small):
    mono = solve_monolithic(small).objective
    plan, _ = benders_solve(small, gap_tol=0.1)
    assert mono - 1e-9 <= plan.objective <= mono + 0.1


def test_scenario_order_does_not_matter(small):
    inst = small.instance
    flipped = build_csp(inst.with_scenarios(tuple(reversed(inst.scenarios))))
    a, _ = benders_solve(small, gap_tol=1e-8)
    b, _ = benders_solve(flipped, gap_tol=1e-8)
    assert a.objective == pytest.approx(b.objective, abs=1e-7)


def test_no_demand_converges_at_once():
    inst = tight_synthetic(6, n_scenarios=1)
    csp = build_csp(inst, fixed_energies(inst, 0.0, 0.0))
    plan, log = benders_solve(csp)
    assert len(log.records) <= 2 and plan.objective == pytest.approx(0.0, abs=1e-12)
    sub = build_subproblem(csp, 0, np.zeros(csp.first_stage.size))
    out = solve(sub.lp)
    cut = optimality_cut(sub, out)
    assert np.all(cut.coef == 0) and cut.rhs == pytest.approx(out.objective, abs=1e-12)


def test_empty_battery_and_huge_grid_is_the_grid_only_model(small):
    x = np.array([1e6 if k == "z" else 0.0 for k, _ in small.first_stage_tags()])
    sub = build_subproblem(small, 0, x)
    out = solve(sub.lp)
    assert out.optimal
    tags = [small.tags[i] for i in sub.cols]
    for tag, v in zip(tags, out.x):
        if tag[0] in ("wb", "g"):
            assert abs(v) <= 1e-9
    lean = build_csp(small.instance, with_res=False)
    xl = np.array([1e6 for _ in lean.first_stage])
    lean_out = solve(build_subproblem(lean, 0, xl).lp)
    assert out.objective == pytest.approx(lean_out.objective, rel=1e-9)


def test_zero_grid_is_infeasible_with_a_ray(small):
    sub = build_subproblem(small, 0, np.zeros(small.first_stage.size))
    out = solve(sub.lp)
    assert out.status is Status.INFEASIBLE
    assert_valid_ray(sub.lp, out.ray)
    cut = feasibility_cut(sub, out.ray)
    assert cut.slack(sub.x) < -1e-9
    same = feasibility_cut(sub, 7.5 * out.ray)
    np.testing.assert_allclose(same.coef, cut.coef, atol=1e-12)
    assert same.rhs == pytest.approx(cut.rhs, abs=1e-12)
    with pytest.raises(ValueError):
        feasibility_cut(sub, -out.ray)


def test_zero_grid_cut_implies_minimum_capacity():
    # one location without solar or storage: the cut must bound z from below by
    # no more than the least capacity that makes the day feasible
    fleet = FleetParams(rho_max=200.0, rho_min=10.0, beta=2.5)
    inst, en = depot_loop(60, 120, 60.0, fleet=fleet, tariff=0.0)
    csp = build_csp(inst, en)
    tags = csp.first_stage_tags()
    sub = build_subproblem(csp, 0, np.zeros(len(tags)))
    cut = feasibility_cut(sub, solve(sub.lp).ray)
    # oracle: least z with a = c = d = 0, from the pinned monolithic LP
    lp = csp.lp.copy()
    for i, (kind, _) in enumerate(tags):
        if kind != "z":
            lp.ub[csp.first_stage[i]] = 0.0
    lp.c[:] = 0.0
    lp.c[csp.directory["z", "D"]] = 1.0
    z_min = solve(lp).objective
    assert z_min == pytest.approx(60.0, rel=1e-9)
    iz = tags.index(("z", "D"))
    assert cut.coef[iz] > 0
    implied = cut.rhs / cut.coef[iz]
    assert 0 < implied <= z_min + 1e-7
    for scale in (1.0, 1.5, 10.0):
        x = np.zeros(len(tags))
        x[iz] = scale * z_min
        assert cut.slack(x) >= -1e-9


def test_subproblem_matches_pinned_monolithic(small, pool):
    rng = np.random.default_rng(0)
    checked = 0
    for i in range(10):
        x = mix(pool, rng, jitter=i >= 6)
        mono = solve(pinned(small, x))
        subs = [solve(build_subproblem(small, s, x).lp) for s in small.scenario_ids]
        if mono.status is Status.INFEASIBLE:
            assert any(o.status is Status.INFEASIBLE for o in subs)
            continue
        recourse = sum(p * o.objective for p, o in zip(small.probabilities, subs))
        first = float(small.lp.c[small.first_stage] @ x)
        assert first + recourse == pytest.approx(mono.objective, rel=1e-9, abs=1e-9)
        checked += 1
    assert checked >= 6


def test_optimality_cut_is_tight_and_never_above_recourse(small, pool):
    rng = np.random.default_rng(1)
    x0 = mix(pool, rng)
    for sid in small.scenario_ids:
        sub = build_subproblem(small, sid, x0)
        out = solve(sub.lp)
        assert out.optimal
        cut = optimality_cut(sub, out)
        assert cut.rhs - cut.coef @ x0 == pytest.approx(out.objective, abs=1e-7)
        for _ in range(10):
            x = mix(pool, rng, jitter=True)
            other = solve(build_subproblem(small, sid, x).lp)
            if other.optimal:
                assert cut.rhs - cut.coef @ x <= other.objective + 1e-7


def test_main_problem_layout(small):
    _, log = benders_solve(small, gap_tol=1e-6)
    state = MainProblemState.from_csp(small)
    state.cuts.extend(log.cuts)
    lp = state.lp().A.toarray()
    n = small.first_stage.size
    offset = len(state.implied)
    for r, cut in enumerate(state.cuts):
        zeta = lp[offset + r, n:]
        if cut.kind == "optimality":
            expect = np.zeros(len(small.scenario_ids))
            expect[small.scenario_ids.index(cut.scenario_id)] = 1.0
            assert np.array_equal(zeta, expect)
        else:
            assert not zeta.any()
    np.testing.assert_allclose(state.lp().c[n:], small.probabilities)
    assert len(state.implied) == len(small.locations)


def test_iteration_limit_and_infeasible_model(small):
    try:
        _, log = benders_solve(small, max_iters=1)
        assert log.status == "iteration-limit" and not log.converged
    except BendersError as err:
        assert err.status is Status.ITERATION_LIMIT
    fleet = FleetParams(rho_max=200.0, rho_min=10.0, beta=0.5)
    inst, en = depot_loop(60, 120, 60.0, fleet=fleet)
    csp = build_csp(inst, en)
    with pytest.raises(BendersError) as err:
        benders_solve(csp)
    assert err.value.status is Status.INFEASIBLE
    with pytest.raises(SolveError):
        solve_monolithic(csp)
    with pytest.raises(ValueError):
        benders_solve(csp, gap_tol=0.0)


def test_subproblem_argument_checks(small):
    with pytest.raises(ValueError):
        build_subproblem(small, 99, np.zeros(small.first_stage.size))
    with pytest.raises(ValueError):
        build_subproblem(small, 0, np.zeros(3))
    with pytest.raises(ValueError):
        build_subproblem(small, 0, -np.ones(small.first_stage.size))
