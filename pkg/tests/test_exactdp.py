from fractions import Fraction

import numpy as np
import pytest

from chargesched import linalg
from chargesched.core import ActionVector, PenaltyFunction, VehicleState
from chargesched.exactdp import (DPSolution, NonConvergenceError,
                                 ProjectionError, StateCeilingExceeded,
                                 TabularPolicy, brute_force_optimal_gain,
                                 compliance_violations, enumerate_mdp,
                                 exact_policy_gain, export_solution,
                                 lattice_size, lllp_projection,
                                 recurrent_classes, relative_value_iteration,
                                 verify_constant_gain)
from chargesched.models import (DemandModel, GridModel, ScenarioModel,
                                TableCost, TabulatedArrivals,
                                capacity_scenario, multichain_fixture,
                                two_charger_scenario)

ONE, HALF = Fraction(1), Fraction(1, 2)


def _single_charger_scenario(arrival_prob=HALF):
    grid = GridModel(values=(0,), kernel=(((ONE,), (ONE,)),),
                     cost=TableCost(((Fraction(0),), (Fraction(0),))))
    demand = DemandModel(
        kernel=((ONE,),),
        arrivals=(TabulatedArrivals(((1 - arrival_prob, ()),
                                     (arrival_prob, (VehicleState(1, 1),)))),))
    return ScenarioModel(name="single", num_chargers=1, max_stay=1, max_units=1,
                         grid=grid, demand=demand,
                         penalty=PenaltyFunction.linear(1),
                         initial_grid=0, initial_demand=0)


def test_lattice_examples():
    sc = _single_charger_scenario()
    mdp = enumerate_mdp(sc)
    vehicles = sorted(x.vehicles for x in mdp.states)
    assert vehicles == [((VehicleState(0, 0),)), ((VehicleState(1, 0),)),
                        ((VehicleState(1, 1),))]
    assert mdp.n_states == 3
    assert enumerate_mdp(multichain_fixture()).n_states == 2  # S x D only


def test_lattice_count_matches_recursive_oracle():
    sc = two_charger_scenario()

    def count(n_chargers):
        # independent recursion: each charger contributes the empty sentinel
        # plus stay x need combinations
        if n_chargers == 0:
            return 1
        return count(n_chargers - 1) * (1 + sc.max_stay * (sc.max_units + 1))

    expected = count(sc.num_chargers) * 2 * 1
    assert lattice_size(sc) == expected == 98
    assert enumerate_mdp(sc).n_states == expected


def test_state_ceiling():
    sc = capacity_scenario(5)
    with pytest.raises(StateCeilingExceeded):
        enumerate_mdp(sc)
    with pytest.raises(ValueError):
        # fixed-count arrivals cannot be enumerated exactly
        enumerate_mdp(capacity_scenario(2, num_chargers=1, max_stay=1,
                                        penalty=PenaltyFunction.linear(1)),
                      ceiling=10**9)


def test_transition_rows_are_exact():
    mdp = enumerate_mdp(two_charger_scenario())
    for k in (0, 10, 50, 97):
        for row in mdp.transitions[k]:
            assert sum(p for _, p in row) == 1


def test_rvi_constant_cost_no_chargers():
    grid = GridModel(values=(0, 1), kernel=(((HALF, HALF),), ((HALF, HALF),)),
                     cost=TableCost(((Fraction(3), Fraction(3)),)))
    demand = DemandModel(kernel=((ONE,),), arrivals=(TabulatedArrivals(((ONE, ()),)),))
    sc = ScenarioModel(name="flat", num_chargers=0, max_stay=1, max_units=1,
                       grid=grid, demand=demand, penalty=PenaltyFunction.linear(1),
                       initial_grid=0, initial_demand=0)
    mdp = enumerate_mdp(sc)
    sol = relative_value_iteration(mdp)
    assert abs(sol.gain - 3.0) < 1e-12
    assert np.abs(sol.h).max() < 1e-12
    # ergodic chargerless grid: gain trivially constant across starts
    assert verify_constant_gain(mdp, sol, tol=1e-10).ok


def test_rvi_zero_arrivals_gain_matches_stationary_average():
    # no vehicles ever arrive: gain = stationary average of C(0, s)
    grid = GridModel(values=(0, 1),
                     kernel=(((Fraction(1, 4), Fraction(3, 4)),) * 3,
                             ((Fraction(2, 3), Fraction(1, 3)),) * 3),
                     cost=TableCost(((Fraction(0), Fraction(6)),
                                     (Fraction(0), Fraction(6)),
                                     (Fraction(0), Fraction(6)))))
    demand = DemandModel(kernel=((ONE,),), arrivals=(TabulatedArrivals(((ONE, ()),)),))
    sc = ScenarioModel(name="empty-fleet", num_chargers=2, max_stay=2, max_units=2,
                       grid=grid, demand=demand, penalty=PenaltyFunction.linear(2),
                       initial_grid=0, initial_demand=0)
    sol = relative_value_iteration(enumerate_mdp(sc))
    p0 = [[Fraction(1, 4), Fraction(3, 4)], [Fraction(2, 3), Fraction(1, 3)]]
    pi = linalg.stationary_distribution(p0)
    expected = float(pi[1] * 6)
    assert abs(sol.gain - expected) < 1e-10


@pytest.fixture(scope="module")
def tiny_solution():
    sc = two_charger_scenario()
    mdp = enumerate_mdp(sc)
    sol = relative_value_iteration(mdp)
    return sc, mdp, sol


def test_rvi_residual_and_constant_gain(tiny_solution):
    _, mdp, sol = tiny_solution
    assert sol.residual <= 1e-10
    findings = verify_constant_gain(mdp, sol, tol=1e-10)
    assert findings.ok
    assert findings.n_recurrent_classes == 1


def test_exact_gain_matches_brute_force(tiny_solution):
    _, mdp, sol = tiny_solution
    exact = exact_policy_gain(mdp, sol.policy)
    bf = brute_force_optimal_gain(mdp)
    assert bf.gain == exact
    assert abs(float(exact) - sol.gain) < 1e-10
    assert bf.n_policies == 65536


def test_multichain_fixture_fails_checks():
    mdp = enumerate_mdp(multichain_fixture())
    with pytest.raises(NonConvergenceError):
        relative_value_iteration(mdp, max_iter=2000)
    policy = np.zeros(mdp.n_states, dtype=np.int64)
    classes = recurrent_classes(mdp, policy)
    assert len(classes) == 2
    fake = DPSolution(gain=0.0, h=np.zeros(mdp.n_states), policy=policy,
                      residual=0.0, iterations=0, converged=False)
    findings = verify_constant_gain(mdp, fake, tol=1e-10)
    assert not findings.constant_gain
    assert sorted(float(g) for g in findings.class_gains) == [0.0, 1.0]


def test_projection_on_compliant_policy_is_identity(tiny_solution):
    _, mdp, sol = tiny_solution
    assert compliance_violations(mdp, sol.policy) == 0
    proj = lllp_projection(mdp, sol)
    assert proj.swaps == 0
    assert np.array_equal(proj.policy, sol.policy)


def test_projection_repairs_tampered_policy(tiny_solution):
    _, mdp, sol = tiny_solution
    tampered = sol.policy.copy()
    flipped = []
    for k in range(mdp.n_states):
        for a_idx, act in enumerate(mdp.actions[k]):
            from chargesched.policies import check_lllp_compliance
            if check_lllp_compliance(mdp.states[k], act,
                                     mdp.scenario.max_stay) is not None:
                tampered[k] = a_idx
                flipped.append(k)
                break
    assert flipped, "expected at least one violating action in the lattice"
    fake = DPSolution(gain=sol.gain, h=sol.h, policy=tampered,
                      residual=sol.residual, iterations=sol.iterations,
                      converged=True)
    proj = lllp_projection(mdp, fake, tol=np.inf)
    assert proj.swaps >= len(flipped)
    assert compliance_violations(mdp, proj.policy) == 0


def test_projection_swap_never_raises_q(tiny_solution):
    # Interchange inequality at the Q level: swapping toward priority cannot
    # raise the one-step lookahead value, so tol=0 must hold on tampered
    # violating actions too.
    _, mdp, sol = tiny_solution
    tampered = sol.policy.copy()
    from chargesched.policies import check_lllp_compliance
    for k in range(mdp.n_states):
        for a_idx, act in enumerate(mdp.actions[k]):
            if check_lllp_compliance(mdp.states[k], act,
                                     mdp.scenario.max_stay) is not None:
                tampered[k] = a_idx
                break
    fake = DPSolution(gain=sol.gain, h=sol.h, policy=tampered,
                      residual=sol.residual, iterations=sol.iterations,
                      converged=True)
    proj = lllp_projection(mdp, fake, tol=1e-9)
    assert compliance_violations(mdp, proj.policy) == 0


def test_projection_keeps_gain(tiny_solution):
    _, mdp, sol = tiny_solution
    proj = lllp_projection(mdp, sol)
    assert exact_policy_gain(mdp, proj.policy) == exact_policy_gain(mdp, sol.policy)


def test_projection_with_real_swaps_on_linear_variant():
    from chargesched.models import with_penalty
    sc = with_penalty(two_charger_scenario(), "linear")
    mdp = enumerate_mdp(sc)
    sol = relative_value_iteration(mdp)
    proj = lllp_projection(mdp, sol)
    assert compliance_violations(mdp, proj.policy) == 0
    assert exact_policy_gain(mdp, proj.policy) == exact_policy_gain(mdp, sol.policy)


def test_tabular_policy_simulation_consistency(tiny_solution):
    from chargesched.montecarlo import run_trajectory
    sc, mdp, sol = tiny_solution
    policy = TabularPolicy(mdp, sol.policy)
    tr = run_trajectory(sc, policy, stages=60_000, seed=17, warmup=200,
                        record_stages=False)
    assert abs(tr.time_average - sol.gain) / sol.gain < 0.05


def test_export_schema(tiny_solution, tmp_path):
    import json
    _, mdp, sol = tiny_solution
    path = tmp_path / "sol.json"
    export_solution(mdp, sol, path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"gain", "h", "policy", "residual", "iterations"}
    assert len(doc["h"]) == mdp.n_states
    assert len(doc["policy"]) == mdp.n_states
