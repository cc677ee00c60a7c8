from fractions import Fraction

import pytest

from pomdpverify import mdp_check
from pomdpverify.belief import (
    Belief,
    BeliefStore,
    ExplorationBudget,
    belief_successors,
    explore_belief_mdp,
    export_fragment,
    finite_belief_check,
    next_belief,
    obs_probability,
)
from pomdpverify.model import make_running_example, parse_model

from conftest import frac_belief, random_pomdp


def test_initial_belief_is_dirac():
    pomdp, _ = make_running_example()
    init = Belief.initial(pomdp)
    assert init.support == (0,)
    assert init.probs == (Fraction(1),)
    assert init.obs == 0


def test_next_belief_normalizes_exactly():
    pomdp, _ = make_running_example()
    init = Belief.initial(pomdp)
    after = next_belief(pomdp, init, 0, 1)
    assert after == frac_belief(1, [(1, Fraction(3, 4)), (2, Fraction(1, 4))])
    assert obs_probability(pomdp, init, 0, 1) == Fraction(4, 5)
    with pytest.raises(ValueError):
        next_belief(pomdp, init, 0, 3)


def test_belief_successors_probabilities_sum_to_one():
    pomdp, _ = make_running_example()
    init = Belief.initial(pomdp)
    for a in (0, 1):
        succs = belief_successors(pomdp, init, a)
        assert sum(p for _, p in succs) == 1
        for belief, _ in succs:
            assert sum(belief.probs) == 1
            assert all(pomdp.obs_of[s] == belief.obs for s in belief.support)


def test_store_interns_canonically():
    store = BeliefStore(exact=True)
    b = frac_belief(1, [(1, Fraction(3, 4)), (2, Fraction(1, 4))])
    same = frac_belief(1, [(2, Fraction(1, 4)), (1, Fraction(3, 4))])
    assert store.intern(b) == store.intern(same) == 0
    assert store.lookup(b) == 0
    assert len(store) == 1


def test_float_store_merges_drifted_duplicates():
    store = BeliefStore(exact=False)
    a = Belief(0, (0, 1), (0.3333333333333333, 0.6666666666666667))
    b = Belief(0, (0, 1), (1.0 / 3.0, 2.0 / 3.0))
    assert store.intern(a) == store.intern(b)


def test_budget_formula():
    pomdp, _ = make_running_example()
    for step in range(1, 6):
        budget = ExplorationBudget.for_step(pomdp, step)
        assert budget.max_states == 2 ** (step - 1) * 9 * 3


def test_explore_respects_budget_and_cutoff_modes():
    pomdp, spec = make_running_example()
    budget = ExplorationBudget(1, 5)
    for mode, expect_value in (("to-sink", 0), ("to-target", 1)):
        fragment, frontier, complete, store = explore_belief_mdp(
            pomdp, spec, budget, cutoff_mode=mode)
        assert not complete and frontier
        fragment.validate()
        result = mdp_check.check(fragment, spec.kind, spec.direction, exact=True)
        # frontier rows route all mass to the matching sink
        for bid in frontier:
            ((_, row),) = fragment.actions[bid]
            ((t, p),) = row
            assert p == 1
            assert result.lower[t] == expect_value


def test_explore_bounds_bracket_each_other():
    pomdp, spec = make_running_example()
    budget = ExplorationBudget.for_step(pomdp, 2)
    pess, _, _, _ = explore_belief_mdp(pomdp, spec, budget, cutoff_mode="to-sink")
    opt, _, _, _ = explore_belief_mdp(pomdp, spec, budget, cutoff_mode="to-target")
    low = mdp_check.check(pess, spec.kind, "max", exact=True).lower[pess.initial]
    high = mdp_check.check(opt, spec.kind, "max", exact=True).upper[opt.initial]
    assert low <= high
    assert Fraction(37, 64) <= high  # a known achievable policy value


def test_finite_belief_check_on_examples(rng):
    # fully observable chain: every class is a singleton, hence finite
    text = """pomdp 2 1 2
init 0
obs 0 0
obs 1 1
tr 0 a 1 1/2
tr 0 a 0 1/2
tr 1 a 1 1
label target 1
spec max Preach
"""
    pomdp, _ = parse_model(text)
    assert finite_belief_check(pomdp) == "finite"
    running, _ = make_running_example()
    assert finite_belief_check(running) == "unknown"
    # criterion is sufficient: "finite" models really have finite belief MDPs
    found = 0
    while found < 10:
        pomdp, spec = random_pomdp(rng)
        if finite_belief_check(pomdp) != "finite":
            continue
        found += 1
        _, _, complete, store = explore_belief_mdp(
            pomdp, spec, ExplorationBudget(1, 10000))
        assert complete
        assert len(store) <= 10000


def test_export_fragment(tmp_path):
    pomdp, spec = make_running_example()
    fragment, _, _, _ = explore_belief_mdp(pomdp, spec, ExplorationBudget(1, 4))
    path = tmp_path / "fragment.txt"
    export_fragment(fragment, str(path))
    lines = path.read_text().strip().splitlines()
    assert lines
    for line in lines:
        s, a, t, p = line.split()
        assert int(s) >= 0 and int(t) >= 0 and int(a) >= 0
        assert Fraction(p) > 0
