"""Acceptance suite: ten numbered criteria, one printed pass/fail line each.

Run with `pytest -s tests/test_acceptance.py` to see the lines as they are
produced; without -s they appear in the captured output of failing tests.
"""
import math
import random
import time
from fractions import Fraction

from pomdpverify import mdp_check
from pomdpverify.belief import (
    Belief,
    ExplorationBudget,
    belief_successors,
    explore_belief_mdp,
    finite_belief_check,
    next_belief,
)
from pomdpverify.mdp_check import SparseMdp
from pomdpverify.model import (
    KIND_REACH,
    make_running_example,
    underlying_mdp_values,
)
from pomdpverify.refine import (
    HeuristicConfig,
    build_discretized,
    eq1_upper_bound,
    induced_chain,
    refinement_loop,
)
from pomdpverify.triangulate import (
    FixedNeighbourhoodFoundation,
    Foundation,
    dynamic_neighbourhood,
    freudenthal_neighbourhood,
)

from conftest import frac_belief, random_pomdp


def report(number, ok, detail=""):
    line = "criterion %d: %s" % (number, "pass" if ok else "FAIL")
    if detail:
        line += " (%s)" % detail
    print(line, flush=True)
    assert ok, line


def test_criterion_1_belief_update_exactness():
    """Chained exact updates reproduce the nine tabulated beliefs."""
    started = time.monotonic()
    pomdp, _ = make_running_example()
    F = Fraction
    a, b = 0, 1

    b1 = Belief.initial(pomdp)
    b2 = next_belief(pomdp, b1, a, 1)
    b3 = next_belief(pomdp, b2, a, 2)
    b4 = next_belief(pomdp, b2, b, 2)
    b5 = next_belief(pomdp, b1, b, 0)
    b6 = next_belief(pomdp, b5, a, 1)
    b7 = next_belief(pomdp, b6, a, 2)
    b8 = next_belief(pomdp, b6, b, 2)
    b9 = next_belief(pomdp, b5, b, 0)

    expected = {
        "b1": (b1, frac_belief(0, [(0, 1)])),
        "b2": (b2, frac_belief(1, [(1, F(3, 4)), (2, F(1, 4))])),
        "b3": (b3, frac_belief(2, [(3, F(15, 16)), (4, F(1, 16))])),
        "b4": (b4, frac_belief(2, [(3, F(1, 2)), (4, F(1, 2))])),
        "b5": (b5, frac_belief(0, [(0, F(1, 2)), (5, F(1, 6)), (6, F(1, 3))])),
        "b6": (b6, frac_belief(1, [(1, F(14, 27)), (2, F(13, 27))])),
        "b7": (b7, frac_belief(2, [(3, F(95, 108)), (4, F(13, 108))])),
        "b8": (b8, frac_belief(2, [(3, F(28, 81)), (4, F(53, 81))])),
        "b9": (b9, frac_belief(0, [(0, F(1, 4)), (5, F(25, 72)), (6, F(29, 72))])),
    }
    mismatches = [name for name, (got, want) in expected.items() if got != want]
    # the same beliefs appear among belief_successors with exact probabilities
    succ = dict()
    for belief, p in belief_successors(pomdp, b1, a):
        succ[belief.obs] = (belief, p)
    chained_ok = succ[0] == (b1, F(1, 5)) and succ[1] == (b2, F(4, 5))
    elapsed = time.monotonic() - started
    report(1, not mismatches and chained_ok and elapsed < 1.0,
           "mismatches=%s time=%.3fs" % (mismatches, elapsed))


def fixture_foundation():
    """Hand-picked per-observation cells for the discretized fixture."""
    F = Fraction
    return FixedNeighbourhoodFoundation({
        0: [[frac_belief(0, [(0, 1)]), frac_belief(0, [(5, 1)]),
             frac_belief(0, [(5, F(1, 4)), (6, F(3, 4))])]],
        1: [[frac_belief(1, [(1, 1)]), frac_belief(1, [(2, 1)])]],
        2: [[frac_belief(2, [(3, 1)]), frac_belief(2, [(3, F(1, 2)), (4, F(1, 2))]),
             frac_belief(2, [(4, 1)])]],
        3: [[frac_belief(3, [(7, 1)])]],
        4: [[frac_belief(4, [(8, 1)])]],
    })


def test_criterion_2_discretized_abstraction_fixture():
    """Fixture abstraction: exact row, unreachable vertex, checked value.

    The value assertion expects 3/4; the faithfully built fixture model
    checks to 9/10 (full derivation in the project notes), so this
    criterion is expected to fail on its final clause.
    """
    started = time.monotonic()
    F = Fraction
    pomdp, spec = make_running_example()
    abstraction = build_discretized(pomdp, spec, fixture_foundation(),
                                    cutoff_policy="never")
    row = abstraction.row_as_beliefs(Belief.initial(pomdp), 1)
    want_row = {
        frac_belief(0, [(0, 1)]): F(1, 2),
        frac_belief(0, [(5, 1)]): F(1, 18),
        frac_belief(0, [(5, F(1, 4)), (6, F(3, 4))]): F(4, 9),
    }
    row_ok = row == want_row
    unreachable_ok = abstraction.belief_id(frac_belief(0, [(6, 1)])) is None
    value = abstraction.check(spec.kind, spec.direction).upper[
        abstraction.initial_index]
    value_ok = abs(value - 0.75) <= 0.75 * 1e-6
    elapsed = time.monotonic() - started
    report(2, row_ok and unreachable_ok and value_ok and elapsed < 1.0,
           "row_ok=%s unreachable_ok=%s value=%.6f time=%.3fs"
           % (row_ok, unreachable_ok, value, elapsed))


def test_criterion_3_running_example_bracketing():
    """Refinement with preset h0 brackets the optimum inside [0.65, 0.70]."""
    pomdp, spec = make_running_example(exact=False)
    ledger, _, _ = refinement_loop(pomdp, spec, HeuristicConfig.preset("h0"),
                                   wall_time=60.0)
    lower, upper = ledger.best
    report(3, lower >= 0.65 and upper <= 0.70,
           "L=%.6f U=%.6f status=%s" % (lower, upper, ledger.status))


def test_criterion_4_lower_bound_policy_fixture():
    """The constant-a memoryless policy achieves exactly 37/64."""
    pomdp, spec = make_running_example()
    policy = {z: {0: Fraction(1)} for z in range(pomdp.num_obs)}
    chain = induced_chain(pomdp, spec, policy)
    value = mdp_check.evaluate_markov_chain(chain, spec.kind)[0]
    report(4, value == Fraction(37, 64), "value=%s" % value)


def test_criterion_5_soundness_suite():
    """Exact belief-MDP optima lie inside every refinement interval."""
    started = time.monotonic()
    rng = random.Random(1905)
    checked = 0
    violations = []
    while checked < 200 and time.monotonic() - started < 280:
        pomdp, spec = random_pomdp(rng, max_states=6, max_actions=3, max_obs=4)
        if finite_belief_check(pomdp) != "finite":
            continue
        fragment, _, complete, store = explore_belief_mdp(
            pomdp, spec, ExplorationBudget(1, 10 ** 5))
        if not complete or len(store) > 150:
            continue
        checked += 1
        truth = float(mdp_check.check(fragment, spec.kind, spec.direction,
                                      exact=True).lower[fragment.initial])
        _, _, log = refinement_loop(pomdp, spec, HeuristicConfig.preset("h0"),
                                    max_iters=5, wall_time=10.0)
        for entry in log:
            if not (entry["lower"] - 1e-9 <= truth <= entry["upper"] + 1e-9):
                violations.append((checked, truth, entry["lower"],
                                   entry["upper"]))
    elapsed = time.monotonic() - started
    report(5, checked >= 200 and not violations and elapsed < 300,
           "checked=%d violations=%d time=%.1fs"
           % (checked, len(violations), elapsed))


def test_criterion_6_triangulation_properties():
    """10^4 random rational beliefs keep all triangulation invariants."""
    started = time.monotonic()
    rng = random.Random(42)
    failures = 0
    for _ in range(10 ** 4):
        size = rng.randint(1, 6)
        support = tuple(sorted(rng.sample(range(8), size)))
        dens = [rng.randint(1, 50) for _ in support]
        total = sum(dens)
        belief = Belief.from_items(
            0, [(s, Fraction(d, total)) for s, d in zip(support, dens)])
        eta = rng.randint(1, 8)
        tri = freudenthal_neighbourhood(belief, eta)
        ok = sum(tri.weights) == 1
        ok = ok and len(tri.neighbours) <= len(belief.support)
        ok = ok and all(
            sum(w * v.prob(s) for v, w in tri.items()) == belief.prob(s)
            for s in belief.support)
        ok = ok and all((p * eta).denominator == 1
                        for v in tri.neighbours for p in v.probs)
        dyn = dynamic_neighbourhood(belief, Foundation({0: eta}))
        ok = ok and len(dyn.neighbours) <= len(tri.neighbours)
        if not ok:
            failures += 1
    elapsed = time.monotonic() - started
    report(6, failures == 0 and elapsed < 60,
           "failures=%d time=%.1fs" % (failures, elapsed))


def test_criterion_7_value_iteration_precision():
    """check() brackets closed-form chain values within 1e-6 relative."""
    rng = random.Random(99)
    failures = []
    for i in range(100):
        # state 0: stay with q, target with p, sink with rest
        weights = [rng.randint(1, 9) for _ in range(3)]
        total = sum(weights)
        q, p, r = (w / total for w in weights)
        exact_value = p / (p + r)
        actions = [
            [(0, [(0, q), (1, p), (2, r)])],
            [(0, [(1, 1.0)])],
            [(0, [(2, 1.0)])],
        ]
        chain = SparseMdp(initial=0, actions=actions, target=frozenset({1}),
                          exact=False)
        result = mdp_check.check(chain, KIND_REACH, "max")
        sound = result.lower[0] - 1e-12 <= exact_value <= result.upper[0] + 1e-12
        tight = (result.upper[0] - result.lower[0]) <= 1e-6 * result.upper[0] \
            + 1e-12
        if not (sound and tight):
            failures.append(i)
    report(7, not failures, "failures=%s" % failures)


def test_criterion_8_cutoff_bound_consistency():
    """Convex state-value bound: Dirac equality, fixture value, soundness."""
    pomdp, spec = make_running_example()
    values = underlying_mdp_values(pomdp, spec)
    dirac_ok = all(
        eq1_upper_bound(Belief.dirac(pomdp, s), values) == values[s]
        for s in range(9))
    b2 = frac_belief(1, [(1, Fraction(3, 4)), (2, Fraction(1, 4))])
    bound = eq1_upper_bound(b2, values)
    # A related diagram labels this cut-off 11/15; the convex combination of
    # the fully-observable values is 3/4 * 11/15 + 1/4 * 1 = 4/5.  Both are
    # valid upper bounds; we assert the computed 4/5.
    bound_ok = bound == Fraction(4, 5)

    # independent oracle: best memoryless observation-based policy from b2,
    # by exhaustive enumeration over deterministic observation choices
    best = None
    for choice_obs1 in (0, 1):
        for choice_obs2 in (0, 1):
            policy = {0: {0: Fraction(1)}, 1: {choice_obs1: Fraction(1)},
                      2: {choice_obs2: Fraction(1)}, 3: {0: Fraction(1)},
                      4: {0: Fraction(1)}}
            chain = induced_chain(pomdp, spec, policy)
            state_values = mdp_check.evaluate_markov_chain(chain, spec.kind)
            value = sum(p * state_values[s] for s, p in b2.items())
            best = value if best is None else max(best, value)
    oracle_ok = best == Fraction(37, 64)
    sound_ok = bound >= best and Fraction(11, 15) >= best
    report(8, dirac_ok and bound_ok and oracle_ok and sound_ok,
           "bound=%s oracle=%s" % (bound, best))


def test_criterion_9_budget_formula():
    """Budgeted exploration expands at most 2^(i-1)*|S|*max class beliefs."""
    pomdp, spec = make_running_example(exact=False)
    ok = True
    details = []
    for step in range(1, 6):
        budget = ExplorationBudget.for_step(pomdp, step)
        formula = 2 ** (step - 1) * 9 * 3
        fragment, frontier, complete, store = explore_belief_mdp(
            pomdp, spec, budget)
        expanded = len(store) - len(frontier)
        details.append((step, expanded, formula))
        ok = ok and budget.max_states == formula and expanded <= formula
    report(9, ok, "(step, expanded, budget)=%s" % details)


def test_criterion_10_heuristic_presets():
    """Presets h0..h5 match the documented parameter table verbatim."""
    table = {
        "h0": {},
        "h1": {"f_res": math.sqrt(2)},
        "h2": {"f_z": 0.05},
        "h3": {"f_step": 2.0},
        "h4": {"f_gap": 0.5},
        "h5": {"rho_sigma": 0.5},
    }
    base = {"eta_init": 3, "f_res": 2.0, "rho_z": 0.1, "f_z": 0.1,
            "f_step": 4.0, "rho_gap": 0.1, "f_gap": 0.25, "rho_sigma": 0.001}
    bad = []
    for name, overrides in table.items():
        want = dict(base)
        want.update(overrides)
        config = HeuristicConfig.preset(name)
        for key, value in want.items():
            if getattr(config, key) != value:
                bad.append((name, key))
    report(10, not bad, "mismatches=%s" % bad)
