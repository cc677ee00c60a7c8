"""Cut-off bounds, policy guessing, construction of the discretised belief
MDP, and the abstraction-refinement loop that tightens [L, U] on the
optimal observation-based value."""
from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass
from fractions import Fraction

from pomdpverify import mdp_check
from pomdpverify.belief import (
    Belief,
    BeliefStore,
    ExplorationBudget,
    belief_hits_avoid,
    belief_is_target,
    belief_reward,
    belief_successors,
    explore_belief_mdp,
)
from pomdpverify.model import KIND_REWARD, Pomdp, Specification
from pomdpverify.triangulate import Foundation, extend_foundation, score_observation

# Sentinel successor ids used in internal rows before sink states get their
# final indices.
TARGET = -1
ZERO = -2

_PRESET_OVERRIDES = {
    "h0": {},
    "h1": {"f_res": math.sqrt(2)},
    "h2": {"f_z": 0.05},
    "h3": {"f_step": 2.0},
    "h4": {"f_gap": 0.5},
    "h5": {"rho_sigma": 0.5},
}


@dataclass(frozen=True)
class HeuristicConfig:
    """Refinement parameters; presets h1..h5 each vary one h0 parameter."""

    eta_init: int = 3
    f_res: float = 2.0
    rho_z: float = 0.1
    f_z: float = 0.1
    f_step: float = 4.0
    rho_gap: float = 0.1
    f_gap: float = 0.25
    rho_sigma: float = 0.001
    scheme: str = "dynamic"
    partial_cutoffs: bool = True

    @staticmethod
    def preset(name, **overrides):
        if name not in _PRESET_OVERRIDES:
            raise ValueError("unknown preset %r" % name)
        params = dict(_PRESET_OVERRIDES[name])
        params.update(overrides)
        return HeuristicConfig(**params)


def eq1_upper_bound(belief: Belief, mdp_values):
    """Convex combination of fully-observable state values; a sound bound
    on the belief value on the side the values were computed for."""
    return sum(p * mdp_values[s] for s, p in belief.items())


class BoundsLedger:
    """Per-belief and global value bounds.

    cut_values are the underlying-MDP optimal values in the specification's
    direction (the cut-off side); policy_values are per-state values of the
    best guessed policy (the other side).  The global best-so-far interval
    only ever tightens.
    """

    def __init__(self, store: BeliefStore, spec: Specification, cut_values,
                 policy_values=None):
        self.store = store
        self.spec = spec
        self.direction = spec.direction
        self.cut_values = cut_values
        self.policy_values = policy_values
        self.refined = {}  # belief id -> best abstraction-side bound seen
        self.best_lower = None
        self.best_upper = None
        self.provenance = []
        self.status = None

    def cut_value(self, belief: Belief):
        """Bound used when cutting off the belief: Eq-style convex bound,
        improved by any abstraction-check value recorded for it."""
        value = eq1_upper_bound(belief, self.cut_values)
        bid = self.store.lookup(belief)
        if bid is not None and bid in self.refined:
            pick = min if self.direction == "max" else max
            value = pick(value, self.refined[bid])
        if self.spec.is_probability:
            value = min(max(value, 0), 1)
        return value

    def policy_value(self, belief: Belief):
        if self.policy_values is None:
            if self.direction == "max":
                return 0.0
            return 1.0 if self.spec.is_probability else math.inf
        return sum(p * self.policy_values[s] for s, p in belief.items())

    def bounds_of(self, belief_id):
        belief = self.store.beliefs[belief_id]
        if self.direction == "max":
            return self.policy_value(belief), self.cut_value(belief)
        return self.cut_value(belief), self.policy_value(belief)

    def relative_gap(self, belief_id):
        lower, upper = self.bounds_of(belief_id)
        if upper == math.inf:
            return math.inf
        if upper <= 0:
            return 0.0
        return float((upper - lower) / upper)

    def record_check(self, values):
        """Absorb per-state abstraction-check values (the sound side for
        the current direction); monotone per belief id."""
        pick = min if self.direction == "max" else max
        for bid in range(min(len(values), len(self.store))):
            old = self.refined.get(bid)
            v = float(values[bid])
            self.refined[bid] = v if old is None else pick(old, v)

    def record_global(self, lower, upper, tag):
        if lower is not None:
            lower = float(lower)
            self.best_lower = lower if self.best_lower is None else max(self.best_lower, lower)
        if upper is not None:
            upper = float(upper)
            self.best_upper = upper if self.best_upper is None else min(self.best_upper, upper)
        self.provenance.append((tag, lower, upper))

    @property
    def best(self):
        return self.best_lower, self.best_upper


# ---------------------------------------------------------------------------
# Policy guessing (the cheap bound on the non-abstraction side).


def induced_chain(pomdp: Pomdp, spec: Specification, policy):
    """Markov chain of an observation-based memoryless randomized policy;
    policy maps each observation to a weight map over enabled actions."""
    mdp = pomdp.mdp
    actions = []
    rewards = {}
    for s in range(mdp.num_states):
        weights = policy[pomdp.obs_of[s]]
        merged = {}
        reward = 0
        for a, w in weights.items():
            if w == 0:
                continue
            for t, p in mdp.row(s, a):
                merged[t] = merged.get(t, 0) + w * p
            if spec.rewards:
                reward += w * spec.rewards.get((s, a), 0)
        actions.append([(0, sorted(merged.items()))])
        rewards[(s, 0)] = reward
    return mdp_check.SparseMdp(
        initial=mdp.initial_state, actions=actions,
        target=frozenset(spec.target_states), avoid=frozenset(spec.avoid_states),
        rewards=rewards if spec.kind == KIND_REWARD else None, exact=mdp.exact)


def guess_lower_bound_policies(pomdp: Pomdp, spec: Specification, mdp_result,
                               rho_sigma=0.001):
    """Candidate observation-based memoryless policies with their values.

    For maximising objectives every value is a sound lower bound on the
    optimum (and a sound upper bound when minimising).  Returns a
    best-first list of (policy, value at the initial state, state values).
    """
    exact = pomdp.exact
    one = Fraction(1) if exact else 1.0
    eps_sets = mdp_check.epsilon_optimal_actions(mdp_result, rho_sigma)

    def near_optimal(z):
        enabled = set(pomdp.enabled_for_obs(z))
        merged = set()
        for s in pomdp.obs_classes[z]:
            merged |= set(eps_sets[s]) & enabled
        return sorted(merged) if merged else sorted(enabled)

    candidates = []
    for a in range(pomdp.mdp.num_actions):
        policy = {}
        for z in range(pomdp.num_obs):
            if not pomdp.obs_classes[z]:
                policy[z] = {}
                continue
            enabled = pomdp.enabled_for_obs(z)
            choice = a if a in enabled else enabled[0]
            policy[z] = {choice: one}
        candidates.append(policy)
    uniform = {}
    lowest = {}
    for z in range(pomdp.num_obs):
        if not pomdp.obs_classes[z]:
            uniform[z] = {}
            lowest[z] = {}
            continue
        good = near_optimal(z)
        share = Fraction(1, len(good)) if exact else 1.0 / len(good)
        uniform[z] = {a: share for a in good}
        lowest[z] = {good[0]: one}
    candidates.append(uniform)
    candidates.append(lowest)

    seen = set()
    evaluated = []
    for policy in candidates:
        key = tuple(sorted((z, tuple(sorted(w.items()))) for z, w in policy.items()))
        if key in seen:
            continue
        seen.add(key)
        values = mdp_check.evaluate_markov_chain(induced_chain(pomdp, spec, policy),
                                                 spec.kind)
        evaluated.append((policy, values[pomdp.mdp.initial_state], values))
    reverse = spec.direction == "max"
    evaluated.sort(key=lambda item: float(item[1]), reverse=reverse)
    return evaluated


# ---------------------------------------------------------------------------
# Gates of the refinement loop.


def explore_gate(belief_id, bounds: BoundsLedger, counters, prev_opt_reach,
                 rho_gap, rho_step):
    """Explore a belief only while its approximation is coarse, the step
    budget is not exhausted, and the belief was reachable under a
    near-optimal policy of the previous iteration (None = everything)."""
    if not (bounds.relative_gap(belief_id) > rho_gap):
        return False
    if counters.get("count", 0) >= rho_step:
        return False
    if prev_opt_reach is not None and belief_id not in prev_opt_reach:
        return False
    return True


def rewire_gate(belief_id, action, prev_action_sets, wired_resolutions,
                foundation, explore_ok=True):
    """Rewire (b, action) only if exploration criteria hold, the action was
    near-optimal in the previous iteration, and some successor observation
    has a new resolution (so rewiring actually changes the row)."""
    if not explore_ok:
        return False
    if prev_action_sets is not None:
        allowed = prev_action_sets.get(belief_id)
        if allowed is not None and action not in allowed:
            return False
    if wired_resolutions is not None and all(
            foundation.resolution(z) == eta for z, eta in wired_resolutions.items()):
        return False
    return True


# ---------------------------------------------------------------------------
# The discretised abstraction.


class AbstractionMdp:
    """Finite abstraction of the belief MDP: explored states carry the
    triangulated successor rows, cut-off states route bound mass to the
    target and zero sinks."""

    def __init__(self, sparse, store, status, initial_index, target_sink, zero_sink):
        self.sparse = sparse
        self.store = store
        self.status = status
        self.initial_index = initial_index
        self.target_sink = target_sink
        self.zero_sink = zero_sink

    def count(self, status):
        return sum(1 for st in self.status.values() if st == status)

    def belief_id(self, belief: Belief):
        return self.store.lookup(belief)

    def row_as_beliefs(self, belief: Belief, action):
        """The abstraction row of (belief, action) as a map from successor
        Belief (or the strings 'target'/'zero') to probability."""
        bid = self.store.lookup(belief)
        for a, row in self.sparse.actions[bid]:
            if a != action:
                continue
            out = {}
            for t, p in row:
                if t == self.target_sink:
                    key = "target"
                elif t == self.zero_sink:
                    key = "zero"
                else:
                    key = self.store.beliefs[t]
                out[key] = out.get(key, 0) + p
            return out
        raise KeyError("no row for action %r" % action)

    def check(self, kind, direction, precision=1e-6, exact=False):
        return mdp_check.check(self.sparse, kind, direction, precision, exact=exact)


class _Builder:
    """Incremental owner of the abstraction between refinement iterations."""

    def __init__(self, pomdp: Pomdp, spec: Specification, foundation, ledger=None):
        self.pomdp = pomdp
        self.spec = spec
        self.foundation = foundation
        self.ledger = ledger
        self.store = BeliefStore(exact=pomdp.exact)
        self.initial_id = self.store.intern(Belief.initial(pomdp))
        self.status = {}
        self.rows = {}         # belief id -> dict action -> row
        self.row_rewards = {}  # (belief id, action) -> reward
        self.wired_res = {}    # (belief id, action) -> dict obs -> resolution

    @property
    def one(self):
        return Fraction(1) if self.pomdp.exact else 1.0

    def _wire(self, bid, action):
        belief = self.store.beliefs[bid]
        masses = {}
        obs_res = {}
        for succ, p in belief_successors(self.pomdp, belief, action):
            tri = self.foundation.neighbourhood(succ)
            obs_res[succ.obs] = self.foundation.resolution(succ.obs)
            for v, w in tri.items():
                vid = self.store.intern(v)
                masses[vid] = masses.get(vid, 0) + p * w
        self.rows.setdefault(bid, {})[action] = sorted(masses.items())
        self.wired_res[(bid, action)] = obs_res
        if self.spec.kind == KIND_REWARD:
            self.row_rewards[(bid, action)] = belief_reward(
                self.pomdp, belief, action, self.spec)

    def _explore(self, bid):
        belief = self.store.beliefs[bid]
        for action in self.pomdp.enabled_for_obs(belief.obs):
            self._wire(bid, action)
        self.status[bid] = "explored"

    def _cutoff(self, bid, partial):
        belief = self.store.beliefs[bid]
        if partial and self.spec.is_probability:
            self._cutoff_partial(bid, belief)
        else:
            self._cutoff_strict(bid, belief)
        self.status[bid] = "cutoff"

    def _cutoff_strict(self, bid, belief):
        bound = self.ledger.cut_value(belief)
        if self.spec.kind == KIND_REWARD:
            self.rows[bid] = {0: [(TARGET, self.one)]}
            self.row_rewards[(bid, 0)] = bound
            return
        row = []
        if bound > 0:
            row.append((TARGET, bound))
        if bound < 1:
            row.append((ZERO, 1 - bound))
        self.rows[bid] = {0: row}

    def _cutoff_partial(self, bid, belief):
        """Keep edges to successor vertices that are already abstraction
        states; redirect only the missing mass using their cut bounds."""
        rows = {}
        for action in self.pomdp.enabled_for_obs(belief.obs):
            masses = {}
            to_target = 0
            to_zero = 0
            for succ, p in belief_successors(self.pomdp, belief, action):
                tri = self.foundation.neighbourhood(succ)
                for v, w in tri.items():
                    vid = self.store.lookup(v)
                    if vid is not None and vid in self.status:
                        masses[vid] = masses.get(vid, 0) + p * w
                    else:
                        bound = self.ledger.cut_value(v)
                        to_target += p * w * bound
                        to_zero += p * w * (1 - bound)
            row = sorted(masses.items())
            if to_target > 0:
                row.append((TARGET, to_target))
            if to_zero > 0:
                row.append((ZERO, to_zero))
            rows[action] = row
        self.rows[bid] = rows

    def run_pass(self, explore_decide, rewire_decide, counters, partial_cutoffs):
        """One BFS sweep from the initial belief applying the gates."""
        stats = {"explored": 0, "rewired": 0, "cutoff": 0}
        queue = deque([self.initial_id])
        visited = set()
        while queue:
            bid = queue.popleft()
            if bid in visited:
                continue
            visited.add(bid)
            belief = self.store.beliefs[bid]
            state = self.status.get(bid)
            if state is None and (belief_is_target(belief, self.spec)
                                  or belief_hits_avoid(belief, self.spec)):
                self.status[bid] = "absorbing"
                self.rows[bid] = {0: [(bid, self.one)]}
                continue
            if state == "absorbing":
                continue
            if state == "explored":
                rewired = False
                for action in self.pomdp.enabled_for_obs(belief.obs):
                    if rewire_decide(bid, action):
                        self._wire(bid, action)
                        rewired = True
                if rewired:
                    stats["rewired"] += 1
                    counters["count"] = counters.get("count", 0) + 1
            else:
                if explore_decide(bid):
                    self._explore(bid)
                    stats["explored"] += 1
                    counters["count"] = counters.get("count", 0) + 1
                else:
                    self._cutoff(bid, partial_cutoffs)
                    stats["cutoff"] += 1
            for row in self.rows[bid].values():
                for vid, _ in row:
                    if vid >= 0 and vid not in visited:
                        queue.append(vid)
        return stats

    def to_abstraction(self):
        num = len(self.store)
        target_sink = num
        zero_sink = num + 1
        one = self.one
        actions = [[] for _ in range(num + 2)]
        rewards = {} if self.spec.kind == KIND_REWARD else None
        target_ids = {target_sink}
        for bid in range(num):
            rows = self.rows.get(bid)
            if rows is None:
                # interned but never processed: sound strict cut-off
                self._cutoff_strict(bid, self.store.beliefs[bid])
                self.status.setdefault(bid, "cutoff")
                rows = self.rows[bid]
            if self.status.get(bid) == "absorbing":
                if belief_is_target(self.store.beliefs[bid], self.spec):
                    target_ids.add(bid)
            mapped = []
            for action, row in sorted(rows.items()):
                out = [(target_sink if t == TARGET else zero_sink if t == ZERO else t, p)
                       for t, p in row]
                mapped.append((action, out))
                if rewards is not None:
                    rewards[(bid, action)] = self.row_rewards.get((bid, action), 0)
            actions[bid] = mapped
        actions[target_sink] = [(0, [(target_sink, one)])]
        actions[zero_sink] = [(0, [(zero_sink, one)])]
        sparse = mdp_check.SparseMdp(
            initial=self.initial_id, actions=actions,
            target=frozenset(target_ids), rewards=rewards, exact=self.pomdp.exact)
        return AbstractionMdp(sparse, self.store, dict(self.status),
                              self.initial_id, target_sink, zero_sink)


def build_discretized(pomdp: Pomdp, spec: Specification, foundation,
                      cutoff_policy="never", bounds=None, rho_gap=0.1,
                      rho_step=math.inf, prev_opt_reach=None, max_states=None,
                      partial_cutoffs=False):
    """Single-shot construction of the discretised belief MDP.

    cutoff_policy "never" explores everything reachable (the foundation
    must then close the reachable beliefs, or max_states must be set);
    "gap"/"step"/"combined" cut off per the corresponding criteria.
    """
    if bounds is None:
        from pomdpverify.model import underlying_mdp_values
        cut_values = underlying_mdp_values(pomdp, spec)
    builder = _Builder(pomdp, spec, foundation)
    if bounds is None:
        bounds = BoundsLedger(builder.store, spec, cut_values)
    else:
        bounds.store = builder.store
    builder.ledger = bounds
    counters = {"count": 0}

    def decide(bid):
        if max_states is not None and sum(
                1 for st in builder.status.values() if st == "explored") >= max_states:
            return False
        if cutoff_policy == "never":
            return True
        gap_ok = bounds.relative_gap(bid) > rho_gap
        step_ok = counters["count"] < rho_step and (
            prev_opt_reach is None or bid in prev_opt_reach)
        if cutoff_policy == "gap":
            return gap_ok
        if cutoff_policy == "step":
            return step_ok
        if cutoff_policy == "combined":
            return gap_ok and step_ok
        raise ValueError("unknown cutoff policy %r" % cutoff_policy)

    builder.run_pass(decide, lambda bid, action: False, counters, partial_cutoffs)
    return builder.to_abstraction()


# ---------------------------------------------------------------------------
# The refinement loop.


def _fragment_setup(spec: Specification):
    """Cut-off mode of the policy-side fragment per kind and direction."""
    if spec.is_probability:
        return ("to-sink", False) if spec.direction == "max" else ("to-target", False)
    return ("to-target", False) if spec.direction == "max" else ("mdp-bound", True)


def refinement_loop(pomdp: Pomdp, spec: Specification, config: HeuristicConfig = None,
                    wall_time=None, max_iters=None, gap_target=1e-6,
                    precision=1e-6):
    """Iteratively tighten [L, U] on the optimal observation-based value.

    One side comes from checking the discretised abstraction (upper for
    max, lower for min), the other from guessed policies and from directly
    exploring a budgeted belief-MDP fragment.  Returns (ledger,
    abstraction, iteration log); the ledger carries the final status, one
    of gap-met, threshold-decided, timeout, exact.
    """
    if config is None:
        config = HeuristicConfig.preset("h0")
    if wall_time is None and max_iters is None:
        raise ValueError("need a wall-time or iteration budget")
    start = time.monotonic()

    def out_of_time(slack=1.0):
        return wall_time is not None and time.monotonic() - start > wall_time * slack

    direction = spec.direction
    underlying = mdp_check.SparseMdp.from_mdp(pomdp.mdp, spec)
    und_result = mdp_check.check(underlying, spec.kind, direction, precision,
                                 exact=pomdp.exact and spec.is_probability)
    cut_values = und_result.upper if direction == "max" else und_result.lower

    frag_mode, frag_needs_values = _fragment_setup(spec)
    frag_values = None
    if frag_needs_values:
        frag_values = mdp_check.check(underlying, spec.kind, "max", precision).upper

    guesses = guess_lower_bound_policies(pomdp, spec, und_result, config.rho_sigma)
    policy_state_values = guesses[0][2] if guesses else None

    foundation = Foundation.initial(pomdp.num_obs, config.eta_init, config.f_res,
                                    scheme=config.scheme)
    builder = _Builder(pomdp, spec, foundation)
    ledger = BoundsLedger(builder.store, spec, cut_values, policy_state_values)
    builder.ledger = ledger

    init_belief = Belief.initial(pomdp)
    if direction == "max":
        ledger.record_global(ledger.policy_value(init_belief),
                             ledger.cut_value(init_belief), "bootstrap")
    else:
        ledger.record_global(ledger.cut_value(init_belief),
                             ledger.policy_value(init_belief), "bootstrap")

    rho_gap = config.rho_gap
    rho_step = math.inf
    rho_z = config.rho_z
    prev_reach = None
    prev_sets = None
    prev_size = 0
    log = []
    abstraction = None
    ledger.status = "timeout"

    iteration = 0
    while True:
        iteration += 1
        if max_iters is not None and iteration > max_iters:
            ledger.status = "timeout"
            break
        if out_of_time():
            ledger.status = "timeout"
            break

        counters = {"count": 0}

        def explore_decide(bid):
            reach = None if (prev_reach is None or bid >= prev_size) else prev_reach
            return explore_gate(bid, ledger, counters, reach, rho_gap, rho_step)

        def rewire_decide(bid, action):
            sets = prev_sets if (prev_sets is not None and bid < prev_size) else None
            return rewire_gate(bid, action, sets, builder.wired_res.get((bid, action)),
                               foundation, explore_ok=explore_decide(bid))

        stats = builder.run_pass(explore_decide, rewire_decide, counters,
                                 config.partial_cutoffs)
        abstraction = builder.to_abstraction()
        result = mdp_check.check(abstraction.sparse, spec.kind, direction, precision)
        init_idx = abstraction.initial_index
        if direction == "max":
            ledger.record_check(result.upper)
            abstraction_bound = result.upper[init_idx]
        else:
            ledger.record_check(result.lower)
            abstraction_bound = result.lower[init_idx]

        fragment_bound = None
        complete = False
        frag_result = None
        if not out_of_time(0.5):
            budget = ExplorationBudget.for_step(pomdp, iteration)
            fragment, _, complete, _ = explore_belief_mdp(
                pomdp, spec, budget, cutoff_mode=frag_mode, mdp_values=frag_values)
            frag_result = mdp_check.check(fragment, spec.kind, direction, precision)
            fragment_bound = (frag_result.lower[fragment.initial] if direction == "max"
                              else frag_result.upper[fragment.initial])

        if direction == "max":
            lower = ledger.policy_value(init_belief)
            if fragment_bound is not None:
                lower = max(lower, fragment_bound)
            ledger.record_global(lower, abstraction_bound, "iteration %d" % iteration)
        else:
            upper = ledger.policy_value(init_belief)
            if fragment_bound is not None:
                upper = min(upper, fragment_bound)
            ledger.record_global(abstraction_bound, upper, "iteration %d" % iteration)

        if complete and frag_result is not None:
            # the fragment is the whole (finite) belief MDP: both sides
            ledger.record_global(frag_result.lower[0], frag_result.upper[0],
                                 "exact belief MDP, iteration %d" % iteration)

        best_lower, best_upper = ledger.best
        log.append({
            "iteration": iteration,
            "states": abstraction.sparse.num_states,
            "explored": stats["explored"],
            "rewired": stats["rewired"],
            "cutoff": stats["cutoff"],
            "lower": best_lower,
            "upper": best_upper,
            "eta": dict(foundation.resolutions),
            "time": time.monotonic() - start,
        })

        if complete:
            ledger.status = "exact"
            break
        if spec.threshold is not None:
            op, lam = spec.threshold
            lam = float(lam)
            if op == "<=" and (best_upper <= lam or best_lower > lam):
                ledger.status = "threshold-decided"
                break
            if op == ">=" and (best_lower >= lam or best_upper < lam):
                ledger.status = "threshold-decided"
                break
        reference = abs(best_upper) if best_upper not in (None, 0) else 1.0
        if best_upper is not None and best_lower is not None and \
                best_upper != math.inf and \
                (best_upper - best_lower) / reference <= gap_target:
            ledger.status = "gap-met"
            break

        # Refinement: score observations along near-optimal reachable rows.
        eps_sets = mdp_check.epsilon_optimal_actions(result, config.rho_sigma)
        reach = mdp_check.reachable_under(abstraction.sparse, eps_sets)
        reach_bids = {i for i in reach if i < len(builder.store)}
        pairs = []
        for bid in sorted(reach_bids):
            if builder.status.get(bid) != "explored":
                continue
            belief = builder.store.beliefs[bid]
            for action in eps_sets[bid]:
                for succ, _ in belief_successors(pomdp, belief, action):
                    pairs.append((succ, foundation.neighbourhood(succ)))
        scores = {z: score_observation(z, pairs, foundation)
                  for z in range(pomdp.num_obs)}
        foundation, extended, rho_z = extend_foundation(foundation, scores, rho_z,
                                                        config.f_z)
        builder.foundation = foundation

        no_cutoffs = all(st != "cutoff" for st in builder.status.values())
        if not extended and stats["explored"] == 0 and stats["rewired"] == 0 \
                and no_cutoffs:
            ledger.status = "exact"
            break

        prev_reach = reach_bids
        prev_sets = {bid: set(eps_sets[bid]) for bid in range(len(builder.store))
                     if bid < len(eps_sets)}
        prev_size = len(builder.store)
        rho_gap *= config.f_gap
        rho_step = config.f_step * abstraction.sparse.num_states

    ledger.log = log
    return ledger, abstraction, log
