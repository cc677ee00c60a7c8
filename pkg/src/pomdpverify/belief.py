"""Belief states, exact Bayesian updates, and lazy exploration of the
(possibly infinite) belief MDP."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from pomdpverify.model import KIND_REWARD, Pomdp, Specification

# Float-mode belief keys round each component to this grid before interning,
# so numeric drift cannot create unbounded near-duplicate beliefs.
FLOAT_KEY_DIGITS = 9
FLOAT_PRUNE_EPS = 1e-14


@dataclass(frozen=True)
class Belief:
    """Distribution over the states of one observation class.

    support is strictly sorted, probs are positive and parallel to support.
    """

    obs: int
    support: tuple
    probs: tuple

    def __post_init__(self):
        assert len(self.support) == len(self.probs)

    def prob(self, s):
        try:
            return self.probs[self.support.index(s)]
        except ValueError:
            return 0

    def items(self):
        return zip(self.support, self.probs)

    def is_dirac(self):
        return len(self.support) == 1

    def key(self, exact=True):
        if exact:
            return (self.obs, self.support, self.probs)
        rounded = tuple(round(float(p), FLOAT_KEY_DIGITS) for p in self.probs)
        total = sum(rounded)
        return (self.obs, self.support, tuple(r / total for r in rounded))

    @staticmethod
    def from_items(obs, items, exact=True):
        items = sorted((s, p) for s, p in items if p > 0)
        support = tuple(s for s, _ in items)
        probs = tuple(p for _, p in items)
        total = sum(probs)
        if exact:
            assert total == 1, "belief does not sum to 1: %s" % (items,)
        else:
            probs = tuple(p / total for p in probs)
        return Belief(obs, support, probs)

    @staticmethod
    def dirac(pomdp: Pomdp, s):
        one = Fraction(1) if pomdp.exact else 1.0
        return Belief(pomdp.obs_of[s], (s,), (one,))

    @staticmethod
    def initial(pomdp: Pomdp):
        return Belief.dirac(pomdp, pomdp.mdp.initial_state)


class BeliefStore:
    """Interning table assigning stable ids to canonical belief keys."""

    def __init__(self, exact=True):
        self.exact = exact
        self._ids = {}
        self.beliefs = []

    def __len__(self):
        return len(self.beliefs)

    def intern(self, belief: Belief):
        key = belief.key(self.exact)
        bid = self._ids.get(key)
        if bid is None:
            bid = len(self.beliefs)
            self._ids[key] = bid
            self.beliefs.append(belief)
        return bid

    def lookup(self, belief: Belief):
        return self._ids.get(belief.key(self.exact))

    def per_obs_counts(self, num_obs):
        counts = [0] * num_obs
        for b in self.beliefs:
            counts[b.obs] += 1
        return counts


@dataclass(frozen=True)
class ExplorationBudget:
    """Budget for un-discretised exploration at refinement step i."""

    step: int
    max_states: int

    @staticmethod
    def for_step(pomdp: Pomdp, step):
        assert step >= 1
        limit = 2 ** (step - 1) * pomdp.mdp.num_states * pomdp.max_class_size()
        return ExplorationBudget(step, limit)


def obs_probability(pomdp: Pomdp, belief: Belief, action, z):
    """Probability to observe z after taking the action in the belief."""
    total = 0
    for s, p in belief.items():
        for t, q in pomdp.mdp.row(s, action):
            if pomdp.obs_of[t] == z:
                total += p * q
    return total


def next_belief(pomdp: Pomdp, belief: Belief, action, z):
    """Bayesian update: the belief after taking the action, conditioned on
    observing z.  Raises ValueError if z has probability zero."""
    mass = {}
    for s, p in belief.items():
        for t, q in pomdp.mdp.row(s, action):
            if pomdp.obs_of[t] == z:
                mass[t] = mass.get(t, 0) + p * q
    denom = sum(mass.values())
    if denom == 0:
        raise ValueError("observation %d has probability zero" % z)
    return Belief.from_items(z, ((t, m / denom) for t, m in mass.items()), exact=pomdp.exact)


def belief_successors(pomdp: Pomdp, belief: Belief, action, store: BeliefStore = None):
    """Successor distribution of the belief MDP: one (Belief, probability)
    pair per observation with positive probability, ascending by
    observation id."""
    mass_by_obs = {}
    for s, p in belief.items():
        for t, q in pomdp.mdp.row(s, action):
            z = pomdp.obs_of[t]
            per = mass_by_obs.setdefault(z, {})
            per[t] = per.get(t, 0) + p * q
    out = []
    for z in sorted(mass_by_obs):
        per = mass_by_obs[z]
        denom = sum(per.values())
        if not pomdp.exact:
            if denom < FLOAT_PRUNE_EPS:
                continue
        successor = Belief.from_items(z, ((t, m / denom) for t, m in per.items()),
                                      exact=pomdp.exact)
        if store is not None:
            store.intern(successor)
        out.append((successor, denom))
    if not pomdp.exact:
        total = sum(p for _, p in out)
        out = [(b, p / total) for b, p in out]
    return out


def belief_is_target(belief: Belief, spec: Specification):
    return all(s in spec.target_states for s in belief.support)


def belief_hits_avoid(belief: Belief, spec: Specification):
    return any(s in spec.avoid_states for s in belief.support)


def belief_reward(pomdp: Pomdp, belief: Belief, action, spec: Specification):
    if not spec.rewards:
        return 0
    return sum(p * spec.rewards.get((s, action), 0) for s, p in belief.items())


def explore_belief_mdp(pomdp: Pomdp, spec: Specification, budget: ExplorationBudget,
                       cutoff_mode="to-sink", mdp_values=None):
    """BFS-explore the belief MDP without discretisation, up to the budget.

    Returns (SparseMdp over belief ids, frontier id set, complete, store).
    Frontier beliefs get a single row determined by cutoff_mode:

    * "to-sink":   all mass to the zero sink (lower bound for max).
    * "to-target": all mass to the target sink (upper bound for max).
    * "mdp-bound": probability sum_s b(s)*V_mdp(s) to the target sink and
      the rest to the zero sink (requires mdp_values).
    """
    from pomdpverify.mdp_check import SparseMdp

    assert budget.max_states >= 1
    if cutoff_mode == "mdp-bound" and mdp_values is None:
        raise ValueError("mdp-bound cut-offs need underlying MDP values")

    store = BeliefStore(exact=pomdp.exact)
    init = Belief.initial(pomdp)
    init_id = store.intern(init)
    queue = [init_id]
    head = 0
    explored = set()
    frontier = set()
    rows = {}  # belief id -> list of (action, [(belief id, prob)])
    absorbing = set()

    while head < len(queue):
        bid = queue[head]
        head += 1
        if bid in explored:
            continue
        belief = store.beliefs[bid]
        if belief_is_target(belief, spec) or belief_hits_avoid(belief, spec):
            explored.add(bid)
            absorbing.add(bid)
            continue
        if len(explored) >= budget.max_states:
            frontier.add(bid)
            continue
        explored.add(bid)
        action_rows = []
        for a in pomdp.enabled_for_obs(belief.obs):
            row = []
            for successor, p in belief_successors(pomdp, belief, a, store):
                sid = store.intern(successor)
                row.append((sid, p))
                if sid not in explored and sid not in frontier:
                    queue.append(sid)
            action_rows.append((a, row))
        rows[bid] = action_rows

    # Drain queue remainder: anything never expanded is frontier.
    for bid in queue:
        if bid not in explored:
            frontier.add(bid)

    num = len(store)
    target_sink = num
    zero_sink = num + 1
    one = Fraction(1) if pomdp.exact else 1.0
    actions = [[] for _ in range(num + 2)]
    rewards = {} if spec.kind == KIND_REWARD else None
    target_ids = {target_sink}
    for bid in range(num):
        belief = store.beliefs[bid]
        if bid in absorbing:
            if belief_is_target(belief, spec):
                target_ids.add(bid)
            actions[bid] = [(0, [(bid, one)])]
        elif bid in frontier:
            if spec.kind == KIND_REWARD:
                # Reward cut-offs go straight to the target; "to-target"
                # charges nothing (optimistic), "mdp-bound" charges the
                # underlying-MDP reward value.
                if cutoff_mode == "to-sink":
                    raise ValueError("to-sink cut-offs diverge for reward objectives")
                actions[bid] = [(0, [(target_sink, one)])]
                if cutoff_mode == "mdp-bound":
                    rewards[(bid, 0)] = sum(p * mdp_values[s] for s, p in belief.items())
            elif cutoff_mode == "to-sink":
                actions[bid] = [(0, [(zero_sink, one)])]
            elif cutoff_mode == "to-target":
                actions[bid] = [(0, [(target_sink, one)])]
            elif cutoff_mode == "mdp-bound":
                bound = sum(p * mdp_values[s] for s, p in belief.items())
                row = []
                if bound > 0:
                    row.append((target_sink, bound))
                if bound < 1:
                    row.append((zero_sink, 1 - bound))
                actions[bid] = [(0, row)]
            else:
                raise ValueError("unknown cutoff mode %r" % cutoff_mode)
        else:
            actions[bid] = rows[bid]
            if rewards is not None:
                for a, _ in rows[bid]:
                    rewards[(bid, a)] = belief_reward(pomdp, belief, a, spec)
    actions[target_sink] = [(0, [(target_sink, one)])]
    actions[zero_sink] = [(0, [(zero_sink, one)])]

    fragment = SparseMdp(initial=init_id, actions=actions,
                         target=frozenset(target_ids), rewards=rewards,
                         exact=pomdp.exact)
    return fragment, frontier, not frontier, store


def finite_belief_check(pomdp: Pomdp):
    """Sufficient SCC-based finiteness check for the reachable belief MDP.

    Returns "finite" when every cycle of the underlying transition graph
    passes only through states whose observation class is a singleton
    (beliefs entering those states are Dirac, so cycles cannot create new
    beliefs); "unknown" otherwise.
    """
    mdp = pomdp.mdp
    n = mdp.num_states
    successors = [set() for _ in range(n)]
    for s in range(n):
        for a in mdp.enabled_actions(s):
            for t, _ in mdp.row(s, a):
                successors[s].add(t)

    index = [None] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack = []
    counter = [0]
    sccs = []

    def strongconnect(root):
        work = [(root, iter(sorted(successors[root])))]
        index[root] = lowlink[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if index[w] is None:
                    index[w] = lowlink[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, iter(sorted(successors[w]))))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                sccs.append(comp)

    for s in range(n):
        if index[s] is None:
            strongconnect(s)

    for comp in sccs:
        cyclic = len(comp) > 1 or comp[0] in successors[comp[0]]
        if cyclic and any(pomdp.class_size(pomdp.obs_of[s]) > 1 for s in comp):
            return "unknown"
    return "finite"


def export_fragment(fragment, path):
    """Write the explored fragment as one `from action to prob` line per
    transition, for external inspection."""
    from pomdpverify.model import format_number

    with open(path, "w") as handle:
        for s, action_rows in enumerate(fragment.actions):
            for a, row in action_rows:
                for t, p in row:
                    handle.write("%d %d %d %s\n" % (s, a, t, format_number(p)))
