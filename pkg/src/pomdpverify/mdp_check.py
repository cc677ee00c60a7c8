"""Sound model checking of finite explicit MDPs.

Probability objectives are solved exactly (policy iteration over rational
chains) in exact mode and by interval value iteration in float mode; reward
objectives use interval value iteration with divergence detection.  All
solvers pin qualitative states first so both bound iterations converge to
the true value.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from pomdpverify.model import KIND_REWARD

DEFAULT_PRECISION = 1e-6
MAX_ITERATIONS = 500000
INF = math.inf


@dataclass
class SparseMdp:
    """Row-grouped sparse MDP: actions[s] is a list of (action id, row),
    each row a list of (successor, probability) pairs."""

    initial: int
    actions: list
    target: frozenset
    avoid: frozenset = frozenset()
    rewards: dict = None  # (state, action id) -> nonnegative reward
    exact: bool = False

    @property
    def num_states(self):
        return len(self.actions)

    @classmethod
    def from_mdp(cls, mdp, spec):
        actions = [[(a, list(mdp.row(s, a))) for a in mdp.enabled_actions(s)]
                   for s in range(mdp.num_states)]
        rewards = dict(spec.rewards) if spec.rewards else None
        return cls(initial=mdp.initial_state, actions=actions,
                   target=frozenset(spec.target_states),
                   avoid=frozenset(spec.avoid_states),
                   rewards=rewards, exact=mdp.exact)

    def reward(self, s, a):
        if self.rewards is None:
            return 0
        return self.rewards.get((s, a), 0)

    def validate(self):
        n = self.num_states
        if not (0 <= self.initial < n):
            raise ValueError("initial state out of range")
        for s in range(n):
            if not self.actions[s]:
                raise ValueError("state %d has no action" % s)
            for a, row in self.actions[s]:
                total = sum(p for _, p in row)
                ok = total == 1 if self.exact else abs(total - 1.0) <= 1e-9
                if not ok:
                    raise ValueError("row (%d, %d) sums to %r" % (s, a, total))
                for t, p in row:
                    if not (0 <= t < n) or p < 0:
                        raise ValueError("bad entry in row (%d, %d)" % (s, a))


@dataclass
class ValueResult:
    """Per-state value bounds with convergence metadata."""

    lower: list
    upper: list
    iterations: int
    gap: float
    direction: str
    mdp: SparseMdp = field(repr=False, default=None)


# ---------------------------------------------------------------------------
# Graph precomputations.  Target and avoid states are treated as absorbing
# throughout, so their raw rows never enter any analysis.


def _effective_actions(mdp: SparseMdp):
    absorbing = mdp.target | mdp.avoid
    return [[] if s in absorbing else mdp.actions[s] for s in range(mdp.num_states)]


def _backward_reach(actions, sources):
    """States with a path to `sources` under some action sequence."""
    n = len(actions)
    incoming = [[] for _ in range(n)]
    for s in range(n):
        for _, row in actions[s]:
            for t, p in row:
                if p > 0:
                    incoming[t].append(s)
    reach = set(sources)
    queue = list(sources)
    while queue:
        t = queue.pop()
        for s in incoming[t]:
            if s not in reach:
                reach.add(s)
                queue.append(s)
    return reach


def _forward_reach(actions, start):
    seen = {start}
    queue = [start]
    while queue:
        s = queue.pop()
        for _, row in actions[s]:
            for t, p in row:
                if p > 0 and t not in seen:
                    seen.add(t)
                    queue.append(t)
    return seen


def _prob0_states_max(mdp: SparseMdp):
    """States whose maximal probability of reaching the target is 0."""
    actions = _effective_actions(mdp)
    reach = _backward_reach(actions, mdp.target)
    return (set(range(mdp.num_states)) - reach) | set(mdp.avoid)


def _prob0_states_min(mdp: SparseMdp):
    """States admitting a policy that avoids the target forever (so the
    minimal reachability probability is 0).  Greatest fixpoint."""
    n = mdp.num_states
    actions = _effective_actions(mdp)
    X = set(range(n)) - set(mdp.target)
    while True:
        drop = set()
        for s in X:
            if s in mdp.avoid:
                continue
            if not any(all(t in X for t, p in row if p > 0) for _, row in actions[s]):
                drop.add(s)
        if not drop:
            return X
        X -= drop


def _almost_sure_exists(mdp: SparseMdp):
    """Largest W with, for each s in W, a policy reaching the target almost
    surely while staying in W; also returns the per-state safe action ids."""
    n = mdp.num_states
    actions = _effective_actions(mdp)
    W = set(range(n))
    while True:
        allowed = [[(a, row) for a, row in actions[s]
                    if all(t in W for t, p in row if p > 0)] for s in range(n)]
        reach = set(mdp.target) & W
        changed = True
        while changed:
            changed = False
            for s in W - reach:
                if any(any(t in reach for t, p in row if p > 0) for _, row in allowed[s]):
                    reach.add(s)
                    changed = True
        if reach == W:
            safe = {s: [a for a, _ in allowed[s]] for s in W if s not in mdp.target}
            return W, safe
        W = reach


def _almost_sure_forall(mdp: SparseMdp):
    """States from which every policy reaches the target almost surely:
    exactly the states that cannot reach the avoid-forever set."""
    zero = _prob0_states_min(mdp)
    actions = _effective_actions(mdp)
    can_reach_zero = _backward_reach(actions, zero)
    return set(range(mdp.num_states)) - can_reach_zero


def _sccs(nodes, successors):
    """Iterative Tarjan over the given node set; successors is a callable."""
    nodes = list(nodes)
    index = {}
    lowlink = {}
    on_stack = set()
    stack = []
    counter = [0]
    result = []

    for root in nodes:
        if root in index:
            continue
        work = [(root, iter(successors(root)))]
        index[root] = lowlink[root] = counter[0]
        counter[0] += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(successors(w))))
                    advanced = True
                    break
                if w in on_stack:
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
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                result.append(frozenset(comp))
    return result


def maximal_end_components(states, action_rows):
    """Maximal end components of the sub-MDP given by action_rows (a map
    state -> list of (action id, row)), restricted to `states`.

    Returns components that contain at least one fully internal action.
    """
    states = set(states)
    candidates = [frozenset(states)]
    stable = False
    while not stable:
        stable = True
        next_candidates = []
        for cand in candidates:
            internal = {s: [(a, row) for a, row in action_rows.get(s, [])
                            if all(t in cand for t, p in row if p > 0)]
                        for s in cand}

            def succ(s):
                out = set()
                for _, row in internal[s]:
                    for t, p in row:
                        if p > 0:
                            out.add(t)
                return sorted(out)

            comps = _sccs(sorted(cand), succ)
            if len(comps) > 1 or any(len(c) < len(cand) for c in comps):
                stable = False
            next_candidates.extend(comps)
        candidates = next_candidates

    mecs = []
    for cand in candidates:
        has_internal = any(
            any(all(t in cand for t, p in row if p > 0) for _, row in action_rows.get(s, []))
            for s in cand)
        if has_internal and (len(cand) > 1 or has_internal):
            mecs.append(cand)
    return mecs


# ---------------------------------------------------------------------------
# Exact chain evaluation.


def _solve_linear_exact(matrix, rhs):
    """Gaussian elimination over Fractions for a nonsingular square system."""
    n = len(rhs)
    rows = [list(matrix[i]) + [rhs[i]] for i in range(n)]
    for c in range(n):
        pivot = next(i for i in range(c, n) if rows[i][c] != 0)
        rows[c], rows[pivot] = rows[pivot], rows[c]
        factor = rows[c][c]
        rows[c] = [entry / factor for entry in rows[c]]
        for i in range(n):
            if i != c and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[c])]
    return [rows[i][n] for i in range(n)]


def _solve_linear_float(matrix, rhs):
    import numpy

    if not rhs:
        return []
    a = numpy.array([[float(x) for x in row] for row in matrix], dtype=float)
    b = numpy.array([float(x) for x in rhs], dtype=float)
    return list(numpy.linalg.solve(a, b))


def _chain_reach_values(n, chain_rows, pinned, exact):
    """Values of x = Px + pinned-mass for a Markov chain.

    chain_rows maps each free state to its single stochastic row; pinned
    maps every non-free state to its value.  Free states that cannot reach
    a positive pinned value get 0 (the least fixpoint), which makes the
    remaining linear system nonsingular.
    """
    positive = {s for s, v in pinned.items() if v > 0}
    incoming = {}
    for s, row in chain_rows.items():
        for t, p in row:
            if p > 0:
                incoming.setdefault(t, []).append(s)
    reach = set()
    queue = list(positive)
    while queue:
        t = queue.pop()
        for s in incoming.get(t, ()):
            if s not in reach:
                reach.add(s)
                queue.append(s)
    reach -= set(pinned)

    order = sorted(reach)
    idx = {s: i for i, s in enumerate(order)}
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    matrix = [[zero] * len(order) for _ in order]
    rhs = [zero] * len(order)
    for i, s in enumerate(order):
        matrix[i][i] = one
        for t, p in chain_rows[s]:
            if t in idx:
                matrix[i][idx[t]] -= p
            elif t in pinned:
                rhs[i] += p * pinned[t]
    solve = _solve_linear_exact if exact else _solve_linear_float
    solution = solve(matrix, rhs)

    values = [zero] * n
    for s, v in pinned.items():
        values[s] = v
    for i, s in enumerate(order):
        values[s] = solution[i]
    return values


def _chain_reward_values(n, chain_rows, chain_rewards, target, exact):
    """Expected reward accumulated until reaching the target, per state;
    infinity where the chain does not reach the target almost surely."""
    pinned = {s: (Fraction(1) if exact else 1.0) for s in target}
    for s in range(n):
        if s not in chain_rows and s not in pinned:
            pinned[s] = Fraction(0) if exact else 0.0
    probs = _chain_reach_values(n, chain_rows, pinned, exact)

    def proper(s):
        return probs[s] == 1 if exact else probs[s] >= 1.0 - 1e-9

    finite = [s for s in chain_rows if proper(s)]
    order = sorted(finite)
    idx = {s: i for i, s in enumerate(order)}
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    matrix = [[zero] * len(order) for _ in order]
    rhs = [chain_rewards.get(s, zero) for s in order]
    for i, s in enumerate(order):
        matrix[i][i] = one
        for t, p in chain_rows[s]:
            if t in idx:
                matrix[i][idx[t]] -= p
    solve = _solve_linear_exact if exact else _solve_linear_float
    solution = solve(matrix, rhs)

    values = [INF] * n
    for s in target:
        values[s] = zero
    for i, s in enumerate(order):
        values[s] = solution[i]
    return values


def evaluate_markov_chain(chain: SparseMdp, kind, precision=DEFAULT_PRECISION):
    """Per-state values of a Markov chain given as a SparseMdp whose states
    carry a single row each (several rows are mixed uniformly)."""
    chain.validate()
    n = chain.num_states
    exact = chain.exact
    absorbing = chain.target | chain.avoid
    chain_rows = {}
    chain_rewards = {}
    for s in range(n):
        if s in absorbing:
            continue
        rows = chain.actions[s]
        if len(rows) == 1:
            a, row = rows[0]
            merged = dict()
            for t, p in row:
                merged[t] = merged.get(t, 0) + p
            chain_rewards[s] = chain.reward(s, a)
        else:
            share = Fraction(1, len(rows)) if exact else 1.0 / len(rows)
            merged = {}
            rew = 0
            for a, row in rows:
                for t, p in row:
                    merged[t] = merged.get(t, 0) + share * p
                rew += share * chain.reward(s, a)
            chain_rewards[s] = rew
        chain_rows[s] = sorted(merged.items())

    if kind == KIND_REWARD:
        return _chain_reward_values(n, chain_rows, chain_rewards, chain.target, exact)
    pinned = {s: (Fraction(1) if exact else 1.0) for s in chain.target}
    for s in chain.avoid:
        pinned[s] = Fraction(0) if exact else 0.0
    return _chain_reach_values(n, chain_rows, pinned, exact)


# ---------------------------------------------------------------------------
# Probability objectives, exact: policy iteration over rational chains.


def _policy_iteration_prob(mdp: SparseMdp, direction):
    n = mdp.num_states
    actions = _effective_actions(mdp)
    one, zero = Fraction(1), Fraction(0)
    if direction == "max":
        zeros = _prob0_states_max(mdp)
    else:
        zeros = _prob0_states_min(mdp)
    pinned = {s: one for s in mdp.target}
    for s in zeros:
        pinned.setdefault(s, zero)
    free = [s for s in range(n) if s not in pinned]

    policy = {s: actions[s][0][0] for s in free}
    rows_by_action = {s: dict(actions[s]) for s in free}
    better = (lambda a, b: a > b) if direction == "max" else (lambda a, b: a < b)

    rounds = 0
    while True:
        rounds += 1
        chain_rows = {s: rows_by_action[s][policy[s]] for s in free}
        values = _chain_reach_values(n, chain_rows, pinned, exact=True)
        changed = False
        for s in free:
            current = values[s]
            best_a, best_q = None, current
            for a, row in actions[s]:
                q = sum(p * values[t] for t, p in row)
                if better(q, best_q):
                    best_a, best_q = a, q
            if best_a is not None:
                policy[s] = best_a
                changed = True
        if not changed:
            return ValueResult(lower=list(values), upper=list(values),
                               iterations=rounds, gap=0.0, direction=direction, mdp=mdp)


# ---------------------------------------------------------------------------
# Probability objectives, float: interval value iteration.  The maximising
# upper iteration needs end components collapsed, otherwise it converges to
# a too-large fixpoint inside them.


class _Quotient:
    """Identity or MEC-collapsing state-space quotient."""

    def __init__(self, n, mecs=()):
        self.rep = list(range(n))
        self.members = {}
        for mec in mecs:
            rep = min(mec)
            self.members[rep] = mec
            for s in mec:
                self.rep[s] = rep

    def map_rows(self, s, action_rows, drop_internal=True):
        """Rows of the quotient state for original state s, with successor
        ids mapped and fully-internal rows optionally dropped."""
        out = []
        rep = self.rep[s]
        for a, row in action_rows:
            merged = {}
            for t, p in row:
                merged[self.rep[t]] = merged.get(self.rep[t], 0.0) + float(p)
            if drop_internal and set(merged) == {rep}:
                continue
            out.append(((s, a), sorted(merged.items())))
        return out


def _interval_iteration(free_rows, lower, upper, direction, precision):
    """In-place interval value iteration; free_rows maps state -> rows."""
    pick = max if direction == "max" else min
    iterations = 0
    while iterations < MAX_ITERATIONS:
        iterations += 1
        delta = 0.0
        for s, rows in free_rows.items():
            new_l = pick(sum(p * lower[t] for t, p in row) for _, row in rows)
            new_u = pick(sum(p * upper[t] for t, p in row) for _, row in rows)
            delta = max(delta, abs(new_l - lower[s]), abs(new_u - upper[s]))
            lower[s], upper[s] = new_l, new_u
        gap = max((upper[s] - lower[s]) / upper[s] if upper[s] > 0 else 0.0
                  for s in free_rows) if free_rows else 0.0
        if gap <= precision and delta <= precision * 1e-3:
            return iterations, gap
        if delta == 0.0:
            return iterations, gap
    return iterations, gap


def _interval_prob(mdp: SparseMdp, direction, precision):
    n = mdp.num_states
    actions = _effective_actions(mdp)
    if direction == "max":
        zeros = _prob0_states_max(mdp)
        free = [s for s in range(n) if s not in zeros and s not in mdp.target]
        mecs = maximal_end_components(free, {s: actions[s] for s in free})
        quotient = _Quotient(n, mecs)
    else:
        zeros = _prob0_states_min(mdp)
        free = [s for s in range(n) if s not in zeros and s not in mdp.target]
        quotient = _Quotient(n)

    lower = [0.0] * n
    upper = [0.0] * n
    for s in mdp.target:
        lower[s] = upper[s] = 1.0
    for s in free:
        upper[s] = 1.0

    free_reps = {quotient.rep[s] for s in free}
    free_rows = {}
    for s in free:
        rep = quotient.rep[s]
        rows = free_rows.setdefault(rep, [])
        rows.extend(quotient.map_rows(s, actions[s]))
    for rep in list(free_rows):
        if not free_rows[rep]:
            # an end component with no escaping action cannot reach anything
            del free_rows[rep]
            upper[rep] = 0.0
            free_reps.discard(rep)

    iterations, gap = _interval_iteration(free_rows, lower, upper, direction, precision)
    out_l = [0.0] * n
    out_u = [0.0] * n
    for s in range(n):
        out_l[s] = lower[quotient.rep[s]]
        out_u[s] = upper[quotient.rep[s]]
    for s in mdp.target:
        out_l[s] = out_u[s] = 1.0
    for s in mdp.avoid:
        out_l[s] = out_u[s] = 0.0
    return ValueResult(lower=out_l, upper=out_u, iterations=iterations,
                       gap=gap, direction=direction, mdp=mdp)


# ---------------------------------------------------------------------------
# Reward objectives (expected total reward until reaching the target; paths
# missing the target carry infinite reward).


def _reward_ceiling(free_rows, rewards, n):
    max_rew = max([float(r) for r in rewards.values()] + [0.0])
    if max_rew == 0.0:
        return 1.0
    p_min = 1.0
    for rows in free_rows.values():
        for _, row in rows:
            for _, p in row:
                if 0 < p < p_min:
                    p_min = float(p)
    try:
        ceiling = n * max_rew / (p_min ** n)
    except OverflowError:
        ceiling = INF
    return min(ceiling, 1e280)


def _check_reward(mdp: SparseMdp, direction, precision):
    n = mdp.num_states
    actions = _effective_actions(mdp)

    if direction == "max":
        sure = _almost_sure_forall(mdp)
        infinite = set(range(n)) - sure
        restricted = {s: [(a, row) for a, row in actions[s]]
                      for s in sure if s not in mdp.target and s not in mdp.avoid}
    else:
        sure, safe = _almost_sure_exists(mdp)
        infinite = set(range(n)) - sure
        restricted = {s: [(a, row) for a, row in actions[s] if a in safe.get(s, [])]
                      for s in sure if s not in mdp.target and s not in mdp.avoid}
        # Collapse end components of the zero-reward sub-MDP so the lower
        # iteration cannot settle on a policy that cycles forever for free.
        zero_sub = {s: [(a, row) for a, row in rows if mdp.reward(s, a) == 0]
                    for s, rows in restricted.items()}
        mecs = maximal_end_components(restricted.keys(), zero_sub)
        quotient = _Quotient(n, mecs)
        merged = {}
        for s, rows in restricted.items():
            rep = quotient.rep[s]
            out = merged.setdefault(rep, [])
            for (orig, a), row in quotient.map_rows(s, rows, drop_internal=False):
                if mdp.reward(orig, a) == 0 and all(t == rep for t, _ in row):
                    continue
                out.append(((orig, a), row))
        restricted = {rep: rows for rep, rows in merged.items()}
        infinite = {quotient.rep[s] for s in infinite}

    if direction == "max":
        quotient = _Quotient(n)
        restricted = {s: [((s, a), [(t, float(p)) for t, p in row]) for a, row in rows]
                      for s, rows in restricted.items()}
    else:
        restricted = {s: [(sa, [(t, float(p)) for t, p in row]) for sa, row in rows]
                      for s, rows in restricted.items()}

    if quotient.rep[mdp.initial] in infinite:
        raise ValueError("expected reward diverges from the initial state")

    rewards = mdp.rewards or {}
    ceiling = _reward_ceiling({s: rows for s, rows in restricted.items()}, rewards, n)

    lower = [0.0] * n
    upper = [0.0] * n
    for s in infinite:
        lower[s] = upper[s] = INF
    for s in restricted:
        upper[s] = ceiling

    pick = max if direction == "max" else min
    iterations = 0
    gap = 0.0
    while iterations < MAX_ITERATIONS:
        iterations += 1
        delta = 0.0
        for s, rows in restricted.items():
            qs_l = []
            qs_u = []
            for (orig, a), row in rows:
                r = float(mdp.reward(orig, a))
                ql = r + sum(p * lower[quotient.rep[t]] for t, p in row)
                qu = r + sum(p * upper[quotient.rep[t]] for t, p in row)
                qs_l.append(ql)
                qs_u.append(qu)
            new_l, new_u = pick(qs_l), pick(qs_u)
            delta = max(delta, abs(new_l - lower[s]), abs(new_u - upper[s]))
            lower[s], upper[s] = new_l, new_u
        if restricted:
            gap = max((upper[s] - lower[s]) / upper[s] if upper[s] > 0 else 0.0
                      for s in restricted)
        if gap <= precision and delta <= precision * max(1.0, ceiling) * 1e-6:
            break
        if delta == 0.0:
            break

    out_l = [lower[quotient.rep[s]] for s in range(n)]
    out_u = [upper[quotient.rep[s]] for s in range(n)]
    for s in mdp.target:
        out_l[s] = out_u[s] = 0.0
    return ValueResult(lower=out_l, upper=out_u, iterations=iterations,
                       gap=gap, direction=direction, mdp=mdp)


# ---------------------------------------------------------------------------
# Public entry points.


def check(mdp: SparseMdp, kind, direction, precision=DEFAULT_PRECISION, exact=False):
    """Sound per-state bounds on the optimal value.

    Probability kinds are solved exactly (zero gap) when exact is set;
    otherwise interval value iteration runs until the relative gap is at
    most the precision at every state.
    """
    assert direction in ("max", "min")
    mdp.validate()
    if kind == KIND_REWARD:
        return _check_reward(mdp, direction, precision)
    if exact:
        return _policy_iteration_prob(mdp, direction)
    return _interval_prob(mdp, direction, precision)


def epsilon_optimal_actions(result: ValueResult, rho_sigma):
    """Per state, every action whose optimistic Q-value is within rho_sigma
    of the optimum; over-approximates the true near-optimal action sets."""
    mdp = result.mdp
    sets = []
    absorbing = mdp.target | mdp.avoid
    for s in range(mdp.num_states):
        if s in absorbing:
            sets.append(sorted(a for a, _ in mdp.actions[s]))
            continue
        keep = []
        for a, row in mdp.actions[s]:
            r = mdp.reward(s, a)
            if result.direction == "max":
                q = r + sum(p * result.upper[t] for t, p in row)
                if q + rho_sigma >= result.lower[s]:
                    keep.append(a)
            else:
                q = r + sum(p * result.lower[t] for t, p in row)
                if q <= result.upper[s] + rho_sigma:
                    keep.append(a)
        if not keep:
            keep = [mdp.actions[s][0][0]]
        sets.append(sorted(keep))
    return sets


def reachable_under(mdp: SparseMdp, action_sets):
    """Forward closure from the initial state using only the given per-state
    action id sets (states missing from action_sets allow every action)."""
    seen = {mdp.initial}
    queue = [mdp.initial]
    while queue:
        s = queue.pop()
        allowed = action_sets[s] if s < len(action_sets) and action_sets[s] is not None \
            else [a for a, _ in mdp.actions[s]]
        allowed = set(allowed)
        for a, row in mdp.actions[s]:
            if a not in allowed:
                continue
            for t, p in row:
                if p > 0 and t not in seen:
                    seen.add(t)
                    queue.append(t)
    return seen
