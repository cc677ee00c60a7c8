"""Shared test helpers: random model generators and brute-force oracles."""
import itertools
import random
from fractions import Fraction

import pytest

from pomdpverify import mdp_check
from pomdpverify.mdp_check import SparseMdp
from pomdpverify.model import KIND_REACH, Mdp, Pomdp, Specification


def frac_belief(obs, items):
    from pomdpverify.belief import Belief

    return Belief.from_items(obs, [(s, Fraction(p)) for s, p in items])


def random_sparse_mdp(rng, num_states=5, num_actions=2, with_avoid=True,
                      rewards=False):
    """Random exact SparseMdp with an absorbing target (and maybe avoid)."""
    actions = []
    rew = {} if rewards else None
    for s in range(num_states):
        rows = []
        for a in range(num_actions):
            k = rng.randint(1, min(3, num_states))
            succs = rng.sample(range(num_states), k)
            dens = [rng.randint(1, 3) for _ in succs]
            total = sum(dens)
            rows.append((a, sorted((t, Fraction(d, total))
                                   for t, d in zip(succs, dens))))
            if rewards:
                rew[(s, a)] = Fraction(rng.randint(0, 3))
        actions.append(rows)
    target = frozenset({num_states - 1})
    avoid = frozenset({num_states - 2}) if with_avoid and rng.random() < 0.5 \
        else frozenset()
    for s in target | avoid:
        actions[s] = [(a, [(s, Fraction(1))]) for a in range(num_actions)]
        if rewards:
            for a in range(num_actions):
                rew[(s, a)] = Fraction(0)
    return SparseMdp(initial=0, actions=actions, target=target, avoid=avoid,
                     rewards=rew, exact=True)


def enumerate_optimal_value(mdp: SparseMdp, kind, direction):
    """Brute-force optimum over all memoryless deterministic policies."""
    n = mdp.num_states
    best = None
    for choice in itertools.product(*[range(len(mdp.actions[s]))
                                      for s in range(n)]):
        actions = [[mdp.actions[s][choice[s]]] for s in range(n)]
        chain = SparseMdp(initial=mdp.initial, actions=actions,
                          target=mdp.target, avoid=mdp.avoid,
                          rewards=mdp.rewards, exact=True)
        value = mdp_check.evaluate_markov_chain(chain, kind)[mdp.initial]
        if best is None or (value > best if direction == "max" else value < best):
            best = value
    return best


def random_pomdp(rng, max_states=6, max_actions=3, max_obs=4):
    """Random exact POMDP with an absorbing target and a max-reach query.

    All actions are enabled in every state, so states sharing an
    observation trivially share their action sets.
    """
    n = rng.randint(3, max_states)
    na = rng.randint(1, max_actions)
    nz = rng.randint(2, min(max_obs, n))
    obs = list(range(nz)) + [rng.randrange(nz) for _ in range(n - nz)]
    rng.shuffle(obs)
    target = n - 1
    transitions = [dict() for _ in range(n)]
    for s in range(n):
        for a in range(na):
            k = rng.randint(1, 2)
            succs = rng.sample(range(n), k)
            dens = [rng.randint(1, 4) for _ in succs]
            total = sum(dens)
            transitions[s][a] = sorted((t, Fraction(d, total))
                                       for t, d in zip(succs, dens))
    for a in range(na):
        transitions[target][a] = [(target, Fraction(1))]
    mdp = Mdp(n, ["a%d" % i for i in range(na)], 0, transitions, exact=True)
    pomdp = Pomdp(mdp, nz, obs)
    spec = Specification(kind=KIND_REACH, direction="max",
                         target_states=frozenset({target}))
    pomdp.validate()
    spec.validate(pomdp)
    return pomdp, spec


@pytest.fixture
def rng():
    return random.Random(20260823)
