"""Sound bounds for reachability, reach-avoid and expected-total-reward
objectives on POMDPs via belief-MDP discretisation, cut-offs, and
abstraction refinement."""

from pomdpverify.model import (
    Mdp,
    ModelError,
    Pomdp,
    Specification,
    make_running_example,
    parse_model,
    serialize_model,
    underlying_mdp_values,
)
from pomdpverify.belief import (
    Belief,
    BeliefStore,
    ExplorationBudget,
    belief_successors,
    explore_belief_mdp,
    finite_belief_check,
    next_belief,
    obs_probability,
)
from pomdpverify.triangulate import (
    FixedNeighbourhoodFoundation,
    Foundation,
    TriangulationResult,
    dynamic_neighbourhood,
    extend_foundation,
    freudenthal_neighbourhood,
    score_belief,
    score_observation,
    vertex_weights_solve,
)
from pomdpverify.mdp_check import (
    SparseMdp,
    ValueResult,
    check,
    epsilon_optimal_actions,
    evaluate_markov_chain,
    reachable_under,
)
from pomdpverify.refine import (
    AbstractionMdp,
    BoundsLedger,
    HeuristicConfig,
    build_discretized,
    eq1_upper_bound,
    guess_lower_bound_policies,
    refinement_loop,
)

__version__ = "0.1.0"
