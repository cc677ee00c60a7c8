"""POMDP data model, explicit file format, parsing, and validation.

Probabilities are `Fraction` in exact mode and `float` in float mode; the
two modes share all code paths.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

KIND_REACH = "Preach"
KIND_REACH_AVOID = "Preachavoid"
KIND_REWARD = "Rtotal"
KINDS = (KIND_REACH, KIND_REACH_AVOID, KIND_REWARD)

ROW_SUM_TOL = 1e-12


class ModelError(ValueError):
    """Syntactic or semantic problem in a model description."""

    def __init__(self, message, line=None):
        if line is not None:
            message = "line %d: %s" % (line, message)
        super().__init__(message)
        self.line = line


def parse_number(text, exact, line=None):
    """Parse 'n/d' or a decimal literal into Fraction (exact) or float."""
    try:
        if exact:
            return Fraction(text)
        if "/" in text:
            num, den = text.split("/", 1)
            return float(num) / float(den)
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise ModelError("cannot parse number %r" % text, line)


def format_number(x):
    if isinstance(x, Fraction):
        return "%d/%d" % (x.numerator, x.denominator) if x.denominator != 1 else str(x.numerator)
    return repr(x)


class Mdp:
    """Explicit finite MDP with a global action alphabet.

    transitions[s] maps enabled action ids to sparse rows, i.e. lists of
    (successor, probability) pairs.  Absent actions are disabled.
    """

    def __init__(self, num_states, action_names, initial_state, transitions, exact=True):
        self.num_states = num_states
        self.action_names = list(action_names)
        self.initial_state = initial_state
        self.transitions = transitions
        self.exact = exact

    @property
    def num_actions(self):
        return len(self.action_names)

    def enabled_actions(self, s):
        return sorted(self.transitions[s].keys())

    def row(self, s, a):
        return self.transitions[s][a]

    def validate(self):
        if not (0 <= self.initial_state < self.num_states):
            raise ModelError("initial state %d out of range" % self.initial_state)
        for s in range(self.num_states):
            if not self.transitions[s]:
                raise ModelError("state %d has no enabled action" % s)
            for a, row in self.transitions[s].items():
                if not (0 <= a < self.num_actions):
                    raise ModelError("state %d uses unknown action id %d" % (s, a))
                total = sum(p for _, p in row)
                for t, p in row:
                    if not (0 <= t < self.num_states):
                        raise ModelError("dangling state id %d in row (%d, %s)" % (t, s, self.action_names[a]))
                    if p <= 0:
                        raise ModelError("non-positive probability in row (%d, %s)" % (s, self.action_names[a]))
                if self.exact:
                    if total != 1:
                        raise ModelError("row (%d, %s) sums to %s, not 1" % (s, self.action_names[a], total))
                elif abs(total - 1.0) > ROW_SUM_TOL:
                    raise ModelError("row (%d, %s) sums to %r, not 1" % (s, self.action_names[a], total))


class Pomdp:
    """An MDP together with a state-to-observation labelling.

    States sharing an observation must share their enabled action set; this
    is checked by validate().
    """

    def __init__(self, mdp: Mdp, num_obs, obs_of):
        self.mdp = mdp
        self.num_obs = num_obs
        self.obs_of = list(obs_of)
        self.obs_classes = [[] for _ in range(num_obs)]
        for s, z in enumerate(self.obs_of):
            self.obs_classes[z].append(s)
        for cls in self.obs_classes:
            cls.sort()

    @property
    def exact(self):
        return self.mdp.exact

    def class_size(self, z):
        return len(self.obs_classes[z])

    def max_class_size(self):
        return max(len(c) for c in self.obs_classes)

    def enabled_for_obs(self, z):
        return self.mdp.enabled_actions(self.obs_classes[z][0])

    def validate(self):
        self.mdp.validate()
        if len(self.obs_of) != self.mdp.num_states:
            raise ModelError("observation map is not total over states")
        for s, z in enumerate(self.obs_of):
            if not (0 <= z < self.num_obs):
                raise ModelError("state %d has unknown observation %d" % (s, z))
        for z, cls in enumerate(self.obs_classes):
            if not cls:
                continue
            reference = self.mdp.enabled_actions(cls[0])
            for s in cls[1:]:
                if self.mdp.enabled_actions(s) != reference:
                    raise ModelError(
                        "states %d and %d share observation %d but enable different actions"
                        % (cls[0], s, z))


@dataclass(frozen=True)
class Specification:
    """Verification query: objective kind, direction, and state labels."""

    kind: str
    direction: str
    target_states: frozenset
    avoid_states: frozenset = frozenset()
    rewards: Optional[dict] = None  # (state, action_id) -> nonnegative value
    threshold: Optional[tuple] = None  # ("<=" | ">=", value)

    def validate(self, pomdp: Pomdp):
        if self.kind not in KINDS:
            raise ModelError("unknown specification kind %r" % self.kind)
        if self.direction not in ("max", "min"):
            raise ModelError("direction must be max or min")
        if not self.target_states:
            raise ModelError("target state set is empty")
        n = pomdp.mdp.num_states
        for s in self.target_states | self.avoid_states:
            if not (0 <= s < n):
                raise ModelError("label uses dangling state id %d" % s)
        if self.target_states & self.avoid_states:
            raise ModelError("target and avoid sets intersect")
        if self.kind == KIND_REWARD:
            if self.rewards is None:
                raise ModelError("reward specification without rew entries")
            for (s, a), r in self.rewards.items():
                if r < 0:
                    raise ModelError("negative reward on (%d, %d)" % (s, a))
        if self.threshold is not None:
            op, value = self.threshold
            if op not in ("<=", ">="):
                raise ModelError("threshold operator must be <= or >=")
            if self.kind != KIND_REWARD and not (0 < value < 1):
                raise ModelError("probability threshold must lie in (0,1)")

    @property
    def is_probability(self):
        return self.kind != KIND_REWARD


def parse_model(text, exact=True):
    """Parse the explicit line-oriented POMDP format.

    Returns a validated (Pomdp, Specification) pair.  See README for the
    grammar; comments start with '#'.
    """
    header = None
    initial = None
    obs_entries = {}
    action_ids = {}
    transitions = None
    target = set()
    avoid = set()
    rewards = {}
    spec_line = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        try:
            if key == "pomdp":
                if header is not None:
                    raise ModelError("duplicate pomdp header", lineno)
                if len(parts) != 4:
                    raise ModelError("header must be: pomdp <nStates> <nActions> <nObs>", lineno)
                header = tuple(int(p) for p in parts[1:])
                if min(header) <= 0:
                    raise ModelError("header counts must be positive", lineno)
                transitions = [{} for _ in range(header[0])]
            elif header is None:
                raise ModelError("expected pomdp header before %r" % key, lineno)
            elif key == "init":
                initial = int(parts[1])
            elif key == "obs":
                s, z = int(parts[1]), int(parts[2])
                if s in obs_entries:
                    raise ModelError("duplicate obs entry for state %d" % s, lineno)
                obs_entries[s] = z
            elif key == "tr":
                if len(parts) != 5:
                    raise ModelError("transition must be: tr <s> <action> <s'> <p>", lineno)
                s, name, t = int(parts[1]), parts[2], int(parts[3])
                p = parse_number(parts[4], exact, lineno)
                if name not in action_ids:
                    if len(action_ids) >= header[1]:
                        raise ModelError("more than %d action names" % header[1], lineno)
                    action_ids[name] = len(action_ids)
                a = action_ids[name]
                if not (0 <= s < header[0]):
                    raise ModelError("dangling state id %d" % s, lineno)
                transitions[s].setdefault(a, []).append((t, p))
            elif key == "label":
                which = parts[1]
                states = {int(p) for p in parts[2:]}
                if which == "target":
                    target |= states
                elif which == "avoid":
                    avoid |= states
                else:
                    raise ModelError("unknown label %r" % which, lineno)
            elif key == "rew":
                s, name = int(parts[1]), parts[2]
                if name not in action_ids:
                    raise ModelError("reward for unknown action %r" % name, lineno)
                rewards[(s, action_ids[name])] = parse_number(parts[3], exact, lineno)
            elif key == "spec":
                if spec_line is not None:
                    raise ModelError("duplicate spec line", lineno)
                spec_line = (parts[1:], lineno)
            else:
                raise ModelError("unknown directive %r" % key, lineno)
        except (IndexError, ValueError) as err:
            if isinstance(err, ModelError):
                raise
            raise ModelError("malformed line: %s" % err, lineno)

    if header is None:
        raise ModelError("missing pomdp header")
    num_states, num_actions, num_obs = header
    if initial is None:
        raise ModelError("missing init line")
    if len(obs_entries) != num_states:
        raise ModelError("obs entries present for %d of %d states" % (len(obs_entries), num_states))
    if spec_line is None:
        raise ModelError("missing spec line")

    action_names = [None] * num_actions
    for name, a in action_ids.items():
        action_names[a] = name
    for a in range(num_actions):
        if action_names[a] is None:
            action_names[a] = "act%d" % a

    parts, lineno = spec_line
    if len(parts) not in (2, 4):
        raise ModelError("spec must be: spec <max|min> <kind> [<=|>= value]", lineno)
    direction, kind = parts[0], parts[1]
    threshold = None
    if len(parts) == 4:
        threshold = (parts[2], parse_number(parts[3], exact, lineno))

    mdp = Mdp(num_states, action_names, initial, transitions, exact=exact)
    pomdp = Pomdp(mdp, num_obs, [obs_entries[s] for s in range(num_states)])
    spec = Specification(
        kind=kind,
        direction=direction,
        target_states=frozenset(target),
        avoid_states=frozenset(avoid),
        rewards=rewards if kind == KIND_REWARD else (rewards or None),
        threshold=threshold,
    )
    pomdp.validate()
    spec.validate(pomdp)
    return pomdp, spec


def serialize_model(pomdp: Pomdp, spec: Specification):
    """Inverse of parse_model on the data model (round-trip identity)."""
    mdp = pomdp.mdp
    lines = ["pomdp %d %d %d" % (mdp.num_states, mdp.num_actions, pomdp.num_obs)]
    lines.append("init %d" % mdp.initial_state)
    for s in range(mdp.num_states):
        lines.append("obs %d %d" % (s, pomdp.obs_of[s]))
    for s in range(mdp.num_states):
        for a in mdp.enabled_actions(s):
            for t, p in mdp.row(s, a):
                lines.append("tr %d %s %d %s" % (s, mdp.action_names[a], t, format_number(p)))
    if spec.target_states:
        lines.append("label target " + " ".join(str(s) for s in sorted(spec.target_states)))
    if spec.avoid_states:
        lines.append("label avoid " + " ".join(str(s) for s in sorted(spec.avoid_states)))
    if spec.rewards:
        for (s, a), r in sorted(spec.rewards.items()):
            lines.append("rew %d %s %s" % (s, mdp.action_names[a], format_number(r)))
    spec_line = "spec %s %s" % (spec.direction, spec.kind)
    if spec.threshold is not None:
        spec_line += " %s %s" % (spec.threshold[0], format_number(spec.threshold[1]))
    lines.append(spec_line)
    return "\n".join(lines) + "\n"


# State ids of the nine-state example: s0..s6 are 0..6, the absorbing
# smiley state is 7 and the absorbing frowny (bad) state is 8.
SMILE = 7
FROWN = 8

_RUNNING_EXAMPLE_TRANSITIONS = {
    (0, "a"): {0: "1/5", 1: "3/5", 2: "1/5"},
    (0, "b"): {0: "1/2", 5: "1/6", 6: "1/3"},
    (5, "a"): {1: "1"},
    (5, "b"): {5: "1/4", 6: "3/4"},
    (6, "a"): {2: "1"},
    (6, "b"): {5: "2/3", 6: "1/3"},
    (1, "a"): {3: "1"},
    (1, "b"): {3: "2/3", 4: "1/3"},
    (2, "a"): {3: "3/4", 4: "1/4"},
    (2, "b"): {4: "1"},
    (3, "a"): {SMILE: "2/5", FROWN: "3/5"},
    (3, "b"): {SMILE: "1"},
    (4, "a"): {SMILE: "3/4", FROWN: "1/4"},
    (4, "b"): {FROWN: "1"},
    (SMILE, "a"): {SMILE: "1"},
    (SMILE, "b"): {SMILE: "1"},
    (FROWN, "a"): {FROWN: "1"},
    (FROWN, "b"): {FROWN: "1"},
}

_RUNNING_EXAMPLE_OBS = [0, 1, 1, 2, 2, 0, 0, 3, 4]


def make_running_example(exact=True, threshold=None):
    """Nine-state, five-observation example POMDP; objective: maximise the
    probability of reaching the bad absorbing state."""
    transitions = [{} for _ in range(9)]
    action_ids = {"a": 0, "b": 1}
    for (s, name), row in _RUNNING_EXAMPLE_TRANSITIONS.items():
        conv = Fraction if exact else (lambda x: float(Fraction(x)))
        transitions[s][action_ids[name]] = sorted((t, conv(p)) for t, p in row.items())
    mdp = Mdp(9, ["a", "b"], 0, transitions, exact=exact)
    pomdp = Pomdp(mdp, 5, _RUNNING_EXAMPLE_OBS)
    spec = Specification(
        kind=KIND_REACH,
        direction="max",
        target_states=frozenset({FROWN}),
        threshold=threshold,
    )
    pomdp.validate()
    spec.validate(pomdp)
    return pomdp, spec


def underlying_mdp_values(pomdp: Pomdp, spec: Specification, precision=1e-6):
    """Optimal fully-observable value of every state of the underlying MDP.

    For maximising objectives the returned values over-approximate the
    values of the corresponding Dirac beliefs (and symmetrically for min),
    so they can be used for cut-off bounds.  Reward states from which the
    goal is not suitably reachable get value infinity.
    """
    from pomdpverify import mdp_check

    sparse = mdp_check.SparseMdp.from_mdp(pomdp.mdp, spec)
    result = mdp_check.check(sparse, spec.kind, spec.direction, precision=precision,
                             exact=pomdp.exact and spec.is_probability)
    # Use the sound bound side: over-approximation for max, under- for min.
    values = result.upper if spec.direction == "max" else result.lower
    return list(values)
