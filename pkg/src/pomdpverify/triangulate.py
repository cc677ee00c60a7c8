"""Freudenthal triangulation of observation-local belief simplices:
neighbourhood vertices, vertex weights, static/dynamic schemes, and the
scoring used to pick which observations to refine."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

from pomdpverify.belief import Belief


@dataclass(frozen=True)
class TriangulationResult:
    """Grid neighbourhood N(b) with parallel convex weights mu_b."""

    neighbours: tuple  # of Belief
    weights: tuple

    def items(self):
        return zip(self.neighbours, self.weights)


def _on_grid(belief: Belief, eta):
    for p in belief.probs:
        x = p * eta
        if isinstance(x, Fraction):
            if x.denominator != 1:
                return False
        elif abs(x - round(x)) > 1e-9:
            return False
    return True


def freudenthal_neighbourhood(belief: Belief, eta):
    """Neighbourhood vertices and weights at resolution eta.

    Works over the cumulative-coordinate transform: sort the fractional
    parts, walk the unit steps in that order, then invert the transform.
    Zero-weight vertices are dropped, so at most |supp(b)| vertices remain.
    """
    assert eta >= 1
    exact = isinstance(belief.probs[0], Fraction)
    if _on_grid(belief, eta):
        one = Fraction(1) if exact else 1.0
        return TriangulationResult((belief,), (one,))

    n = len(belief.support)
    # x_i = eta * sum_{j >= i} b_j; x_1 == eta.
    x = []
    tail = 0
    for p in reversed(belief.probs):
        tail = tail + p
        x.append(eta * tail)
    x.reverse()
    if exact:
        v = [Fraction(int(math.floor(xi))) for xi in x]
    else:
        v = [float(math.floor(xi + 1e-12)) for xi in x]
    d = [xi - vi for xi, vi in zip(x, v)]

    # Order positions 2..n by descending fractional part, ties by position.
    order = sorted(range(1, n), key=lambda i: (-d[i], i))

    vertices_u = [list(v)]
    for i in order:
        u = list(vertices_u[-1])
        u[i] += 1
        vertices_u.append(u)

    weights = []
    prev = 1
    for i in order:
        weights.append(prev - d[i])
        prev = d[i]
    weights.append(prev)

    neighbours = []
    kept_weights = []
    for u, w in zip(vertices_u, weights):
        if w <= 0:
            continue
        probs = []
        for i in range(n):
            upper = u[i]
            lower = u[i + 1] if i + 1 < n else 0
            probs.append((upper - lower) / eta)
        items = [(s, p) for s, p in zip(belief.support, probs)]
        neighbours.append(Belief.from_items(belief.obs, items, exact=exact))
        kept_weights.append(w)
    return TriangulationResult(tuple(neighbours), tuple(kept_weights))


def _solve_square(columns, rhs):
    """Exact Gaussian elimination for A x = rhs with Fraction entries;
    columns are the columns of A.  Returns None if singular/inconsistent."""
    m = len(rhs)
    k = len(columns)
    rows = [[columns[j][i] for j in range(k)] + [rhs[i]] for i in range(m)]
    pivot_cols = []
    r = 0
    for c in range(k):
        pivot = next((i for i in range(r, m) if rows[i][c] != 0), None)
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        factor = rows[r][c]
        rows[r] = [entry / factor for entry in rows[r]]
        for i in range(m):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivot_cols.append(c)
        r += 1
        if r == m:
            break
    for i in range(r, m):
        if rows[i][-1] != 0:
            return None
    if len(pivot_cols) < k:
        return None  # underdetermined; caller enumerates subsets instead
    solution = [Fraction(0)] * k
    for i, c in enumerate(pivot_cols):
        solution[c] = rows[i][-1]
    return solution


def vertex_weights_solve(belief: Belief, neighbourhood):
    """Convex weights mu with sum_k mu_k * v_k = belief, or None when the
    belief lies outside the convex hull of the neighbourhood.

    Intended for hand-picked (non-grid) foundations; inputs must share the
    belief's observation.  Exact over Fractions.
    """
    for v in neighbourhood:
        assert v.obs == belief.obs
    states = sorted({s for v in neighbourhood for s in v.support} | set(belief.support))
    full_cols = [[Fraction(v.prob(s)) for s in states] + [Fraction(1)] for v in neighbourhood]
    rhs = [Fraction(belief.prob(s)) for s in states] + [Fraction(1)]

    k = len(neighbourhood)
    solution = _solve_square(full_cols, rhs)
    if solution is not None and all(w >= 0 for w in solution):
        return _pack_weights(neighbourhood, solution, belief)
    # Basic feasible solutions: try vertex subsets of decreasing freedom.
    for size in range(1, k + 1):
        for subset in itertools.combinations(range(k), size):
            cols = [full_cols[j] for j in subset]
            partial = _solve_square(cols, rhs)
            if partial is None or any(w < 0 for w in partial):
                continue
            weights = [Fraction(0)] * k
            for j, w in zip(subset, partial):
                weights[j] = w
            return _pack_weights(neighbourhood, weights, belief)
    return None


def _pack_weights(neighbourhood, weights, belief):
    exact = isinstance(belief.probs[0], Fraction)
    kept = [(v, w if exact else float(w)) for v, w in zip(neighbourhood, weights) if w > 0]
    return TriangulationResult(tuple(v for v, _ in kept), tuple(w for _, w in kept))


@dataclass
class Foundation:
    """Per-observation triangulation resolutions eta_z.

    scheme "static" triangulates at eta_z; "dynamic" picks the largest
    resolution <= eta_z whose neighbourhood is smallest.
    """

    resolutions: dict  # observation id -> positive int
    scheme: str = "static"
    eta_init: int = 3
    f_res: float = 2.0
    version: dict = field(default_factory=dict)  # observation id -> extension count

    @staticmethod
    def initial(num_obs, eta_init=3, f_res=2.0, scheme="static"):
        return Foundation({z: eta_init for z in range(num_obs)}, scheme=scheme,
                          eta_init=eta_init, f_res=f_res,
                          version={z: 0 for z in range(num_obs)})

    def resolution(self, z):
        return self.resolutions[z]

    def neighbourhood(self, belief: Belief):
        if self.scheme == "dynamic":
            return dynamic_neighbourhood(belief, self)
        return freudenthal_neighbourhood(belief, self.resolutions[belief.obs])


def dynamic_neighbourhood(belief: Belief, foundation: Foundation):
    """Largest resolution <= eta_z attaining the minimal neighbourhood size."""
    eta_z = foundation.resolutions[belief.obs]
    best = None
    best_size = None
    for eta in range(1, eta_z + 1):
        tri = freudenthal_neighbourhood(belief, eta)
        if best_size is None or len(tri.neighbours) <= best_size:
            best, best_size = tri, len(tri.neighbours)
    return best


class FixedNeighbourhoodFoundation:
    """Foundation from explicit per-observation cells (lists of beliefs).

    The first cell whose convex hull contains the query belief wins; used
    to inject hand-picked foundations in fixtures.
    """

    def __init__(self, cells_by_obs):
        self.cells_by_obs = cells_by_obs
        self.resolutions = {z: 1 for z in cells_by_obs}
        self.version = {z: 0 for z in cells_by_obs}

    def resolution(self, z):
        return self.resolutions.get(z, 1)

    def neighbourhood(self, belief: Belief):
        one = Fraction(1) if isinstance(belief.probs[0], Fraction) else 1.0
        for cell in self.cells_by_obs.get(belief.obs, []):
            for point in cell:
                if point == belief:
                    return TriangulationResult((belief,), (one,))
            tri = vertex_weights_solve(belief, cell)
            if tri is not None:
                return tri
        raise ValueError("no cell contains belief %r" % (belief,))


def score_belief(belief: Belief, tri: TriangulationResult):
    """How well the neighbourhood approximates b: 1 at a vertex, 0 when all
    weights equal 1/n."""
    n = len(belief.support)
    if n == 1:
        return 1
    best = max(tri.weights)
    return (n * best - 1) / (n - 1)


def score_observation(z, triangulated_beliefs, foundation):
    """Observation score: min score over the supplied triangulated beliefs
    with observation z, scaled by the relative resolution of z.

    The caller supplies only beliefs reachable under a near-optimal policy;
    an empty list scores 1 (nothing to refine).
    """
    relevant = [(b, tri) for b, tri in triangulated_beliefs if b.obs == z]
    if not relevant:
        return 1
    max_res = max(foundation.resolutions.values())
    base = min(score_belief(b, tri) for b, tri in relevant)
    return base * foundation.resolution(z) / max_res


def extend_foundation(foundation: Foundation, scores, rho_z, f_z=0.1):
    """Refine all observations scoring <= rho_z by the growth factor.

    Returns (new foundation, refined observation set, next rho_z).
    """
    assert 0 <= rho_z <= 1
    extend = {z for z, score in scores.items() if score <= rho_z}
    resolutions = dict(foundation.resolutions)
    version = dict(foundation.version)
    for z in extend:
        resolutions[z] = math.ceil(resolutions[z] * foundation.f_res)
        version[z] = version.get(z, 0) + 1
    new = Foundation(resolutions, scheme=foundation.scheme,
                     eta_init=foundation.eta_init, f_res=foundation.f_res,
                     version=version)
    return new, extend, rho_z + f_z * (1 - rho_z)
