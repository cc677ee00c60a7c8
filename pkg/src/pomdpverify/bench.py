"""Deterministic desk-scale benchmark model generators.

Each family produces a small partially observable grid/line world in the
explicit model format; the same (family, parameters, seed) always yields a
byte-identical file.
"""
from __future__ import annotations

import random

FAMILIES = ("grid-avoid", "maze-like", "refuel-lite", "rocks-lite")


def _prob(x):
    """Format a float probability with enough digits to round-trip."""
    return repr(float(x))


def grid_avoid(n=3, slip=0.1, seed=0):
    """n x n grid with hidden position, random trap cells, and a goal in
    the far corner; moves slip (stay put) with the given probability."""
    assert n >= 1
    rng = random.Random(seed)
    goal = n * n
    bad = n * n + 1
    cells = [(r, c) for r in range(n) for c in range(n)]
    candidates = [(r, c) for r, c in cells if (r, c) not in ((0, 0), (n - 1, n - 1))]
    traps = set()
    if candidates:
        k = min(len(candidates), max(0, n - 1))
        traps = set(rng.sample(candidates, k))

    def sid(r, c):
        return r * n + c

    moves = [("up", -1, 0), ("down", 1, 0), ("left", 0, -1), ("right", 0, 1)]
    lines = ["pomdp %d 4 3" % (n * n + 2), "init 0"]
    for r, c in cells:
        lines.append("obs %d 0" % sid(r, c))
    lines.append("obs %d 1" % goal)
    lines.append("obs %d 2" % bad)

    for r, c in cells:
        s = sid(r, c)
        for name, dr, dc in moves:
            if (r, c) == (n - 1, n - 1):
                lines.append("tr %d %s %d 1" % (s, name, goal))
                continue
            if (r, c) in traps:
                lines.append("tr %d %s %d 1" % (s, name, bad))
                continue
            nr, nc = max(0, min(n - 1, r + dr)), max(0, min(n - 1, c + dc))
            dest = sid(nr, nc)
            if dest == s or slip == 0:
                lines.append("tr %d %s %d 1" % (s, name, dest))
            else:
                lines.append("tr %d %s %d %s" % (s, name, dest, _prob(1 - slip)))
                lines.append("tr %d %s %d %s" % (s, name, s, _prob(slip)))
    for sink in (goal, bad):
        for name, _, _ in moves:
            lines.append("tr %d %s %d 1" % (sink, name, sink))
    lines.append("label target %d" % goal)
    lines.append("label avoid %d" % bad)
    lines.append("spec max Preachavoid")
    return "\n".join(lines) + "\n"


def maze_like(n=3, density=0.3, seed=0):
    """n x n grid with random internal walls; the observation is the local
    wall bitmask, the position itself is hidden."""
    assert n >= 1
    rng = random.Random(seed)
    walls = set()
    for r in range(n):
        for c in range(n):
            if c + 1 < n and rng.random() < density:
                walls.add(((r, c), (r, c + 1)))
            if r + 1 < n and rng.random() < density:
                walls.add(((r, c), (r + 1, c)))

    def blocked(a, b):
        return (a, b) in walls or (b, a) in walls

    def sid(r, c):
        return r * n + c

    moves = [("up", -1, 0), ("down", 1, 0), ("left", 0, -1), ("right", 0, 1)]

    def mask(r, c):
        bits = 0
        for i, (_, dr, dc) in enumerate(moves):
            nr, nc = r + dr, c + dc
            if not (0 <= nr < n and 0 <= nc < n) or blocked((r, c), (nr, nc)):
                bits |= 1 << i
        return bits

    masks = sorted({mask(r, c) for r in range(n) for c in range(n)
                    if (r, c) != (n - 1, n - 1)})
    obs_of_mask = {m: i for i, m in enumerate(masks)}
    goal = n * n
    goal_obs = len(masks)

    lines = ["pomdp %d 4 %d" % (n * n + 1, goal_obs + 1), "init 0"]
    for r in range(n):
        for c in range(n):
            if (r, c) == (n - 1, n - 1):
                lines.append("obs %d %d" % (sid(r, c), goal_obs))
            else:
                lines.append("obs %d %d" % (sid(r, c), obs_of_mask[mask(r, c)]))
    lines.append("obs %d %d" % (goal, goal_obs))
    for r in range(n):
        for c in range(n):
            s = sid(r, c)
            if (r, c) == (n - 1, n - 1):
                for name, _, _ in moves:
                    lines.append("tr %d %s %d 1" % (s, name, goal))
                continue
            for name, dr, dc in moves:
                nr, nc = r + dr, c + dc
                if not (0 <= nr < n and 0 <= nc < n) or blocked((r, c), (nr, nc)):
                    nr, nc = r, c
                lines.append("tr %d %s %d 1" % (s, name, sid(nr, nc)))
    for name, _, _ in moves:
        lines.append("tr %d %s %d 1" % (goal, name, goal))
    lines.append("label target %d" % goal)
    lines.append("spec max Preach")
    return "\n".join(lines) + "\n"


def refuel_lite(n=4, energy=3, noise=0.1, seed=0):
    """Line world with hidden position and observable energy; moving costs
    one energy unit, recharge works only at hidden station positions."""
    assert n >= 2 and energy >= 1
    rng = random.Random(seed)
    stations = {0}
    for p in range(1, n - 1):
        if rng.random() < 0.4:
            stations.add(p)

    levels = energy + 1

    def sid(pos, e):
        return pos * levels + e

    goal = n * levels
    dead = n * levels + 1

    lines = ["pomdp %d 3 %d" % (n * levels + 2, levels + 2), "init %d" % sid(0, energy)]
    for pos in range(n):
        for e in range(levels):
            lines.append("obs %d %d" % (sid(pos, e), e))
    lines.append("obs %d %d" % (goal, levels))
    lines.append("obs %d %d" % (dead, levels + 1))

    def move_line(s, name, dest_pos, e):
        """Transitions for a move that costs one energy unit."""
        if e == 0:
            lines.append("tr %d %s %d 1" % (s, name, dead))
            return
        good = goal if dest_pos == n - 1 else sid(dest_pos, e - 1)
        stay = sid(s // levels, e - 1)
        if noise == 0:
            lines.append("tr %d %s %d 1" % (s, name, good))
        else:
            lines.append("tr %d %s %d %s" % (s, name, good, _prob(1 - noise)))
            lines.append("tr %d %s %d %s" % (s, name, stay, _prob(noise)))

    for pos in range(n):
        for e in range(levels):
            s = sid(pos, e)
            move_line(s, "right", min(pos + 1, n - 1), e)
            move_line(s, "left", max(pos - 1, 0), e)
            if pos in stations:
                lines.append("tr %d recharge %d 1" % (s, sid(pos, energy)))
            else:
                lines.append("tr %d recharge %d 1" % (s, s))
    for sink in (goal, dead):
        for name in ("right", "left", "recharge"):
            lines.append("tr %d %s %d 1" % (sink, name, sink))
    lines.append("label target %d" % goal)
    lines.append("label avoid %d" % dead)
    lines.append("spec max Preachavoid")
    return "\n".join(lines) + "\n"


def rocks_lite(n=3, noise=0.2, seed=0):
    """Line world with one rock of hidden quality; sampling at the rock
    yields a noisy reading, finishing at the end wins only on a good rock."""
    assert n >= 2
    rng = random.Random(seed)
    rock = rng.randrange(0, n - 1)
    readings = ("none", "good", "bad")

    def sid(pos, quality, reading):
        return (pos * 2 + quality) * 3 + readings.index(reading)

    base = n * 2 * 3
    start, win, lose = base, base + 1, base + 2
    num_states = base + 3

    def obs(pos, reading):
        return pos * 3 + readings.index(reading)

    num_obs = n * 3 + 3
    lines = ["pomdp %d 4 %d" % (num_states, num_obs), "init %d" % start]
    for pos in range(n):
        for quality in (0, 1):
            for reading in readings:
                lines.append("obs %d %d" % (sid(pos, quality, reading), obs(pos, reading)))
    lines.append("obs %d %d" % (start, n * 3))
    lines.append("obs %d %d" % (win, n * 3 + 1))
    lines.append("obs %d %d" % (lose, n * 3 + 2))

    actions = ("left", "right", "sample", "finish")
    for name in actions:
        lines.append("tr %d %s %d 0.5" % (start, name, sid(0, 1, "none")))
        lines.append("tr %d %s %d 0.5" % (start, name, sid(0, 0, "none")))
    for pos in range(n):
        for quality in (0, 1):
            for reading in readings:
                s = sid(pos, quality, reading)
                lines.append("tr %d left %d 1" % (s, sid(max(pos - 1, 0), quality, reading)))
                lines.append("tr %d right %d 1" % (s, sid(min(pos + 1, n - 1), quality, reading)))
                if pos == rock:
                    correct = "good" if quality else "bad"
                    wrong = "bad" if quality else "good"
                    lines.append("tr %d sample %d %s" % (
                        s, sid(pos, quality, correct), _prob(1 - noise)))
                    lines.append("tr %d sample %d %s" % (
                        s, sid(pos, quality, wrong), _prob(noise)))
                else:
                    lines.append("tr %d sample %d 1" % (s, s))
                if pos == n - 1:
                    lines.append("tr %d finish %d 1" % (s, win if quality else lose))
                else:
                    lines.append("tr %d finish %d 1" % (s, s))
    for sink in (win, lose):
        for name in actions:
            lines.append("tr %d %s %d 1" % (sink, name, sink))
    lines.append("label target %d" % win)
    lines.append("label avoid %d" % lose)
    lines.append("spec max Preachavoid")
    return "\n".join(lines) + "\n"


def generate_benchmark(family, **params):
    """Model text for the named family; deterministic per parameter set."""
    if family == "grid-avoid":
        return grid_avoid(**params)
    if family == "maze-like":
        return maze_like(**params)
    if family == "refuel-lite":
        return refuel_lite(**params)
    if family == "rocks-lite":
        return rocks_lite(**params)
    raise ValueError("unknown family %r; choose from %s" % (family, ", ".join(FAMILIES)))
