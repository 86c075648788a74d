"""Benchmark generators and a corpus of small hand-built instances."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .mdp import (
    Agent,
    FiniteMemoryStrategy,
    InvalidModel,
    Mdp,
    MemorylessStrategy,
    MsspInstance,
    Profile,
)


def _mdp(states, actions, edges) -> Mdp:
    """Build an MDP from ``(s, a, t, p)`` tuples."""
    trans: dict = {}
    for s, a, t, p in edges:
        row = trans.setdefault((s, a), {})
        row[t] = row.get(t, 0.0) + p
    return Mdp(states, actions, trans)


# -- grid cities -------------------------------------------------------------

GRID_ACTIONS = ("left", "right", "up", "down")
_MOVES = {"left": (-1, 0), "right": (1, 0), "up": (0, 1), "down": (0, -1)}
GRID_HEIGHT = 5


@dataclass(frozen=True)
class GridConfig:
    length: int
    congestion: float = 0.2
    seed: int = 0
    agents: int = 1

    def __post_init__(self):
        if self.length < 2:
            raise InvalidModel("grid length must be at least 2")
        if not 0.0 <= self.congestion <= 1.0:
            raise InvalidModel("congestion probability must lie in [0, 1]")
        if self.agents < 1:
            raise InvalidModel("at least one agent required")


def grid_state(x: int, y: int) -> str:
    return f"s_{x}_{y}"


def gen_grid(cfg: GridConfig) -> MsspInstance:
    """``length x 5`` city grid; each crossroad is congested with prob ``congestion``.

    Moves out of a congested state succeed with a per-state probability drawn
    uniformly from [1/8, 1/2] and otherwise stay put.  Moves off the grid are
    self-loops.  All agents travel from ``s_1_3`` to ``s_{length}_3``.
    """
    l = cfg.length
    rng = np.random.default_rng(cfg.seed)
    cells = [(x, y) for x in range(1, l + 1) for y in range(1, GRID_HEIGHT + 1)]
    congested = rng.random(len(cells)) < cfg.congestion
    success = rng.uniform(1 / 8, 1 / 2, size=len(cells))
    states = [grid_state(x, y) for x, y in cells]
    edges = []
    congestion = {}
    for n, (x, y) in enumerate(cells):
        s = grid_state(x, y)
        p = float(success[n]) if congested[n] else 1.0
        if congested[n]:
            congestion[s] = p
        for a in GRID_ACTIONS:
            dx, dy = _MOVES[a]
            nx, ny = x + dx, y + dy
            if not (1 <= nx <= l and 1 <= ny <= GRID_HEIGHT):
                edges.append((s, a, s, 1.0))
                continue
            t = grid_state(nx, ny)
            edges.append((s, a, t, p))
            if p < 1.0:
                edges.append((s, a, s, 1.0 - p))
    mdp = _mdp(states, GRID_ACTIONS, edges)
    start, goal = grid_state(1, 3), grid_state(l, 3)
    agents = tuple(Agent(start, frozenset([goal])) for _ in range(cfg.agents))
    meta = {"generator": "grid", "length": l, "congestion": cfg.congestion,
            "seed": cfg.seed, "agents": cfg.agents, "success_prob": congestion}
    return MsspInstance(mdp, agents, meta)


# -- corpus ------------------------------------------------------------------

def corpus_fig1() -> MsspInstance:
    """Two agents at ``s``; ``a`` is a sure 2-step route, ``b`` a fair coin
    between a 1-step and a 4-step route to ``tau``."""
    states = ["s", "p1", "q1", "q2", "q3", "tau"]
    edges = [
        ("s", "a", "p1", 1.0),
        ("s", "b", "tau", 0.5),
        ("s", "b", "q1", 0.5),
        ("p1", "a", "tau", 1.0),
        ("q1", "a", "q2", 1.0),
        ("q2", "a", "q3", 1.0),
        ("q3", "a", "tau", 1.0),
        ("tau", "a", "tau", 1.0),
    ]
    mdp = _mdp(states, ["a", "b"], edges)
    tau = frozenset(["tau"])
    return MsspInstance(mdp, (Agent("s", tau), Agent("s", tau)), {"corpus": "fig1"})


def corpus_gadget() -> Mdp:
    """From ``g0`` the target is hit after 1 or 4 steps (prob 1/2 each); from
    ``g1`` after 2 steps (prob 0.9) or 7 steps (prob 0.1)."""
    states = ["tau", "g0", "g1"] + [f"g'{i}" for i in range(1, 7)]
    edges = [("tau", "a", "tau", 1.0), ("g'1", "a", "tau", 1.0)]
    edges += [(f"g'{i}", "a", f"g'{i - 1}", 1.0) for i in range(2, 7)]
    edges += [("g0", "a", "tau", 0.5), ("g0", "a", "g'3", 0.5),
              ("g1", "a", "g'1", 0.9), ("g1", "a", "g'6", 0.1)]
    return _mdp(states, ["a"], edges)


def gadget_instance(*entries: str) -> MsspInstance:
    """Agents entering the gadget at the given entry states."""
    mdp = corpus_gadget()
    tau = frozenset(["tau"])
    return MsspInstance(mdp, tuple(Agent(e, tau) for e in entries), {"corpus": "gadget"})


def corpus_randomized() -> MsspInstance:
    """Agent 1 walks a sure 4-step path; agent 2 chooses between a one-step
    1/8 gamble (``a``) and a two-step 9/26 gamble (``b``)."""
    states = ["s1", "u1", "u2", "u3", "tau", "s2", "w"]
    edges = [
        ("s1", "a", "u1", 1.0),
        ("u1", "a", "u2", 1.0),
        ("u2", "a", "u3", 1.0),
        ("u3", "a", "tau", 1.0),
        ("tau", "a", "tau", 1.0),
        ("s2", "a", "tau", 1 / 8),
        ("s2", "a", "s2", 7 / 8),
        ("s2", "b", "w", 1.0),
        ("w", "a", "tau", 9 / 26),
        ("w", "a", "s2", 17 / 26),
    ]
    mdp = _mdp(states, ["a", "b"], edges)
    tau = frozenset(["tau"])
    return MsspInstance(mdp, (Agent("s1", tau), Agent("s2", tau)), {"corpus": "randomized"})


def randomized_profile(instance: MsspInstance, p_a: float) -> Profile:
    """Profile where agent 2 plays ``a`` at ``s2`` with probability ``p_a``."""
    mdp = instance.mdp
    first = MemorylessStrategy.from_dict(mdp, {})
    second = MemorylessStrategy.from_dict(mdp, {"s2": {"a": p_a, "b": 1.0 - p_a}})
    return Profile((first, second))


TOP, BOT = "top", "bot"


def corpus_memory_hierarchy(n: int) -> tuple[MsspInstance, FiniteMemoryStrategy]:
    """Instance where ``n + 1`` memory states beat every profile with ``n``.

    Returns the instance and the countdown strategy: starting with memory
    ``n + 1`` it decrements at every visit of ``s`` and plays ``bot`` at ``s``
    once the counter reads 1.
    """
    if n < 1:
        raise InvalidModel("memory bound must be positive")
    r = [f"r{i}" for i in range(2 * n + 3)]
    states = ["s", "q"] + r
    edges = [("s", TOP, "q", 1.0), ("r0", TOP, "r0", 1.0),
             ("q", TOP, "s", 0.5), ("q", TOP, "r0", 0.5),
             ("s", BOT, f"r{2 * n + 2}", 0.75), ("s", BOT, "r0", 0.25)]
    edges += [(f"r{i}", TOP, f"r{i - 1}", 1.0) for i in range(1, 2 * n + 3)]
    mdp = _mdp(states, [TOP, BOT], edges)
    targets = frozenset(["r0"])
    instance = MsspInstance(mdp, (Agent("s", targets), Agent(f"r{2 * n + 2}", targets)),
                            {"corpus": f"memory:{n}"})

    mem = tuple(str(j) for j in range(1, n + 2))
    S, A, M = mdp.n_states, mdp.n_actions, len(mem)
    top, bot = mdp.action_index[TOP], mdp.action_index[BOT]
    s = mdp.state_index["s"]
    nxt = np.zeros((S, M, A))
    nxt[:, :, top] = 1.0
    nxt[s, 0, :] = 0.0
    nxt[s, 0, bot] = 1.0
    upd = np.zeros((S, M, A, M))
    for m in range(M):
        upd[:, m, :, m] = 1.0
    upd[s] = 0.0
    upd[s, 0, :, 0] = 1.0
    for m in range(1, M):
        upd[s, m, :, m - 1] = 1.0
    return instance, FiniteMemoryStrategy(mem, mem[-1], nxt, upd)


def corpus_price_autonomy(rho: float) -> MsspInstance:
    """Two agents whose autonomous optimum is quadratic and coordinated optimum
    linear in ``rho``."""
    if rho <= 1:
        raise InvalidModel("rho must exceed 1")
    states = ["i1", "i2", "Y", "L", "R", "tau"]
    edges = [
        ("i1", "go", "L", 1 - 1 / rho),
        ("i1", "go", "R", 1 / rho),
        ("i2", "go", "Y", 1.0),
        ("Y", "l", "L", 1.0),
        ("Y", "r", "R", 1 / rho),
        ("Y", "r", "tau", 1 - 1 / rho),
        ("L", "go", "tau", rho ** -2),
        ("L", "go", "L", 1 - rho ** -2),
        ("R", "go", "tau", rho ** -4),
        ("R", "go", "R", 1 - rho ** -4),
        ("tau", "go", "tau", 1.0),
    ]
    mdp = _mdp(states, ["go", "l", "r"], edges)
    tau = frozenset(["tau"])
    return MsspInstance(mdp, (Agent("i1", tau), Agent("i2", tau)),
                        {"corpus": f"price:{rho}"})


def price_profile(instance: MsspInstance, p_l: float) -> Profile:
    """Agent 2 plays ``l`` at ``Y`` with probability ``p_l``."""
    mdp = instance.mdp
    return Profile((MemorylessStrategy.from_dict(mdp, {}),
                    MemorylessStrategy.from_dict(mdp, {"Y": {"l": p_l, "r": 1 - p_l}})))


# -- 1-in-3 SAT reduction ----------------------------------------------------

@dataclass(frozen=True)
class OneInThreeFormula:
    """Positive CNF; clause ``j`` is a set of three variable indices."""

    n: int
    clauses: tuple

    def __post_init__(self):
        clauses = tuple(tuple(sorted(c)) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        if self.n < 3:
            raise InvalidModel("formula needs at least 3 variables")
        if len(clauses) != self.n:
            raise InvalidModel("number of clauses must equal number of variables")
        counts = [0] * self.n
        for c in clauses:
            if len(set(c)) != 3:
                raise InvalidModel(f"clause {c} must contain three distinct variables")
            for v in c:
                if not 0 <= v < self.n:
                    raise InvalidModel(f"variable index {v} out of range")
                counts[v] += 1
        if any(c != 3 for c in counts):
            raise InvalidModel("every variable must occur in exactly three clauses")

    def one_in_three(self, assignment) -> bool:
        return all(sum(assignment[v] for v in c) == 1 for c in self.clauses)


def bound_B(n: int) -> float:
    return (10240 * n**6 + 5760 * n**5 + 2944 * n**4 - 96 * n**2 + 60 * n + 59) / (3840 * n**5)


def gen_1in3(formula: OneInThreeFormula) -> tuple[MsspInstance, float]:
    """Two-agent instance whose best value is ``bound_B(n)`` iff the formula is
    1-in-3 satisfiable."""
    n = formula.n
    L = 8 * n
    branch = 1 / (8 * n * n)
    gadget = corpus_gadget()
    states = list(gadget.states) + ["s'", "s''"]
    edges = [(s, "a", t, p) for (s, _), row in gadget.transitions.items() for t, p in row.items()]
    for pre, entry in (("s'", ("g0", "g1")), ("s''", ("g1", "g0"))):
        for i in range(n):
            states.append(f"{pre}_{i}")
            edges.append((pre, "a", f"{pre}_{i}", 1 / n))
            for b in (0, 1):
                chain = [f"{pre}_{i}_{b}_{l}" for l in range(L)]
                states.extend(chain)
                edges.append((f"{pre}_{i}", f"a{b}", chain[0], 1.0))
                for l in range(L - 1):
                    if l == 8 * i:
                        edges.append((chain[l], "a", entry[b], 1 - branch))
                        edges.append((chain[l], "a", chain[l + 1], branch))
                    else:
                        edges.append((chain[l], "a", chain[l + 1], 1.0))
                edges.append((chain[L - 1], "a", f"s_{i}_{b}", 1.0))
    for b in (0, 1):
        states.extend(f"s_{i}_{b}" for i in range(n))
    for j in range(n):
        for b in (0, 1):
            states.extend(f"s_{j}_{b}_{l}" for l in range(8 * j + 1))
    for i in range(n):
        for j, clause in enumerate(formula.clauses):
            if i in clause:
                for b in (0, 1):
                    edges.append((f"s_{i}_{b}", "a", f"s_{j}_{b}_0", 1 / 3))
    for j in range(n):
        for b in (0, 1):
            for l in range(8 * j):
                edges.append((f"s_{j}_{b}_{l}", "a", f"s_{j}_{b}_{l + 1}", 1.0))
            edges.append((f"s_{j}_{b}_{8 * j}", "a", f"g{b}", 1.0))
    mdp = _mdp(states, ["a", "a0", "a1"], edges)
    tau = frozenset(["tau"])
    B = bound_B(n)
    meta = {"generator": "1in3", "n": n, "clauses": [list(c) for c in formula.clauses], "B": B}
    return MsspInstance(mdp, (Agent("s'", tau), Agent("s''", tau)), meta), B


def assignment_profile(instance: MsspInstance, agent1, agent2=None) -> Profile:
    """Deterministic profile; agent 1 plays ``a1`` at ``s'_i`` iff ``agent1[i]``,
    likewise agent 2 at ``s''_i`` (defaults to the consistent choice)."""
    agent2 = agent1 if agent2 is None else agent2
    mdp = instance.mdp
    s1 = MemorylessStrategy.deterministic(
        mdp, {f"s'_{i}": f"a{int(v)}" for i, v in enumerate(agent1)})
    s2 = MemorylessStrategy.deterministic(
        mdp, {f"s''_{i}": f"a{int(v)}" for i, v in enumerate(agent2)})
    return Profile((s1, s2))


def all_assignments(n: int):
    return list(product((0, 1), repeat=n))
