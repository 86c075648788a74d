"""Explicit MDPs, strategies, profiles and induced Markov chains.

States and actions are arbitrary hashable identifiers (strings in the JSON
format) mapped to dense indices in their declared order.  Transition data is
kept as a sparse mapping ``(state, action) -> {successor: prob}``; a missing
``(state, action)`` entry means the action is disabled in that state.  Dense
views (``P[a, s, t]``) are built once on demand.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np

TOL = 1e-9

State = Hashable
Action = Hashable


class InvalidModel(ValueError):
    """An MDP, instance or strategy violates one of its invariants."""


class Mdp:
    """Finite MDP ``(S, Act, P)`` with explicitly listed transitions."""

    def __init__(
        self,
        states: Sequence[State],
        actions: Sequence[Action],
        transitions: Mapping[tuple[State, Action], Mapping[State, float]],
    ):
        self.states = tuple(states)
        self.actions = tuple(actions)
        if len(set(self.states)) != len(self.states):
            raise InvalidModel("duplicate state identifiers")
        if len(set(self.actions)) != len(self.actions):
            raise InvalidModel("duplicate action identifiers")
        self.state_index = {s: i for i, s in enumerate(self.states)}
        self.action_index = {a: i for i, a in enumerate(self.actions)}
        trans: dict[tuple[State, Action], dict[State, float]] = {}
        for (s, a), dist in transitions.items():
            if s not in self.state_index:
                raise InvalidModel(f"transition from unknown state {s!r}")
            if a not in self.action_index:
                raise InvalidModel(f"transition with unknown action {a!r}")
            row = {}
            for t, p in dist.items():
                if t not in self.state_index:
                    raise InvalidModel(f"transition to unknown state {t!r}")
                if p != 0:
                    row[t] = float(p)
            trans[(s, a)] = row
        self.transitions = trans

    def __repr__(self) -> str:
        return f"Mdp({len(self.states)} states, {len(self.actions)} actions)"

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @cached_property
    def P(self) -> np.ndarray:
        """Dense transition tensor of shape ``(n_actions, n_states, n_states)``."""
        P = np.zeros((self.n_actions, self.n_states, self.n_states))
        for (s, a), row in self.transitions.items():
            i, j = self.state_index[s], self.action_index[a]
            for t, p in row.items():
                P[j, i, self.state_index[t]] = p
        P.setflags(write=False)
        return P

    @cached_property
    def enabled(self) -> np.ndarray:
        """Boolean mask of shape ``(n_states, n_actions)``."""
        en = np.zeros((self.n_states, self.n_actions), dtype=bool)
        for s, a in self.transitions:
            en[self.state_index[s], self.action_index[a]] = True
        en.setflags(write=False)
        return en

    def en(self, s: State) -> list[Action]:
        """Enabled actions of ``s`` in action order."""
        row = self.enabled[self.state_index[s]]
        return [a for a, on in zip(self.actions, row) if on]

    def state_mask(self, states: Iterable[State]) -> np.ndarray:
        mask = np.zeros(self.n_states, dtype=bool)
        for s in states:
            if s not in self.state_index:
                raise InvalidModel(f"unknown state {s!r}")
            mask[self.state_index[s]] = True
        return mask


@dataclass(frozen=True)
class Agent:
    init: State
    targets: frozenset


@dataclass(frozen=True)
class MsspInstance:
    """An MDP with ``k`` agents, each with an initial state and a target set."""

    mdp: Mdp
    agents: tuple[Agent, ...]
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        agents = tuple(
            ag if isinstance(ag, Agent) else Agent(ag[0], frozenset(ag[1]))
            for ag in self.agents
        )
        object.__setattr__(self, "agents", agents)
        if not agents:
            raise InvalidModel("an instance needs at least one agent")
        for i, ag in enumerate(agents):
            if ag.init not in self.mdp.state_index:
                raise InvalidModel(f"agent {i}: unknown initial state {ag.init!r}")
            if not ag.targets:
                raise InvalidModel(f"agent {i}: empty target set")
            for t in ag.targets:
                if t not in self.mdp.state_index:
                    raise InvalidModel(f"agent {i}: unknown target {t!r}")
            if ag.init in ag.targets:
                raise InvalidModel(f"agent {i}: initial state is a target")

    @property
    def k(self) -> int:
        return len(self.agents)

    def init_index(self, i: int) -> int:
        return self.mdp.state_index[self.agents[i].init]

    def target_mask(self, i: int) -> np.ndarray:
        return self.mdp.state_mask(self.agents[i].targets)

    def sink_index(self, i: int) -> int:
        """Designated sink ``tau_i``: the first target in state order."""
        return int(np.flatnonzero(self.target_mask(i))[0])


@dataclass(frozen=True, eq=False)
class MemorylessStrategy:
    """Per-state action distributions as an ``(n_states, n_actions)`` array."""

    probs: np.ndarray

    @classmethod
    def from_dict(cls, mdp: Mdp, decision: Mapping[State, Mapping[Action, float]],
                  default: str = "first") -> "MemorylessStrategy":
        """Build from ``state -> action -> prob``.

        States missing from ``decision`` get the Dirac distribution on their
        first enabled action (``default="first"``) or the uniform distribution
        over enabled actions (``default="uniform"``).
        """
        probs = np.zeros((mdp.n_states, mdp.n_actions))
        for i in range(mdp.n_states):
            en = np.flatnonzero(mdp.enabled[i])
            if default == "uniform":
                probs[i, en] = 1.0 / len(en)
            elif len(en):
                probs[i, en[0]] = 1.0
        for s, dist in decision.items():
            if s not in mdp.state_index:
                raise InvalidModel(f"strategy mentions unknown state {s!r}")
            i = mdp.state_index[s]
            probs[i] = 0.0
            for a, p in dist.items():
                if a not in mdp.action_index:
                    raise InvalidModel(f"strategy mentions unknown action {a!r}")
                probs[i, mdp.action_index[a]] = p
        strat = cls(probs)
        check_strategy(mdp, strat)
        return strat

    @classmethod
    def deterministic(cls, mdp: Mdp, choice: Mapping[State, Action]) -> "MemorylessStrategy":
        return cls.from_dict(mdp, {s: {a: 1.0} for s, a in choice.items()})

    @classmethod
    def uniform(cls, mdp: Mdp) -> "MemorylessStrategy":
        return cls.from_dict(mdp, {}, default="uniform")

    def to_dict(self, mdp: Mdp) -> dict:
        out = {}
        for i, s in enumerate(mdp.states):
            out[s] = {mdp.actions[j]: float(self.probs[i, j])
                      for j in np.flatnonzero(self.probs[i] > 0)}
        return out

    def is_deterministic(self) -> bool:
        return bool(np.all(np.isclose(self.probs.max(axis=1), 1.0, atol=TOL)))


@dataclass(frozen=True, eq=False)
class FiniteMemoryStrategy:
    """Strategy ``(init_mem, next, update)`` over a finite memory set.

    ``next[s, m, a]`` is the probability of action ``a`` in configuration
    ``(s, m)``; ``update[s, m, a, m2]`` the probability of moving to memory
    ``m2`` after playing ``a`` there.
    """

    mem: tuple
    init_mem: Hashable
    next: np.ndarray
    update: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mem", tuple(self.mem))
        if self.init_mem not in self.mem:
            raise InvalidModel("initial memory element not in the memory set")

    @property
    def n_mem(self) -> int:
        return len(self.mem)

    @property
    def init_mem_index(self) -> int:
        return self.mem.index(self.init_mem)


Strategy = MemorylessStrategy | FiniteMemoryStrategy


@dataclass(frozen=True)
class Profile:
    """A ``k``-tuple of single-agent strategies."""

    strategies: tuple

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))

    def __len__(self) -> int:
        return len(self.strategies)

    def __iter__(self):
        return iter(self.strategies)

    def __getitem__(self, i):
        return self.strategies[i]

    @property
    def memoryless(self) -> bool:
        return all(isinstance(s, MemorylessStrategy) for s in self.strategies)


@dataclass(frozen=True, eq=False)
class MarkovChain:
    states: tuple
    matrix: np.ndarray


@dataclass
class ValidationReport:
    problems: list[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return not self.problems

    def __iter__(self):
        return iter(self.problems)

    def __len__(self) -> int:
        return len(self.problems)


def validate_mdp(mdp: Mdp) -> ValidationReport:
    """List every row-sum violation, negative mass and action-less state."""
    report = ValidationReport()
    has_action = set()
    for (s, a), row in mdp.transitions.items():
        has_action.add(s)
        for t, p in row.items():
            if p < 0 or p > 1:
                report.problems.append(
                    f"P({s!r},{a!r},{t!r}) = {p} outside [0, 1]")
        total = sum(row.values())
        if abs(total - 1.0) > TOL:
            report.problems.append(
                f"row sum of ({s!r},{a!r}) is {total}, expected 1")
    for s in mdp.states:
        if s not in has_action:
            report.problems.append(f"state {s!r} has no enabled action")
    return report


def check_strategy(mdp: Mdp, strat: Strategy) -> None:
    """Raise :class:`InvalidModel` unless ``strat`` is a valid strategy for ``mdp``."""
    if isinstance(strat, MemorylessStrategy):
        probs = strat.probs
        if probs.shape != (mdp.n_states, mdp.n_actions):
            raise InvalidModel(f"strategy shape {probs.shape} does not match the MDP")
        rows = probs
        en = mdp.enabled
    else:
        n = strat.n_mem
        if strat.next.shape != (mdp.n_states, n, mdp.n_actions):
            raise InvalidModel("next table shape does not match the MDP")
        if strat.update.shape != (mdp.n_states, n, mdp.n_actions, n):
            raise InvalidModel("update table shape does not match the MDP")
        rows = strat.next
        en = np.broadcast_to(mdp.enabled[:, None, :], rows.shape)
        upd = strat.update
        if np.any(upd < -TOL):
            raise InvalidModel("negative memory-update probability")
        sums = upd.sum(axis=-1)
        if np.any(np.abs(sums - 1.0) > TOL):
            raise InvalidModel("memory-update distribution does not sum to 1")
    if np.any(rows < -TOL):
        raise InvalidModel("negative action probability")
    if np.any(rows[~en] > TOL):
        raise InvalidModel("strategy puts mass on a disabled action")
    if np.any(np.abs(rows.sum(axis=-1) - 1.0) > TOL):
        raise InvalidModel("action distribution does not sum to 1")


def check_profile(instance: MsspInstance, profile: Profile) -> None:
    if len(profile) != instance.k:
        raise InvalidModel(
            f"profile has {len(profile)} strategies, instance has {instance.k} agents")
    for strat in profile:
        check_strategy(instance.mdp, strat)


def induced_chain(mdp: Mdp, strat: MemorylessStrategy) -> MarkovChain:
    """Chain with ``A(s, t) = sum_a strat(s)(a) * P(s, a, t)``."""
    check_strategy(mdp, strat)
    A = np.einsum("sa,ast->st", strat.probs, mdp.P)
    return MarkovChain(mdp.states, A)


def memory_chain(mdp: Mdp, strat: FiniteMemoryStrategy) -> MarkovChain:
    """Chain over configurations ``(s, m)``, indexed ``s * n_mem + m``.

    ``A((s,m),(t,m')) = sum_a next(s,m)(a) * P(s,a,t) * update((s,m),a)(m')``.
    """
    check_strategy(mdp, strat)
    n = strat.n_mem
    S = mdp.n_states
    A = np.einsum("sma,ast,smau->smtu", strat.next, mdp.P, strat.update)
    states = tuple((s, m) for s in mdp.states for m in strat.mem)
    return MarkovChain(states, A.reshape(S * n, S * n))


def reachable(mdp: Mdp, start: State) -> set:
    """States reachable from ``start`` along positive-probability edges."""
    if start not in mdp.state_index:
        raise InvalidModel(f"unknown state {start!r}")
    succ: dict[State, set] = {}
    for (s, _), row in mdp.transitions.items():
        succ.setdefault(s, set()).update(t for t, p in row.items() if p > 0)
    seen = {start}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for t in succ.get(s, ()):
            if t not in seen:
                seen.add(t)
                queue.append(t)
    return seen
