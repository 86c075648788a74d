"""Folding a finite memory set into the MDP.

The lifted MDP has states ``(s, m)`` and actions ``(a, m')``: playing
``(a, m')`` moves like ``a`` and sets the memory to ``m'``.  A finite-memory
strategy on the original MDP and a memoryless strategy on the lifted one
translate into each other with identical induced chains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coorhit import ProductTooLarge, product_cap
from .mdp import (
    Agent,
    FiniteMemoryStrategy,
    InvalidModel,
    Mdp,
    MemorylessStrategy,
    MsspInstance,
    Profile,
    check_strategy,
)


def mangle(x, m) -> str:
    return f"{x}@{m}"


@dataclass(frozen=True, eq=False)
class LiftedMdp:
    mdp: Mdp
    base: Mdp
    mem: tuple

    @property
    def n_mem(self) -> int:
        return len(self.mem)

    def state(self, s, m):
        return self.mdp.states[self.base.state_index[s] * self.n_mem + self.mem.index(m)]

    def action(self, a, m):
        return self.mdp.actions[self.base.action_index[a] * self.n_mem + self.mem.index(m)]

    def lower_state(self, lifted_state) -> tuple:
        i = self.mdp.state_index[lifted_state]
        return self.base.states[i // self.n_mem], self.mem[i % self.n_mem]

    def lower_action(self, lifted_action) -> tuple:
        j = self.mdp.action_index[lifted_action]
        return self.base.actions[j // self.n_mem], self.mem[j % self.n_mem]


def lift_mdp(mdp: Mdp, mem_size: int | None = None, mem=None,
             cap: int | None = None) -> LiftedMdp:
    """Lift with memory ``mem`` (default ``"0", ..., "n-1"``)."""
    if mem is None:
        if mem_size is None or mem_size < 1:
            raise InvalidModel("memory size must be at least 1")
        mem = tuple(str(m) for m in range(mem_size))
    mem = tuple(mem)
    n = len(mem)
    cap = product_cap() if cap is None else cap
    if mdp.n_states * n > cap:
        raise ProductTooLarge(f"lifted MDP too large: {mdp.n_states * n} states exceeds cap {cap}")
    states = [mangle(s, m) for s in mdp.states for m in mem]
    actions = [mangle(a, m) for a in mdp.actions for m in mem]
    trans = {}
    for (s, a), row in mdp.transitions.items():
        for m in mem:
            for m2 in mem:
                trans[(mangle(s, m), mangle(a, m2))] = {mangle(t, m2): p for t, p in row.items()}
    return LiftedMdp(Mdp(states, actions, trans), mdp, mem)


def _check_mem(strat: FiniteMemoryStrategy, lifted: LiftedMdp) -> None:
    if tuple(strat.mem) != lifted.mem:
        raise InvalidModel(
            f"memory set {strat.mem} does not match the lifted memory {lifted.mem}")


def lift_strategy(strat: FiniteMemoryStrategy, lifted: LiftedMdp) -> MemorylessStrategy:
    """``lifted(s,m)(a,m') = next(s,m)(a) * update(s,m,a)(m')``."""
    _check_mem(strat, lifted)
    check_strategy(lifted.base, strat)
    S, n, A = strat.next.shape
    probs = strat.next[:, :, :, None] * strat.update  # (s, m, a, m')
    return MemorylessStrategy(probs.reshape(S * n, A * n))


def lower_strategy(strat: MemorylessStrategy, lifted: LiftedMdp, init_mem=None
                   ) -> FiniteMemoryStrategy:
    """Marginal next-action rule and conditional memory update.

    Where an action has zero probability the update is uniform; it is never
    used.
    """
    check_strategy(lifted.mdp, strat)
    n = lifted.n_mem
    S, A = lifted.base.n_states, lifted.base.n_actions
    joint = strat.probs.reshape(S, n, A, n)
    nxt = joint.sum(axis=3)
    update = np.full((S, n, A, n), 1.0 / n)
    pos = nxt > 0
    update[pos] = joint[pos] / nxt[pos][:, None]
    init_mem = lifted.mem[0] if init_mem is None else init_mem
    return FiniteMemoryStrategy(lifted.mem, init_mem, nxt, update)


def lift_instance(instance: MsspInstance, lifted: LiftedMdp, init_mem=None) -> MsspInstance:
    """Agents start in ``(init, init_mem)`` and aim at ``targets x Mem``."""
    m0 = lifted.mem[0] if init_mem is None else init_mem
    mems = m0 if isinstance(m0, (list, tuple)) else [m0] * instance.k
    agents = tuple(
        Agent(lifted.state(ag.init, mems[i]),
              frozenset(lifted.state(t, m) for t in ag.targets for m in lifted.mem))
        for i, ag in enumerate(instance.agents))
    meta = dict(instance.metadata)
    meta["lifted_mem"] = list(lifted.mem)
    return MsspInstance(lifted.mdp, agents, meta)


def lift_profile(instance: MsspInstance, profile: Profile, mem=None
                 ) -> tuple[MsspInstance, Profile]:
    """Lift a profile of finite-memory strategies sharing one memory set.

    Memoryless strategies in the profile are promoted to one-element memory
    first only when ``mem`` has a single element.
    """
    mem = tuple(mem) if mem is not None else next(
        s.mem for s in profile if isinstance(s, FiniteMemoryStrategy))
    lifted = lift_mdp(instance.mdp, mem=mem)
    strategies, inits = [], []
    for strat in profile:
        if isinstance(strat, MemorylessStrategy):
            if len(mem) != 1:
                raise InvalidModel("memoryless strategy in a profile lifted with larger memory")
            strat = promote(strat, mem[0])
        strategies.append(lift_strategy(strat, lifted))
        inits.append(strat.init_mem)
    return lift_instance(instance, lifted, inits), Profile(tuple(strategies))


def promote(strat: MemorylessStrategy, m="0") -> FiniteMemoryStrategy:
    S, A = strat.probs.shape
    return FiniteMemoryStrategy((m,), m, strat.probs[:, None, :], np.ones((S, 1, A, 1)))


__all__ = [
    "LiftedMdp",
    "lift_instance",
    "lift_mdp",
    "lift_profile",
    "lift_strategy",
    "lower_strategy",
    "mangle",
    "promote",
]
