"""Single-agent stochastic shortest path.

The optimal expected time to reach ``T`` is the least fixed point of the
Bellman system ``x_s = min_a 1 + sum_t P(s,a,t) x_t`` over the solvable core
``S_R``; it coincides with the optimum of the usual LP formulation.  It is
computed by policy iteration with exact linear solves per policy.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .chains import hitting_times
from .factored import FactoredSsp
from .mdp import InvalidModel, Mdp, MemorylessStrategy, check_strategy, induced_chain


class Status(enum.Enum):
    FINITE = "finite"
    INFINITE = "infinite"


@dataclass(frozen=True)
class ReachableCore:
    states: frozenset
    enabled: dict  # state -> tuple of actions with full support inside the core


@dataclass(frozen=True)
class SspSolution:
    values: dict       # core state -> optimal expected time
    strategy: MemorylessStrategy
    status: Status
    value: float       # optimal expected time from the initial state


@dataclass(frozen=True)
class EvalResult:
    value: float
    support: frozenset


def _model(mdp: Mdp, T) -> FactoredSsp:
    return FactoredSsp(mdp.P, mdp.enabled, [mdp.state_mask(T)])


def compute_core(mdp: Mdp, T) -> ReachableCore:
    """The solvable core ``S_R`` and its safe actions ``En_R``."""
    C, safe, _ = _model(mdp, T).core()
    states = frozenset(mdp.states[i] for i in np.flatnonzero(C))
    enabled = {
        mdp.states[i]: tuple(mdp.actions[j] for j in np.flatnonzero(safe[i]))
        for i in np.flatnonzero(C)
    }
    return ReachableCore(states, enabled)


def _check_query(mdp: Mdp, init, T) -> None:
    if not T:
        raise InvalidModel("target set is empty")
    if init not in mdp.state_index:
        raise InvalidModel(f"unknown initial state {init!r}")
    if init in T:
        raise InvalidModel("initial state is a target")


def solve_ssp(mdp: Mdp, init, T) -> SspSolution:
    """Optimal memoryless deterministic strategy and values for reaching ``T``."""
    T = frozenset(T)
    _check_query(mdp, init, T)
    values, policy, C = _model(mdp, T).solve()
    choice = {}
    for i in np.flatnonzero(policy >= 0):
        choice[mdp.states[i]] = mdp.actions[policy[i]]
    strategy = MemorylessStrategy.deterministic(mdp, choice)
    v = {mdp.states[i]: float(values[i]) for i in np.flatnonzero(C)}
    start = values[mdp.state_index[init]]
    status = Status.FINITE if np.isfinite(start) else Status.INFINITE
    return SspSolution(v, strategy, status, float(start))


def eval_strategy(mdp: Mdp, strat: MemorylessStrategy, init, T) -> EvalResult:
    """Expected time for a memoryless strategy to reach ``T`` from ``init``."""
    T = frozenset(T)
    _check_query(mdp, init, T)
    check_strategy(mdp, strat)
    chain = induced_chain(mdp, strat)
    times, support = hitting_times(chain.matrix, mdp.state_mask(T))
    supp = frozenset(mdp.states[i] for i in np.flatnonzero(support))
    return EvalResult(float(times[mdp.state_index[init]]), supp)
