"""Evaluation of autonomous memoryless profiles.

Agents of a profile move independently, so ``P[MHit > l]`` is the product
of the per-agent survival probabilities ``1 - Abar_i^l(init_i, tau_i)``,
where ``Abar_i`` is the agent's induced chain with all targets merged into a
sink.  Summing the products over ``l`` gives the expected value; the
truncated sum is a lower bound whose gap is controlled per agent by the
tail of its own hitting time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .chains import hitting_times
from .mdp import (
    FiniteMemoryStrategy,
    InvalidModel,
    Mdp,
    MemorylessStrategy,
    MsspInstance,
    Profile,
    check_profile,
    induced_chain,
    memory_chain,
)

EXACT_CAP = 200_000
MAX_RHO = 2 ** 40


class InfiniteValue(ArithmeticError):
    """No agent reaches its target almost surely, so no truncation bound applies."""


@dataclass(frozen=True, eq=False)
class AbsorbedChain:
    matrix: np.ndarray   # row-stochastic, targets are identity rows
    sink: int            # index of tau
    targets: np.ndarray  # bool mask of the agent's targets
    states: tuple

    def index(self, state) -> int:
        return self.states.index(state)


@dataclass(frozen=True)
class TruncationBound:
    rho: int
    bound: float
    witness_agent: int


def absorb(A: np.ndarray, targets: np.ndarray, sink: int) -> np.ndarray:
    """Merge every target column into ``sink`` and make target rows identity rows.

    Works on a single ``(S, S)`` matrix or a stack ``(..., S, S)``.
    """
    out = np.array(A, dtype=float, copy=True)
    out[..., sink] = out[..., targets].sum(axis=-1)
    others = targets.copy()
    others[sink] = False
    out[..., others] = 0.0
    out[..., targets, :] = 0.0
    idx = np.flatnonzero(targets)
    out[..., idx, idx] = 1.0
    return out


def build_abar(mdp: Mdp, strat: MemorylessStrategy, T) -> AbsorbedChain:
    targets = mdp.state_mask(T)
    if not targets.any():
        raise InvalidModel("target set is empty")
    sink = int(np.flatnonzero(targets)[0])
    A = induced_chain(mdp, strat).matrix
    return AbsorbedChain(absorb(A, targets, sink), sink, targets, tuple(mdp.states))


def hit_cdf(ac: AbsorbedChain, init, length: int) -> float:
    """``Prob[Hit <= length]``: the ``(init, tau)`` entry of ``Abar^length``."""
    if length < 0:
        raise ValueError("length must be nonnegative")
    v = np.zeros(len(ac.states))
    v[ac.index(init)] = 1.0
    for _ in range(length):
        v = v @ ac.matrix
    return float(v[ac.sink])


# Shared forward pass.  The AutoHit objective calls the same functions so the
# two values agree bit for bit.

def instance_abars(instance: MsspInstance, probs: np.ndarray) -> np.ndarray:
    """Absorbed matrices ``(k, S, S)`` for per-agent strategy tables ``(k, S, A)``."""
    P = instance.mdp.P
    out = np.empty((instance.k, instance.mdp.n_states, instance.mdp.n_states))
    for i in range(instance.k):
        A = np.einsum("sa,ast->st", probs[i], P)
        out[i] = absorb(A, instance.target_mask(i), instance.sink_index(i))
    return out


def forward_rows(abars: np.ndarray, inits: np.ndarray, length: int) -> np.ndarray:
    """Distributions ``V[l, i] = e_init_i Abar_i^l`` for ``l < length``."""
    k, S, _ = abars.shape
    V = np.zeros((length, k, S))
    if length == 0:
        return V
    V[0, np.arange(k), inits] = 1.0
    for l in range(1, length):
        V[l] = np.matmul(V[l - 1][:, None, :], abars)[:, 0, :]
    return V


def survival_sum(cdf: np.ndarray) -> float:
    """``sum_l prod_i (1 - cdf[l, i])`` with agents multiplied in index order."""
    surv = np.ones(cdf.shape[0])
    for i in range(cdf.shape[1]):
        surv = surv * (1.0 - cdf[:, i])
    return float(np.sum(surv))


def _profile_probs(instance: MsspInstance, profile: Profile) -> np.ndarray:
    check_profile(instance, profile)
    if not profile.memoryless:
        raise InvalidModel("finite-memory profile: lift it to a memoryless one first")
    return np.stack([s.probs for s in profile])


def _inits(instance: MsspInstance) -> np.ndarray:
    return np.array([instance.init_index(i) for i in range(instance.k)])


def _sinks(instance: MsspInstance) -> np.ndarray:
    return np.array([instance.sink_index(i) for i in range(instance.k)])


def truncated_mhit(instance: MsspInstance, profile: Profile, gamma: int) -> float:
    """``sum_{l=1}^{gamma} prod_i (1 - Abar_i^{l-1}(init_i, tau_i))``."""
    if gamma < 1:
        raise ValueError("gamma must be positive")
    abars = instance_abars(instance, _profile_probs(instance, profile))
    V = forward_rows(abars, _inits(instance), gamma)
    cdf = V[:, np.arange(instance.k), _sinks(instance)]
    return survival_sum(cdf)


class _Tails:
    """Per-agent state needed to probe the truncation bound at any ``rho``."""

    def __init__(self, instance: MsspInstance, profile: Profile):
        self.k = instance.k
        self.abars = instance_abars(instance, _profile_probs(instance, profile))
        self.sinks = _sinks(instance)
        self.h = np.zeros((self.k, instance.mdp.n_states))
        self.eligible = np.zeros(self.k, dtype=bool)
        self.expected = np.full(self.k, np.inf)
        inits = _inits(instance)
        for i in range(self.k):
            tm = instance.target_mask(i)
            times, _ = hitting_times(self.abars[i], tm)
            self.expected[i] = times[inits[i]]
            if np.isfinite(times[inits[i]]):
                self.eligible[i] = True
                self.h[i] = np.where(np.isfinite(times) & ~tm, times, 0.0)
        self.v = np.zeros((self.k, instance.mdp.n_states))
        self.v[np.arange(self.k), inits] = 1.0

    def advance(self, v, steps):
        for _ in range(steps):
            v = np.einsum("ks,kst->kt", v, self.abars)
        return v

    def bound(self, v) -> tuple[float, int]:
        """Smallest admissible remainder bound at the distributions ``v``."""
        surv = 1.0 - v[np.arange(self.k), self.sinks]
        best, who = np.inf, -1
        for i in np.flatnonzero(self.eligible):
            # expected remaining time of agent i beyond rho, without cancellation
            delta = float(np.dot(v[i], self.h[i]))
            others = 1.0
            for j in range(self.k):
                if j != i:
                    others *= surv[j]
            b = delta * others
            if b < best:
                best, who = b, int(i)
        return best, who


def gamma_eps(instance: MsspInstance, profile: Profile, eps: float) -> TruncationBound:
    """Least ``rho`` whose remainder bound is at most ``eps``.

    Searched by doubling and then bisection; the bound is nonincreasing in
    ``rho`` for every agent.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    tails = _Tails(instance, profile)
    if not tails.eligible.any():
        raise InfiniteValue("value infinite or bound inapplicable: no agent hits almost surely")
    lo_rho, lo_v = 0, tails.v
    hi_rho, hi_v = 1, tails.advance(tails.v, 1)
    b, who = tails.bound(hi_v)
    while b > eps:
        if hi_rho >= MAX_RHO:
            raise RuntimeError(f"truncation bound above {eps} at rho = {hi_rho}")
        lo_rho, lo_v = hi_rho, hi_v
        hi_v = tails.advance(hi_v, hi_rho)
        hi_rho *= 2
        b, who = tails.bound(hi_v)
    # invariant: bound(lo) > eps (or lo == 0), bound(hi) <= eps
    while hi_rho - lo_rho > 1:
        mid = (lo_rho + hi_rho) // 2
        mid_v = tails.advance(lo_v, mid - lo_rho)
        mb, mwho = tails.bound(mid_v)
        if mb <= eps:
            hi_rho, hi_v, b, who = mid, mid_v, mb, mwho
        else:
            lo_rho, lo_v = mid, mid_v
    return TruncationBound(hi_rho, b, who)


def evaluate(instance: MsspInstance, profile: Profile, eps: float) -> float:
    """Value within ``eps`` below the exact expected MHit (``inf`` if infinite)."""
    try:
        tb = gamma_eps(instance, profile, eps)
    except InfiniteValue:
        return float("inf")
    return truncated_mhit(instance, profile, tb.rho)


def agent_chain(instance: MsspInstance, i: int, strat) -> tuple[sp.csr_matrix, np.ndarray, int]:
    """Agent ``i``'s chain, target mask and initial index (memory folded in)."""
    mdp = instance.mdp
    tm = instance.target_mask(i)
    if isinstance(strat, FiniteMemoryStrategy):
        chain = memory_chain(mdp, strat)
        n = strat.n_mem
        return (sp.csr_matrix(chain.matrix), np.repeat(tm, n),
                instance.init_index(i) * n + strat.init_mem_index)
    chain = induced_chain(mdp, strat)
    return sp.csr_matrix(chain.matrix), tm, instance.init_index(i)


def _forward_closure(M: sp.csr_matrix, start: int, stop: np.ndarray) -> np.ndarray:
    seen = np.zeros(M.shape[0], dtype=bool)
    seen[start] = True
    frontier = np.array([start])
    while frontier.size:
        frontier = frontier[~stop[frontier]]
        cand = np.unique(M[frontier].indices)
        cand = cand[~seen[cand]]
        seen[cand] = True
        frontier = cand
    return seen


def exact_mhit_product(instance: MsspInstance, profile: Profile, cap: int = EXACT_CAP) -> float:
    """Exact expected MHit from the product of the agents' chains.

    Exponential in ``k``; meant as an oracle for small instances.  Accepts
    finite-memory strategies.
    """
    check_profile(instance, profile)
    parts = [agent_chain(instance, i, s) for i, s in enumerate(profile)]
    size = int(np.prod([p[0].shape[0] for p in parts]))
    if size > cap:
        raise InvalidModel(f"product chain too large: {size} states exceeds cap {cap}")
    M, target, init = parts[0]
    for A, tm, ini in parts[1:]:
        M = sp.kron(M, A, format="csr")
        target = (target[:, None] | tm[None, :]).reshape(-1)
        init = init * A.shape[0] + ini
    keep = np.flatnonzero(_forward_closure(M, init, target))
    sub = M[keep][:, keep]
    times, _ = hitting_times(sub, target[keep])
    return float(times[np.searchsorted(keep, init)])


__all__ = [
    "AbsorbedChain",
    "InfiniteValue",
    "TruncationBound",
    "build_abar",
    "evaluate",
    "exact_mhit_product",
    "gamma_eps",
    "hit_cdf",
    "truncated_mhit",
]
