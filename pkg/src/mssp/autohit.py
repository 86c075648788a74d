"""Gradient-based synthesis of autonomous memoryless profiles (AutoHit).

Each agent's decision at a state is the softmax of one real parameter per
enabled action.  The truncated survival-product objective is minimised with
adaptive-moment steps and the final profile is evaluated to a guaranteed
precision.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .mdp import MemorylessStrategy, MsspInstance, Profile
from .profile_eval import evaluate, forward_rows, instance_abars, survival_sum
from .ssp import solve_ssp


class InitScheme(enum.Enum):
    RANDOM = "random"
    RLP = "rlp"
    RSP = "rsp"


BOOST = 10.0


@dataclass(frozen=True, eq=False)
class ParamVector:
    """Flat parameters in ``(agent, state, enabled action)`` order."""

    values: np.ndarray
    enabled: np.ndarray  # (S, A) mask shared by all agents
    k: int

    @classmethod
    def zeros(cls, instance: MsspInstance) -> "ParamVector":
        en = instance.mdp.enabled
        return cls(np.zeros(instance.k * int(en.sum())), en, instance.k)

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return ParamVector(np.asarray(values, dtype=float), self.enabled, self.k)

    def logits(self) -> np.ndarray:
        """``(k, S, A)`` array with ``-inf`` on disabled actions."""
        S, A = self.enabled.shape
        out = np.full((self.k, S, A), -np.inf)
        out[:, self.enabled] = self.values.reshape(self.k, -1)
        return out

    def pack(self, table: np.ndarray) -> np.ndarray:
        """Flatten a ``(k, S, A)`` table to the parameter layout."""
        return table[:, self.enabled].reshape(-1)


def softmax_probs(pv: ParamVector) -> np.ndarray:
    X = pv.logits()
    X = X - X.max(axis=2, keepdims=True)
    E = np.exp(X)
    return E / E.sum(axis=2, keepdims=True)


def softmax_profile(pv: ParamVector) -> Profile:
    return Profile(tuple(MemorylessStrategy(p) for p in softmax_probs(pv)))


def _setup(instance: MsspInstance):
    k = instance.k
    inits = np.array([instance.init_index(i) for i in range(k)])
    sinks = np.array([instance.sink_index(i) for i in range(k)])
    return inits, sinks


def objective(instance: MsspInstance, pv: ParamVector, gamma: int) -> float:
    """Truncated expected MHit of the softmax profile."""
    inits, sinks = _setup(instance)
    V = forward_rows(instance_abars(instance, softmax_probs(pv)), inits, gamma)
    return survival_sum(V[:, np.arange(instance.k), sinks])


def _merged_P(instance: MsspInstance) -> np.ndarray:
    """Per-agent ``P`` with target columns folded into the sink, ``(k, A, S, S)``;
    target rows are zero since they do not depend on the strategy."""
    P = instance.mdp.P
    out = np.empty((instance.k,) + P.shape)
    for i in range(instance.k):
        tm = instance.target_mask(i)
        tau = instance.sink_index(i)
        Q = P.copy()
        Q[:, :, tau] = P[:, :, tm].sum(axis=2)
        others = tm.copy()
        others[tau] = False
        Q[:, :, others] = 0.0
        Q[:, tm, :] = 0.0
        out[i] = Q
    return out


def value_and_gradient(instance: MsspInstance, pv: ParamVector, gamma: int,
                       merged: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Objective and its exact gradient by reverse accumulation."""
    k = instance.k
    inits, sinks = _setup(instance)
    probs = softmax_probs(pv)
    abars = instance_abars(instance, probs)
    V = forward_rows(abars, inits, gamma)
    agents = np.arange(k)
    cdf = V[:, agents, sinks]
    value = survival_sum(cdf)

    # d value / d cdf[l, i] = -prod_{j != i} (1 - cdf[l, j])
    q = 1.0 - cdf
    prefix = np.ones_like(q)
    suffix = np.ones_like(q)
    for i in range(1, k):
        prefix[:, i] = prefix[:, i - 1] * q[:, i - 1]
        suffix[:, k - 1 - i] = suffix[:, k - i] * q[:, k - i]
    w = -prefix * suffix

    S = instance.mdp.n_states
    lam = np.zeros((gamma, k, S))
    lam[gamma - 1, agents, sinks] = w[gamma - 1]
    for l in range(gamma - 2, 0, -1):
        lam[l] = np.matmul(abars, lam[l + 1][:, :, None])[:, :, 0]
        lam[l, agents, sinks] += w[l]
    G = np.matmul(V[:-1].transpose(1, 2, 0), lam[1:].transpose(1, 0, 2))

    if merged is None:
        merged = _merged_P(instance)
    dsigma = (merged * G[:, None]).sum(axis=3).transpose(0, 2, 1)
    dsigma = np.where(pv.enabled[None], dsigma, 0.0)
    dX = probs * (dsigma - np.sum(probs * dsigma, axis=2, keepdims=True))
    return value, pv.pack(dX)


def gradient(instance: MsspInstance, pv: ParamVector, gamma: int) -> np.ndarray:
    return value_and_gradient(instance, pv, gamma)[1]


# Baselines

def lp_baseline(instance: MsspInstance) -> Profile:
    """Each agent plays its own optimal single-agent strategy."""
    return Profile(tuple(
        solve_ssp(instance.mdp, ag.init, ag.targets).strategy for ag in instance.agents))


def shortest_path_baseline(instance: MsspInstance) -> Profile:
    """Each agent follows a fewest-edges path to its nearest target.

    Breadth-first search over positive-probability edges, expanding states
    and successors in state order; off the path the first enabled action.
    """
    mdp = instance.mdp
    P = mdp.P
    adj = P.sum(axis=0) > 0
    strategies = []
    for i, ag in enumerate(instance.agents):
        tm = instance.target_mask(i)
        start = instance.init_index(i)
        parent = {start: None}
        queue, goal = deque([start]), None
        while queue and goal is None:
            s = queue.popleft()
            for t in np.flatnonzero(adj[s]):
                t = int(t)
                if t not in parent:
                    parent[t] = s
                    if tm[t]:
                        goal = t
                        break
                    queue.append(t)
        choice = {}
        node = goal
        while node is not None and parent[node] is not None:
            s = parent[node]
            a = int(np.flatnonzero(P[:, s, node] > 0)[0])
            choice[mdp.states[s]] = mdp.actions[a]
            node = s
        strategies.append(MemorylessStrategy.deterministic(mdp, choice))
    return Profile(tuple(strategies))


def baseline_for(scheme: InitScheme, instance: MsspInstance) -> Profile | None:
    if scheme is InitScheme.RLP:
        return lp_baseline(instance)
    if scheme is InitScheme.RSP:
        return shortest_path_baseline(instance)
    return None


def init_params(scheme: InitScheme, instance: MsspInstance,
                baseline: Profile | None = None, seed: int = 0) -> ParamVector:
    """Normal(0, 1) parameters; baseline schemes shift the chosen action's mean to 10."""
    pv = ParamVector.zeros(instance)
    rng = np.random.default_rng(seed)
    values = rng.standard_normal(pv.values.shape)
    if scheme is not InitScheme.RANDOM:
        if baseline is None:
            raise ValueError(f"init scheme {scheme.value} needs a baseline profile")
        chosen = np.stack([s.probs for s in baseline]) > 0.5
        values = values + BOOST * pv.pack(chosen.astype(float))
    return pv.with_values(values)


# Optimizer

@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def fresh(cls, n: int) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0)


def optimizer_step(params: np.ndarray, state: AdamState, grad: np.ndarray,
                   step_size: float = 0.01, moment_decays=(0.9, 0.999),
                   moment_epsilon: float = 1e-8) -> tuple[np.ndarray, AdamState]:
    b1, b2 = moment_decays
    t = state.t + 1
    m = b1 * state.m + (1 - b1) * grad
    v = b2 * state.v + (1 - b2) * grad * grad
    m_hat = m / (1 - b1 ** t)
    v_hat = v / (1 - b2 ** t)
    new = params - step_size * m_hat / (np.sqrt(v_hat) + moment_epsilon)
    return new, AdamState(m, v, t)


@dataclass(frozen=True)
class Hyperparams:
    steps: int = 1000
    epsilon: float = 1e-9
    gamma: int | None = None           # None: number of states
    gamma_ratio: float | None = None   # gamma = ceil(ratio * |S|) when set
    step_size: float = 0.01
    moment_decays: tuple = (0.9, 0.999)
    moment_epsilon: float = 1e-8
    seed: int = 0

    def resolve_gamma(self, instance: MsspInstance) -> int:
        if self.gamma is not None:
            return int(self.gamma)
        n = instance.mdp.n_states
        if self.gamma_ratio is not None:
            return max(1, int(np.ceil(self.gamma_ratio * n)))
        return n


@dataclass
class AutoHitRun:
    profile: Profile
    value: float
    params: ParamVector
    trace: list = field(default_factory=list)  # (step, objective) before each update

    def __iter__(self):
        return iter((self.profile, self.value))


def autohit(instance: MsspInstance, hyper: Hyperparams = Hyperparams(),
            scheme: InitScheme = InitScheme.RANDOM,
            baseline: Profile | None = None) -> AutoHitRun:
    """Run the synthesis loop; unpacks as ``(profile, value)``."""
    gamma = hyper.resolve_gamma(instance)
    if baseline is None:
        baseline = baseline_for(scheme, instance)
    pv = init_params(scheme, instance, baseline, hyper.seed)
    merged = _merged_P(instance)
    state = AdamState.fresh(pv.values.size)
    x = pv.values
    trace = []
    for step in range(hyper.steps):
        val, g = value_and_gradient(instance, pv.with_values(x), gamma, merged)
        trace.append((step, val))
        x, state = optimizer_step(x, state, g, hyper.step_size, hyper.moment_decays,
                                  hyper.moment_epsilon)
    final = pv.with_values(x)
    trace.append((hyper.steps, objective(instance, final, gamma)))
    profile = softmax_profile(final)
    return AutoHitRun(profile, evaluate(instance, profile, hyper.epsilon), final, trace)


__all__ = [
    "AdamState",
    "AutoHitRun",
    "Hyperparams",
    "InitScheme",
    "ParamVector",
    "autohit",
    "gradient",
    "init_params",
    "lp_baseline",
    "objective",
    "optimizer_step",
    "shortest_path_baseline",
    "softmax_profile",
    "value_and_gradient",
]
