"""Random model generators and independent reference computations for the tests."""

from __future__ import annotations

import itertools

import numpy as np
from hypothesis import strategies as st

from mssp.mdp import Agent, FiniteMemoryStrategy, Mdp, MemorylessStrategy, MsspInstance, Profile


def random_mdp(rng: np.random.Generator, n_states: int, n_actions: int = 2,
               max_support: int = 3, p_enabled: float = 0.7) -> Mdp:
    states = [f"s{i}" for i in range(n_states)]
    actions = [f"a{j}" for j in range(n_actions)]
    trans = {}
    for s in states:
        for j, a in enumerate(actions):
            if j > 0 and rng.random() > p_enabled:
                continue
            support = rng.choice(n_states, size=rng.integers(1, min(max_support, n_states) + 1),
                                 replace=False)
            w = rng.random(len(support)) + 0.05
            trans[(s, a)] = {states[t]: float(x) for t, x in zip(support, w / w.sum())}
    return Mdp(states, actions, trans)


def random_instance(rng: np.random.Generator, n_states: int, k: int, **kw) -> MsspInstance:
    mdp = random_mdp(rng, n_states, **kw)
    agents = []
    for _ in range(k):
        perm = rng.permutation(n_states)
        n_t = int(rng.integers(1, max(2, n_states // 2)))
        targets = frozenset(mdp.states[t] for t in perm[1:1 + n_t])
        agents.append(Agent(mdp.states[perm[0]], targets))
    return MsspInstance(mdp, tuple(agents))


def random_strategy(rng: np.random.Generator, mdp: Mdp, full_support: bool = True
                    ) -> MemorylessStrategy:
    probs = np.zeros((mdp.n_states, mdp.n_actions))
    for i in range(mdp.n_states):
        en = np.flatnonzero(mdp.enabled[i])
        if full_support:
            w = rng.random(len(en)) + 0.05
            probs[i, en] = w / w.sum()
        else:
            probs[i, rng.choice(en)] = 1.0
    return MemorylessStrategy(probs)


def random_fm_strategy(rng: np.random.Generator, mdp: Mdp, n: int) -> FiniteMemoryStrategy:
    mem = tuple(f"m{j}" for j in range(n))
    nxt = np.zeros((mdp.n_states, n, mdp.n_actions))
    for i in range(mdp.n_states):
        en = np.flatnonzero(mdp.enabled[i])
        for m in range(n):
            w = rng.random(len(en)) + 0.05
            nxt[i, m, en] = w / w.sum()
    upd = rng.random((mdp.n_states, n, mdp.n_actions, n)) + 0.05
    upd /= upd.sum(axis=3, keepdims=True)
    return FiniteMemoryStrategy(mem, mem[int(rng.integers(n))], nxt, upd)


def deterministic_strategies(mdp: Mdp):
    """Every deterministic memoryless strategy of ``mdp``."""
    choices = [mdp.en(s) for s in mdp.states]
    for pick in itertools.product(*choices):
        yield MemorylessStrategy.deterministic(mdp, dict(zip(mdp.states, pick)))


@st.composite
def small_instances(draw, max_states: int = 5, k_values=(1, 2, 3)):
    n = draw(st.integers(2, max_states))
    k = draw(st.sampled_from(k_values))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    return random_instance(np.random.default_rng(seed), n, k)


# Reference computations, deliberately written without the library's code paths.

def path_mdp(length: int) -> MsspInstance:
    """Deterministic chain s0 -> s1 -> ... -> s{length}."""
    states = [f"s{i}" for i in range(length + 1)]
    trans = {(states[i], "go"): {states[min(i + 1, length)]: 1.0} for i in range(length + 1)}
    mdp = Mdp(states, ["go"], trans)
    return MsspInstance(mdp, (Agent("s0", frozenset([states[-1]])),))


def chain_matrix_ld(mdp: Mdp, probs: np.ndarray) -> np.ndarray:
    """Induced chain in extended precision, built from the transition dict."""
    A = np.zeros((mdp.n_states, mdp.n_states), dtype=np.longdouble)
    for (s, a), row in mdp.transitions.items():
        i, j = mdp.state_index[s], mdp.action_index[a]
        for t, p in row.items():
            A[i, mdp.state_index[t]] += np.longdouble(probs[i, j]) * np.longdouble(p)
    return A


def truncated_ld(instance: MsspInstance, logits: np.ndarray, gamma: int) -> np.longdouble:
    """Truncated objective from softmax logits ``(k, S, A)`` via explicit matrix powers."""
    mdp = instance.mdp
    terms = np.ones(gamma, dtype=np.longdouble)
    for i, ag in enumerate(instance.agents):
        X = logits[i].astype(np.longdouble)
        X = np.where(mdp.enabled, X, np.longdouble(-np.inf))
        E = np.exp(X - X.max(axis=1, keepdims=True))
        probs = E / E.sum(axis=1, keepdims=True)
        A = chain_matrix_ld(mdp, probs)
        tm = np.array([s in ag.targets for s in mdp.states])
        # target rows become identity rows
        B = A.copy()
        B[tm] = 0
        for t in np.flatnonzero(tm):
            B[t, t] = 1
        init = mdp.state_index[ag.init]
        M = np.eye(mdp.n_states, dtype=np.longdouble)
        for l in range(gamma):
            terms[l] *= 1 - M[init, tm].sum()
            M = M @ B
    return terms.sum()


def exact_value_iteration(instance: MsspInstance, profile: Profile) -> float:
    """Expected MHit of a memoryless profile by value iteration on the product chain."""
    mdp, k = instance.mdp, instance.k
    chains = [np.einsum("sa,ast->st", s.probs, mdp.P) for s in profile]
    tms = [instance.target_mask(i) for i in range(k)]
    shape = (mdp.n_states,) * k
    target = np.zeros(shape, dtype=bool)
    for idx in itertools.product(range(mdp.n_states), repeat=k):
        target[idx] = any(tms[i][idx[i]] for i in range(k))
    y = np.zeros(shape)
    for _ in range(200_000):
        z = y
        for i in range(k):
            z = np.moveaxis(np.tensordot(chains[i], z, axes=([1], [i])), 0, i)
        z = np.where(target, 0.0, 1.0 + z)
        if np.max(np.abs(z - y)) < 1e-13:
            y = z
            break
        y = z
    return float(y[tuple(instance.init_index(i) for i in range(k))])



def logits_from_flat(instance: MsspInstance, flat: np.ndarray) -> np.ndarray:
    """Lay flat parameters out as ``(k, S, A)`` in agent, state, enabled-action order."""
    mdp = instance.mdp
    out = np.zeros((instance.k, mdp.n_states, mdp.n_actions), dtype=np.longdouble)
    pos = 0
    for i in range(instance.k):
        for s in range(mdp.n_states):
            for a in range(mdp.n_actions):
                if mdp.enabled[s, a]:
                    out[i, s, a] = flat[pos]
                    pos += 1
    assert pos == len(flat)
    return out


def fd_gradient(instance: MsspInstance, flat: np.ndarray, gamma: int,
                h: float = 1e-5) -> np.ndarray:
    """Central differences of the extended-precision objective."""
    x = np.asarray(flat, dtype=np.longdouble)
    h = np.longdouble(h)
    grad = np.zeros(len(x), dtype=np.longdouble)
    for j in range(len(x)):
        up, down = x.copy(), x.copy()
        up[j] += h
        down[j] -= h
        grad[j] = (truncated_ld(instance, logits_from_flat(instance, up), gamma)
                   - truncated_ld(instance, logits_from_flat(instance, down), gamma)) / (2 * h)
    return grad.astype(float)
