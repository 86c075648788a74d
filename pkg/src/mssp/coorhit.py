"""Coordinated MSSP via the product MDP (CoorHit).

A memoryless coordinated strategy for ``k`` agents is a memoryless strategy
of one agent in the product MDP over ``S^k`` with joint actions ``Act^k``;
the first hit of any agent's target becomes the product target.  The product
is solved with factored Bellman backups, never materialised.
"""

from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass

import numpy as np

from .chains import hitting_times
from .factored import FactoredSsp, ProductTooLarge
from .mdp import InvalidModel, Mdp, MsspInstance, Profile, check_profile

DEFAULT_PRODUCT_CAP = 2_000_000
DEFAULT_CHOICE_CAP = 40_000_000
DEFAULT_TRANSITION_CAP = 5_000_000


def product_cap() -> int:
    """State cap for products; ``MSSP_PRODUCT_CAP`` overrides the default."""
    env = os.environ.get("MSSP_PRODUCT_CAP")
    return int(env) if env else DEFAULT_PRODUCT_CAP


@dataclass(frozen=True)
class ProductInstance:
    mdp: Mdp                  # states are tuples of component states
    init: tuple
    targets: frozenset
    index: dict               # state tuple -> flat id

    def __len__(self) -> int:
        return self.mdp.n_states


@dataclass(frozen=True)
class CoordStrategy:
    """Deterministic memoryless coordinated strategy: state tuple -> action tuple."""

    decision: dict

    def __call__(self, states: tuple) -> tuple:
        return self.decision[states]


def _is_target(instance: MsspInstance, tup: tuple) -> bool:
    return any(s in ag.targets for s, ag in zip(tup, instance.agents))


def build_product(instance: MsspInstance, cap: int | None = None,
                  reachable_only: bool = True,
                  transition_cap: int = DEFAULT_TRANSITION_CAP) -> ProductInstance:
    """Materialise the product MDP.

    With ``reachable_only`` only tuples reachable from the initial tuple are
    enumerated; target tuples keep their outgoing joint actions.
    """
    mdp, k = instance.mdp, instance.k
    cap = product_cap() if cap is None else cap
    if mdp.n_states ** k > cap:
        raise ProductTooLarge(
            f"product too large: {mdp.n_states}^{k} states exceeds cap {cap}")
    en = {s: mdp.en(s) for s in mdp.states}
    succ = {key: list(row.items()) for key, row in mdp.transitions.items()}

    def joint_moves(tup):
        for acts in _tuples([en[s] for s in tup]):
            dist = {(): 1.0}
            for s, a in zip(tup, acts):
                dist = {prev + (t,): p * q for prev, p in dist.items() for t, q in succ[(s, a)]}
            yield acts, dist

    init = tuple(ag.init for ag in instance.agents)
    if reachable_only:
        order, seen, queue = [init], {init}, deque([init])
        while queue:
            tup = queue.popleft()
            for _, dist in joint_moves(tup):
                for t in dist:
                    if t not in seen:
                        seen.add(t)
                        order.append(t)
                        queue.append(t)
    else:
        order = list(_tuples([list(mdp.states)] * k))
    actions = list(_tuples([list(mdp.actions)] * k))
    trans, count = {}, 0
    for tup in order:
        for acts, dist in joint_moves(tup):
            count += len(dist)
            if count > transition_cap:
                raise ProductTooLarge(
                    f"product too large: more than {transition_cap} joint transitions")
            trans[(tup, acts)] = dist
    pm = Mdp(order, actions, trans)
    targets = frozenset(t for t in order if _is_target(instance, t))
    return ProductInstance(pm, init, targets, dict(pm.state_index))


def _tuples(choices):
    if not choices:
        yield ()
        return
    for head in choices[0]:
        for rest in _tuples(choices[1:]):
            yield (head,) + rest


def factored_model(instance: MsspInstance, cap: int | None = None,
                   choice_cap: int = DEFAULT_CHOICE_CAP) -> FactoredSsp:
    mdp = instance.mdp
    cap = product_cap() if cap is None else cap
    targets = [instance.target_mask(i) for i in range(instance.k)]
    return FactoredSsp(mdp.P, mdp.enabled, targets, state_cap=cap, choice_cap=choice_cap)


def _flat_state(instance: MsspInstance, tup) -> int:
    idx = [instance.mdp.state_index[s] for s in tup]
    return int(np.ravel_multi_index(idx, (instance.mdp.n_states,) * instance.k))


def solve_coordinated(instance: MsspInstance, cap: int | None = None
                      ) -> tuple[CoordStrategy, float]:
    """Optimal deterministic memoryless coordinated strategy and its value."""
    mdp, k = instance.mdp, instance.k
    model = factored_model(instance, cap)
    values, policy, _ = model.solve()
    rows = np.flatnonzero(policy >= 0)
    s_comp = np.unravel_index(rows, (mdp.n_states,) * k)
    a_comp = np.unravel_index(policy[rows], (mdp.n_actions,) * k)
    decision = {}
    for n in range(len(rows)):
        tup = tuple(mdp.states[s_comp[i][n]] for i in range(k))
        decision[tup] = tuple(mdp.actions[a_comp[i][n]] for i in range(k))
    value = float(values[_flat_state(instance, tuple(ag.init for ag in instance.agents))])
    return CoordStrategy(decision), value


def coord_value(instance: MsspInstance, cs: CoordStrategy, cap: int | None = None) -> float:
    """Expected MHit of a deterministic coordinated strategy."""
    mdp, k = instance.mdp, instance.k
    model = factored_model(instance, cap, choice_cap=None)
    S, A = mdp.n_states, mdp.n_actions
    init = _flat_state(instance, tuple(ag.init for ag in instance.agents))
    policy = np.full(model.N, -1, dtype=np.int64)
    rows, seen, queue = [], {init}, deque([init])
    while queue:
        r = queue.popleft()
        if model.targets[r]:
            continue
        tup = tuple(mdp.states[i] for i in np.unravel_index(r, (S,) * k))
        if tup not in cs.decision:
            raise InvalidModel(f"coordinated strategy undefined at reachable tuple {tup}")
        acts = cs.decision[tup]
        for s, a in zip(tup, acts):
            if a not in mdp.action_index or (s, a) not in mdp.transitions:
                raise InvalidModel(f"action {a!r} not enabled in {s!r}")
        policy[r] = np.ravel_multi_index([mdp.action_index[a] for a in acts], (A,) * k)
        rows.append(r)
        succ = model.policy_matrix(np.array([r]), policy[[r]]).indices
        for t in succ:
            if t not in seen:
                seen.add(int(t))
                queue.append(int(t))
    times, _ = hitting_times(model.chain(policy, np.array(sorted(rows), dtype=np.int64)),
                             model.targets)
    return float(times[init])


def profile_as_coordinated(instance: MsspInstance, profile: Profile) -> CoordStrategy:
    """Deterministic memoryless profile as a coordinated strategy."""
    check_profile(instance, profile)
    mdp = instance.mdp
    choice = []
    for strat in profile:
        if not strat.is_deterministic():
            raise InvalidModel("only deterministic profiles embed as deterministic strategies")
        choice.append({s: mdp.actions[int(np.argmax(strat.probs[i]))]
                       for i, s in enumerate(mdp.states)})
    decision = {}
    for tup in _tuples([list(mdp.states)] * instance.k):
        decision[tup] = tuple(choice[i][s] for i, s in enumerate(tup))
    return CoordStrategy(decision)


__all__ = [
    "CoordStrategy",
    "ProductInstance",
    "ProductTooLarge",
    "build_product",
    "coord_value",
    "product_cap",
    "profile_as_coordinated",
    "solve_coordinated",
]
