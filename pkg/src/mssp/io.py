"""JSON formats for instances, profiles and coordinated strategies."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .coorhit import CoordStrategy
from .mdp import (
    Agent,
    FiniteMemoryStrategy,
    InvalidModel,
    Mdp,
    MemorylessStrategy,
    MsspInstance,
    Profile,
    check_profile,
    validate_mdp,
)


def _load(source):
    if isinstance(source, (dict, list)):
        return source
    text = Path(source).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidModel(f"malformed JSON in {source}: {exc}") from exc


def _dump(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=False) + "\n")


# Instances

def instance_to_json(instance: MsspInstance) -> dict:
    mdp = instance.mdp
    trans = [
        {"from": s, "action": a, "to": t, "prob": p}
        for (s, a), row in mdp.transitions.items()
        for t, p in row.items()
    ]
    out = {
        "states": list(mdp.states),
        "actions": list(mdp.actions),
        "transitions": trans,
        "agents": [
            {"init": ag.init, "targets": [t for t in mdp.states if t in ag.targets]}
            for ag in instance.agents
        ],
    }
    if instance.metadata:
        out["metadata"] = instance.metadata
    return out


def instance_from_json(data) -> MsspInstance:
    data = _load(data)
    try:
        states, actions = data["states"], data["actions"]
        rows, seen = {}, set()
        for tr in data["transitions"]:
            key = (tr["from"], tr["action"], tr["to"])
            if key in seen:
                raise InvalidModel(f"duplicate transition {key}")
            seen.add(key)
            rows.setdefault((tr["from"], tr["action"]), {})[tr["to"]] = float(tr["prob"])
        agents = tuple(Agent(ag["init"], frozenset(ag["targets"])) for ag in data["agents"])
    except (KeyError, TypeError) as exc:
        raise InvalidModel(f"instance JSON missing or malformed field: {exc}") from exc
    mdp = Mdp(states, actions, rows)
    report = validate_mdp(mdp)
    if not report:
        raise InvalidModel(report.problems[0])
    return MsspInstance(mdp, agents, dict(data.get("metadata", {})))


def load_instance(path) -> MsspInstance:
    return instance_from_json(path)


def save_instance(instance: MsspInstance, path) -> None:
    _dump(instance_to_json(instance), path)


# Profiles

def _strategy_to_json(mdp: Mdp, strat) -> dict:
    if isinstance(strat, MemorylessStrategy):
        return strat.to_dict(mdp)
    mem = list(strat.mem)
    nxt, upd = {}, {}
    for i, s in enumerate(mdp.states):
        for j, m in enumerate(mem):
            key = f"{s}|{m}"
            nxt[key] = {mdp.actions[a]: float(strat.next[i, j, a])
                        for a in np.flatnonzero(strat.next[i, j] > 0)}
            for a in np.flatnonzero(mdp.enabled[i]):
                upd[f"{key}|{mdp.actions[a]}"] = {
                    mem[u]: float(strat.update[i, j, a, u])
                    for u in np.flatnonzero(strat.update[i, j, a] > 0)}
    return {"mem": mem, "init_mem": strat.init_mem, "next": nxt, "update": upd}


def _strategy_from_json(mdp: Mdp, data: dict):
    if "mem" not in data:
        return MemorylessStrategy.from_dict(mdp, data)
    mem = tuple(data["mem"])
    n = len(mem)
    S, A = mdp.n_states, mdp.n_actions
    nxt = np.zeros((S, n, A))
    upd = np.full((S, n, A, n), 1.0 / n)
    for i, s in enumerate(mdp.states):
        for j, m in enumerate(mem):
            key = f"{s}|{m}"
            if key not in data["next"]:
                raise InvalidModel(f"finite-memory strategy lacks next for {key}")
            for a, p in data["next"][key].items():
                nxt[i, j, mdp.action_index[a]] = p
            for a in mdp.en(s):
                dist = data["update"].get(f"{key}|{a}")
                if dist is not None:
                    row = np.zeros(n)
                    for u, p in dist.items():
                        row[mem.index(u)] = p
                    upd[i, j, mdp.action_index[a]] = row
    return FiniteMemoryStrategy(mem, data["init_mem"], nxt, upd)


def profile_to_json(instance: MsspInstance, profile: Profile) -> dict:
    return {"agents": [_strategy_to_json(instance.mdp, s) for s in profile]}


def profile_from_json(instance: MsspInstance, data) -> Profile:
    """Profile JSON: agent -> state -> action -> probability.

    The top level is a list or ``{"agents": [...]}``; states missing from an
    agent's map play their first enabled action.
    """
    data = _load(data)
    agents = data["agents"] if isinstance(data, dict) else data
    try:
        profile = Profile(tuple(_strategy_from_json(instance.mdp, a) for a in agents))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidModel):
            raise
        raise InvalidModel(f"profile JSON malformed: {exc}") from exc
    check_profile(instance, profile)
    return profile


def load_profile(instance: MsspInstance, path) -> Profile:
    return profile_from_json(instance, path)


def save_profile(instance: MsspInstance, profile: Profile, path) -> None:
    _dump(profile_to_json(instance, profile), path)


# Coordinated strategies

def coord_to_json(cs: CoordStrategy) -> dict:
    return {"decision": [{"states": list(s), "actions": list(a)}
                         for s, a in cs.decision.items()]}


def coord_from_json(data) -> CoordStrategy:
    data = _load(data)
    return CoordStrategy({tuple(e["states"]): tuple(e["actions"]) for e in data["decision"]})


def save_json(obj, path) -> None:
    _dump(obj, path)


def load_json(path):
    return _load(path)


__all__ = [
    "coord_from_json",
    "coord_to_json",
    "instance_from_json",
    "instance_to_json",
    "load_instance",
    "load_profile",
    "profile_from_json",
    "profile_to_json",
    "save_instance",
    "save_profile",
]
