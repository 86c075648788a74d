"""Monte Carlo estimates of the expected MHit.

Runs are simulated in fixed-size vectorised blocks.  Block ``b`` draws from
``PCG64(SeedSequence(seed).spawn(...)[b])``, so results depend only on the
seed and the block size, never on scheduling.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from .coorhit import CoordStrategy
from .mdp import FiniteMemoryStrategy, InvalidModel, MsspInstance, Profile, check_profile

BLOCK = 1 << 16
CENSORED = -1


@dataclass(frozen=True)
class SimConfig:
    runs: int = 100_000
    horizon: int = 10_000
    seed: int = 0
    confidence: float = 0.99

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be positive")
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        if not 0 < self.confidence < 1:
            raise ValueError("confidence must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class SimResult:
    mean: float
    half_width: float
    censored: int
    samples: np.ndarray  # per run: hitting step, or CENSORED

    @property
    def usable(self) -> bool:
        return self.censored < len(self.samples)

    def __iter__(self):
        return iter((self.mean, self.half_width, self.censored))


def _sample(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Index drawn from each row of cumulative probabilities."""
    idx = (cum < u[:, None]).sum(axis=1)
    return np.minimum(idx, cum.shape[1] - 1)


class _Mover:
    """Padded successor lists for sampling ``t ~ P(s, a, .)``."""

    def __init__(self, P: np.ndarray):
        m = max(1, int((P > 0).sum(axis=2).max()))
        order = np.argsort(-P, axis=2, kind="stable")[:, :, :m]
        self.succ = order
        self.cum = np.cumsum(np.take_along_axis(P, order, axis=2), axis=2)

    def step(self, s, a, rng):
        j = _sample(self.cum[a, s], rng.random(len(s)))
        return self.succ[a, s, j]


def _summarise(samples: np.ndarray, confidence: float) -> SimResult:
    ok = samples[samples != CENSORED].astype(float)
    censored = int(len(samples) - len(ok))
    if len(ok) == 0:
        return SimResult(math.nan, math.inf, censored, samples)
    mean = float(np.mean(ok))
    if len(ok) < 2:
        return SimResult(mean, math.inf, censored, samples)
    z = NormalDist().inv_cdf(0.5 + confidence / 2)
    hw = z * float(np.std(ok, ddof=1)) / math.sqrt(len(ok))
    return SimResult(mean, hw, censored, samples)


def _blocks(cfg: SimConfig):
    n_blocks = -(-cfg.runs // BLOCK)
    seqs = np.random.SeedSequence(cfg.seed).spawn(n_blocks)
    for b, seq in enumerate(seqs):
        size = min(BLOCK, cfg.runs - b * BLOCK)
        yield size, np.random.Generator(np.random.PCG64(seq))


def _run(instance: MsspInstance, cfg: SimConfig, choose, mem0) -> np.ndarray:
    """Generic block loop; ``choose(states, mems, rng)`` returns actions and new memories."""
    k = instance.k
    mover = _Mover(instance.mdp.P)
    tmask = np.stack([instance.target_mask(i) for i in range(k)])
    inits = np.array([instance.init_index(i) for i in range(k)])
    out = []
    for size, rng in _blocks(cfg):
        res = np.full(size, CENSORED, dtype=np.int64)
        states = np.tile(inits, (size, 1))
        mems = np.tile(mem0, (size, 1))
        alive = np.arange(size)
        for step in range(1, cfg.horizon + 1):
            s, mm = states[alive], mems[alive]
            acts, mm = choose(s, mm, rng)
            for i in range(k):
                s[:, i] = mover.step(s[:, i], acts[:, i], rng)
            hit = np.zeros(len(alive), dtype=bool)
            for i in range(k):
                hit |= tmask[i][s[:, i]]
            res[alive[hit]] = step
            states[alive], mems[alive] = s, mm
            alive = alive[~hit]
            if not alive.size:
                break
        out.append(res)
    return np.concatenate(out)


def simulate_profile(instance: MsspInstance, profile: Profile, cfg: SimConfig) -> SimResult:
    """Sample multiruns of an autonomous profile; finite memory is simulated natively."""
    check_profile(instance, profile)
    k = instance.k
    tables = []
    mem0 = np.zeros(k, dtype=np.int64)
    for i, strat in enumerate(profile):
        if isinstance(strat, FiniteMemoryStrategy):
            tables.append((np.cumsum(strat.next, axis=2), np.cumsum(strat.update, axis=3)))
            mem0[i] = strat.init_mem_index
        else:
            tables.append((np.cumsum(strat.probs, axis=1)[:, None, :], None))

    def choose(s, mm, rng):
        acts = np.empty_like(s)
        for i, (nxt, upd) in enumerate(tables):
            acts[:, i] = _sample(nxt[s[:, i], mm[:, i]], rng.random(len(s)))
            if upd is not None:
                mm[:, i] = _sample(upd[s[:, i], mm[:, i], acts[:, i]], rng.random(len(s)))
        return acts, mm

    return _summarise(_run(instance, cfg, choose, mem0), cfg.confidence)


def simulate_coordinated(instance: MsspInstance, cs: CoordStrategy, cfg: SimConfig) -> SimResult:
    """Sample multiruns of a deterministic coordinated strategy."""
    mdp, k = instance.mdp, instance.k
    S = mdp.n_states
    policy = np.full((S,) * k + (k,), -1, dtype=np.int64)
    for tup, acts in cs.decision.items():
        idx = tuple(mdp.state_index[s] for s in tup)
        policy[idx] = [mdp.action_index[a] for a in acts]

    def choose(s, mm, rng):
        acts = policy[tuple(s.T)]
        if np.any(acts < 0):
            bad = tuple(mdp.states[j] for j in s[np.flatnonzero((acts < 0).any(axis=1))[0]])
            raise InvalidModel(f"coordinated strategy undefined at reachable tuple {bad}")
        return acts, mm

    return _summarise(_run(instance, cfg, choose, np.zeros(k, dtype=np.int64)),
                      cfg.confidence)


def write_csv(result: SimResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["run_index", "mhit"])
        for i, v in enumerate(result.samples):
            w.writerow([i, "censored" if v == CENSORED else int(v)])


__all__ = ["CENSORED", "SimConfig", "SimResult", "simulate_coordinated", "simulate_profile",
           "write_csv"]
