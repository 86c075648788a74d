import itertools
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from helpers import random_instance, random_strategy
from mssp.coorhit import (
    CoordStrategy,
    ProductTooLarge,
    build_product,
    coord_value,
    profile_as_coordinated,
    solve_coordinated,
)
from mssp.instances import GridConfig, corpus_fig1, gadget_instance, gen_grid
from mssp.mdp import InvalidModel, MemorylessStrategy, MsspInstance, Profile
from mssp.profile_eval import exact_mhit_product
from mssp.ssp import eval_strategy, solve_ssp


def test_fig1_product_size_and_targets():
    inst = corpus_fig1()
    prod = build_product(inst, reachable_only=False)
    assert len(prod) == inst.mdp.n_states ** 2
    assert prod.init == ("s", "s")
    assert prod.init not in prod.targets
    assert prod.targets == {t for t in prod.mdp.states if "tau" in t}


def test_product_probabilities_factorise():
    inst = corpus_fig1()
    prod = build_product(inst)
    P = inst.mdp.transitions
    for (tup, acts), row in prod.mdp.transitions.items():
        for nxt, p in row.items():
            expected = np.prod([P[(s, a)].get(t, 0.0) for s, a, t in zip(tup, acts, nxt)])
            assert abs(p - expected) <= 1e-12
        assert all((s, a) in P for s, a in zip(tup, acts))


def test_k1_product_is_isomorphic():
    inst = MsspInstance(corpus_fig1().mdp, corpus_fig1().agents[:1])
    prod = build_product(inst, reachable_only=False)
    for (s, a), row in inst.mdp.transitions.items():
        assert prod.mdp.transitions[((s,), (a,))] == {(t,): p for t, p in row.items()}


def test_product_cap_refuses():
    inst = gen_grid(GridConfig(10, 0.2, 0, 5))
    with pytest.raises(ProductTooLarge, match="product too large"):
        build_product(inst)
    with pytest.raises(ProductTooLarge):
        solve_coordinated(inst)


def test_cap_from_environment(monkeypatch):
    monkeypatch.setenv("MSSP_PRODUCT_CAP", "10")
    with pytest.raises(ProductTooLarge):
        solve_coordinated(corpus_fig1())


def test_fig1_coordinated():
    cs, value = solve_coordinated(corpus_fig1())
    assert abs(value - 1.5) <= 1e-8
    assert sorted(cs.decision[("s", "s")]) == ["a", "b"]
    assert abs(coord_value(corpus_fig1(), cs) - value) <= 1e-8


def test_fig1_single_agent_coordinated():
    inst = corpus_fig1()
    _, value = solve_coordinated(MsspInstance(inst.mdp, inst.agents[:1]))
    assert abs(value - 2.0) <= 1e-8


def test_gadget_simultaneous_entry():
    _, value = solve_coordinated(gadget_instance("g0", "g0"))
    assert abs(value - 1.75) <= 1e-8


@pytest.mark.parametrize("choice,expected", [("a", 2.0), ("b", 1.75)])
def test_fig1_symmetric_strategies(choice, expected):
    inst = corpus_fig1()
    cs = CoordStrategy({t: tuple(inst.mdp.en(s)[0] if s != "s" else choice for s in t)
                        for t in itertools.product(inst.mdp.states, repeat=2)})
    assert abs(coord_value(inst, cs) - expected) <= 1e-8


def test_coord_value_rejects_undefined_tuple():
    with pytest.raises(InvalidModel):
        coord_value(corpus_fig1(), CoordStrategy({("s", "s"): ("a", "a")}))


seeds = st.integers(0, 2 ** 32 - 1)


@given(seeds, st.integers(2, 4), st.sampled_from([1, 2, 3]))
def test_deterministic_profiles_embed(seed, n, k):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, k)
    prof = Profile(tuple(random_strategy(rng, inst.mdp, full_support=False) for _ in range(k)))
    a = coord_value(inst, profile_as_coordinated(inst, prof))
    b = exact_mhit_product(inst, prof)
    assert (math.isinf(a) and math.isinf(b)) or abs(a - b) <= 1e-8


@given(seeds, st.integers(2, 5), st.sampled_from([2, 3]))
def test_coordination_never_hurts(seed, n, k):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, k)
    _, best = solve_coordinated(inst)
    for _ in range(3):
        prof = Profile(tuple(random_strategy(rng, inst.mdp) for _ in range(k)))
        assert best <= exact_mhit_product(inst, prof) + 1e-8


@given(seeds, st.integers(2, 4))
def test_matches_exhaustive_coordinated_search(seed, n):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, 2, p_enabled=0.35)
    prod = build_product(inst, reachable_only=False)
    free = [t for t in prod.mdp.states if t not in prod.targets]
    options = [prod.mdp.en(t) for t in free]
    assume(np.prod([len(o) for o in options]) <= 2048)
    best = math.inf
    for pick in itertools.product(*options):
        strat = MemorylessStrategy.deterministic(prod.mdp, dict(zip(free, pick)))
        best = min(best, eval_strategy(prod.mdp, strat, prod.init, prod.targets).value)
    _, value = solve_coordinated(inst)
    if math.isinf(best):
        assert math.isinf(value)
    else:
        assert abs(value - best) <= 1e-8
        assert abs(solve_ssp(prod.mdp, prod.init, prod.targets).value - best) <= 1e-8
