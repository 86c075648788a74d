import numpy as np
import pytest
from hypothesis import given, strategies as st

from helpers import fd_gradient, path_mdp, random_instance
from mssp.autohit import (
    AdamState,
    Hyperparams,
    InitScheme,
    ParamVector,
    autohit,
    gradient,
    init_params,
    lp_baseline,
    objective,
    optimizer_step,
    shortest_path_baseline,
    softmax_probs,
    softmax_profile,
)
from mssp.instances import corpus_fig1
from mssp.mdp import Agent, Mdp, MsspInstance
from mssp.profile_eval import exact_mhit_product, truncated_mhit


def fig1_params(values_at_s):
    """Parameters on fig1 with the given logits at ``s`` for each agent; zero elsewhere."""
    inst = corpus_fig1()
    pv = ParamVector.zeros(inst)
    logits = pv.logits()
    logits[np.isfinite(logits)] = 0.0
    for i, (xa, xb) in enumerate(values_at_s):
        logits[i, 0, :2] = (xa, xb)
    return inst, pv.with_values(pv.pack(logits))


def test_softmax_zero_is_uniform():
    inst, pv = fig1_params([(0, 0), (0, 0)])
    assert softmax_probs(pv)[0, 0].tolist() == [0.5, 0.5]


def test_softmax_saturated_values():
    inst, pv = fig1_params([(10, 0), (0, 0)])
    p = softmax_probs(pv)[0, 0]
    assert abs(p[0] - 1 / (1 + np.exp(-10))) <= 1e-15
    assert abs(p[0] - 0.9999546) <= 1e-7 and abs(p[1] - 4.54e-5) <= 1e-7


def test_softmax_shift_invariance():
    _, a = fig1_params([(3, 3), (0, 0)])
    _, b = fig1_params([(0, 0), (0, 0)])
    assert np.array_equal(softmax_probs(a), softmax_probs(b))


def test_softmax_no_overflow():
    _, pv = fig1_params([(1000, 0), (0, -1000)])
    p = softmax_probs(pv)
    assert np.all(np.isfinite(p))
    assert p[0, 0, 0] == 1.0


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 6), st.sampled_from([1, 2, 3]))
def test_softmax_profile_is_valid(seed, n, k):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, k)
    pv = init_params(InitScheme.RANDOM, inst, seed=seed)
    p = softmax_probs(pv)
    en = inst.mdp.enabled
    assert np.all(p[:, en] > 0) and np.all(p[:, ~en] == 0)
    assert np.all(np.abs(p.sum(axis=2) - 1) <= 1e-12)


def test_objective_ignores_params_when_single_action():
    inst = path_mdp(4)
    rng = np.random.default_rng(0)
    pv = ParamVector.zeros(inst)
    values = {objective(inst, pv.with_values(rng.normal(size=pv.values.size)), 6)
              for _ in range(5)}
    assert len(values) == 1
    assert np.all(gradient(inst, pv, 6) == 0)


def test_objective_fig1_saturated():
    inst, pv = fig1_params([(20, -20), (-20, 20)])
    assert abs(objective(inst, pv, 10) - 1.5) <= 1e-4


def test_objective_fig1_uniform():
    inst, pv = fig1_params([(0, 0), (0, 0)])
    value = objective(inst, pv, 10)
    assert 1.5 < value < 2.5
    assert abs(value - exact_mhit_product(inst, softmax_profile(pv))) <= 1e-12


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 6), st.sampled_from([1, 2, 3]),
       st.integers(1, 12))
def test_objective_is_bit_equal_to_truncated(seed, n, k, gamma):
    inst = random_instance(np.random.default_rng(seed), n, k)
    pv = init_params(InitScheme.RANDOM, inst, seed=seed)
    assert objective(inst, pv, gamma) == truncated_mhit(inst, softmax_profile(pv), gamma)


def test_gradient_zero_on_unreachable_states():
    states = ["x", "goal", "far", "far2"]
    trans = {("x", "a"): {"goal": 0.5, "x": 0.5}, ("x", "b"): {"goal": 0.2, "x": 0.8},
             ("goal", "a"): {"goal": 1.0},
             ("far", "a"): {"x": 1.0}, ("far", "b"): {"far2": 1.0},
             ("far2", "a"): {"far": 1.0}, ("far2", "b"): {"x": 1.0}}
    mdp = Mdp(states, ["a", "b"], trans)
    inst = MsspInstance(mdp, (Agent("x", frozenset(["goal"])),) * 2)
    pv = init_params(InitScheme.RANDOM, inst, seed=4)
    g = gradient(inst, pv, 8).reshape(2, -1)
    # parameter order per agent: x:a, x:b, goal:a, far:a, far:b, far2:a, far2:b
    assert np.all(g[:, 2:] == 0)
    assert np.all(g[:, :2] != 0)


@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 5), st.sampled_from([1, 2, 3]),
       st.integers(1, 12))
def test_gradient_matches_finite_differences(seed, n, k, gamma):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, n, k)
    pv = ParamVector.zeros(inst)
    pv = pv.with_values(rng.standard_normal(pv.values.size))
    g = gradient(inst, pv, gamma)
    fd = fd_gradient(inst, pv.values, gamma)
    big = np.abs(g) > 1e-8
    assert np.all(np.abs(g[big] - fd[big]) <= 1e-4 * np.abs(g[big]))
    assert np.all(np.abs(fd[~big]) <= 1e-7)


def test_random_init_is_reproducible():
    inst = corpus_fig1()
    a = init_params(InitScheme.RANDOM, inst, seed=11)
    b = init_params(InitScheme.RANDOM, inst, seed=11)
    assert a.values.tobytes() == b.values.tobytes()
    assert init_params(InitScheme.RANDOM, inst, seed=12).values.tobytes() != a.values.tobytes()


def test_rlp_boosts_baseline_actions():
    inst = corpus_fig1()
    base = lp_baseline(inst)
    assert base[0].to_dict(inst.mdp)["s"] == {"a": 1.0}
    rnd = init_params(InitScheme.RANDOM, inst, seed=5)
    rlp = init_params(InitScheme.RLP, inst, base, seed=5)
    chosen = rlp.pack(np.stack([s.probs for s in base]) > 0.5)
    shift = rlp.values - rnd.values
    assert np.all(shift[chosen] == 10.0)
    assert np.all(shift[~chosen] == 0.0)


def test_rlp_means_favour_baseline():
    inst = corpus_fig1()
    base = lp_baseline(inst)
    mean = np.mean([init_params(InitScheme.RLP, inst, base, seed=s).logits()[:, 0, :]
                    for s in range(400)], axis=0)
    assert np.all(mean[:, 0] > mean[:, 1] + 9)
    p = 1 / (1 + np.exp(-10))
    assert abs(p - (1 - 4.54e-5)) <= 1e-7


def test_baseline_schemes_need_a_baseline():
    with pytest.raises(ValueError):
        init_params(InitScheme.RLP, corpus_fig1(), None)


def test_rsp_on_path_equals_rlp():
    inst = path_mdp(3)
    rsp = shortest_path_baseline(inst)
    rlp = lp_baseline(inst)
    assert np.array_equal(np.stack([s.probs for s in rsp]), np.stack([s.probs for s in rlp]))


def test_rsp_fig1_takes_direct_edge():
    inst = corpus_fig1()
    assert shortest_path_baseline(inst)[0].to_dict(inst.mdp)["s"] == {"b": 1.0}


def test_adam_zero_gradient_is_noop():
    x = np.array([1.0, -2.0])
    new, state = optimizer_step(x, AdamState.fresh(2), np.zeros(2))
    assert np.array_equal(new, x) and state.t == 1


def test_adam_first_step():
    g = np.array([0.3, -2e-9, 5.0])
    new, _ = optimizer_step(np.zeros(3), AdamState.fresh(3), g, 0.01, (0.9, 0.999), 1e-8)
    expected = -0.01 * g / (np.abs(g) + 1e-8)
    assert np.allclose(new, expected, rtol=1e-12, atol=0)


def test_adam_constant_gradient_unit_steps():
    x, state = np.zeros(2), AdamState.fresh(2)
    g = np.array([0.7, -3.0])
    for _ in range(500):
        prev = x
        x, state = optimizer_step(x, state, g)
    step = x - prev
    assert np.allclose(step, -0.01 * np.sign(g), rtol=1e-6)


def test_hyperparam_defaults():
    h = Hyperparams()
    assert (h.steps, h.epsilon, h.step_size, h.moment_decays, h.moment_epsilon) == \
        (1000, 1e-9, 0.01, (0.9, 0.999), 1e-8)
    inst = corpus_fig1()
    assert h.resolve_gamma(inst) == inst.mdp.n_states
    assert Hyperparams(gamma_ratio=0.5).resolve_gamma(inst) == 3


def test_autohit_is_deterministic_and_descends():
    inst = corpus_fig1()
    a = autohit(inst, Hyperparams(steps=300, seed=7))
    b = autohit(inst, Hyperparams(steps=300, seed=7))
    assert a.params.values.tobytes() == b.params.values.tobytes()
    assert [v for _, v in a.trace] == [v for _, v in b.trace]
    assert a.trace[-1][1] <= a.trace[0][1]
    profile, value = a
    assert exact_mhit_product(inst, profile) - 1e-9 <= value <= exact_mhit_product(inst, profile)


def test_autohit_reports_infinite_value():
    mdp = Mdp(["x", "t"], ["a"], {("x", "a"): {"x": 1.0}, ("t", "a"): {"t": 1.0}})
    inst = MsspInstance(mdp, (Agent("x", frozenset(["t"])),))
    _, value = autohit(inst, Hyperparams(steps=3))
    assert value == float("inf")
