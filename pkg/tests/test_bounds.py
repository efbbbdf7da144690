import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import minimize

import oracles
from noisyfb import bounds as b, core
from noisyfb.verify import random_kernel

H = oracles.h2
C_BSC = 1 - H(0.1)


def fb_bsc(beta, n):
    return core.additive_feedback([1 - beta, beta], n, 2)


# -- objective ----------------------------------------------------------------


def test_objective_identity_channel():
    for n in (1, 2, 3):
        pol = b.PolicyParameterization.uniform(n, 2, 2)
        assert b.objective(pol, core.identity_channel(2, n), core.perfect_feedback(2, n)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_objective_bsc_uniform_every_n(n):
    pol = b.PolicyParameterization.uniform(n, 2, 2)
    assert b.objective(pol, core.bsc(0.1, n), fb_bsc(0.1, n)) == pytest.approx(C_BSC, abs=1e-12)


def test_objective_constant_input_is_zero():
    pol = core.iid_policy([1.0, 0.0], 2, 2)
    assert abs(b.objective(pol, core.bsc(0.1, 2), fb_bsc(0.2, 2))) <= 1e-15


@given(st.integers(0, 10**6))
def test_fast_plan_matches_exact(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 3
    s = {"X": 2, "Y": 2, "Z": 2}
    ch, fb = random_kernel("channel", n, s, rng), random_kernel("feedback", n, s, rng)
    pol = b.PolicyParameterization.random(n, 2, 2, rng)
    plan = b.ObjectivePlan(ch, fb, n)
    assert plan(pol.theta) == pytest.approx(b.objective(pol, ch, fb), abs=1e-12)


def test_fast_plan_with_zero_cells():
    n = 2
    ch, fb = core.identity_channel(3, n), core.perfect_feedback(3, n)
    pol = b.PolicyParameterization.random(n, 3, 3, np.random.default_rng(0))
    assert b.ObjectivePlan(ch, fb, n)(pol.theta) == pytest.approx(b.objective(pol, ch, fb), abs=1e-12)


def test_parameterization_round_trip():
    pol = b.PolicyParameterization.random(3, 2, 2, np.random.default_rng(1))
    back = b.PolicyParameterization.from_kernel(pol.to_kernel())
    assert np.array_equal(back.theta, pol.theta)
    assert pol.n_points == 1 + 4 + 16 and pol.n_params == 21
    with pytest.raises(ValueError):
        b.PolicyParameterization(1, 2, 2, np.array([[0.6, 0.6]]))


def test_simplex_grid():
    g = b.simplex_grid(3, 4)
    assert len(g) == math.comb(4 + 2, 2)
    assert np.allclose(g.sum(axis=1), 1) and g.min() >= 0


# -- optimizer -----------------------------------------------------------------


@pytest.fixture(scope="module")
def bsc_n2():
    return b.optimize_upper_bound(core.bsc(0.1, 2), fb_bsc(0.1, 2), 2)


def test_bsc_upper_bound_window(bsc_n2):
    v = bsc_n2.upper_bound_bits_per_use
    assert C_BSC - 1e-3 <= v <= C_BSC + 1e-9
    assert bsc_n2.method == "ascent"
    assert len(bsc_n2.restart_values) == 32
    assert bsc_n2.restart_values[0] == pytest.approx(C_BSC, abs=1e-9)  # uniform start is already optimal


def test_bsc_argmax_is_feasible(bsc_n2):
    pol = bsc_n2.argmax_policy
    assert b.objective(pol, core.bsc(0.1, 2), fb_bsc(0.1, 2)) == pytest.approx(bsc_n2.upper_bound_bits_per_use, abs=1e-12)
    d = bsc_n2.to_dict()
    assert d["upper_bound_bits_per_use"] == bsc_n2.upper_bound_bits_per_use
    assert d["noise_entropy_rate"] == pytest.approx(H(0.1), abs=1e-12)


def test_trace_monotone(bsc_n2):
    assert all(a <= c for a, c in zip(bsc_n2.trace, bsc_n2.trace[1:]))


def test_identity_channel_bound():
    for n in (1, 2, 3):
        cfg = b.OptimizerConfig(restarts=2, iterations=200)
        r = b.optimize_upper_bound(core.identity_channel(2, n), core.perfect_feedback(2, n), n, cfg)
        assert r.upper_bound_bits_per_use == pytest.approx(1.0, abs=1e-9)


def test_point_cap():
    with pytest.raises(ValueError, match="cap"):
        b.optimize_upper_bound(core.bsc(0.1, 5), fb_bsc(0.1, 5), 5)


def test_deterministic_given_seed():
    cfg = b.OptimizerConfig(restarts=3, iterations=100, grid_cap=0)
    r1 = b.optimize_upper_bound(core.bsc(0.2, 1), fb_bsc(0.1, 1), 1, cfg)
    r2 = b.optimize_upper_bound(core.bsc(0.2, 1), fb_bsc(0.1, 1), 1, cfg)
    assert r1.restart_values == r2.restart_values


def slsqp_capacity(W):
    """max_p I(X;Y) by a general constrained solver on a softmax-free simplex."""
    k = W.shape[0]

    def neg(p):
        p = np.clip(p, 0, None)
        q = p @ W
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(W > 0, W * np.log2(W / q), 0.0)
        return -float(p @ t.sum(axis=1))

    best = np.inf
    for start in [np.full(k, 1 / k)] + [np.eye(k)[j] * 0.8 + 0.2 / k for j in range(k)]:
        res = minimize(neg, start, method="SLSQP", bounds=[(0, 1)] * k,
                       constraints=[{"type": "eq", "fun": lambda p: p.sum() - 1}], options={"ftol": 1e-14, "maxiter": 500})
        best = min(best, res.fun)
    return -best


def random_dmcs():
    rng = np.random.default_rng(2024)
    out = []
    for t in range(20):
        x, y = 2 + t % 2, 2 + (t // 2) % 2
        out.append(rng.dirichlet(np.ones(y) * 0.7, size=x))
    return out


@pytest.mark.parametrize("k", range(20))
def test_n1_optimizer_matches_single_letter(k):
    W = random_dmcs()[k]
    ch = core.dmc(W, 1)
    ba = b.single_letter_capacity(W)
    assert ba.gap < 1e-10
    assert ba.capacity == pytest.approx(slsqp_capacity(W), abs=1e-7)
    r = b.optimize_upper_bound(ch, core.perfect_feedback(W.shape[1], 1), 1)
    assert abs(r.upper_bound_bits_per_use - ba.capacity) <= 1e-6


def test_single_letter_known_channels():
    assert b.single_letter_capacity(core.bsc(0.1, 1)).capacity == pytest.approx(0.531004406410719, abs=1e-12)
    assert b.single_letter_capacity(core.bec_matrix(0.25)).capacity == pytest.approx(0.75, abs=1e-9)
    for q in (2, 3, 5):
        assert b.single_letter_capacity(np.eye(q)).capacity == pytest.approx(math.log2(q), abs=1e-12)
    # Z channel: closed form log2(1 + (1-e) e^{e/(1-e)})
    e = 0.3
    zc = math.log2(1 + (1 - e) * e ** (e / (1 - e)))
    assert b.single_letter_capacity(np.array([[1, 0], [e, 1 - e]])).capacity == pytest.approx(zc, abs=1e-9)


def test_single_letter_rejects_bad_input():
    with pytest.raises(ValueError):
        b.single_letter_capacity(np.array([[0.5, 0.6], [0.5, 0.5]]))
    with pytest.raises(ValueError):
        b.single_letter_capacity(random_kernel("channel", 2, {"X": 2, "Y": 2}, np.random.default_rng(0)))


# -- lower bound -----------------------------------------------------------------


def test_lower_bound_bernoulli_feedback_noise(bsc_n2):
    noise = core.iid_noise([0.95, 0.05], 2)
    lb = b.lower_bound_additive(bsc_n2.upper_bound_bits_per_use, noise, 2)
    assert lb.value == pytest.approx(C_BSC - H(0.05), abs=1e-6)
    assert lb.value == pytest.approx(0.244607, abs=1e-4)
    assert not lb.clamped


def test_lower_bound_uniform_noise_clamps(bsc_n2):
    lb = b.lower_bound_additive(bsc_n2, core.additive_feedback([0.5, 0.5], 2, 2))
    assert lb.value == 0.0 and lb.clamped
    assert lb.noise_entropy_rate == pytest.approx(1.0, abs=1e-12)
    assert bsc_n2.lower_bound_bits_per_use == 0.0


def test_lower_bound_noiseless_feedback_equals_upper():
    lb = b.lower_bound_additive(0.4, core.iid_noise([1.0, 0.0], 3))
    assert lb.value == 0.4


def test_lower_bound_needs_additive():
    with pytest.raises(core.InvalidSystem):
        b.lower_bound_additive(0.4, core.bsc(0.1, 2), 2)


def test_noise_entropy_rate_with_memory():
    # Markov noise: v1 uniform, v2 = v1 flipped w.p. 0.2
    noise = core.Kernel.from_fn("noise", 2, {"V": 2},
                                lambda i, bl: [0.5, 0.5] if i == 1 else ([0.8, 0.2] if bl["V"][0] == 0 else [0.2, 0.8]))
    assert b.noise_entropy_rate(noise, 2) == pytest.approx((1 + H(0.2)) / 2, abs=1e-12)
    fb = core.additive_feedback(noise, 2, 2)
    assert b.feedback_noise_entropy_rate(fb, 2) == pytest.approx((1 + H(0.2)) / 2, abs=1e-12)
    assert b.feedback_noise_entropy_rate(random_kernel("feedback", 2, {"Y": 2, "Z": 2}, np.random.default_rng(0)), 2) is None


# -- BCEC capacity ------------------------------------------------------------------


def test_bcec_capacity():
    assert b.bcec_capacity(10, 0.2) == pytest.approx(8.0)
    assert b.bcec_capacity(2, 0.0) == 2.0
    for bad in [(1, 0.1), (2.5, 0.1), (10, 1.0), (10, -0.1)]:
        with pytest.raises(ValueError):
            b.bcec_capacity(*bad)
