import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from noisyfb import core
from noisyfb.core import InvalidSystem
from noisyfb.verify import random_encoder, random_kernel


@given(st.lists(st.integers(1, 4), min_size=0, max_size=6), st.data())
def test_history_round_trip(radices, data):
    total = int(np.prod(radices)) if radices else 1
    c = data.draw(st.integers(0, total - 1))
    syms = core.decode_history(c, radices)
    assert core.encode_history(syms, radices) == c
    assert core.HistoryIndex(tuple(radices), c).symbols == syms


def test_history_earliest_symbol_most_significant():
    assert core.encode_history([1, 0], [2, 2]) == 2
    assert core.encode_history([0, 1, 2], [2, 2, 3]) == 5


def test_bsc_one_step_joint():
    j = core.build_joint_xyz(core.bsc(0.1, 1), core.perfect_feedback(2, 1), core.iid_policy([0.5, 0.5], 1, 2), 1)
    pxy = j.grouped(["X1"], ["Y1"])
    assert np.allclose(pxy, [[0.45, 0.05], [0.05, 0.45]], atol=1e-15)
    assert np.allclose(j.marginal(["Y1"]).probs, [0.5, 0.5])


def test_deterministic_system_is_point_mass():
    n = 3
    pol = core.Kernel.from_fn("policy", n, {"X": 2, "Z": 2}, lambda i, b: [0.0, 1.0])
    j = core.build_joint_xyz(core.identity_channel(2, n), core.perfect_feedback(2, n), pol, n)
    assert j.probs.max() == 1.0
    assert np.count_nonzero(j.probs) == 1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_joint_matches_brute_force(n):
    rng = np.random.default_rng(n)
    s = {"X": 2, "Y": 2, "Z": 2}
    ch, fb, pol = (random_kernel(r, n, s, rng) for r in ("channel", "feedback", "policy"))
    j = core.build_joint_xyz(ch, fb, pol, n)
    ref = oracles.brute_xyz(ch, fb, pol, n)
    got = 0.0
    for o, p in ref:
        got = max(got, abs(j.probs[tuple(o[v] for v in j.names)] - p))
    assert got <= 1e-12
    assert abs(j.total() - 1) <= 1e-10


def test_mixed_alphabet_joint_matches_brute_force():
    rng = np.random.default_rng(3)
    s = {"X": 3, "Y": 2, "Z": 3}
    ch, fb, pol = (random_kernel(r, 2, s, rng) for r in ("channel", "feedback", "policy"))
    j = core.build_joint_xyz(ch, fb, pol, 2)
    for o, p in oracles.brute_xyz(ch, fb, pol, 2):
        assert j.probs[tuple(o[v] for v in j.names)] == pytest.approx(p, abs=1e-14)


def test_xy_marginal_is_direct_sum():
    # p(x^n, y^n) by summing the brute-force trajectories over z^n
    rng = np.random.default_rng(9)
    s = {"X": 2, "Y": 2, "Z": 2}
    ch, fb, pol = (random_kernel(r, 3, s, rng) for r in ("channel", "feedback", "policy"))
    j = core.build_joint_xyz(ch, fb, pol, 3).marginal(["X1", "Y1", "X2", "Y2", "X3", "Y3"])
    acc = {}
    for o, p in oracles.brute_xyz(ch, fb, pol, 3):
        k = tuple(o[v] for v in j.names)
        acc[k] = acc.get(k, 0.0) + p
    for k, p in acc.items():
        assert abs(j.probs[k] - p) <= 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_wxyz_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    n, M = 2, 4
    s = {"X": 2, "Y": 2, "Z": 2}
    ch, fb = random_kernel("channel", n, s, rng), random_kernel("feedback", n, s, rng)
    enc = random_encoder(M, n, 2, 2, rng)
    prior = rng.dirichlet(np.ones(M))
    j = core.build_joint_wxyz(enc, prior, ch, fb, n)
    ref = oracles.brute_wxyz(enc.to_nested(), prior, ch, fb, n)
    assert len(ref) == np.count_nonzero(j.probs)
    for o, p in ref:
        assert j.probs[tuple(o[v] for v in j.names)] == pytest.approx(p, abs=1e-14)
    assert np.allclose(j.marginal(["W"]).probs, prior)


def test_open_loop_encoder_matches_codeword_product():
    n = 3
    ch = core.bsc(0.2, n)
    cws = [[0, 1, 1], [1, 1, 0]]
    enc = core.MessageEncoder.from_codewords(cws, 2, 2)
    j = core.build_joint_wxyz(enc, None, ch, core.additive_feedback([0.7, 0.3], n, 2), n)
    pxy = j.marginal(["W"] + [f"Y{i}" for i in range(1, n + 1)]).probs
    for w, cw in enumerate(cws):
        for ys in np.ndindex(2, 2, 2):
            direct = 0.5 * np.prod([0.8 if y == x else 0.2 for x, y in zip(cw, ys)])
            assert pxy[(w,) + ys] == pytest.approx(direct, abs=1e-15)


def test_marginal_of_everything_is_identity():
    j = core.build_joint_xyz(core.bsc(0.1, 2), core.additive_feedback([0.8, 0.2], 2, 2), core.iid_policy([0.3, 0.7], 2, 2), 2)
    assert np.array_equal(core.marginal(j, list(j.names)).probs, j.probs)


def test_marginal_of_product_factorizes():
    j = core.build_joint_xyz(core.identity_channel(2, 2), core.perfect_feedback(2, 2),
                             core.iid_policy([0.3, 0.7], 2, 2), 2)
    m = j.marginal(["X1", "X2"]).probs
    assert np.allclose(m, np.outer([0.3, 0.7], [0.3, 0.7]))


@pytest.mark.parametrize("seed", range(20))
def test_induced_policy_round_trip(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed % 3
    s = {"X": 2, "Y": 2, "Z": 2}
    ch, fb, pol = (random_kernel(r, n, s, rng) for r in ("channel", "feedback", "policy"))
    ip = core.induced_policy(core.build_joint_xyz(ch, fb, pol, n))
    assert ip.max_deviation(pol) <= 1e-10


def test_induced_policy_flags_unreachable_histories():
    # x1 = 0 always, so histories with x1 = 1 carry no mass
    pol = core.Kernel.from_fn("policy", 2, {"X": 2, "Z": 2}, lambda i, b: [1.0, 0.0] if i == 1 else [0.5, 0.5])
    ip = core.induced_policy(core.build_joint_xyz(core.bsc(0.1, 2), core.additive_feedback([0.9, 0.1], 2, 2), pol, 2))
    assert ip.defined[1].tolist() == [True, True, False, False]
    assert np.isnan(ip.tables[1][2]).all()


def test_deterministic_encoder_induces_point_masses():
    rng = np.random.default_rng(1)
    enc = random_encoder(2, 2, 2, 2, rng)
    j = core.build_joint_wxyz(enc, None, core.bsc(0.1, 2), core.additive_feedback([0.9, 0.1], 2, 2), 2)
    x2 = j.grouped(["W", "Z1"], ["X2"])
    rows = x2 / x2.sum(axis=1, keepdims=True)
    assert set(np.unique(rows)) <= {0.0, 1.0}


@pytest.mark.parametrize(
    "tables,msg",
    [
        ([[[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5]] * 3], "history 3 is missing"),
        ([[[0.5, 0.6], [0.5, 0.5]], [[0.5, 0.5]] * 4], "history 0 sums"),
        ([[[0.5, 0.5], [1.2, -0.2]], [[0.5, 0.5]] * 4], "negative entry in history 1"),
    ],
)
def test_kernel_validation_names_history(tables, msg):
    with pytest.raises(InvalidSystem, match=msg):
        core.Kernel("channel", {"X": 2, "Y": 2}, tuple(np.array(t) for t in tables))


def test_dimension_mismatch_rejected():
    with pytest.raises(InvalidSystem):
        core.build_joint_xyz(core.bsc(0.1, 2), core.perfect_feedback(3, 2), core.iid_policy([0.5, 0.5], 2, 2), 2)


def test_prior_length_checked():
    enc = core.MessageEncoder.from_codewords([[0], [1]], 2, 2)
    with pytest.raises(InvalidSystem):
        core.build_joint_wxyz(enc, [1.0], core.bsc(0.1, 1), core.additive_feedback([0.9, 0.1], 1, 2), 1)


def test_noise_from_feedback_round_trip():
    noise = random_kernel("noise", 3, {"V": 3}, np.random.default_rng(0))
    fb = core.additive_feedback(noise, 3, 3)
    back = core.noise_from_feedback(fb)
    for a, b in zip(noise.tables, back.tables):
        assert np.allclose(a, b, atol=1e-15)


def test_non_additive_feedback_detected():
    fb = random_kernel("feedback", 2, {"Y": 2, "Z": 2}, np.random.default_rng(0))
    with pytest.raises(InvalidSystem, match="additive"):
        core.noise_from_feedback(fb)
