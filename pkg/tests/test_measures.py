import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from noisyfb import core, measures as m
from noisyfb.measures import InfoQuery
from noisyfb.verify import random_encoder, random_kernel

S2 = {"X": 2, "Y": 2, "Z": 2}


def random_xyz(seed, n, sizes=S2):
    rng = np.random.default_rng(seed)
    ch, fb, pol = (random_kernel(r, n, sizes, rng) for r in ("channel", "feedback", "policy"))
    return core.build_joint_xyz(ch, fb, pol, n), oracles.brute_xyz(ch, fb, pol, n)


def random_wxyz(seed, n, M=4):
    rng = np.random.default_rng(seed)
    ch, fb = random_kernel("channel", n, S2, rng), random_kernel("feedback", n, S2, rng)
    enc = random_encoder(M, n, 2, 2, rng)
    prior = np.full(M, 1 / M)
    return core.build_joint_wxyz(enc, prior, ch, fb, n), oracles.brute_wxyz(enc.to_nested(), prior, ch, fb, n)


def test_bsc_single_letter_mutual_information():
    for a in (0.0, 0.1, 0.25, 0.5):
        j = core.build_joint_xyz(core.bsc(a, 1), core.perfect_feedback(2, 1), core.iid_policy([0.5, 0.5], 1, 2), 1)
        assert m.mutual_information(j, "X", "Y") == pytest.approx(1 - oracles.h2(a), abs=1e-13)


def test_bsc_directed_information_over_two_uses():
    j = core.build_joint_xyz(core.bsc(0.1, 2), core.perfect_feedback(2, 2), core.iid_policy([0.5, 0.5], 2, 2), 2)
    assert m.directed_information(j) == pytest.approx(2 * (1 - oracles.h2(0.1)), abs=1e-13)


@pytest.mark.parametrize("seed", range(6))
def test_measures_match_oracle(seed):
    n = 1 + seed % 3
    j, ref = random_xyz(seed, n)
    X, Y, Z = (oracles.seq(c, n) for c in "XYZ")
    assert m.entropy(j, "Y") == pytest.approx(oracles.H(ref, Y), abs=1e-12)
    assert m.entropy(j, "Y", "X") == pytest.approx(oracles.H(ref, Y, X), abs=1e-12)
    assert m.mutual_information(j, "X", "Y") == pytest.approx(oracles.cmi(ref, X, Y), abs=1e-12)
    assert m.mutual_information(j, "X", "Y", "Z") == pytest.approx(oracles.cmi(ref, X, Y, Z), abs=1e-12)
    assert m.directed_information(j) == pytest.approx(oracles.directed(ref, n), abs=1e-12)
    assert m.causal_conditional_directed_information(j) == pytest.approx(
        oracles.directed(ref, n, causal="Z"), abs=1e-12)
    # Z^{i-1} -> Y_i : the feedback output precedes Y_i only up to time i-1
    assert m.directed_information(j, "Z", "Y") == pytest.approx(oracles.directed(ref, n, "Z", "Y", lag=1), abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_residual_matches_oracle(seed):
    n = 1 + seed % 3
    j, ref = random_wxyz(seed, n)
    di = oracles.directed(ref, n)
    cond = oracles.directed(ref, n, given=["W"])
    assert m.residual_directed_information(j) == pytest.approx(di - cond, abs=1e-12)
    assert m.conditional_directed_information(j) == pytest.approx(cond, abs=1e-12)
    assert m.mutual_information(j, "W", "Y") == pytest.approx(oracles.cmi(ref, ["W"], oracles.seq("Y", n)), abs=1e-12)


def test_residual_forms_disagreement_raises():
    j, _ = random_xyz(0, 2)
    # Z is produced after Y_i, so causal and full conditioning on it differ
    with pytest.raises(ArithmeticError):
        m.residual_directed_information(j, message="Z")


def test_message_missing_raises():
    j, _ = random_xyz(0, 1)
    with pytest.raises(KeyError):
        m.residual_report(j, message=[])


def test_single_message_has_zero_flow():
    enc = core.MessageEncoder([[np.array([1]), np.array([0, 1])]], 2, 2)
    j = core.build_joint_wxyz(enc, None, core.bsc(0.1, 2), core.additive_feedback([0.9, 0.1], 2, 2), 2)
    assert m.mutual_information(j, "W", "Y") == 0.0
    assert abs(m.residual_directed_information(j)) <= 1e-12


def test_identity_channel_two_messages_one_bit():
    enc = core.MessageEncoder.from_codewords([[0], [1]], 2, 2)
    j = core.build_joint_wxyz(enc, None, core.identity_channel(2, 1), core.perfect_feedback(2, 1), 1)
    assert m.mutual_information(j, "W", "Y") == pytest.approx(1.0, abs=1e-15)


@given(st.integers(0, 10**6), st.integers(1, 3))
def test_information_inequalities(seed, n):
    j, _ = random_xyz(seed, n)
    di = m.directed_information(j)
    assert -1e-12 <= di <= m.mutual_information(j, "X", "Y") + 1e-12
    assert m.causal_conditional_directed_information(j) >= -1e-12
    assert m.entropy(j, "Y", "X") <= m.entropy(j, "Y") + 1e-12


@given(st.integers(0, 10**6))
def test_chain_rule(seed):
    j, _ = random_xyz(seed, 2)
    lhs = m.mutual_information(j, ["X1"], ["Y1", "Y2"])
    rhs = m.mutual_information(j, ["X1"], ["Y1"]) + m.mutual_information(j, ["X1"], ["Y2"], ["Y1"])
    assert lhs == pytest.approx(rhs, abs=1e-12)


@given(st.integers(0, 10**6), st.sampled_from(["mutual_info", "directed_info", "causal_cond_directed_info",
                                                  "cond_entropy", "entropy"]))
def test_density_mean_is_measure(seed, kind):
    j, _ = random_xyz(seed, 2)
    q = {
        "mutual_info": InfoQuery("mutual_info", "X", "Y"),
        "directed_info": InfoQuery("directed_info", "X", "Y"),
        "causal_cond_directed_info": InfoQuery("causal_cond_directed_info", "X", "Y", "Z"),
        "cond_entropy": InfoQuery("cond_entropy", "Y", given="X"),
        "entropy": InfoQuery("entropy", "Z"),
    }[kind]
    expect = {
        "mutual_info": lambda: m.mutual_information(j, "X", "Y"),
        "directed_info": lambda: m.directed_information(j),
        "causal_cond_directed_info": lambda: m.causal_conditional_directed_information(j),
        "cond_entropy": lambda: m.entropy(j, "Y", "X"),
        "entropy": lambda: m.entropy(j, "Z"),
    }[kind]()
    assert m.density(j, q).mean() == pytest.approx(expect, abs=1e-10)


def test_pointwise_density_matches_oracle():
    j, ref = random_xyz(5, 2)
    d = m.density(j, InfoQuery("mutual_info", "X", "Y", "Z"))
    for o, _ in ref[::7]:
        v = d.values[tuple(o[k] for k in j.names)]
        assert v == pytest.approx(oracles.pointwise(ref, o, ["X1", "X2"], ["Y1", "Y2"], ["Z1", "Z2"]), abs=1e-10)


def test_residual_density_mean_is_message_information():
    j, _ = random_wxyz(3, 2)
    d = m.density(j, InfoQuery("residual_directed_info", "X", "Y", "W"))
    assert d.mean() == pytest.approx(m.mutual_information(j, "W", "Y"), abs=1e-10)


def test_density_in_nats():
    j, _ = random_xyz(2, 1)
    bits = m.density(j, InfoQuery("mutual_info", "X", "Y")).mean()
    nats = m.density(j, InfoQuery("mutual_info", "X", "Y", units="nats")).mean()
    assert nats == pytest.approx(bits * math.log(2), abs=1e-14)


def test_density_nan_off_support():
    pol = core.iid_policy([1.0, 0.0], 1, 2)
    j = core.build_joint_xyz(core.bsc(0.1, 1), core.perfect_feedback(2, 1), pol, 1)
    d = m.density(j, InfoQuery("mutual_info", "X", "Y"))
    assert np.isnan(d.values[1]).all()
    assert not np.isnan(d.values[0, 0, 0]) and not np.isnan(d.values[0, 1, 1])


def test_identity_channel_density_constant():
    n = 2
    j = core.build_joint_xyz(core.identity_channel(2, n), core.perfect_feedback(2, n),
                             core.iid_policy([0.5, 0.5], n, 2), n)
    d = m.density(j, InfoQuery("directed_info", "X", "Y"))
    vals, _ = d.outcomes()
    assert np.allclose(vals, 2.0)
    assert np.allclose(m.finite_n_density_quantiles(d, [0.01, 0.05, 0.5]), 1.0)


def test_lower_quantile_definition():
    d = m.DensityTable(("A",), np.array([3.0, 1.0, 2.0]), np.array([0.5, 0.25, 0.25]), 1)
    assert m.finite_n_density_quantiles(d, [0.0, 0.25, 0.26, 0.5, 0.51, 1.0]).tolist() == [1, 1, 2, 2, 3, 3]


@given(st.integers(0, 10**6), st.lists(st.floats(0, 1), min_size=2, max_size=6))
def test_quantiles_monotone(seed, qs):
    j, _ = random_xyz(seed, 2)
    d = m.density(j, InfoQuery("directed_info", "X", "Y"))
    qs = sorted(qs)
    vals = m.finite_n_density_quantiles(d, qs)
    assert np.all(np.diff(vals) >= 0)


def test_bad_query_rejected():
    with pytest.raises(ValueError):
        InfoQuery("banana")
    with pytest.raises(ValueError):
        InfoQuery("entropy", "X", units="dits")
