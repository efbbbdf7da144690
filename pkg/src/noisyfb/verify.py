"""Random-system identity suites.

Every trial draws its own generator from ``default_rng([seed, suite_id, trial])``
so trials are independent of execution order and of each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import codefn, core, feedback as fbk
from .core import Kernel, MessageEncoder
from .feedback import Check
from .measures import directed_information, mutual_information

SUITE_IDS = {"message": 1, "additive": 2, "codefn": 3, "core": 4}


# ---------------------------------------------------------------------------
# random systems
# ---------------------------------------------------------------------------


def random_kernel(role: str, n: int, sizes: dict, rng: np.random.Generator, concentration: float = 1.0) -> Kernel:
    out, _ = core.ROLES[role]
    k = sizes[out]
    tables = []
    for i in range(1, n + 1):
        rows = int(np.prod([sizes[nm[0]] for nm in core.cond_names(role, i)], dtype=np.int64))
        tables.append(rng.dirichlet(np.full(k, concentration), size=rows))
    return Kernel(role, sizes, tuple(tables))


def random_encoder(M: int, n: int, x_size: int, z_size: int, rng: np.random.Generator,
                   open_loop: bool = False) -> MessageEncoder:
    if open_loop:
        return MessageEncoder.from_codewords(rng.integers(0, x_size, size=(M, n)), x_size, z_size)
    cfs = [[rng.integers(0, x_size, size=z_size ** (i - 1)) for i in range(1, n + 1)] for _ in range(M)]
    return MessageEncoder(cfs, x_size, z_size)


@dataclass(frozen=True, eq=False)
class RandomSystem:
    n: int
    channel: Kernel
    feedback: Kernel
    encoder: MessageEncoder | None = None
    policy: Kernel | None = None
    noise: Kernel | None = None


def random_message_system(rng, n=None, M=None, size=2) -> RandomSystem:
    n = int(rng.integers(1, 4)) if n is None else n
    M = int(rng.choice([2, 4])) if M is None else M
    sizes = {"X": size, "Y": size, "Z": size}
    ch = random_kernel("channel", n, sizes, rng)
    fb = random_kernel("feedback", n, sizes, rng)
    return RandomSystem(n, ch, fb, encoder=random_encoder(M, n, size, size, rng))


def random_additive_system(rng, n=None, M=None, size=2) -> RandomSystem:
    n = int(rng.integers(1, 4)) if n is None else n
    M = int(rng.choice([2, 4])) if M is None else M
    sizes = {"X": size, "Y": size}
    ch = random_kernel("channel", n, sizes, rng)
    noise = random_kernel("noise", n, {"V": size}, rng)
    fb = core.additive_feedback(noise, n, size)
    return RandomSystem(n, ch, fb, encoder=random_encoder(M, n, size, size, rng), noise=noise)


def random_policy_system(rng, n=2, size=2) -> RandomSystem:
    sizes = {"X": size, "Y": size, "Z": size}
    return RandomSystem(
        n,
        random_kernel("channel", n, sizes, rng),
        random_kernel("feedback", n, sizes, rng),
        policy=random_kernel("policy", n, sizes, rng),
    )


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def message_trial(rng, tol) -> list[Check]:
    s = random_message_system(rng)
    joint = core.build_joint_wxyz(s.encoder, None, s.channel, s.feedback, s.n)
    checks = [fbk.verify_message_flow(joint, tol)] + fbk.residual_chain(joint, tol)
    checks.append(fbk.verify_dmc_lemma(joint, tol))

    perfect = core.perfect_feedback(s.channel.sizes["Y"], s.n)
    jp = core.build_joint_wxyz(s.encoder, None, s.channel, perfect, s.n)
    rep = fbk.residual_report(jp)
    checks.append(Check("perfect_feedback_residual_is_directed", fbk.RESIDUAL_CHAIN, rep.value, rep.directed, tol))

    ol = random_encoder(s.encoder.M, s.n, s.channel.sizes["X"], s.feedback.sizes["Z"], rng, open_loop=True)
    jo = core.build_joint_wxyz(ol, None, s.channel, s.feedback, s.n)
    checks.append(Check("open_loop_directed_is_mutual", fbk.RESIDUAL_CHAIN,
                        directed_information(jo, "X", "Y"), mutual_information(jo, "X", "Y"), tol))
    checks.append(Check("open_loop_closed_loop_flow_zero", fbk.CLOSED_LOOP_IDENTITY,
                        fbk.feedback_to_output_information(jo), 0.0, tol))
    return checks


def additive_trial(rng, tol) -> list[Check]:
    s = random_additive_system(rng)
    joint = core.build_joint_wxyz(s.encoder, None, s.channel, s.feedback, s.n, noise=s.noise)
    checks = [fbk.decompose_flows(joint).check(tol)]
    n = s.n
    ys, vs = joint.seq("Y"), joint.seq("V")
    checks.append(Check("closed_loop_equals_noise_flow", "I(Z^{n-1}->Y^n) = I(V^{n-1};Y^n)",
                        fbk.feedback_to_output_information(joint), mutual_information(joint, vs[: n - 1], ys), tol))
    return checks


def codefn_trial(rng, tol) -> list[Check]:
    s = random_policy_system(rng, n=2)
    cfd = codefn.good_distribution_from_policy(s.policy)
    full = codefn.joint_fxyz(cfd, s.channel, s.feedback)
    de = codefn.verify_density_equality(full)
    xyz = core.build_joint_xyz(s.channel, s.feedback, s.policy, s.n)
    direct = full.marginal(xyz.names)
    checks = [
        codefn.verify_induced_policy(full, s.policy, min(tol, 1e-10)),
        *de.checks(codefn.DENSITY_TOL, tol),
        codefn.verify_lemma_F_decomposition(full).check(tol),
        Check("code_function_marginal_matches_policy_joint", "p(x^n,y^n,z^n) from F^n = from policy",
              float(np.max(np.abs(direct.probs - xyz.probs))), 0.0, 1e-10),
        Check("code_function_law_normalized", "sum_f p(f^n) = 1", float(cfd.probs.sum()), 1.0, 1e-10),
    ]
    return checks


def core_trial(rng, tol) -> list[Check]:
    n = int(rng.integers(1, 4))
    s = random_policy_system(rng, n=n)
    joint = core.build_joint_xyz(s.channel, s.feedback, s.policy, n)
    dev = core.induced_policy(joint).max_deviation(s.policy)
    return [
        Check("joint_normalized", "sum p(x^n,y^n,z^n) = 1", joint.total(), 1.0, 1e-10),
        Check("induced_policy_round_trip", codefn.INDUCED_POLICY, dev, 0.0, 1e-10),
    ]


TRIALS = {"message": message_trial, "additive": additive_trial, "codefn": codefn_trial, "core": core_trial}


def run_suite(name: str, trials: int, seed: int, tol: float = fbk.IDENTITY_TOL) -> list[dict]:
    fn = TRIALS[name]
    rows = []
    for t in range(trials):
        rng = np.random.default_rng([seed, SUITE_IDS[name], t])
        for c in fn(rng, tol):
            d = c.to_dict()
            d["suite"] = name
            d["trial"] = t
            rows.append(d)
    return rows


def run_all(trials: int, seed: int, tol: float = fbk.IDENTITY_TOL, suites=None) -> list[dict]:
    rows = []
    for name in suites or TRIALS:
        rows.extend(run_suite(name, trials, seed, tol))
    return rows
