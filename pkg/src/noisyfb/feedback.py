"""Feedback-link and encoder classification, and identity certificates for message-bearing joints."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from . import core
from .core import JointTable, Kernel, MessageEncoder
from .measures import (
    causal_conditional_directed_information,
    conditional_directed_information,
    directed_information,
    entropy,
    mutual_information,
    residual_report,
)

IDENTITY_TOL = 1e-9

# identity labels used in verification reports
MESSAGE_FLOW = "I(W;Y^n) = I(X^n->Y^n) - I(X^n->Y^n|W)"
RESIDUAL_CHAIN = "0 <= I^R <= I(X^n->Y^n) <= I(X^n;Y^n)"
FLOW_DECOMPOSITION = "I(X^n->Y^n) = I(W;Y^n) + I(V^{n-1};Y^n) + I(W;V^{n-1}|Y^n)"
CLOSED_LOOP_IDENTITY = "I(Z^{n-1}->Y^n) = I(X^n->Y^n|W) - I(W;Z^{n-1}|Y^n)"
RATE_LOSS = "C - I(W;Y^n)/n >= I(X^n->Y^n|W)/n >= I(Z^{n-1}->Y^n)/n"


@dataclass(frozen=True)
class Check:
    check_name: str
    paper_ref: str
    lhs: float
    rhs: float
    tol: float = IDENTITY_TOL
    kind: str = "eq"  # "eq": |lhs - rhs| <= tol ; "le": lhs <= rhs + tol

    @property
    def residual(self) -> float:
        if self.kind == "eq":
            return abs(self.lhs - self.rhs)
        return max(0.0, self.lhs - self.rhs)

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol

    def to_dict(self) -> dict:
        return {
            "check_name": self.check_name,
            "paper_ref": self.paper_ref,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "tolerance": self.tol,
            "pass": self.passed,
        }


# ---------------------------------------------------------------------------
# feedback link classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoisyWitness:
    time: int
    message: int
    x: tuple
    z: tuple
    y_a: tuple
    y_b: tuple


@dataclass(frozen=True)
class FeedbackClassification:
    noisy: bool
    witness: NoisyWitness | None
    probing_family: str
    typicality_value: float | None = None
    typicality_series: tuple = ()


def probing_encoders(n: int, x_size: int, z_size: int) -> list[list[np.ndarray]]:
    """All constant encoders plus every single-switch variant of each.

    A single-switch encoder agrees with a constant input sequence except at one
    (time, z-history) entry, where it sends a different symbol.
    """
    family = []
    for xs in itertools.product(range(x_size), repeat=n):
        base = [np.full(z_size ** (i - 1), xs[i - 1], dtype=np.int64) for i in range(1, n + 1)]
        family.append(base)
        for i in range(2, n + 1):
            for h in range(z_size ** (i - 1)):
                for alt in range(x_size):
                    if alt == xs[i - 1]:
                        continue
                    cf = [f.copy() for f in base]
                    cf[i - 1][h] = alt
                    family.append(cf)
    return family


def classify_feedback_noisy(feedback: Kernel, n: int | None = None, channel: Kernel | None = None
                            ) -> FeedbackClassification:
    """Decide whether ``Y^i`` is recoverable from ``(X^i, Z^i, W)`` on the probed support.

    Without a channel, every output is taken to be reachable from every input
    (uniform channel), which makes the check as strict as the support allows.
    """
    n = feedback.horizon if n is None else n
    sizes = feedback.sizes
    if channel is None:
        y = sizes["Y"]
        channel = core.Kernel.from_fn("channel", n, {"X": 2, "Y": y}, lambda i, b: np.full(y, 1.0 / y))
    x_size = channel.sizes["X"]
    # one encoder at a time: with W fixed the key (w, x^i, z^i) reduces to (x^i, z^i)
    for w, cf in enumerate(probing_encoders(n, x_size, sizes["Z"])):
        enc = MessageEncoder([cf], x_size, sizes["Z"])
        joint = core.build_joint_wxyz(enc, None, channel, feedback, n)
        witness = _recoverability_witness(joint, n)
        if witness is not None:
            return FeedbackClassification(True, replace(witness, message=w), PROBING_FAMILY)
    return FeedbackClassification(False, None, PROBING_FAMILY)


PROBING_FAMILY = "constant + single-switch encoders"


def _recoverability_witness(joint: JointTable, n: int) -> NoisyWitness | None:
    for i in range(1, n + 1):
        key = ["W"] + [f"X{t}" for t in range(1, i + 1)] + [f"Z{t}" for t in range(1, i + 1)]
        ys = [f"Y{t}" for t in range(1, i + 1)]
        p = joint.grouped(key, ys)
        support = p > 0
        bad = np.flatnonzero(support.sum(axis=1) > 1)
        if bad.size:
            row = int(bad[0])
            syms = core.decode_history(row, [joint.size_of(v) for v in key])
            y_codes = np.flatnonzero(support[row])[:2]
            yr = [joint.size_of(v) for v in ys]
            return NoisyWitness(
                time=i,
                message=syms[0],
                x=syms[1:1 + i],
                z=syms[1 + i:],
                y_a=core.decode_history(int(y_codes[0]), yr),
                y_b=core.decode_history(int(y_codes[1]), yr),
            )
    return None


def feedback_typicality_series(channel: Kernel, feedback: Kernel, policy: Kernel, n: int) -> tuple[float, ...]:
    """(1/k) sum_{i<=k} H(Z^{i-1} | Y^{i-1}) for k = 1..n."""
    joint = core.build_joint_xyz(channel, feedback, policy, n)
    ys, zs = joint.seq("Y"), joint.seq("Z")
    terms = [0.0] + [entropy(joint, zs[: i - 1], ys[: i - 1]) for i in range(2, n + 1)]
    csum = np.cumsum(terms)
    return tuple(float(csum[k - 1] / k) for k in range(1, n + 1))


def feedback_typicality(channel: Kernel, feedback: Kernel, policy: Kernel, n: int) -> float:
    return feedback_typicality_series(channel, feedback, policy, n)[-1]


# ---------------------------------------------------------------------------
# encoder classification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EncoderClassification:
    closed_loop_value: float
    additive_equiv_value: float | None = None
    series: tuple = field(default=())

    @property
    def agreement_gap(self) -> float | None:
        if self.additive_equiv_value is None:
            return None
        return abs(self.closed_loop_value - self.additive_equiv_value)


def feedback_to_output_information(joint: JointTable) -> float:
    """I(Z^{n-1} -> Y^n) = sum_i I(Z^{i-1}; Y_i | Y^{i-1})."""
    if not joint.seq("Z"):
        raise KeyError("joint has no Z sequence")
    return directed_information(joint, "Z", "Y")


def encoder_typicality(joint: JointTable, tol: float = IDENTITY_TOL) -> EncoderClassification:
    n = len(joint.seq("Y"))
    value = feedback_to_output_information(joint) / n
    ys, zs = joint.seq("Y"), joint.seq("Z")
    series = tuple(
        directed_information(joint, zs[:k], ys[:k]) / k for k in range(1, n + 1)
    )
    additive = None
    if joint.seq("V"):
        vs = joint.seq("V")
        additive = mutual_information(joint, vs[: n - 1], ys) / n
        if abs(additive - value) > tol:
            raise ArithmeticError(
                f"closed-loop value {value!r} and additive-noise form {additive!r} disagree"
            )
    return EncoderClassification(value, additive, series)


# ---------------------------------------------------------------------------
# identity certificates on message-bearing joints
# ---------------------------------------------------------------------------


def verify_message_flow(joint: JointTable, tol: float = IDENTITY_TOL) -> Check:
    """|I(W;Y^n) - I^R| for a deterministic-encoder joint."""
    lhs = mutual_information(joint, "W", "Y")
    rhs = residual_report(joint).value
    return Check("message_flow_identity", MESSAGE_FLOW, lhs, rhs, tol)


def residual_chain(joint: JointTable, tol: float = IDENTITY_TOL) -> list[Check]:
    rep = residual_report(joint)
    mi = mutual_information(joint, "X", "Y")
    return [
        Check("residual_nonnegative", RESIDUAL_CHAIN, 0.0, rep.value, tol, "le"),
        Check("residual_below_directed", RESIDUAL_CHAIN, rep.value, rep.directed, tol, "le"),
        Check("directed_below_mutual", RESIDUAL_CHAIN, rep.directed, mi, tol, "le"),
        Check("message_conditioning_forms_agree", "I(X^n->Y^n||W) = I(X^n->Y^n|W)",
              rep.causal_conditional, rep.conditional, tol),
    ]


@dataclass(frozen=True)
class FlowDecomposition:
    total: float
    message_flow: float
    noise_flow: float
    mixed_flow: float

    @property
    def residual(self) -> float:
        return abs(self.total - (self.message_flow + self.noise_flow + self.mixed_flow))

    def check(self, tol: float = IDENTITY_TOL) -> Check:
        return Check("flow_decomposition", FLOW_DECOMPOSITION, self.total,
                     self.message_flow + self.noise_flow + self.mixed_flow, tol)


def decompose_flows(joint: JointTable) -> FlowDecomposition:
    """Split I(X^n->Y^n) into message, feedback-noise and mixed flows (additive feedback)."""
    vs = joint.seq("V")
    if not vs or "W" not in joint:
        raise ValueError("feedback not in additive form: joint needs W and the noise sequence V")
    n = len(joint.seq("Y"))
    v_past = vs[: n - 1]
    return FlowDecomposition(
        total=directed_information(joint, "X", "Y"),
        message_flow=mutual_information(joint, "W", "Y"),
        noise_flow=mutual_information(joint, v_past, "Y"),
        mixed_flow=mutual_information(joint, "W", v_past, "Y"),
    )


@dataclass(frozen=True)
class ClosedLoopTerms:
    feedback_to_output: float  # I(Z^{n-1} -> Y^n)
    conditional_directed: float  # I(X^n -> Y^n | W)
    message_feedback: float  # I(W; Z^{n-1} | Y^n)

    def check(self, tol: float = IDENTITY_TOL) -> Check:
        return Check("closed_loop_identity", CLOSED_LOOP_IDENTITY, self.feedback_to_output,
                     self.conditional_directed - self.message_feedback, tol)


def closed_loop_terms(joint: JointTable) -> ClosedLoopTerms:
    n = len(joint.seq("Y"))
    zs = joint.seq("Z")[: n - 1]
    return ClosedLoopTerms(
        feedback_to_output=feedback_to_output_information(joint),
        conditional_directed=conditional_directed_information(joint, "X", "Y", "W"),
        message_feedback=mutual_information(joint, "W", zs, "Y"),
    )


def verify_dmc_lemma(joint: JointTable, tol: float = IDENTITY_TOL) -> Check:
    return closed_loop_terms(joint).check(tol)


@dataclass(frozen=True)
class RateLoss:
    surrogate: float  # I(Z^{n-1}->Y^n)/n
    gap: float  # C - I(W;Y^n)/n
    conditional_directed_rate: float  # I(X^n->Y^n|W)/n
    capacity: float
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def rate_loss_bound(joint: JointTable, channel: Kernel, tol: float = IDENTITY_TOL) -> RateLoss:
    """Finite-n rate-loss certificate for a memoryless forward channel."""
    from .bounds import single_letter_capacity

    if not channel.is_memoryless():
        raise ValueError("rate-loss bound needs a memoryless forward channel")
    n = len(joint.seq("Y"))
    cap = single_letter_capacity(channel.tables[0]).capacity
    terms = closed_loop_terms(joint)
    surrogate = terms.feedback_to_output / n
    gap = cap - mutual_information(joint, "W", "Y") / n
    cond = terms.conditional_directed / n
    checks = (
        Check("rate_gap_covers_conditional_flow", RATE_LOSS, cond, gap, tol, "le"),
        Check("conditional_flow_covers_closed_loop", RATE_LOSS, surrogate, cond, tol, "le"),
    )
    return RateLoss(surrogate, gap, cond, cap, checks)
