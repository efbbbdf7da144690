"""Code-functions: deterministic maps z^{i-1} -> x_i, laws over them, and the lemmas tying them to policies.

Canonical indexing. The time-``i`` component ``f_i`` is a table over the
``|Z|^{i-1}`` feedback histories; its index is the mixed-radix number formed by
those symbols (history 0 most significant, radix ``|X|``). A whole code-function
is indexed by ``(f_1, ..., f_n)`` in mixed radix, ``f_1`` most significant, so the
enumeration is lexicographic in (time, z-history, symbol).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import core
from .core import JointTable, Kernel, _Builder, _check_compat, cond_names
from .feedback import Check, IDENTITY_TOL
from .measures import (
    InfoQuery,
    causal_conditional_directed_information,
    density,
    finite_n_density_quantiles,
    mutual_information,
)

ENUMERATION_CAP = 65536
DENSITY_TOL = 1e-8

DENSITY_EQUALITY = "i(F^n;Y^n) = i(X^n->Y^n) - i(X^n->Y^n||F^n)"
F_DECOMPOSITION = "I(F^n;Y^n) = I(X^n->Y^n||Z^n) - I(F^n;Z^n|Y^n)"
INDUCED_POLICY = "p_ind(x_i|x^{i-1},z^{i-1}) = p(x_i|x^{i-1},z^{i-1})"


class EnumerationCapExceeded(ValueError):
    pass


def component_sizes(n: int, x_size: int, z_size: int) -> list[int]:
    return [x_size ** (z_size ** (i - 1)) for i in range(1, n + 1)]


def count_code_functions(n: int, x_size: int, z_size: int) -> int:
    return int(np.prod(component_sizes(n, x_size, z_size), dtype=object))


def digit_table(i: int, x_size: int, z_size: int) -> np.ndarray:
    """``D[f_i, h]``: symbol sent at time ``i`` by component ``f_i`` after z-history ``h``."""
    nh = z_size ** (i - 1)
    idx = np.arange(x_size ** nh, dtype=np.int64)
    powers = x_size ** np.arange(nh - 1, -1, -1, dtype=np.int64)
    return (idx[:, None] // powers[None, :]) % x_size


@dataclass(frozen=True, eq=False)
class CodeFunction:
    tables: tuple[np.ndarray, ...]
    x_size: int
    z_size: int

    @property
    def horizon(self) -> int:
        return len(self.tables)

    def __call__(self, z_history: Sequence[int]) -> tuple[int, ...]:
        """Inputs ``x_1..x_k`` sent along ``z_history`` of length ``k - 1``."""
        k = len(z_history) + 1
        return tuple(
            int(self.tables[i - 1][core.encode_history(z_history[: i - 1], (self.z_size,) * (i - 1))])
            for i in range(1, k + 1)
        )

    @property
    def components(self) -> tuple[int, ...]:
        return tuple(core.encode_history(t.tolist(), (self.x_size,) * t.size) for t in self.tables)

    @property
    def index(self) -> int:
        return core.encode_history(self.components, component_sizes(self.horizon, self.x_size, self.z_size))

    def to_nested(self) -> list:
        return [t.tolist() for t in self.tables]


def enumerate_code_functions(n: int, x_size: int, z_size: int, cap: int = ENUMERATION_CAP) -> list[CodeFunction]:
    total = count_code_functions(n, x_size, z_size)
    if total > cap:
        raise EnumerationCapExceeded(f"{total} code-functions exceed the cap of {cap}")
    digits = [digit_table(i, x_size, z_size) for i in range(1, n + 1)]
    return [
        CodeFunction(tuple(digits[i][c] for i, c in enumerate(combo)), x_size, z_size)
        for combo in itertools.product(*(range(d.shape[0]) for d in digits))
    ]


@dataclass(frozen=True, eq=False)
class CodeFunctionDistribution:
    """Law over code-functions, kept in sequential form ``p(f_i | f^{i-1})``.

    ``sequential[i-1]`` has shape (prod_{j<i} |F_j|, |F_i|).
    """

    sequential: tuple[np.ndarray, ...]
    x_size: int
    z_size: int

    @property
    def horizon(self) -> int:
        return len(self.sequential)

    @property
    def probs(self) -> np.ndarray:
        """Probability of each code-function in canonical order."""
        p = np.ones(1)
        for t in self.sequential:
            p = (p[:, None] * t).ravel()
        return p

    def sequential_from_probs(self) -> tuple[np.ndarray, ...]:
        """Recover ``p(f_i | f^{i-1})`` from the full vector (rows of zero mass are NaN)."""
        sizes = component_sizes(self.horizon, self.x_size, self.z_size)
        full = self.probs.reshape(sizes)
        out = []
        for i in range(1, self.horizon + 1):
            head = full.sum(axis=tuple(range(i, self.horizon))) if i < self.horizon else full
            head = head.reshape(-1, sizes[i - 1])
            mass = head.sum(axis=1, keepdims=True)
            with np.errstate(invalid="ignore", divide="ignore"):
                out.append(np.where(mass > 0, head / mass, np.nan))
        return tuple(out)


def _input_rows(i: int, policy: Kernel, digits: list[np.ndarray]) -> np.ndarray:
    """``R[f^{i-1}, h]``: policy history code of (x^{i-1}(f^{i-1}, h), h) at time ``i``."""
    x_size, z_size = policy.sizes["X"], policy.sizes["Z"]
    nh = z_size ** (i - 1)
    prev_sizes = [d.shape[0] for d in digits[: i - 1]]
    n_prev = int(np.prod(prev_sizes, dtype=np.int64))
    prev = np.array(list(np.ndindex(*prev_sizes)), dtype=np.int64).reshape(n_prev, i - 1)
    rows = np.zeros((n_prev, nh), dtype=np.int64)
    for h in range(nh):
        zs = core.decode_history(h, (z_size,) * (i - 1))
        for f_code in range(n_prev):
            xs = [
                int(digits[j - 1][prev[f_code, j - 1], core.encode_history(zs[: j - 1], (z_size,) * (j - 1))])
                for j in range(1, i)
            ]
            rows[f_code, h] = core.encode_history(xs + list(zs), (x_size,) * (i - 1) + (z_size,) * (i - 1))
    return rows


def good_distribution_from_policy(policy: Kernel, n: int | None = None, cap: int = ENUMERATION_CAP
                                  ) -> CodeFunctionDistribution:
    """Product-form law: p(f_i|f^{i-1}) = prod_h p(x_i = f_i(h) | x^{i-1} = f^{i-1} along h, h)."""
    n = policy.horizon if n is None else n
    x_size, z_size = policy.sizes["X"], policy.sizes["Z"]
    total = count_code_functions(n, x_size, z_size)
    if total > cap:
        raise EnumerationCapExceeded(f"{total} code-functions exceed the cap of {cap}")
    digits = [digit_table(i, x_size, z_size) for i in range(1, n + 1)]
    seq = []
    for i in range(1, n + 1):
        rows = _input_rows(i, policy, digits)  # (n_prev, nh)
        table = policy.tables[i - 1]
        # factors[f_prev, f_i, h] = table[rows[f_prev, h], D_i[f_i, h]]
        factors = table[rows[:, None, :], digits[i - 1][None, :, :]]
        seq.append(np.prod(factors, axis=2))
    return CodeFunctionDistribution(tuple(seq), x_size, z_size)


def joint_fxyz(cfdist: CodeFunctionDistribution, channel: Kernel, feedback: Kernel) -> JointTable:
    """Exact joint over ``F1 X1 Y1 Z1 ... Fn Xn Yn Zn``."""
    n = cfdist.horizon
    _check_compat(channel, feedback, n)
    x_size, z_size = cfdist.x_size, cfdist.z_size
    if x_size != channel.sizes["X"] or z_size != feedback.sizes["Z"]:
        raise core.InvalidSystem("code-function alphabets do not match the channel/feedback")
    b = _Builder()
    for i in range(1, n + 1):
        d = digit_table(i, x_size, z_size)
        b.add(f"F{i}", d.shape[0], cfdist.sequential[i - 1], [f"F{t}" for t in range(1, i)])
        det = np.zeros((d.size, x_size))
        det[np.arange(d.size), d.ravel()] = 1.0
        b.add(f"X{i}", x_size, det, [f"F{i}"] + [f"Z{t}" for t in range(1, i)])
        b.add(f"Y{i}", channel.sizes["Y"], channel.tables[i - 1], cond_names("channel", i))
        b.add(f"Z{i}", z_size, feedback.tables[i - 1], cond_names("feedback", i))
    return b.table(n)


def joint_xyf(cfdist: CodeFunctionDistribution, channel: Kernel, feedback: Kernel,
              full: JointTable | None = None) -> JointTable:
    """(X^n, Y^n, F^n) marginal of :func:`joint_fxyz`."""
    full = joint_fxyz(cfdist, channel, feedback) if full is None else full
    return full.marginal([v for v in full.names if not v.startswith("Z")])


def f_marginal(joint: JointTable) -> np.ndarray:
    """Probability of each code-function in canonical order, read off a joint."""
    fs = joint.seq("F")
    return joint.grouped(fs).ravel()


# ---------------------------------------------------------------------------
# lemma certificates
# ---------------------------------------------------------------------------


def verify_induced_policy(joint: JointTable, policy: Kernel, tol: float = 1e-10) -> Check:
    dev = core.induced_policy(joint).max_deviation(policy)
    return Check("induced_policy_round_trip", INDUCED_POLICY, dev, 0.0, tol)


@dataclass(frozen=True)
class DensityEquality:
    max_residual: float
    mutual_info: float  # I(F^n;Y^n)
    residual_mean: float  # E[i^R]

    def checks(self, tol: float = DENSITY_TOL, mean_tol: float = IDENTITY_TOL) -> list[Check]:
        return [
            Check("density_equality", DENSITY_EQUALITY, self.max_residual, 0.0, tol),
            Check("density_equality_mean", DENSITY_EQUALITY, self.mutual_info, self.residual_mean, mean_tol),
        ]


def verify_density_equality(joint: JointTable) -> DensityEquality:
    """Pointwise comparison of i(F^n;Y^n) with the residual density on the (X, Y, F) support."""
    xyf = joint.marginal([v for v in joint.names if not v.startswith("Z")]) if joint.seq("Z") else joint
    fs, ys = xyf.seq("F"), xyf.seq("Y")
    d_mi = density(xyf, InfoQuery("mutual_info", fs, ys))
    d_res = density(xyf, InfoQuery("residual_directed_info", "X", "Y", given=fs))
    vals_a, _ = d_mi.outcomes()
    vals_b, _ = d_res.outcomes()
    resid = float(np.max(np.abs(vals_a - vals_b))) if vals_a.size else 0.0
    return DensityEquality(resid, mutual_information(xyf, fs, ys), d_res.mean())


@dataclass(frozen=True)
class FDecomposition:
    mutual_info: float  # I(F^n;Y^n)
    causal_directed: float  # I(X^n->Y^n||Z^n)
    feedback_leak: float  # I(F^n;Z^n|Y^n)

    def check(self, tol: float = IDENTITY_TOL) -> Check:
        return Check("code_function_decomposition", F_DECOMPOSITION, self.mutual_info,
                     self.causal_directed - self.feedback_leak, tol)


def verify_lemma_F_decomposition(joint: JointTable) -> FDecomposition:
    if not joint.seq("Z"):
        raise KeyError("the decomposition needs Z^n retained in the joint")
    fs = joint.seq("F")
    return FDecomposition(
        mutual_info=mutual_information(joint, fs, "Y"),
        causal_directed=causal_conditional_directed_information(joint, "X", "Y", "Z"),
        feedback_leak=mutual_information(joint, fs, "Z", "Y"),
    )


@dataclass(frozen=True)
class ResidualDensityStats:
    quantiles: tuple[float, ...]
    values: tuple[float, ...]  # per-symbol residual density at each quantile
    mean: float  # I(F^n;Y^n)/n
    horizon: int


def residual_density_statistics(policy: Kernel, channel: Kernel, feedback: Kernel, n: int | None = None,
                                quantiles: Sequence[float] = (0.01, 0.05, 0.5)) -> ResidualDensityStats:
    n = policy.horizon if n is None else n
    cfd = good_distribution_from_policy(policy.truncate(n))
    xyf = joint_xyf(cfd, channel.truncate(n), feedback.truncate(n))
    dt = density(xyf, InfoQuery("residual_directed_info", "X", "Y", given=xyf.seq("F")))
    vals = finite_n_density_quantiles(dt, quantiles)
    return ResidualDensityStats(tuple(float(q) for q in quantiles), tuple(float(v) for v in vals), dt.mean() / n, n)
