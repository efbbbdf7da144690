"""Exact entropies, (conditional) mutual and directed informations, and their densities.

Every measure is in bits. Conditional informations are summed directly over the
conditioning marginal rather than obtained as a difference of entropies.

Sequence arguments accept either a list of variable names or a role letter
(``"X"`` expands to ``X1 .. Xn`` in the table's time order). In directed
quantities the source symbols used at step ``i`` are those that precede ``Y_i``
in the time order: ``X^i`` for inputs, ``Z^{i-1}`` or ``V^{i-1}`` for signals
produced after ``Y_i``, ``F^i`` for code-functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .core import JointTable

KINDS = (
    "entropy",
    "cond_entropy",
    "mutual_info",
    "cond_mutual_info",
    "directed_info",
    "causal_cond_directed_info",
    "cond_directed_info",
    "residual_directed_info",
)


def _names(joint: JointTable, group) -> list[str]:
    if group is None:
        return []
    if isinstance(group, str):
        if group in joint.names:
            return [group]
        seq = joint.seq(group)
        if not seq:
            raise KeyError(f"unknown variable or sequence {group!r}; layout is {joint.names}")
        return seq
    out = []
    for g in group:
        out.extend(_names(joint, g))
    return out


def _before(joint: JointTable, group: Sequence[str], anchor: str) -> list[str]:
    cut = joint.axis(anchor)
    return [v for v in group if joint.axis(v) < cut]


def _paired(joint, x, y):
    xs, ys = _names(joint, x), _names(joint, y)
    if not ys:
        raise ValueError("empty output sequence")
    return xs, ys


# ---------------------------------------------------------------------------
# expectation measures
# ---------------------------------------------------------------------------


def entropy(joint: JointTable, variables, given=None) -> float:
    a = _names(joint, variables)
    c = _names(joint, given)
    if not a:
        raise ValueError("entropy of an empty group")
    return kernels.cond_entropy2(joint.grouped(a, c))


def mutual_information(joint: JointTable, a, b, given=None) -> float:
    """I(A;B|C); zero when either side is empty."""
    a, b, c = _names(joint, a), _names(joint, b), _names(joint, given)
    if not a or not b:
        return 0.0
    return kernels.cmi3(joint.grouped(a, b, c))


def directed_information(joint: JointTable, x="X", y="Y", given=None) -> float:
    """sum_i I(X^i; Y_i | Y^{i-1}, G), with G conditioned on in full when given."""
    xs, ys = _paired(joint, x, y)
    g = _names(joint, given)
    total = 0.0
    for i, yi in enumerate(ys):
        total += mutual_information(joint, _before(joint, xs, yi), [yi], ys[:i] + g)
    return total


def causal_conditional_directed_information(joint: JointTable, x="X", y="Y", z="Z") -> float:
    """sum_i I(X^i; Y_i | Y^{i-1}, Z_{<i}) where Z_{<i} are the Z symbols preceding Y_i."""
    xs, ys = _paired(joint, x, y)
    zs = _names(joint, z)
    total = 0.0
    for i, yi in enumerate(ys):
        total += mutual_information(joint, _before(joint, xs, yi), [yi], ys[:i] + _before(joint, zs, yi))
    return total


def conditional_directed_information(joint: JointTable, x="X", y="Y", given="W") -> float:
    """I(X^n -> Y^n | G): every step conditions on the whole of G."""
    return directed_information(joint, x, y, given=given)


@dataclass(frozen=True)
class ResidualReport:
    value: float
    directed: float
    conditional: float
    causal_conditional: float

    @property
    def forms_gap(self) -> float:
        return abs(self.conditional - self.causal_conditional)


def residual_directed_information(joint: JointTable, x="X", y="Y", message="W", tol: float = 1e-9) -> float:
    """I(X^n -> Y^n) - I(X^n -> Y^n | W); raises if the || and | forms disagree beyond ``tol``."""
    rep = residual_report(joint, x, y, message)
    if rep.forms_gap > tol:
        raise ArithmeticError(f"causal and plain conditioning on the message differ by {rep.forms_gap:.3e}")
    return rep.value


def residual_report(joint: JointTable, x="X", y="Y", message="W") -> ResidualReport:
    msg = _names(joint, message)
    if not msg:
        raise KeyError("joint has no message variable")
    d = directed_information(joint, x, y)
    c = conditional_directed_information(joint, x, y, msg)
    cc = causal_conditional_directed_information(joint, x, y, msg)
    return ResidualReport(d - c, d, c, cc)


# ---------------------------------------------------------------------------
# densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InfoQuery:
    kind: str
    a: object = None
    b: object = None
    given: object = None
    units: str = "bits"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.units not in ("bits", "nats"):
            raise ValueError("units must be 'bits' or 'nats'")

    def describe(self) -> dict:
        return {"kind": self.kind, "a": self.a, "b": self.b, "given": self.given, "units": self.units}


@dataclass(frozen=True, eq=False)
class DensityTable:
    """Pointwise information density on the cells of ``names`` (NaN off the support)."""

    names: tuple[str, ...]
    values: np.ndarray
    weights: np.ndarray
    horizon: int
    query: InfoQuery | None = field(default=None)

    @property
    def support(self) -> np.ndarray:
        return self.weights > 0

    def mean(self) -> float:
        s = self.support
        return float(np.sum(self.weights[s] * self.values[s]))

    def outcomes(self) -> tuple[np.ndarray, np.ndarray]:
        """(values, weights) on the support, flattened."""
        s = self.support
        return self.values[s], self.weights[s]


def _log_marg(joint: JointTable, group: Sequence[str]) -> np.ndarray:
    """log2 p(group) broadcast to the joint's full shape (NaN-free on the support)."""
    keep = {joint.axis(v) for v in group}
    axes = tuple(k for k in range(joint.probs.ndim) if k not in keep)
    m = joint.probs.sum(axis=axes, keepdims=True) if axes else joint.probs
    with np.errstate(divide="ignore"):
        return np.log2(m)


def _pointwise_cmi(joint, a, b, c) -> np.ndarray:
    if not a or not b:
        return np.zeros(joint.probs.shape)
    with np.errstate(invalid="ignore"):
        return _log_marg(joint, a + b + c) + _log_marg(joint, c) - _log_marg(joint, a + c) - _log_marg(joint, b + c)


def _directed_density(joint, xs, ys, given=(), causal=()) -> np.ndarray:
    out = np.zeros(joint.probs.shape)
    for i, yi in enumerate(ys):
        cond = ys[:i] + list(given) + _before(joint, list(causal), yi)
        out += _pointwise_cmi(joint, _before(joint, xs, yi), [yi], cond)
    return out


def density(joint: JointTable, query: InfoQuery) -> DensityTable:
    k = query.kind
    a, b, g = _names(joint, query.a), _names(joint, query.b), _names(joint, query.given)
    if k == "entropy":
        vals = -_log_marg(joint, a)
    elif k == "cond_entropy":
        vals = _log_marg(joint, g) - _log_marg(joint, a + g)
    elif k in ("mutual_info", "cond_mutual_info"):
        vals = _pointwise_cmi(joint, a, b, g)
    elif k == "directed_info":
        vals = _directed_density(joint, a, b)
    elif k == "cond_directed_info":
        vals = _directed_density(joint, a, b, given=g)
    elif k == "causal_cond_directed_info":
        vals = _directed_density(joint, a, b, causal=g)
    elif k == "residual_directed_info":
        # g is the message; causal conditioning covers both a time-0 message and per-time F_i
        with np.errstate(invalid="ignore"):
            vals = _directed_density(joint, a, b) - _directed_density(joint, a, b, causal=g)
    else:  # pragma: no cover - guarded by InfoQuery
        raise ValueError(k)
    if query.units == "nats":
        vals = vals * np.log(2.0)
    support = joint.probs > 0
    vals = np.where(support, vals, np.nan)
    return DensityTable(joint.names, vals, np.asarray(joint.probs), joint.horizon, query)


def finite_n_density_quantiles(densities: DensityTable, quantiles: Sequence[float], per_symbol: bool = True,
                               tol: float = 1e-12) -> np.ndarray:
    """Lower quantiles inf{v : P(density <= v) >= q} of the density (divided by n when ``per_symbol``)."""
    q = np.asarray(quantiles, dtype=np.float64)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("quantiles must lie in [0, 1]")
    vals, w = densities.outcomes()
    if vals.size == 0:
        raise ValueError("empty density table")
    order = np.argsort(vals, kind="stable")
    vals, w = vals[order], w[order]
    cdf = np.cumsum(w) / w.sum()
    pos = np.searchsorted(cdf, q - tol, side="left")
    pos = np.minimum(pos, vals.size - 1)
    out = vals[pos]
    if per_symbol and densities.horizon:
        out = out / densities.horizon
    return out
