"""Alphabets, history-indexed kernels and exact joint distributions.

Variables are named by a role letter and a time index (``X1``, ``Y2``, ``Z1``),
plus the untimed message ``W``. A :class:`JointTable` keeps its axes in time
order, e.g. ``W, X1, Y1, Z1, X2, Y2, Z2``.

Histories are mixed-radix integers, earliest symbol most significant. A
kernel's conditioning code concatenates its blocks in a fixed order::

    channel   p(y_i | x^i, y^{i-1})      code(x_1..x_i, y_1..y_{i-1})
    feedback  p(z_i | y^i, z^{i-1})      code(y_1..y_i, z_1..z_{i-1})
    policy    p(x_i | x^{i-1}, z^{i-1})  code(x_1..x_{i-1}, z_1..z_{i-1})
    noise     p(v_i | v^{i-1})           code(v_1..v_{i-1})
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import kernels

ALPHABET_CAP = 4
HORIZON_CAP = 4
KERNEL_TOL = 1e-12
JOINT_TOL = 1e-10


class InvalidSystem(ValueError):
    """Malformed system description (bad shapes, unnormalized rows, mismatched alphabets)."""


@dataclass(frozen=True)
class Alphabet:
    size: int
    cap: int = ALPHABET_CAP

    def __post_init__(self):
        if self.size < 1:
            raise InvalidSystem(f"alphabet size must be >= 1, got {self.size}")
        if self.size > self.cap:
            raise InvalidSystem(f"alphabet size {self.size} exceeds cap {self.cap}")

    def __len__(self):
        return self.size

    @property
    def symbols(self):
        return range(self.size)


@dataclass(frozen=True)
class HistoryIndex:
    radices: tuple[int, ...]
    code: int

    def __post_init__(self):
        if not 0 <= self.code < int(np.prod(self.radices, dtype=np.int64)):
            raise ValueError(f"code {self.code} out of range for radices {self.radices}")

    @classmethod
    def from_symbols(cls, symbols: Sequence[int], radices: Sequence[int]) -> "HistoryIndex":
        return cls(tuple(radices), encode_history(symbols, radices))

    @property
    def symbols(self) -> tuple[int, ...]:
        return decode_history(self.code, self.radices)


def encode_history(symbols: Sequence[int], radices: Sequence[int]) -> int:
    if len(symbols) != len(radices):
        raise ValueError("symbol/radix length mismatch")
    code = 0
    for s, r in zip(symbols, radices):
        if not 0 <= s < r:
            raise ValueError(f"symbol {s} outside radix {r}")
        code = code * r + int(s)
    return code


def decode_history(code: int, radices: Sequence[int]) -> tuple[int, ...]:
    out = []
    for r in reversed(radices):
        code, s = divmod(code, r)
        out.append(s)
    if code:
        raise ValueError("code exceeds product of radices")
    return tuple(reversed(out))


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

ROLES = {
    # role: (output letter, [(letter, lag)]) ; block i covers letter_1 .. letter_{i-lag}
    "channel": ("Y", [("X", 0), ("Y", 1)]),
    "feedback": ("Z", [("Y", 0), ("Z", 1)]),
    "policy": ("X", [("X", 1), ("Z", 1)]),
    "noise": ("V", [("V", 1)]),
}


def cond_names(role: str, i: int) -> list[str]:
    """Conditioning variable names of ``role`` at time ``i`` (1-based), in code order."""
    _, blocks = ROLES[role]
    return [f"{letter}{t}" for letter, lag in blocks for t in range(1, i - lag + 1)]


@dataclass(frozen=True, eq=False)
class Kernel:
    """Time-indexed conditional table. ``tables[i-1]`` has shape (histories, |output|)."""

    role: str
    sizes: Mapping[str, int]
    tables: tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.role not in ROLES:
            raise InvalidSystem(f"unknown kernel role {self.role!r}")
        out, blocks = ROLES[self.role]
        for letter in [out] + [b for b, _ in blocks]:
            if letter not in self.sizes:
                raise InvalidSystem(f"{self.role} kernel needs the size of {letter}")
        tabs = []
        for i, t in enumerate(self.tables, start=1):
            t = np.ascontiguousarray(t, dtype=np.float64)
            rows = self.n_histories(i)
            if t.ndim == 2 and t.shape[1] == self.sizes[out] and t.shape[0] < rows:
                raise InvalidSystem(f"{self.role} kernel at time {i}: history {t.shape[0]} is missing "
                                    f"(expected {rows} rows)")
            if t.shape != (rows, self.sizes[out]):
                raise InvalidSystem(
                    f"{self.role} kernel at time {i}: expected shape {(rows, self.sizes[out])}, got {t.shape}"
                )
            if np.any(t < 0) or not np.all(np.isfinite(t)):
                bad = int(np.argwhere((t < 0) | ~np.isfinite(t))[0, 0])
                raise InvalidSystem(f"{self.role} kernel at time {i}: negative entry in history {bad}")
            dev = np.abs(t.sum(axis=1) - 1.0)
            if np.any(dev > KERNEL_TOL):
                bad = int(np.argmax(dev))
                raise InvalidSystem(
                    f"{self.role} kernel at time {i}: history {bad} sums to {t[bad].sum()!r}"
                )
            t.flags.writeable = False
            tabs.append(t)
        object.__setattr__(self, "tables", tuple(tabs))
        object.__setattr__(self, "sizes", dict(self.sizes))

    @property
    def horizon(self) -> int:
        return len(self.tables)

    @property
    def output(self) -> str:
        return ROLES[self.role][0]

    def radices(self, i: int) -> tuple[int, ...]:
        return tuple(self.sizes[name[0]] for name in cond_names(self.role, i))

    def n_histories(self, i: int) -> int:
        return int(np.prod(self.radices(i), dtype=np.int64))

    def row(self, i: int, history: Sequence[int]) -> np.ndarray:
        return self.tables[i - 1][encode_history(history, self.radices(i))]

    def truncate(self, n: int) -> "Kernel":
        if n > self.horizon:
            raise InvalidSystem(f"cannot extend a horizon-{self.horizon} kernel to {n}")
        return Kernel(self.role, self.sizes, self.tables[:n])

    def is_memoryless(self, tol: float = 1e-12) -> bool:
        """True when a channel kernel satisfies p(y_i|x^i,y^{i-1}) = p(y_i|x_i), same at every i."""
        if self.role != "channel":
            return False
        first = self.tables[0]
        for i in range(1, self.horizon + 1):
            blocks = self.tables[i - 1].reshape(self.radices(i) + (self.sizes["Y"],))
            # move x_i (last x axis) to the front, flatten the rest
            xi = i - 1
            moved = np.moveaxis(blocks, xi, 0).reshape(self.sizes["X"], -1, self.sizes["Y"])
            if np.max(np.abs(moved - first[:, None, :])) > tol:
                return False
        return True

    def to_nested(self) -> list:
        return [t.tolist() for t in self.tables]

    @classmethod
    def from_fn(cls, role: str, n: int, sizes: Mapping[str, int], fn: Callable) -> "Kernel":
        """Build a kernel from ``fn(i, blocks) -> probability vector``.

        ``blocks`` maps each conditioning letter to its history tuple, e.g. for the
        channel at time 2: ``{"X": (x1, x2), "Y": (y1,)}``.
        """
        out, spec = ROLES[role]
        tables = []
        for i in range(1, n + 1):
            names = cond_names(role, i)
            radices = [sizes[nm[0]] for nm in names]
            rows = []
            for code in range(int(np.prod(radices, dtype=np.int64))):
                syms = decode_history(code, radices)
                blocks, pos = {}, 0
                for letter, lag in spec:
                    k = max(i - lag, 0)
                    blocks[letter] = syms[pos:pos + k]
                    pos += k
                rows.append(np.asarray(fn(i, blocks), dtype=np.float64))
            tables.append(np.array(rows).reshape(len(rows), sizes[out]))
        return cls(role, sizes, tuple(tables))


def _one_hot(k: int, size: int) -> np.ndarray:
    v = np.zeros(size)
    v[k] = 1.0
    return v


def dmc(matrix, n: int, z_size: int | None = None) -> Kernel:
    """Memoryless channel from a one-step matrix ``p(y|x)`` (rows: x)."""
    m = np.asarray(matrix, dtype=np.float64)
    sizes = {"X": m.shape[0], "Y": m.shape[1]}
    return Kernel.from_fn("channel", n, sizes, lambda i, b: m[b["X"][-1]])


def bsc(alpha: float, n: int) -> Kernel:
    return dmc([[1 - alpha, alpha], [alpha, 1 - alpha]], n)


def bec_matrix(eps: float) -> np.ndarray:
    """Binary erasure channel, outputs (0, 1, erasure)."""
    return np.array([[1 - eps, 0.0, eps], [0.0, 1 - eps, eps]])


def identity_channel(size: int, n: int) -> Kernel:
    return dmc(np.eye(size), n)


def additive_feedback(noise: "Kernel | Sequence[float]", n: int, y_size: int) -> Kernel:
    """Feedback link ``Z_i = Y_i + V_i (mod |Y|)``.

    ``noise`` is either an i.i.d. pmf over V or a noise kernel ``p(v_i|v^{i-1})``;
    with memory, v^{i-1} is recovered from ``z^{i-1} - y^{i-1}``.
    """
    if not isinstance(noise, Kernel):
        noise = iid_noise(noise, n)
    if noise.sizes["V"] != y_size:
        raise InvalidSystem("additive feedback needs |V| = |Y|")
    sizes = {"Y": y_size, "Z": y_size}

    def row(i, b):
        y, z = b["Y"], b["Z"]
        v_past = tuple((zz - yy) % y_size for zz, yy in zip(z, y[:-1]))
        pv = noise.row(i, v_past)
        out = np.zeros(y_size)
        for v in range(y_size):
            out[(y[-1] + v) % y_size] += pv[v]
        return out

    return Kernel.from_fn("feedback", n, sizes, row)


def iid_noise(pmf: Sequence[float], n: int) -> Kernel:
    pmf = np.asarray(pmf, dtype=np.float64)
    return Kernel.from_fn("noise", n, {"V": len(pmf)}, lambda i, b: pmf)


def perfect_feedback(y_size: int, n: int) -> Kernel:
    return Kernel.from_fn("feedback", n, {"Y": y_size, "Z": y_size}, lambda i, b: _one_hot(b["Y"][-1], y_size))


def iid_policy(pmf: Sequence[float], n: int, z_size: int) -> Kernel:
    pmf = np.asarray(pmf, dtype=np.float64)
    return Kernel.from_fn("policy", n, {"X": len(pmf), "Z": z_size}, lambda i, b: pmf)


def noise_from_feedback(feedback: Kernel, tol: float = 1e-12) -> Kernel:
    """Recover ``p(v_i|v^{i-1})`` from an additive feedback kernel, or raise if it is not additive."""
    y_size, z_size = feedback.sizes["Y"], feedback.sizes["Z"]
    if y_size != z_size:
        raise InvalidSystem("feedback not in additive form: |Z| != |Y|")
    n = feedback.horizon
    tables = []
    for i in range(1, n + 1):
        radices = feedback.radices(i)
        table = np.full((y_size ** (i - 1), y_size), np.nan)
        for code in range(feedback.n_histories(i)):
            syms = decode_history(code, radices)
            y, z = syms[:i], syms[i:]
            v_past = tuple((zz - yy) % y_size for zz, yy in zip(z, y[:-1]))
            row = feedback.tables[i - 1][code]
            pv = np.array([row[(y[-1] + v) % y_size] for v in range(y_size)])
            r = encode_history(v_past, (y_size,) * (i - 1))
            if np.isnan(table[r, 0]):
                table[r] = pv
            elif np.max(np.abs(table[r] - pv)) > tol:
                raise InvalidSystem(f"feedback not in additive form at time {i}, history {code}")
        tables.append(table)
    return Kernel("noise", {"V": y_size}, tuple(tables))


# ---------------------------------------------------------------------------
# message encoders
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MessageEncoder:
    """Deterministic encoder: ``code_functions[w][i-1][z-history code] -> x_i``."""

    code_functions: tuple
    x_size: int
    z_size: int

    def __post_init__(self):
        cfs = tuple(tuple(np.asarray(f_i, dtype=np.int64) for f_i in cf) for cf in self.code_functions)
        if not cfs:
            raise InvalidSystem("encoder needs at least one message")
        n = len(cfs[0])
        for w, cf in enumerate(cfs):
            if len(cf) != n:
                raise InvalidSystem(f"message {w}: horizon {len(cf)} != {n}")
            for i, f_i in enumerate(cf, start=1):
                if f_i.shape != (self.z_size ** (i - 1),):
                    raise InvalidSystem(f"message {w}, time {i}: expected {self.z_size ** (i - 1)} z-histories")
                if f_i.min() < 0 or f_i.max() >= self.x_size:
                    raise InvalidSystem(f"message {w}, time {i}: symbol outside X")
        object.__setattr__(self, "code_functions", cfs)

    @property
    def M(self) -> int:
        return len(self.code_functions)

    @property
    def horizon(self) -> int:
        return len(self.code_functions[0])

    def is_open_loop(self) -> bool:
        return all(np.all(f_i == f_i[0]) for cf in self.code_functions for f_i in cf)

    def to_nested(self) -> list:
        return [[f_i.tolist() for f_i in cf] for cf in self.code_functions]

    @classmethod
    def from_codewords(cls, codewords, x_size: int, z_size: int) -> "MessageEncoder":
        """Open-loop encoder sending ``codewords[w]`` regardless of feedback."""
        cfs = [[np.full(z_size ** (i - 1), int(x)) for i, x in enumerate(cw, start=1)] for cw in codewords]
        return cls(cfs, x_size, z_size)


# ---------------------------------------------------------------------------
# joint tables
# ---------------------------------------------------------------------------

_NAME = re.compile(r"^([A-Za-z]+)(\d*)$")


def split_name(name: str) -> tuple[str, int]:
    m = _NAME.match(name)
    if not m:
        raise KeyError(name)
    return m.group(1), int(m.group(2)) if m.group(2) else 0


@dataclass(frozen=True, eq=False)
class JointTable:
    names: tuple[str, ...]
    probs: np.ndarray
    horizon: int = 0

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=np.float64)
        if p.ndim != len(self.names):
            raise ValueError(f"{len(self.names)} names for a {p.ndim}-d table")
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate variable names")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def sizes(self) -> tuple[int, ...]:
        return self.probs.shape

    def size_of(self, name: str) -> int:
        return self.probs.shape[self.axis(name)]

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown variable {name!r}; layout is {self.names}") from None

    def __contains__(self, name) -> bool:
        return name in self.names

    def seq(self, letter: str) -> list[str]:
        """Time-ordered names carrying the role ``letter`` (``"X"`` -> ``["X1", "X2", ...]``)."""
        return [nm for nm in self.names if split_name(nm)[0] == letter and split_name(nm)[1] > 0]

    def total(self) -> float:
        return float(self.probs.sum())

    def marginal(self, variables: Sequence[str]) -> "JointTable":
        keep = set(variables)
        for v in keep:
            self.axis(v)
        axes = tuple(k for k, nm in enumerate(self.names) if nm not in keep)
        names = tuple(nm for nm in self.names if nm in keep)
        return JointTable(names, self.probs.sum(axis=axes), self.horizon)

    def grouped(self, *groups: Sequence[str]) -> np.ndarray:
        """Marginal reshaped to one flattened axis per group (empty group -> length-1 axis)."""
        flat = [v for g in groups for v in g]
        if len(set(flat)) != len(flat):
            raise ValueError(f"variable groups overlap: {groups}")
        m = self.marginal(flat)
        order = [m.axis(v) for v in flat]
        arr = np.transpose(m.probs, order) if order else m.probs
        shape = [int(np.prod([self.size_of(v) for v in g], dtype=np.int64)) for g in groups]
        return np.ascontiguousarray(arr).reshape(shape)


def _row_index(sizes: Sequence[int], positions: Sequence[int], radices: Sequence[int]) -> np.ndarray:
    """For every cell of a table with ``sizes``, the mixed-radix code of its digits at ``positions``."""
    idx = np.zeros(tuple(sizes), dtype=np.int64)
    weight = 1
    for pos, r in zip(reversed(positions), reversed(radices)):
        shape = [1] * len(sizes)
        shape[pos] = sizes[pos]
        idx += weight * np.arange(sizes[pos], dtype=np.int64).reshape(shape)
        weight *= r
    return idx.ravel()


@dataclass
class _Builder:
    names: list = field(default_factory=list)
    sizes: list = field(default_factory=list)
    flat: np.ndarray = field(default_factory=lambda: np.ones(1))

    def add(self, name: str, size: int, table: np.ndarray, cond: Sequence[str]):
        positions = [self.names.index(c) for c in cond]
        radices = [self.sizes[p] for p in positions]
        rowidx = _row_index(self.sizes, positions, radices)
        self.flat = kernels.extend(self.flat, np.ascontiguousarray(table, dtype=np.float64), rowidx)
        self.names.append(name)
        self.sizes.append(size)

    def table(self, n: int) -> JointTable:
        return JointTable(tuple(self.names), self.flat.reshape(self.sizes), n)


def _check_compat(channel: Kernel, feedback: Kernel, n: int, policy: Kernel | None = None):
    for k, role in ((channel, "channel"), (feedback, "feedback"), (policy, "policy")):
        if k is not None and k.role != role:
            raise InvalidSystem(f"expected a {role} kernel, got a {k.role} kernel")
    for k in (channel, feedback) + ((policy,) if policy is not None else ()):
        if k.horizon < n:
            raise InvalidSystem(f"{k.role} kernel horizon {k.horizon} < n = {n}")
    if n > HORIZON_CAP:
        raise InvalidSystem(f"horizon {n} exceeds cap {HORIZON_CAP}")
    if channel.sizes["Y"] != feedback.sizes["Y"]:
        raise InvalidSystem("channel and feedback disagree on |Y|")
    if policy is not None:
        if policy.sizes["X"] != channel.sizes["X"]:
            raise InvalidSystem("policy and channel disagree on |X|")
        if policy.sizes["Z"] != feedback.sizes["Z"]:
            raise InvalidSystem("policy and feedback disagree on |Z|")


def _add_feedback_step(b: _Builder, i: int, feedback: Kernel, noise: Kernel | None):
    y_size, z_size = feedback.sizes["Y"], feedback.sizes["Z"]
    if noise is None:
        b.add(f"Z{i}", z_size, feedback.tables[i - 1], cond_names("feedback", i))
        return
    b.add(f"V{i}", y_size, noise.tables[i - 1], cond_names("noise", i))
    det = np.zeros((y_size * y_size, y_size))
    for y in range(y_size):
        for v in range(y_size):
            det[y * y_size + v, (y + v) % y_size] = 1.0
    b.add(f"Z{i}", z_size, det, [f"Y{i}", f"V{i}"])


def build_joint_xyz(channel: Kernel, feedback: Kernel, policy: Kernel, n: int,
                    noise: Kernel | None = None) -> JointTable:
    """Exact joint over ``X1 Y1 Z1 ... Xn Yn Zn``.

    With ``noise`` given, the feedback is taken to be ``Z_i = Y_i + V_i`` and the
    ``V_i`` are kept in the layout (``X_i Y_i V_i Z_i``).
    """
    _check_compat(channel, feedback, n, policy)
    b = _Builder()
    for i in range(1, n + 1):
        b.add(f"X{i}", policy.sizes["X"], policy.tables[i - 1], cond_names("policy", i))
        b.add(f"Y{i}", channel.sizes["Y"], channel.tables[i - 1], cond_names("channel", i))
        _add_feedback_step(b, i, feedback, noise)
    return b.table(n)


def build_joint_wxyz(encoder: MessageEncoder, message_prior, channel: Kernel, feedback: Kernel, n: int,
                     noise: Kernel | None = None) -> JointTable:
    """Exact joint over ``W X1 Y1 Z1 ... Xn Yn Zn`` for a deterministic encoder."""
    _check_compat(channel, feedback, n)
    if encoder.horizon < n:
        raise InvalidSystem(f"encoder horizon {encoder.horizon} < n = {n}")
    if encoder.x_size != channel.sizes["X"] or encoder.z_size != feedback.sizes["Z"]:
        raise InvalidSystem("encoder alphabets do not match the channel/feedback")
    prior = uniform_prior(encoder.M) if message_prior is None else np.asarray(message_prior, dtype=np.float64)
    if prior.shape != (encoder.M,):
        raise InvalidSystem(f"message prior has length {prior.shape[0]}, expected M = {encoder.M}")
    if np.any(prior < 0) or abs(prior.sum() - 1.0) > KERNEL_TOL:
        raise InvalidSystem("message prior must be a probability vector")
    x_size, z_size = encoder.x_size, encoder.z_size
    b = _Builder()
    b.add("W", encoder.M, prior[None, :], [])
    for i in range(1, n + 1):
        rows = np.zeros((encoder.M * z_size ** (i - 1), x_size))
        for w, cf in enumerate(encoder.code_functions):
            base = w * z_size ** (i - 1)
            rows[base + np.arange(z_size ** (i - 1)), cf[i - 1]] = 1.0
        b.add(f"X{i}", x_size, rows, ["W"] + [f"Z{t}" for t in range(1, i)])
        b.add(f"Y{i}", channel.sizes["Y"], channel.tables[i - 1], cond_names("channel", i))
        _add_feedback_step(b, i, feedback, noise)
    return b.table(n)


def uniform_prior(M: int) -> np.ndarray:
    return np.full(M, 1.0 / M)


def marginal(joint: JointTable, variables: Sequence[str]) -> JointTable:
    return joint.marginal(variables)


@dataclass(frozen=True, eq=False)
class InducedPolicy:
    """Conditional law of ``X_i`` given ``(x^{i-1}, z^{i-1})`` read off a joint.

    Rows for histories of zero probability are NaN and ``defined[i-1]`` is False there.
    """

    tables: tuple[np.ndarray, ...]
    defined: tuple[np.ndarray, ...]
    sizes: Mapping[str, int]

    def max_deviation(self, policy: Kernel) -> float:
        worst = 0.0
        for t, d, ref in zip(self.tables, self.defined, policy.tables):
            if d.any():
                worst = max(worst, float(np.max(np.abs(t[d] - ref[d]))))
        return worst

    def as_kernel(self, fill=None) -> Kernel:
        """Complete undefined rows with ``fill`` (uniform by default) to get a valid kernel."""
        x = self.sizes["X"]
        fill = np.full(x, 1.0 / x) if fill is None else np.asarray(fill, dtype=np.float64)
        tabs = [np.where(d[:, None], t, fill[None, :]) for t, d in zip(self.tables, self.defined)]
        return Kernel("policy", self.sizes, tuple(tabs))


def induced_policy(joint: JointTable) -> InducedPolicy:
    xs, zs = joint.seq("X"), joint.seq("Z")
    n = len(xs)
    if not n or len(zs) < n - 1:
        raise KeyError("joint must contain X^n and Z^{n-1}")
    tables, defined = [], []
    for i in range(1, n + 1):
        cond = xs[: i - 1] + zs[: i - 1]
        p = joint.grouped(cond, [xs[i - 1]])
        mass = p.sum(axis=1)
        ok = mass > 0
        t = np.full(p.shape, np.nan)
        t[ok] = p[ok] / mass[ok, None]
        tables.append(t)
        defined.append(ok)
    sizes = {"X": joint.size_of(xs[0]), "Z": joint.size_of(zs[0]) if zs else 1}
    return InducedPolicy(tuple(tables), tuple(defined), sizes)
