"""Upper and lower capacity bounds over input policies, plus single-letter and BCEC capacities.

The upper bound at horizon ``n`` is the best value found of
(1/n) I(X^n -> Y^n || Z^n) over policies p(x_i | x^{i-1}, z^{i-1}). Every
reported value is the exact objective of a feasible policy, so it can only
under-estimate the finite-n supremum.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import (
    InvalidSystem,
    Kernel,
    _Builder,
    _check_compat,
    _row_index,
    build_joint_xyz,
    cond_names,
    noise_from_feedback,
)
from .measures import causal_conditional_directed_information, entropy

log = logging.getLogger(__name__)

POINT_CAP = 200
EVAL_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PolicyParameterization:
    """One simplex point per (time, x^{i-1} z^{i-1} history), stacked as rows of ``theta``."""

    n: int
    x_size: int
    z_size: int
    theta: np.ndarray  # (n_points, x_size)

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=np.float64)
        if th.shape != (self.n_points_for(self.n, self.x_size, self.z_size), self.x_size):
            raise ValueError(f"theta has shape {th.shape}")
        if np.any(th < -1e-15) or np.any(np.abs(th.sum(axis=1) - 1.0) > 1e-12):
            raise ValueError("policy rows must lie on the simplex")
        object.__setattr__(self, "theta", th)

    @staticmethod
    def n_points_for(n, x_size, z_size) -> int:
        return sum((x_size * z_size) ** (i - 1) for i in range(1, n + 1))

    @property
    def n_points(self) -> int:
        return self.theta.shape[0]

    @property
    def n_params(self) -> int:
        return self.n_points * (self.x_size - 1)

    def offsets(self) -> list[int]:
        out, acc = [], 0
        for i in range(1, self.n + 1):
            out.append(acc)
            acc += (self.x_size * self.z_size) ** (i - 1)
        return out

    def to_kernel(self) -> Kernel:
        offs = self.offsets() + [self.n_points]
        tables = tuple(self.theta[offs[i]:offs[i + 1]].copy() for i in range(self.n))
        return Kernel("policy", {"X": self.x_size, "Z": self.z_size}, tables)

    @classmethod
    def from_kernel(cls, policy: Kernel, n: int | None = None) -> "PolicyParameterization":
        n = policy.horizon if n is None else n
        return cls(n, policy.sizes["X"], policy.sizes["Z"], np.vstack(policy.tables[:n]))

    @classmethod
    def uniform(cls, n, x_size, z_size) -> "PolicyParameterization":
        p = cls.n_points_for(n, x_size, z_size)
        return cls(n, x_size, z_size, np.full((p, x_size), 1.0 / x_size))

    @classmethod
    def random(cls, n, x_size, z_size, rng: np.random.Generator) -> "PolicyParameterization":
        p = cls.n_points_for(n, x_size, z_size)
        return cls(n, x_size, z_size, rng.dirichlet(np.ones(x_size), size=p))


def objective(policy, channel: Kernel, feedback: Kernel, n: int | None = None) -> float:
    """(1/n) I(X^n -> Y^n || Z^n) evaluated on the exact joint."""
    if isinstance(policy, PolicyParameterization):
        policy = policy.to_kernel()
    n = policy.horizon if n is None else n
    joint = build_joint_xyz(channel, feedback, policy, n)
    return causal_conditional_directed_information(joint, "X", "Y", "Z") / n


class ObjectivePlan:
    """Precomputed cell structure so the objective is one product and n grouped sums.

    A cell of the joint is (x_1 y_1 z_1 ... x_n y_n z_n); its mass is the fixed
    channel/feedback product times one policy entry per time.
    """

    def __init__(self, channel: Kernel, feedback: Kernel, n: int):
        _check_compat(channel, feedback, n)
        xs, ys, zs = channel.sizes["X"], channel.sizes["Y"], feedback.sizes["Z"]
        self.n, self.x_size, self.z_size = n, xs, zs
        names, sizes = [], []
        for i in range(1, n + 1):
            names += [f"X{i}", f"Y{i}", f"Z{i}"]
            sizes += [xs, ys, zs]
        pos = {nm: k for k, nm in enumerate(names)}

        def code(group):
            ps = [pos[g] for g in group]
            return _row_index(sizes, ps, [sizes[p] for p in ps])

        base = np.ones(int(np.prod(sizes)))
        idx = []
        offs = PolicyParameterization.uniform(n, xs, zs).offsets()
        groups = []
        for i in range(1, n + 1):
            yi, zi = code([f"Y{i}"]), code([f"Z{i}"])
            base = base * channel.tables[i - 1][code(cond_names("channel", i)), yi]
            base = base * feedback.tables[i - 1][code(cond_names("feedback", i)), zi]
            idx.append((offs[i - 1] + code(cond_names("policy", i))) * xs + code([f"X{i}"]))
            past = [f"Y{t}" for t in range(1, i)] + [f"Z{t}" for t in range(1, i)]
            groups.append((code([f"X{t}" for t in range(1, i + 1)]), yi, code(past),
                           xs ** i, ys, (ys * zs) ** (i - 1)))
        keep = base > 0
        self.base = np.ascontiguousarray(base[keep])
        self.idx = np.ascontiguousarray(np.array(idx)[:, keep])
        self.groups = [(np.ascontiguousarray(a[keep]), np.ascontiguousarray(b[keep]),
                        np.ascontiguousarray(c[keep]), na, nb, nc) for a, b, c, na, nb, nc in groups]
        self.n_points = PolicyParameterization.n_points_for(n, xs, zs)
        self.evaluations = 0

    def __call__(self, theta: np.ndarray) -> float:
        self.evaluations += 1
        p = kernels.weighted_product(self.base, np.ascontiguousarray(theta, dtype=np.float64).ravel(), self.idx)
        total = 0.0
        for ia, ib, ic, na, nb, nc in self.groups:
            total += kernels.grouped_cmi(p, ia, ib, ic, na, nb, nc)
        return total / self.n


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OptimizerConfig:
    grid_resolution: int = 16
    grid_cap: int = 10**6
    restarts: int = 32
    iterations: int = 2000
    step: float = 0.5
    fd_step: float = 1e-5
    tol: float = 1e-10
    patience: int = 50
    polish: bool = True  # run the ascent from the best grid point as well
    point_cap: int = POINT_CAP
    seed: int = 0
    tie_tol: float = 1e-12

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class BoundResult:
    n: int
    upper_bound_bits_per_use: float
    argmax: PolicyParameterization
    method: str
    restarts: int
    iterations: int
    evaluations: int
    trace: list = field(default_factory=list)
    restart_values: list = field(default_factory=list)
    noise_entropy_rate: float | None = None
    lower_bound_bits_per_use: float | None = None
    config: OptimizerConfig | None = None

    @property
    def argmax_policy(self) -> Kernel:
        return self.argmax.to_kernel()

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "upper_bound_bits_per_use": self.upper_bound_bits_per_use,
            "lower_bound_bits_per_use": self.lower_bound_bits_per_use,
            "noise_entropy_rate": self.noise_entropy_rate,
            "method": self.method,
            "restarts": self.restarts,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "restart_values": self.restart_values,
            "best_trace": self.trace,
            "argmax_policy": self.argmax_policy.to_nested(),
            "config": self.config.to_dict() if self.config else None,
            "note": "best value found at a feasible policy; a lower bound on the finite-n supremum",
        }


def simplex_grid(k: int, resolution: int) -> np.ndarray:
    """All points of the k-simplex with coordinates in multiples of 1/resolution."""
    pts = [c for c in itertools.product(range(resolution + 1), repeat=k - 1) if sum(c) <= resolution]
    arr = np.array([list(c) + [resolution - sum(c)] for c in pts], dtype=np.float64)
    return arr / resolution


def _grid_search(plan: ObjectivePlan, cfg: OptimizerConfig):
    pts = simplex_grid(plan.x_size, cfg.grid_resolution)
    best, best_theta, trace = -np.inf, None, []
    for combo in itertools.product(range(len(pts)), repeat=plan.n_points):
        theta = pts[list(combo)]
        v = plan(theta)
        if v > best + cfg.tie_tol:
            best, best_theta = v, theta
        trace.append(best)
    return best_theta, best, trace


def _gradient(plan: ObjectivePlan, theta: np.ndarray, h: float) -> np.ndarray:
    """Directional derivatives along e_k - theta_s for each simplex point s."""
    g = np.zeros_like(theta)
    for s in range(theta.shape[0]):
        row = theta[s]
        for k in range(theta.shape[1]):
            d = -row.copy()
            d[k] += 1.0
            up = theta.copy()
            up[s] = row + h * d
            if row[k] >= h / (1.0 + h):
                dn = theta.copy()
                dn[s] = row - h * d
                g[s, k] = (plan(up) - plan(dn)) / (2 * h)
            else:
                g[s, k] = (plan(up) - plan(theta)) / h
    return g


def _ascend(plan: ObjectivePlan, theta: np.ndarray, cfg: OptimizerConfig):
    """Multiplicative-weights ascent with step halving on non-improvement."""
    value = plan(theta)
    history = [value]
    step = cfg.step
    it = 0
    for it in range(1, cfg.iterations + 1):
        g = _gradient(plan, theta, cfg.fd_step)
        g -= g.max(axis=1, keepdims=True)
        cand = theta * np.exp(step * g)
        cand /= cand.sum(axis=1, keepdims=True)
        v = plan(cand)
        if v >= value:
            theta, value = cand, v
        else:
            step *= 0.5
        history.append(value)
        if step < 1e-14:
            break
        if len(history) > cfg.patience and history[-1] - history[-1 - cfg.patience] < cfg.tol:
            break
    return theta, value, it


def feedback_noise_entropy_rate(feedback: Kernel, n: int) -> float | None:
    """(1/n) H(V^n) when the feedback is additive, else None."""
    try:
        noise = noise_from_feedback(feedback)
    except InvalidSystem:
        return None
    return noise_entropy_rate(noise, n)


def noise_entropy_rate(noise: Kernel, n: int) -> float:
    b = _Builder()
    for i in range(1, n + 1):
        b.add(f"V{i}", noise.sizes["V"], noise.tables[i - 1], cond_names("noise", i))
    return entropy(b.table(n), "V") / n


def optimize_upper_bound(channel: Kernel, feedback: Kernel, n: int, config: OptimizerConfig | None = None
                         ) -> BoundResult:
    cfg = config or OptimizerConfig()
    plan = ObjectivePlan(channel, feedback, n)
    if plan.n_points > cfg.point_cap:
        raise ValueError(f"{plan.n_points} simplex points exceed the cap of {cfg.point_cap}")
    xs, zs = plan.x_size, plan.z_size
    grid_total = len(simplex_grid(xs, cfg.grid_resolution)) ** plan.n_points
    trace, restart_values = [], []
    best_theta, best = None, -np.inf
    iters = 0

    def consider(theta, v):
        nonlocal best_theta, best
        if v > best + cfg.tie_tol:
            best_theta, best = theta, v
        trace.append(best)

    if grid_total <= cfg.grid_cap:
        method = "grid"
        theta, v, _ = _grid_search(plan, cfg)
        consider(theta, v)
        restart_values.append(v)
        if cfg.polish:
            method = "grid+ascent"
            theta, v, it = _ascend(plan, theta, cfg)
            iters += it
            consider(theta, v)
            restart_values.append(v)
        n_restarts = 0
    else:
        method = "ascent"
        n_restarts = cfg.restarts
        for r in range(n_restarts):
            if r == 0:
                start = PolicyParameterization.uniform(n, xs, zs).theta
            else:
                start = PolicyParameterization.random(n, xs, zs, np.random.default_rng([cfg.seed, r])).theta
            theta, v, it = _ascend(plan, start, cfg)
            iters += it
            restart_values.append(v)
            consider(theta, v)
    if not np.isfinite(best):
        raise ArithmeticError("objective is not finite")
    argmax = PolicyParameterization(n, xs, zs, best_theta)
    exact = objective(argmax, channel, feedback, n)
    if abs(exact - best) > EVAL_TOL:
        raise ArithmeticError(f"fast objective {best!r} disagrees with exact evaluation {exact!r}")
    log.info("upper bound n=%d: %.12f via %s (%d evaluations)", n, exact, method, plan.evaluations)
    return BoundResult(
        n=n,
        upper_bound_bits_per_use=exact,
        argmax=argmax,
        method=method,
        restarts=n_restarts,
        iterations=iters,
        evaluations=plan.evaluations,
        trace=trace,
        restart_values=restart_values,
        noise_entropy_rate=feedback_noise_entropy_rate(feedback, n),
        config=cfg,
    )


# ---------------------------------------------------------------------------
# lower bound, single-letter capacity, BCEC capacity
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LowerBound:
    value: float
    upper: float
    noise_entropy_rate: float
    clamped: bool

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def lower_bound_additive(upper: BoundResult | float, feedback_noise: Kernel, n: int | None = None) -> LowerBound:
    """max(0, upper - H(V^n)/n). ``feedback_noise`` may be the noise kernel or an additive feedback kernel."""
    up = upper.upper_bound_bits_per_use if isinstance(upper, BoundResult) else float(upper)
    if n is None:
        n = upper.n if isinstance(upper, BoundResult) else feedback_noise.horizon
    if feedback_noise.role == "feedback":
        feedback_noise = noise_from_feedback(feedback_noise)
    elif feedback_noise.role != "noise":
        raise InvalidSystem("feedback not additive-independent")
    h = noise_entropy_rate(feedback_noise, n)
    raw = up - h
    res = LowerBound(max(0.0, raw), up, h, raw < 0)
    if isinstance(upper, BoundResult):
        upper.lower_bound_bits_per_use = res.value
        upper.noise_entropy_rate = h
    return res


@dataclass(frozen=True)
class SingleLetterCapacity:
    capacity: float
    input_distribution: np.ndarray
    gap: float  # certified upper minus reported value
    iterations: int


def _divergences(r, W):
    q = r @ W
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(W > 0, W * np.log2(W / q[None, :]), 0.0)
    return t.sum(axis=1)


def single_letter_capacity(channel, tol: float = 1e-10, max_iter: int = 200000) -> SingleLetterCapacity:
    """max_{p(x)} I(X;Y) by alternating maximization over inputs and posteriors."""
    if isinstance(channel, Kernel):
        if not channel.is_memoryless():
            raise ValueError("single-letter capacity needs a memoryless channel")
        channel = channel.tables[0]
    W = np.asarray(channel, dtype=np.float64)
    if W.ndim != 2 or np.any(W < 0) or np.any(np.abs(W.sum(axis=1) - 1) > 1e-12):
        raise ValueError("channel must be a row-stochastic matrix")
    r = np.full(W.shape[0], 1.0 / W.shape[0])
    it = 0
    for it in range(1, max_iter + 1):
        d = _divergences(r, W)
        value = float(r @ d)
        gap = float(d.max()) - value
        if gap < tol:
            break
        r = r * np.exp2(d)
        r /= r.sum()
    d = _divergences(r, W)
    value = float(r @ d)
    return SingleLetterCapacity(value, r, float(d.max()) - value, it)


def bcec_capacity(m: int, alpha: float) -> float:
    if int(m) != m or m < 2:
        raise ValueError("m must be an integer >= 2")
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    return m * (1.0 - alpha)


__all__ = [
    "PolicyParameterization",
    "ObjectivePlan",
    "OptimizerConfig",
    "BoundResult",
    "LowerBound",
    "SingleLetterCapacity",
    "objective",
    "optimize_upper_bound",
    "lower_bound_additive",
    "single_letter_capacity",
    "bcec_capacity",
    "feedback_noise_entropy_rate",
    "noise_entropy_rate",
    "simplex_grid",
]
