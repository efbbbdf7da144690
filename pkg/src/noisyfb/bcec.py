"""Signaling-bit retransmission over the binary codeword erasure channel (BCEC).

Each channel use carries one m-bit codeword: a signaling bit followed by m-1
payload bits. The forward link erases the whole codeword with probability
``alpha``; the fed-back symbol is itself erased with probability ``p``. The
encoder moves on only when it sees the codeword come back intact, otherwise it
resends. Rates are payload bits per codeword use.

Two signaling conventions are available:

``alternating``
    the signaling bit toggles with every new codeword, so the decoder can always
    tell a repeat from a new codeword.
``flag``
    0 marks a first transmission and 1 a retransmission. After a forward erasure
    the decoder cannot tell the two apart from the bit alone and falls back to
    comparing contents, which fails when consecutive codewords carry equal
    payloads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .bounds import bcec_capacity

RNG_ALGORITHM = "numpy.random.PCG64"
MODES = ("alternating", "flag")
RATE_ACCOUNTING = "empirical_rate = payload bits / codeword channel uses; each use carries m-1 payload bits"


def _check(m, alpha, p):
    if int(m) != m or m < 2:
        raise ValueError("m must be an integer >= 2")
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")


def bcec_analytic_rate(m: int, alpha: float, p: float) -> float:
    _check(m, alpha, p)
    return (m - 1) * (1.0 - p) * (1.0 - alpha)


def bcec_rate_ratio(m: int, p: float) -> float:
    """Analytic rate over capacity, (1-p)(1-1/m)."""
    _check(m, 0.0, p)
    return (1.0 - p) * (1.0 - 1.0 / m)


@dataclass(frozen=True)
class BcecConfig:
    m: int = 10
    alpha: float = 0.2
    p: float = 0.1
    n_bits: int = 90000
    seed: int = 0
    max_rounds: int = 10**6
    mode: str = "alternating"

    def __post_init__(self):
        _check(self.m, self.alpha, self.p)
        if self.n_bits <= 0 or self.n_bits % (self.m - 1):
            raise ValueError("n_bits must be a positive multiple of m - 1")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass
class BcecResult:
    config: BcecConfig
    empirical_rate: float
    analytic_rate: float
    capacity: float
    ratio_to_capacity: float
    analytic_ratio: float
    standard_error: float
    decoded_correctly: bool
    mismatches: int
    channel_uses: int
    codewords: int
    retransmissions: dict = field(default_factory=dict)  # count of extra sends -> number of codewords
    cap_hit: bool = False

    @property
    def z_score(self) -> float:
        if self.standard_error == 0:
            return 0.0 if self.empirical_rate == self.analytic_rate else math.inf
        return (self.empirical_rate - self.analytic_rate) / self.standard_error

    def to_dict(self) -> dict:
        c = self.config
        return {
            "config": {"m": c.m, "alpha": c.alpha, "p": c.p, "n_bits": c.n_bits, "seed": c.seed,
                       "max_rounds": c.max_rounds, "mode": c.mode},
            "rng": RNG_ALGORITHM,
            "rate_accounting": RATE_ACCOUNTING,
            "empirical_rate": self.empirical_rate,
            "analytic_rate": self.analytic_rate,
            "capacity": self.capacity,
            "ratio_to_capacity": self.ratio_to_capacity,
            "analytic_ratio": self.analytic_ratio,
            "standard_error": self.standard_error,
            "decoded_correctly": self.decoded_correctly,
            "mismatches": self.mismatches,
            "channel_uses": self.channel_uses,
            "codewords": self.codewords,
            "retransmissions": {str(k): v for k, v in sorted(self.retransmissions.items())},
            "cap_hit": self.cap_hit,
        }


def simulate_bcec(config: BcecConfig, impl=None) -> BcecResult:
    """Run the protocol once; deterministic given ``config.seed``.

    ``impl`` overrides the kernel (used by parity tests and the benchmark).
    """
    run = impl or kernels.bcec
    c = config
    width = c.m - 1
    n_cw = c.n_bits // width
    rng = np.random.Generator(np.random.PCG64(c.seed))
    payload = rng.integers(0, 2, size=(n_cw, width), dtype=np.uint8)
    # a separate stream for the channel so that payload size does not shift it
    chan_seed = np.random.SeedSequence(c.seed).spawn(1)[0]
    success = (1.0 - c.alpha) * (1.0 - c.p)
    want = int(n_cw / success * 1.25) + 64
    while True:
        want = min(want, n_cw * c.max_rounds)
        uniforms = np.random.Generator(np.random.PCG64(chan_seed)).random(2 * want)
        decoded, n_dec, uses, total, status = run(payload, uniforms, c.alpha, c.p, c.max_rounds,
                                                   c.mode == "alternating")
        if status != 2 or want >= n_cw * c.max_rounds:
            break
        want *= 2
    uses = np.asarray(uses)
    cap_hit = status != 0
    mismatches = int(np.count_nonzero(np.any(decoded != payload, axis=1))) + abs(n_cw - int(n_dec))
    if cap_hit:
        mismatches = max(mismatches, 1)
    rate = c.n_bits / total if total else 0.0
    if n_cw > 1 and not cap_hit:
        mean, sd = uses.mean(), uses.std(ddof=1)
        se = width * sd / (mean**2 * math.sqrt(n_cw))
    else:
        se = math.nan
    cap = bcec_capacity(c.m, c.alpha)
    extra, counts = np.unique(uses - 1, return_counts=True)
    return BcecResult(
        config=c,
        empirical_rate=rate,
        analytic_rate=bcec_analytic_rate(c.m, c.alpha, c.p),
        capacity=cap,
        ratio_to_capacity=rate / cap,
        analytic_ratio=bcec_rate_ratio(c.m, c.p),
        standard_error=float(se),
        decoded_correctly=mismatches == 0,
        mismatches=mismatches,
        channel_uses=int(total),
        codewords=n_cw,
        retransmissions={int(k): int(v) for k, v in zip(extra, counts)},
        cap_hit=cap_hit,
    )
