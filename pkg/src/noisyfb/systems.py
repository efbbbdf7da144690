"""Loading and validating system description files.

A system file is JSON::

    {"n": 2, "alphabets": {"X": 2, "Y": 2, "Z": 2},
     "channel":  [[...], ...],   # [time][history][symbol]
     "feedback": [[...], ...],
     "policy":   [[...], ...],   # optional
     "encoder":  {"M": 2, "code_functions": [[[x], [x, x]], ...]},  # optional
     "message_prior": [0.5, 0.5],  # optional, uniform by default
     "feedback_noise": [[...], ...]}  # optional p(v_i|v^{i-1}); makes feedback Z_i = Y_i + V_i

When ``feedback_noise`` is present, ``feedback`` may be omitted and is derived.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ALPHABET_CAP, HORIZON_CAP, InvalidSystem, Kernel, MessageEncoder, additive_feedback


@dataclass(frozen=True, eq=False)
class System:
    n: int
    sizes: dict
    channel: Kernel
    feedback: Kernel
    policy: Kernel | None = None
    encoder: MessageEncoder | None = None
    message_prior: np.ndarray | None = None
    noise: Kernel | None = None

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "alphabets": dict(self.sizes),
            "channel": self.channel.to_nested(),
            "feedback": self.feedback.to_nested(),
        }
        if self.policy is not None:
            out["policy"] = self.policy.to_nested()
        if self.encoder is not None:
            out["encoder"] = {"M": self.encoder.M, "code_functions": self.encoder.to_nested()}
        if self.message_prior is not None:
            out["message_prior"] = self.message_prior.tolist()
        if self.noise is not None:
            out["feedback_noise"] = self.noise.to_nested()
        return out


def _tables(raw, what: str):
    if not isinstance(raw, list):
        raise InvalidSystem(f"{what}: expected a list over time")
    for i, t in enumerate(raw, start=1):
        if not isinstance(t, list):
            raise InvalidSystem(f"{what} at time {i}: expected a list of rows")
        lens = [len(r) if isinstance(r, list) else -1 for r in t]
        for h, ln in enumerate(lens):
            if ln != lens[0] or ln < 0:
                raise InvalidSystem(f"{what} at time {i}: history {h} has a malformed row")
    try:
        return tuple(np.asarray(t, dtype=np.float64) for t in raw)
    except (TypeError, ValueError) as e:
        raise InvalidSystem(f"{what}: ragged or non-numeric table ({e})") from None


def _kernel(role, raw, sizes, n, what):
    tabs = _tables(raw, what)
    if len(tabs) < n:
        raise InvalidSystem(f"{what}: {len(tabs)} time steps given, n = {n}")
    return Kernel(role, sizes, tabs[:n])


def system_from_dict(d: dict) -> System:
    if not isinstance(d, dict):
        raise InvalidSystem("system file must hold a JSON object")
    try:
        n = int(d["n"])
        al = {k: int(v) for k, v in d["alphabets"].items()}
        sizes = {"X": al["X"], "Y": al["Y"], "Z": al.get("Z", al["Y"])}
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidSystem(f"missing or malformed field: {e}") from None
    if not 1 <= n <= HORIZON_CAP:
        raise InvalidSystem(f"n must lie in 1..{HORIZON_CAP}")
    for k, v in sizes.items():
        if not 1 <= v <= ALPHABET_CAP:
            raise InvalidSystem(f"alphabet {k} has size {v}, allowed 1..{ALPHABET_CAP}")
    channel = _kernel("channel", d.get("channel"), {"X": sizes["X"], "Y": sizes["Y"]}, n, "channel")
    noise = None
    if d.get("feedback_noise") is not None:
        noise = _kernel("noise", d["feedback_noise"], {"V": sizes["Y"]}, n, "feedback_noise")
        if sizes["Z"] != sizes["Y"]:
            raise InvalidSystem("additive feedback needs |Z| = |Y|")
    if d.get("feedback") is not None:
        feedback = _kernel("feedback", d["feedback"], {"Y": sizes["Y"], "Z": sizes["Z"]}, n, "feedback")
    elif noise is not None:
        feedback = additive_feedback(noise, n, sizes["Y"])
    else:
        raise InvalidSystem("feedback: missing")
    policy = None
    if d.get("policy") is not None:
        policy = _kernel("policy", d["policy"], {"X": sizes["X"], "Z": sizes["Z"]}, n, "policy")
    encoder = prior = None
    if d.get("encoder") is not None:
        enc = d["encoder"]
        try:
            cfs = enc["code_functions"]
            encoder = MessageEncoder([cf[:n] for cf in cfs], sizes["X"], sizes["Z"])
        except (KeyError, TypeError) as e:
            raise InvalidSystem(f"encoder: malformed ({e})") from None
        except ValueError as e:
            if isinstance(e, InvalidSystem):
                raise
            raise InvalidSystem(f"encoder: {e}") from None
        if "M" in enc and int(enc["M"]) != encoder.M:
            raise InvalidSystem(f"encoder: M = {enc['M']} but {encoder.M} code-functions given")
        if d.get("message_prior") is not None:
            prior = np.asarray(d["message_prior"], dtype=np.float64)
            if prior.shape != (encoder.M,) or np.any(prior < 0) or abs(prior.sum() - 1) > 1e-12:
                raise InvalidSystem("message_prior must be a probability vector of length M")
    return System(n, sizes, channel, feedback, policy, encoder, prior, noise)


def load_system(path) -> System:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise InvalidSystem(f"cannot read {path}: {e}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidSystem(f"{path}: not valid JSON ({e})") from None
    return system_from_dict(d)


def dumps(obj) -> str:
    """Canonical JSON text: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")
