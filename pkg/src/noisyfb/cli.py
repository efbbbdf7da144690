"""Command line front end: ``noisyfb {analyze,verify,bounds,codefn,bcec}``.

Exit status is 0 when every check passes, 1 when one fails and 2 on bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time

import numpy as np

from . import __version__, bcec, bounds, codefn, core, feedback as fbk, verify
from ._accel import BACKEND
from .core import InvalidSystem
from .feedback import Check
from .measures import (
    causal_conditional_directed_information,
    directed_information,
    mutual_information,
    residual_report,
)
from .systems import System, dumps, load_system

SCHEMA_VERSION = 1
DESK_SCALE_NOTE = (
    "capacity equalities that need n -> infinity are not reproduced; they are covered only by the "
    "finite-n identity and bound checks in this report"
)


class Report:
    def __init__(self, command: str, args: dict, seed=None):
        self.command = command
        self.args = args
        self.seed = seed
        self.system = None
        self.measures: list[dict] = []
        self.checks: list[dict] = []
        self.extra: dict = {}
        self.notes: list[str] = []
        self.series: list[tuple] = []  # (n, measure_name, value_bits)

    def measure(self, name, value, query=None, tol=fbk.IDENTITY_TOL):
        self.measures.append({"name": name, "value_bits": float(value), "query": query, "tolerance_used": tol})

    def check(self, c: Check | dict, **extra):
        d = c.to_dict() if isinstance(c, Check) else dict(c)
        d.update(extra)
        self.checks.append(d)

    @property
    def failed(self) -> list[dict]:
        return [c for c in self.checks if not c["pass"]]

    def to_dict(self, wall_clock=None) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "tool": "noisyfb",
            "version": __version__,
            "backend": BACKEND,
            "command": self.command,
            "arguments": self.args,
            "seed": self.seed,
            "system": self.system,
            "measures": self.measures,
            "checks": self.checks,
            "notes": self.notes,
            "summary": {"checks": len(self.checks), "failed": len(self.failed), "passed": not self.failed},
        }
        out.update(self.extra)
        if wall_clock is not None:
            out["wall_clock_seconds"] = wall_clock
        return out

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "measure_name", "value_bits"])
        for n, name, v in self.series:
            w.writerow([n, name, repr(float(v))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _policy_or_uniform(sys_: System, rep: Report, n: int) -> core.Kernel:
    if sys_.policy is not None:
        return sys_.policy.truncate(n)
    rep.notes.append("no policy given; using the uniform i.i.d. input policy")
    return core.iid_policy(np.full(sys_.sizes["X"], 1.0 / sys_.sizes["X"]), n, sys_.sizes["Z"])


def cmd_analyze(a, rep: Report):
    s = load_system(a.system)
    rep.system = s.to_dict()
    n = s.n
    if s.policy is not None or s.encoder is None:
        pol = _policy_or_uniform(s, rep, n)
        joint = core.build_joint_xyz(s.channel, s.feedback, pol, n)
        rep.measure("directed_info", directed_information(joint, "X", "Y"), "I(X^n->Y^n)")
        rep.measure("mutual_info", mutual_information(joint, "X", "Y"), "I(X^n;Y^n)")
        rep.measure("causal_cond_directed_info", causal_conditional_directed_information(joint, "X", "Y", "Z"),
                    "I(X^n->Y^n||Z^n)")
        enc = fbk.encoder_typicality(joint)
        rep.measure("closed_loop_per_symbol", enc.closed_loop_value, "(1/n) I(Z^{n-1}->Y^n)")
        ft = fbk.feedback_typicality_series(s.channel, s.feedback, pol, n)
        rep.measure("feedback_typicality", ft[-1], "(1/n) sum_i H(Z^{i-1}|Y^{i-1})")
        rep.check(Check("induced_policy_round_trip", codefn.INDUCED_POLICY,
                        core.induced_policy(joint).max_deviation(pol), 0.0, 1e-10))
        rep.check(Check("closed_loop_below_feedback_uncertainty", "I(Z^{n-1}->Y^n) <= sum_i H(Z^{i-1}|Y^{i-1})",
                        enc.closed_loop_value, ft[-1], a.tol, "le"))
        for k in range(1, n + 1):
            jk = core.build_joint_xyz(s.channel, s.feedback, pol, k)
            rep.series.append((k, "causal_cond_directed_info_per_symbol",
                               causal_conditional_directed_information(jk, "X", "Y", "Z") / k))
            rep.series.append((k, "directed_info_per_symbol", directed_information(jk, "X", "Y") / k))
            rep.series.append((k, "feedback_typicality", ft[k - 1]))
            rep.series.append((k, "closed_loop_per_symbol", enc.series[k - 1]))
    cls = fbk.classify_feedback_noisy(s.feedback, n, s.channel)
    rep.extra["feedback_link"] = {
        "noisy": cls.noisy,
        "probing_family": cls.probing_family,
        "witness": None if cls.witness is None else cls.witness.__dict__,
    }
    if s.encoder is not None:
        noise = s.noise
        if noise is None:
            try:
                noise = core.noise_from_feedback(s.feedback)
            except InvalidSystem:
                noise = None
        joint = core.build_joint_wxyz(s.encoder, s.message_prior, s.channel, s.feedback, n, noise=noise)
        r = residual_report(joint)
        rep.measure("message_info", mutual_information(joint, "W", "Y"), "I(W;Y^n)")
        rep.measure("residual_directed_info", r.value, "I(X^n->Y^n) - I(X^n->Y^n|W)")
        rep.measure("cond_directed_info", r.conditional, "I(X^n->Y^n|W)")
        rep.measure("encoder_closed_loop_per_symbol", fbk.encoder_typicality(joint, a.tol).closed_loop_value,
                    "(1/n) I(Z^{n-1}->Y^n)")
        rep.check(fbk.verify_message_flow(joint, a.tol))
        for c in fbk.residual_chain(joint, a.tol):
            rep.check(c)
        rep.check(fbk.verify_dmc_lemma(joint, a.tol))
        if noise is not None:
            fl = fbk.decompose_flows(joint)
            rep.extra["flow_decomposition"] = fl.__dict__
            rep.check(fl.check(a.tol))
        if s.channel.is_memoryless():
            rl = fbk.rate_loss_bound(joint, s.channel, a.tol)
            rep.measure("rate_loss_surrogate", rl.surrogate, "(1/n) I(Z^{n-1}->Y^n)")
            rep.measure("single_letter_capacity", rl.capacity, "max_p I(X;Y)")
            for c in rl.checks:
                rep.check(c)


def cmd_verify(a, rep: Report):
    rows = verify.run_all(a.trials, a.seed, a.tol, a.suite or None)
    for r in rows:
        rep.check(r)
    per = {}
    for r in rows:
        key = (r["suite"], r["check_name"])
        per.setdefault(key, [0, 0.0])
        per[key][0] += 1
        per[key][1] = max(per[key][1], r["residual"])
    rep.extra["per_identity"] = [
        {"suite": k[0], "check_name": k[1], "rows": v[0], "max_residual": v[1]} for k, v in sorted(per.items())
    ]


def _parse_ns(text: str, default: int) -> list[int]:
    if text is None:
        return [default]
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise InvalidSystem(f"--n expects integers, got {text!r}") from None


def cmd_bounds(a, rep: Report):
    s = load_system(a.system)
    rep.system = s.to_dict()
    cfg = bounds.OptimizerConfig(restarts=a.restarts, grid_resolution=a.grid, seed=a.seed)
    noise = s.noise
    if noise is None:
        try:
            noise = core.noise_from_feedback(s.feedback)
        except InvalidSystem:
            noise = None
    results = []
    for n in _parse_ns(a.n, s.n):
        if n > s.n:
            raise InvalidSystem(f"n = {n} exceeds the system horizon {s.n}")
        res = bounds.optimize_upper_bound(s.channel.truncate(n), s.feedback.truncate(n), n, cfg)
        rep.measure(f"upper_bound_n{n}", res.upper_bound_bits_per_use, "(1/n) I(X^n->Y^n||Z^n), best found",
                    bounds.EVAL_TOL)
        rep.series.append((n, "upper_bound", res.upper_bound_bits_per_use))
        if noise is not None:
            lb = bounds.lower_bound_additive(res, noise.truncate(n), n)
            rep.measure(f"lower_bound_n{n}", lb.value, "max(0, upper - H(V^n)/n)", bounds.EVAL_TOL)
            rep.series.append((n, "lower_bound", lb.value))
            rep.series.append((n, "noise_entropy_rate", lb.noise_entropy_rate))
            rep.check(Check(f"lower_below_upper_n{n}", "lower <= upper", lb.value,
                            res.upper_bound_bits_per_use, a.tol, "le"))
        rep.check(Check(f"upper_nonnegative_n{n}", "upper >= 0", 0.0, res.upper_bound_bits_per_use, a.tol, "le"))
        tr = np.asarray(res.trace)
        rep.check(Check(f"best_trace_monotone_n{n}", "best-so-far non-decreasing",
                        float(max(0.0, -np.min(np.diff(tr)))) if tr.size > 1 else 0.0, 0.0, 0.0))
        results.append(res.to_dict())
    rep.extra["bounds"] = results
    if s.channel.is_memoryless():
        rep.measure("single_letter_capacity", bounds.single_letter_capacity(s.channel).capacity, "max_p I(X;Y)")


def cmd_codefn(a, rep: Report):
    s = load_system(a.system)
    rep.system = s.to_dict()
    n = a.n or s.n
    if n > s.n:
        raise InvalidSystem(f"n = {n} exceeds the system horizon {s.n}")
    pol = _policy_or_uniform(s, rep, n)
    ch, fb = s.channel.truncate(n), s.feedback.truncate(n)
    xs, zs = s.sizes["X"], s.sizes["Z"]
    for k in range(1, n + 1):
        got = len(codefn.enumerate_code_functions(k, xs, zs, cap=a.cap))
        rep.check(Check(f"code_function_count_n{k}", "|F| = prod_i |X|^{|Z|^{i-1}}", got,
                        codefn.count_code_functions(k, xs, zs), 0))
    cfd = codefn.good_distribution_from_policy(pol, n, cap=a.cap)
    full = codefn.joint_fxyz(cfd, ch, fb)
    rep.check(codefn.verify_induced_policy(full, pol))
    de = codefn.verify_density_equality(full)
    for c in de.checks(codefn.DENSITY_TOL, a.tol):
        rep.check(c)
    fd = codefn.verify_lemma_F_decomposition(full)
    rep.check(fd.check(a.tol))
    rep.measure("code_function_info", fd.mutual_info, "I(F^n;Y^n)")
    rep.measure("causal_cond_directed_info", fd.causal_directed, "I(X^n->Y^n||Z^n)")
    rep.measure("code_function_feedback_info", fd.feedback_leak, "I(F^n;Z^n|Y^n)")
    qs = [float(q) for q in a.quantiles.split(",")]
    st = codefn.residual_density_statistics(pol, ch, fb, n, qs)
    rep.extra["residual_density_quantiles"] = {
        "quantiles": list(st.quantiles), "per_symbol_values": list(st.values), "mean_per_symbol": st.mean,
    }
    for q, v in zip(st.quantiles, st.values):
        rep.series.append((n, f"residual_density_q{q:g}", v))
    if a.dump:
        fns = codefn.enumerate_code_functions(n, xs, zs, cap=a.cap)
        probs = cfd.probs
        with open(a.dump, "w") as fh:
            fh.write(dumps([{"index": k, "tables": f.to_nested(), "prob": float(p)}
                            for k, (f, p) in enumerate(zip(fns, probs))]))


def cmd_bcec(a, rep: Report):
    try:
        cfgs = [bcec.BcecConfig(m=a.m, alpha=a.alpha, p=a.p, n_bits=a.n_bits, seed=a.seed + t,
                                max_rounds=a.max_rounds, mode=a.mode) for t in range(a.trials)]
    except ValueError as e:
        raise InvalidSystem(str(e)) from None
    results = [bcec.simulate_bcec(c) for c in cfgs]
    first = results[0]
    rep.measure("analytic_rate", first.analytic_rate, "(m-1)(1-p)(1-alpha)", 0.0)
    rep.measure("capacity", first.capacity, "m(1-alpha)", 0.0)
    rep.measure("analytic_ratio", first.analytic_ratio, "(1-p)(1-1/m)", 0.0)
    uses = sum(r.channel_uses for r in results)
    pooled = sum(c.n_bits for c in cfgs) / uses
    rep.measure("empirical_rate", pooled, "payload bits / codeword uses, pooled over trials", 0.0)
    se = float(np.sqrt(np.sum([r.standard_error**2 for r in results])) / len(results))
    rep.measure("empirical_rate_standard_error", se, None, 0.0)
    rep.check(Check("empirical_rate_within_3_se", "(m-1)(1-p)(1-alpha)", pooled, first.analytic_rate, 3 * se))
    for r in results:
        rep.check(Check(f"decoded_correctly_seed{r.config.seed}", "exact decoding", r.mismatches, 0, 0))
    rep.extra["bcec"] = [r.to_dict() for r in results]
    rep.notes.append(bcec.RATE_ACCOUNTING)
    rep.notes.append(DESK_SCALE_NOTE)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noisyfb", description="Exact information measures for channels with noisy feedback.")
    ap.add_argument("--version", action="version", version=f"noisyfb {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, seed=0):
        p.add_argument("--out", help="write the JSON report here (default: stdout)")
        p.add_argument("--csv", help="write the per-n series as CSV here")
        p.add_argument("--tol", type=float, default=fbk.IDENTITY_TOL)
        p.add_argument("--seed", type=int, default=seed)
        p.add_argument("--timing", action="store_true", help="include wall-clock time (breaks byte-identical output)")

    p = sub.add_parser("analyze", help="all measures and identity checks for one system")
    p.add_argument("system")
    common(p)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("verify", help="identity suites over random systems")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--suite", action="append", choices=sorted(verify.TRIALS))
    common(p, seed=42)
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("bounds", help="upper/lower capacity bounds")
    p.add_argument("--system", required=True)
    p.add_argument("--n", help="horizon or comma-separated horizons (default: system n)")
    p.add_argument("--restarts", type=int, default=bounds.OptimizerConfig.restarts)
    p.add_argument("--grid", type=int, default=bounds.OptimizerConfig.grid_resolution)
    common(p)
    p.set_defaults(fn=cmd_bounds)

    p = sub.add_parser("codefn", help="code-function enumeration and lemma checks")
    p.add_argument("--system", required=True)
    p.add_argument("--n", type=int)
    p.add_argument("--cap", type=int, default=codefn.ENUMERATION_CAP)
    p.add_argument("--quantiles", default="0.01,0.05,0.5")
    p.add_argument("--dump", help="write the enumerated code-functions with their probabilities")
    common(p)
    p.set_defaults(fn=cmd_codefn)

    p = sub.add_parser("bcec", help="signaling-bit scheme on the codeword erasure channel")
    p.add_argument("--m", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.2)
    p.add_argument("--p", type=float, default=0.1)
    p.add_argument("--n-bits", type=int, default=90000)
    p.add_argument("--max-rounds", type=int, default=10**6)
    p.add_argument("--mode", choices=bcec.MODES, default="alternating")
    p.add_argument("--trials", type=int, default=1)
    common(p, seed=7)
    p.set_defaults(fn=cmd_bcec)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    args = {k: v for k, v in sorted(vars(a).items()) if k not in ("fn", "out", "csv", "timing")}
    rep = Report(a.command, args, getattr(a, "seed", None))
    t0 = time.perf_counter()
    try:
        a.fn(a, rep)
    except (InvalidSystem, codefn.EnumerationCapExceeded) as e:
        print(f"noisyfb: invalid input: {e}", file=sys.stderr)
        return 2
    text = dumps(rep.to_dict(time.perf_counter() - t0 if a.timing else None))
    if a.out:
        with open(a.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if a.csv:
        with open(a.csv, "w") as fh:
            fh.write(rep.csv_text())
    for c in rep.failed:
        print(f"FAILED {c['check_name']} [{c['paper_ref']}]: residual {c['residual']:.3e} > {c['tolerance']:g}",
              file=sys.stderr)
    return 1 if rep.failed else 0


if __name__ == "__main__":
    sys.exit(main())
