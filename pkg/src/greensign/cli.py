"""greensign command line: JSON on stdout, a short human summary on stderr.

Exit codes: 0 success, 1 numerical outcome (not found, sign violated, no
convergence), 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from . import combinatorics as cb
from .cone import NonlinearProblem, build_envelope, dump_solution, growth_diagnostic, picard_solve
from .errors import EigenvalueCollisionError, GreensignError, PreconditionError, ValidationError
from .green import build_green, dump_grid, eval_q, verify_green
from .ode_basis import Domain
from .sign_analysis import (EigenvalueNotFound, NONNEGATIVE, NONPOSITIVE, STRONGLY_NEGATIVE,
                            STRONGLY_POSITIVE, VIOLATED, predict_interval, sweep, verify_sign)
from .spectral import FIRST_NEGATIVE, FIRST_POSITIVE, EigenResult, find_first

SPEC_KEYS = {"n", "a", "b", "sigma", "epsilon", "m_max", "scan_points", "grid",
             "M", "f", "q_list", "I1", "name"}
_FIELD_ALIAS = {"left": "sigma", "right": "epsilon"}


class UsageError(Exception):
    def __init__(self, msg, field=None):
        super().__init__(msg)
        self.field = field


class Spec:
    def __init__(self, raw):
        self.raw = raw
        self.space = cb.TwoPointSpace(raw["n"], tuple(raw["sigma"]), tuple(raw["epsilon"]))
        self.domain = Domain(raw.get("a", 0.0), raw.get("b", 1.0))
        self.m_max = raw.get("m_max")
        self.scan_points = raw.get("scan_points", 2000)
        self.grid = raw.get("grid", 101)


def load_spec(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read spec file: {exc}", "spec") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}", "spec") from None
    if not isinstance(raw, dict):
        raise UsageError("spec must be a JSON object", "spec")
    unknown = sorted(set(raw) - SPEC_KEYS)
    if unknown:
        raise UsageError(f"unknown key(s) {unknown}", unknown[0])
    for key in ("n", "sigma", "epsilon"):
        if key not in raw:
            raise UsageError(f"missing key {key!r}", key)
    for key in ("sigma", "epsilon", "q_list"):
        if key in raw and not isinstance(raw[key], list):
            raise UsageError(f"{key} must be a list", key)
    if not isinstance(raw["n"], int) or isinstance(raw["n"], bool):
        raise UsageError("n must be an integer", "n")
    try:
        spec = Spec(raw)
    except ValidationError as exc:
        raise UsageError(str(exc), _FIELD_ALIAS.get(exc.field, exc.field)) from None
    if not spec.space.is_complete:
        raise UsageError(f"{spec.space.name()} needs exactly n conditions", "sigma")
    if not 1 <= spec.space.k <= spec.space.n - 1:
        raise UsageError("two-point problems need 1 <= |sigma| <= n-1", "sigma")
    return spec


def _floats(text, what):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers", what) from None


# ---------------------------------------------------------------- commands

def cmd_analyze(spec, args):
    sp = spec.space
    a, b = cb.alpha_beta(sp)
    eta, gamma = cb.eta_gamma(sp)
    rows = []
    for q in range(1, sp.n):
        d = cb.derivative_space(sp, q)
        rows.append({"q": q, "mu": list(d.mu), "rho": list(d.rho), "alpha_q": d.alpha_q,
                     "beta_q": d.beta_q, "c_q": d.c_q, "d_q": d.d_q, "j": d.j, "r": d.r,
                     "z": d.z, "h": d.h, "case": d.sign_case})
    out = {"space": sp.to_json(), "label": sp.name(), "N_a": cb.check_na(sp),
           "alpha": a, "beta": b, "adjoint": cb.adjoint(sp).to_json(),
           "eta": eta, "gamma": gamma, "derivatives": rows}
    summary = f"{sp.name()}: N_a={out['N_a']} alpha={a} beta={b} eta={eta} gamma={gamma}"
    return out, summary, 0


def _eigen_one(spec, direction, args):
    res = find_first(spec.space, spec.domain, direction, args.mmax or spec.m_max,
                     args.scan or spec.scan_points)
    return res.to_json(), isinstance(res, EigenResult)


def cmd_eigen(spec, args):
    dirs = [args.direction] if args.direction else [FIRST_POSITIVE, FIRST_NEGATIVE]
    results, found = {}, True
    for d in dirs:
        results[d], ok = _eigen_one(spec, d, args)
        found = found and ok
    out = results[dirs[0]] if args.direction else results
    summary = "; ".join(f"{d}: " + (f"lambda={r['lambda']:.12g} (m={r['m']:.10g})" if "lambda" in r
                                    else "not found in range") for d, r in results.items())
    return out, summary, 0 if found else 1


def cmd_interval(spec, args):
    q = _need_q(args)
    try:
        pred = predict_interval(spec.space, spec.domain, q, args.mmax or spec.m_max,
                                args.scan or spec.scan_points)
    except EigenvalueNotFound as exc:
        return {"error": str(exc), "not_found": exc.result.to_json()}, str(exc), 1
    out = pred.to_json()
    iv = str(pred.interval) if pred.interval else "none"
    return out, f"q={q}: {pred.case} {pred.sign} on {iv}", 0


def expected_sign(space, q):
    """Sign the derivative case dictates, independent of any eigenvalue."""
    if q == 0 or not cb.check_na(space):
        return None
    d = cb.derivative_space(space, q)
    if d.sign_case == cb.CASE_A:
        return STRONGLY_POSITIVE if (space.n - q - d.c_q) % 2 == 0 else STRONGLY_NEGATIVE
    if d.sign_case == cb.CASE_B:
        return NONNEGATIVE
    if d.sign_case == cb.CASE_C:
        return NONNEGATIVE if (space.n - q) % 2 == 0 else NONPOSITIVE
    return None


def cmd_verify(spec, args):
    q = 0 if args.q is None else args.q
    M = _need_M(args, spec)
    rep = verify_sign(spec.space, spec.domain, q, M, args.grid or spec.grid,
                      expected=expected_sign(spec.space, q))
    out = rep.to_json()
    return out, f"q={q} M={M:g}: {rep.verdict} (min {rep.min_value:.4g}, max {rep.max_value:.4g})", \
        1 if rep.verdict == VIOLATED else 0


def cmd_sweep(spec, args):
    q = _need_q(args)
    if not args.Ms:
        raise UsageError("--Ms is required", "Ms")
    Ms = _floats(args.Ms, "Ms")
    grid = args.grid or spec.grid
    try:
        pred = predict_interval(spec.space, spec.domain, q, args.mmax or spec.m_max,
                                args.scan or spec.scan_points)
    except EigenvalueNotFound as exc:
        return {"error": str(exc)}, str(exc), 1
    res = sweep(spec.space, spec.domain, q, Ms, grid, pred)
    rows = []
    for M, rep in res.reports:
        rows.append({"M": M, "min": rep.min_value, "max": rep.max_value, "verdict": rep.verdict,
                     "inside_interval": bool(pred.interval is not None and pred.interval.contains(M))})
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["M", "min", "max", "verdict"])
            for r in rows:
                w.writerow([repr(r["M"]), repr(r["min"]), repr(r["max"]), r["verdict"]])
    out = {"prediction": pred.to_json(), "reports": rows,
           "monotonicity": res.monotonicity.to_json() if res.monotonicity else None}
    bad = [r for r in rows if r["inside_interval"] and r["verdict"] == VIOLATED]
    mono_bad = res.monotonicity is not None and not res.monotonicity.holds
    summary = f"{len(rows)} values of M, {len(bad)} violations inside the predicted interval"
    return out, summary, 1 if bad or mono_bad else 0


def cmd_green(spec, args):
    M = _need_M(args, spec)
    g = build_green(spec.space, spec.domain, M)
    out = {"M": M, "det_scaled": g.det_scaled}
    parts = []
    if args.eval:
        t, s = _floats(args.eval, "eval")[:2] if len(_floats(args.eval, "eval")) == 2 else (None, None)
        if t is None:
            raise UsageError("--eval expects t,s", "eval")
        q = 0 if args.q is None else args.q
        side = args.side
        out.update({"t": t, "s": s, "q": q, "value": eval_q(g, q, t, s, side)})
        parts.append(f"d^{q}g({t:g},{s:g}) = {out['value']:.12g}")
    if args.verify:
        rep = verify_green(g, args.grid or spec.grid)
        out["verification"] = rep.to_json()
        parts.append("verification " + ("passed" if rep.passed else "FAILED"))
    if args.dump:
        dump_grid(g, args.dump, args.grid or spec.grid)
        out["dump"] = args.dump
        parts.append(f"grid written to {args.dump}")
    code = 1 if "verification" in out and not out["verification"]["passed"] else 0
    return out, "; ".join(parts) or f"det_scaled={g.det_scaled:.4g}", code


def _problem_bits(spec, args):
    M = _need_M(args, spec)
    q_list = spec.raw.get("q_list", [])
    if args.q_list is not None:
        q_list = [int(x) for x in _floats(args.q_list, "q_list")]
    I1 = spec.raw.get("I1")
    if I1 is not None and (len(I1) != 2):
        raise UsageError("I1 must be [a1, b1]", "I1")
    return M, q_list, I1


def cmd_cone(spec, args):
    M, q_list, I1 = _problem_bits(spec, args)
    g = build_green(spec.space, spec.domain, M)
    env = build_envelope(g, q_list, I1, grid=args.grid or 201)
    out = env.to_json()
    if args.dump:
        with open(args.dump, "w", newline="") as fh:
            w = csv.writer(fh)
            qs = sorted(env.k1_q)
            w.writerow(["t", "k1", "k2"] + [x for q in qs for x in (f"k1_{q}", f"k2_{q}")])
            for i, t in enumerate(env.t):
                row = [t, env.k1[i], env.k2[i]] + [x for q in qs for x in (env.k1_q[q][i], env.k2_q[q][i])]
                w.writerow([repr(float(v)) for v in row])
        out["dump"] = args.dump
    return out, f"eta={env.eta} gamma={env.gamma} k1={env.k1_max:.6g} k2={env.k2_max:.6g} m1={env.m1:.6g}", 0


def cmd_solve(spec, args):
    M, q_list, I1 = _problem_bits(spec, args)
    f = spec.raw.get("f")
    if f is None:
        raise UsageError("spec needs an 'f' entry to solve", "f")
    pb = NonlinearProblem(spec.space, spec.domain, M, f, q_list, I1, panels=args.panels)
    res = picard_solve(pb, max_iter=args.maxiter, tol=args.tol, damping=args.damping)
    out = res.to_json()
    out["growth_diagnostic"] = growth_diagnostic(pb.f, spec.space.n, spec.domain)
    if args.dump:
        dump_solution(res.u, args.dump)
        out["dump"] = args.dump
    ok = res.converged and res.cone.member
    summary = (f"{'converged' if res.converged else 'not converged'} after {res.iterations} iterations, "
               f"residual {res.residual:.3g}, cone member: {res.cone.member}")
    return out, summary, 0 if ok else 1


def _need_q(args):
    if args.q is None:
        raise UsageError("--q is required", "q")
    return args.q


def _need_M(args, spec):
    if args.M is not None:
        return args.M
    if "M" in spec.raw:
        return float(spec.raw["M"])
    raise UsageError("--M is required", "M")


COMMANDS = {
    "analyze": cmd_analyze, "eigen": cmd_eigen, "interval": cmd_interval, "verify": cmd_verify,
    "sweep": cmd_sweep, "green": cmd_green, "cone": cmd_cone, "solve": cmd_solve,
}


def build_parser():
    p = argparse.ArgumentParser(prog="greensign", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--spec", required=True, help="JSON space descriptor")
        s.add_argument("--json", action="store_true", help="indented JSON, no stderr summary")
        s.add_argument("--q", type=int)
        s.add_argument("--M", type=float)
        s.add_argument("--grid", type=int)
        s.add_argument("--mmax", type=float)
        s.add_argument("--scan", type=int)
        s.add_argument("--dump")
        if name == "eigen":
            s.add_argument("--direction", choices=[FIRST_POSITIVE, FIRST_NEGATIVE])
        if name == "sweep":
            s.add_argument("--Ms", help="comma-separated values of M")
            s.add_argument("--csv", help="write M,min,max,verdict rows here")
        if name == "green":
            s.add_argument("--eval", help="t,s")
            s.add_argument("--side", choices=["+", "-"])
            s.add_argument("--verify", action="store_true")
        if name in ("cone", "solve"):
            s.add_argument("--q-list", dest="q_list", help="comma-separated q values")
        if name == "solve":
            s.add_argument("--maxiter", type=int, default=500)
            s.add_argument("--tol", type=float, default=1e-12)
            s.add_argument("--damping", type=float, default=1.0)
            s.add_argument("--panels", type=int, default=8)
    return p


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(obj, pretty):
    text = json.dumps(_clean(obj), indent=2 if pretty else None, sort_keys=True, allow_nan=False)
    sys.stdout.write(text + "\n")


_VALUE_FLAGS = ("--Ms", "--eval", "--M", "--q-list")


def _glue_values(argv):
    """Let value lists start with a minus sign: '--Ms -30,0' becomes '--Ms=-30,0'."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if tok in _VALUE_FLAGS and nxt[:1] == "-" and (nxt[1:2].isdigit() or nxt[1:2] == "."):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None):
    parser = build_parser()
    argv = _glue_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    quiet = args.json
    try:
        spec = load_spec(args.spec)
        for name in ("grid", "scan"):
            v = getattr(args, name)
            if v is not None and v < 1:
                raise UsageError(f"--{name} must be positive", name)
        out, summary, code = COMMANDS[args.command](spec, args)
    except UsageError as exc:
        _emit({"error": str(exc), "field": exc.field}, quiet)
        print(f"error ({exc.field}): {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        field = _FIELD_ALIAS.get(exc.field, exc.field)
        _emit({"error": str(exc), "field": field}, quiet)
        print(f"error ({field}): {exc}", file=sys.stderr)
        return 2
    except (EigenvalueCollisionError, PreconditionError) as exc:
        _emit({"error": str(exc), "kind": type(exc).__name__}, quiet)
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except GreensignError as exc:
        _emit({"error": str(exc), "kind": type(exc).__name__}, quiet)
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _emit(out, quiet)
    if not quiet:
        print(summary, file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
