"""martinet: command-line front end for the evaluators and audits.

Every run prints (or writes to --output) a JSON document

    {"command": ..., "config": {...resolved...}, "result": {...}, "status": ...}

with sorted keys and no timing fields, so identical flags and seed give
byte-identical output.  --format csv writes the natural table of the
command instead (path samples, audit rows, or a single flattened row).

Settings resolve as built-in defaults < --config file (flat key=value
lines) < command-line flags.  --threads falls back to $MARTINET_THREADS.

Exit codes: 0 ok, 1 invariant violation, 2 validation error or bad usage,
3 inconclusive (Monte Carlo CI too wide or a convergence study failed).
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from . import chains, geometry, oracle, trace
from .core import FrameParams, SpacePoint, SurfacePoint, delta
from .fields import BUILTINS, builtin_fields
from .serialize import dumps_csv, dumps_json, path_rows, to_plain

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3
STATUS_CODE = {"ok": EXIT_OK, "violation": EXIT_VIOLATION, "inconclusive": EXIT_INCONCLUSIVE}
COMMANDS = ("distance", "ball", "mu", "ahlfors", "ballbox-audit", "chain", "trace", "audit-all")


class UsageError(ValueError):
    pass


def _floats(n: int):
    def parse(text: str) -> tuple:
        try:
            vals = tuple(float(t) for t in text.split(","))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
        if len(vals) != n:
            raise argparse.ArgumentTypeError(f"expected {n} comma-separated numbers, got {text!r}")
        return vals
    return parse


point3, point2 = _floats(3), _floats(2)

# dest -> (flag, type, default, help); shared by every subcommand
COMMON = {
    "alpha": ("--alpha", float, 2.0, "frame exponent alpha >= 1"),
    "seed": ("--seed", int, 0, "RNG seed"),
    "output": ("--output", str, None, "write here instead of stdout"),
    "format": ("--format", str, "json", "json or csv"),
    "threads": ("--threads", int, None, "worker cap (fallback $MARTINET_THREADS, then 1)"),
}

OPTIONS = {
    "distance": {
        "from_": ("--from", point3, (0.0, 0.0, 0.0), "start point x,y,z"),
        "to": ("--to", point3, (1.0, 0.0, 0.0), "end point x,y,z"),
        "segments": ("--segments", int, 8, "polyline segments of the optimizer"),
        "starts": ("--starts", int, 16, "multistart count"),
        "tol": ("--tol", float, 1e-3, "compass-search stopping step"),
    },
    "ball": {
        "at": ("--at", point3, (0.0, 0.0, 0.0), "center x,y,z"),
        "r": ("--r", float, 1.0, "radius"),
        "samples": ("--samples", int, 100_000, "Monte Carlo samples"),
        "shape": ("--shape", str, "ball", "ball, box1 or box2"),
    },
    "mu": {
        "at": ("--at", point2, (0.0, 0.0), "center x,y on z=0"),
        "r": ("--r", float, 1.0, "radius"),
        "samples": ("--samples", int, 100_000, "Monte Carlo samples"),
    },
    "ahlfors": {
        "samples": ("--samples", int, 100_000, "Monte Carlo samples per estimate"),
        "max_rel_ci": ("--max-rel-ci", float, 0.05, "relative CI above which a row is inconclusive"),
    },
    "ballbox-audit": {
        "samples": ("--samples", int, 10_000, "random (p, q, r) triples"),
    },
    "chain": {
        "from_": ("--from", point2, (1.0, 0.0), "start u = x,y"),
        "to": ("--to", point2, (2.0, 1.0), "end v = x',y'"),
        "case": ("--case", str, "auto", "auto, char or nonchar"),
        "eps0": ("--eps0", float, 0.1, "case-gate constant"),
    },
    "trace": {
        "p": ("--p", float, 2.0, "integrability p > 1"),
        "function": ("--function", str, "gauss", f"builtin field: {', '.join(BUILTINS)}"),
        "samples": ("--samples", int, 200_000, "Monte Carlo pairs"),
    },
    "audit-all": {
        "p": ("--p", float, 2.0, "integrability p > 1 for the trace check"),
        "eps0": ("--eps0", float, 0.1, "case-gate constant"),
        "samples": ("--samples", int, 100_000, "Monte Carlo samples per estimate"),
        "pairs": ("--pairs", int, 20, "pairs for the distance bracket audit"),
        "segments": ("--segments", int, 8, "polyline segments of the optimizer"),
        "starts": ("--starts", int, 16, "multistart count"),
        "tol": ("--tol", float, 1e-3, "compass-search stopping step"),
    },
}


def _options(command: str) -> dict:
    return {**COMMON, **OPTIONS[command]}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="martinet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in COMMANDS:
        sp = sub.add_parser(name, argument_default=argparse.SUPPRESS)
        for dest, (flag, typ, default, help_) in _options(name).items():
            sp.add_argument(flag, dest=dest, type=typ, help=f"{help_} (default {default})")
        sp.add_argument("--config", dest="config", help="flat key=value file, overridden by flags")
    return parser


def read_config(path: str, command: str) -> dict:
    """Parse key=value lines (# comments, blank lines ok); keys use flag names."""
    opts = _options(command)
    by_key = {flag.lstrip("-").replace("-", "_"): dest for dest, (flag, *_) in opts.items()}
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value")
            key, val = (t.strip() for t in line.split("=", 1))
            dest = by_key.get(key.replace("-", "_"))
            if dest is None:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r} for {command}")
            typ = opts[dest][1]
            try:
                out[dest] = typ(val)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                raise UsageError(f"{path}:{lineno}: {exc}")
    return out


def resolve(command: str, given: dict) -> dict:
    cfg = {dest: spec[2] for dest, spec in _options(command).items()}
    if given.get("config"):
        cfg.update(read_config(given["config"], command))
    cfg.update({k: v for k, v in given.items() if k not in ("command", "config")})
    if cfg["threads"] is None:
        env = os.environ.get("MARTINET_THREADS")
        try:
            cfg["threads"] = int(env) if env else 1
        except ValueError:
            raise UsageError(f"MARTINET_THREADS must be an integer, got {env!r}")
    validate(command, cfg)
    return cfg


def validate(command: str, cfg: dict) -> None:
    FrameParams(cfg["alpha"])
    if cfg["format"] not in ("json", "csv"):
        raise UsageError(f"--format must be json or csv, got {cfg['format']!r}")
    if cfg["threads"] < 1:
        raise UsageError("--threads must be >= 1")
    for key in ("samples", "pairs", "segments", "starts"):
        if key in cfg and cfg[key] < 1:
            raise UsageError(f"--{key} must be >= 1")
    for key in ("r", "tol", "eps0", "max_rel_ci"):
        if key in cfg and not cfg[key] > 0.0:
            raise UsageError(f"--{key.replace('_', '-')} must be > 0")
    if "p" in cfg and not cfg["p"] > 1.0:
        raise UsageError("--p must be > 1")
    if command == "chain" and cfg["case"] not in ("auto", "char", "nonchar"):
        raise UsageError("--case must be auto, char or nonchar")
    if command == "trace" and cfg["function"] not in BUILTINS:
        raise UsageError(f"--function must be one of {BUILTINS}")
    if command == "ball" and cfg["shape"] not in geometry.SHAPES:
        raise UsageError(f"--shape must be one of {geometry.SHAPES}")


# ---------------------------------------------------------------- commands


def _oracle_cfg(cfg: dict) -> oracle.OracleConfig:
    return oracle.OracleConfig(segments=cfg["segments"], starts=cfg["starts"], seed=cfg["seed"],
                               tol=cfg["tol"], threads=cfg["threads"])


def run_distance(cfg):
    a = cfg["alpha"]
    p, q = SpacePoint.of(cfg["from_"]), SpacePoint.of(cfg["to"])
    br = oracle.cc_bracket(p, q, a, _oracle_cfg(cfg))
    result = {
        "delta": dataclasses.asdict(delta(p, q, a)),
        "bracket": [br.lower, br.upper],
        "certified": br.certified,
        "endpoint_error": br.endpoint_error,
        "witness": {"start": br.witness.start, "segments": list(br.witness.segments)},
    }
    bad = br.lower > br.upper * (1.0 + 1e-12) or not br.certified
    return result, "violation" if bad else "ok", path_rows(br.witness, a)


def run_ball(cfg):
    a, r = cfg["alpha"], cfg["r"]
    est = geometry.ball_volume_mc(cfg["at"], r, a, cfg["samples"], cfg["seed"], cfg["shape"])
    result = {"volume_mc": est, "rel_half_width": est.rel_half_width}
    if cfg["shape"] == "ball":
        exact = geometry.ball_volume_exact(cfg["at"], r, a)
        result["volume_exact"] = exact
        result["within_ci"] = abs(est.value - exact) <= est.half_width
    else:
        variant = 1 if cfg["shape"] == "box1" else 2
        result["volume_exact"] = geometry.box_volume(geometry.BoxSpec(variant, cfg["at"], r), a)
    return result, "ok", None


def run_mu(cfg):
    a, r, u = cfg["alpha"], cfg["r"], SurfacePoint.of(cfg["at"])
    est = geometry.mu_ball_mc(u, r, a, cfg["samples"], cfg["seed"])
    quad = geometry.mu_ball_quad(u, r, a)
    result = {"mu_mc": est, "mu_quad": quad, "surrogate": geometry.ahlfors_surrogate(u, r, a),
              "within_ci": abs(est.value - quad) <= est.half_width}
    return result, "ok", None


def _audit_status(res: dict) -> str:
    if not res["ok"]:
        return "violation"
    return "inconclusive" if res.get("inconclusive") else "ok"


def run_ahlfors(cfg):
    res = geometry.ahlfors_audit(cfg["alpha"], n=cfg["samples"], seed=cfg["seed"],
                                 max_rel_ci=cfg["max_rel_ci"])
    return res, _audit_status(res), res["rows"]


def run_ballbox(cfg):
    res = geometry.ballbox_audit(cfg["alpha"], cfg["samples"], cfg["seed"])
    return res, _audit_status(res), None


def run_chain(cfg):
    a = cfg["alpha"]
    ccfg = chains.ChainConfig(eps0=cfg["eps0"])
    case = {"auto": None, "char": "characteristic", "nonchar": "noncharacteristic"}[cfg["case"]]
    audit = chains.chain_audit(cfg["from_"], cfg["to"], a, ccfg, case)
    conn = chains.connect(cfg["from_"], cfg["to"], a, ccfg, case)
    result = {**audit, "connection": conn.to_dict()}
    bad = audit["endpoint_err"] > chains.CLOSURE_TOL or audit["max_z_violation"] > chains.Z_TOL
    rows = []
    t0 = 0.0
    for k, c in enumerate(conn.chains):
        for row in path_rows(c.path(), a):
            rows.append({"piece": k, **row, "t": row["t"] + t0})
        t0 += c.length
    return result, "violation" if bad else "ok", rows


def run_trace(cfg):
    a = cfg["alpha"]
    f = builtin_fields(cfg["function"], a)
    tcfg = trace.TraceConfig(samples=cfg["samples"], seed=cfg["seed"])
    rep = trace.trace_ratio(f, a, cfg["p"], tcfg)
    return rep, "inconclusive" if rep.inconclusive else "ok", None


def run_audit_all(cfg):
    a, seed, n = cfg["alpha"], cfg["seed"], cfg["samples"]
    ccfg = chains.ChainConfig(eps0=cfg["eps0"])
    parts = {
        "ballbox": geometry.ballbox_audit(a, 10_000, seed),
        "ahlfors": geometry.ahlfors_audit(a, n=n, seed=seed),
        "chain_characteristic": chains.chain_audit_batch("characteristic", 1000, seed, a, ccfg),
        "chain_noncharacteristic": chains.chain_audit_batch("noncharacteristic", 1000, seed, a, ccfg),
        "monotonicity": chains.monotonicity_audits(a, ccfg),
        "equivalence": oracle.equivalence_audit(a, cfg["pairs"], seed, _oracle_cfg(cfg)),
    }
    rep = trace.trace_ratio(builtin_fields("gauss"), a, cfg["p"], trace.TraceConfig(samples=n * 10, seed=seed))
    parts["trace"] = {**to_plain(rep), "ok": bool(rep.ratio == rep.ratio), "inconclusive": rep.inconclusive}
    statuses = {k: _audit_status(v) for k, v in parts.items()}
    overall = "violation" if "violation" in statuses.values() else (
        "inconclusive" if "inconclusive" in statuses.values() else "ok")
    rows = [{"audit": k, "status": s} for k, s in statuses.items()]
    return {"audits": parts, "statuses": statuses}, overall, rows


RUNNERS = {
    "distance": run_distance, "ball": run_ball, "mu": run_mu, "ahlfors": run_ahlfors,
    "ballbox-audit": run_ballbox, "chain": run_chain, "trace": run_trace, "audit-all": run_audit_all,
}


def render(command: str, cfg: dict, result, status: str, rows) -> str:
    if cfg["format"] == "csv":
        return dumps_csv(rows if rows is not None else [to_plain(result)])
    shown = {("from" if k == "from_" else k): v for k, v in cfg.items()}
    return dumps_json({"command": command, "config": shown, "result": result, "status": status})


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    given = vars(ns)
    command = given["command"]
    try:
        cfg = resolve(command, given)
        result, status, rows = RUNNERS[command](cfg)
    except (ValueError, OSError) as exc:
        print(f"martinet {command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = render(command, cfg, result, status, rows)
    if cfg["output"]:
        with open(cfg["output"], "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return STATUS_CODE[status]


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
