"""Command line front end: JSON in, CSV (or roof JSON) out, with a provenance header.

Every output starts with ``#`` lines recording the package version, the
command, a SHA-256 over the resolved parameters and input-file contents, and
the seed.  ``--check`` recomputes that hash and compares it with an existing
output file.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import TempomixError, ValidationError

FILE_KEYS = ("system", "roof", "potential", "observable", "observable_f", "input")
RUNTIME_KEYS = ("out", "threads", "check", "config", "command", "func")


# ---------------------------------------------------------------- formatting

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------- inputs

def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise ValidationError(f"input file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path} is not valid JSON: {exc}") from exc


def _system(args):
    from .shift import SymbolicSystem

    if args.system:
        return SymbolicSystem.from_json(_read_json(args.system))
    return SymbolicSystem.full_shift(2)


def _roof(args, system):
    from .suspension import RoofFunction

    if not args.roof:
        raise ValidationError("this command needs --roof")
    return RoofFunction.from_json(system, _read_json(args.roof))


def _potential(args, system):
    from .shift import CylinderFunction

    if args.potential:
        return CylinderFunction.from_json(system, _read_json(args.potential))
    return CylinderFunction.constant(system, 0.0)


def _normalized(args, system):
    from .thermo import gibbs_for

    gibbs = gibbs_for(system, _potential(args, system))
    return gibbs, gibbs.normalized


def _b_grid(args):
    from .diophantine import log_b_grid

    if args.b_min <= 0 or args.b_max < args.b_min or args.points < 1:
        raise ValidationError("need 0 < b-min <= b-max and points >= 1")
    return log_b_grid(args.b_min, args.b_max, n_points=args.points)


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated numbers, got {text!r}") from exc


# ---------------------------------------------------------------- commands
# Each returns (kind, payload, notes): kind "csv" with (columns, rows) or "json" with a dict.

def cmd_spectrum(args):
    from .thermo import build_transfer_matrix, leading_eigenvalues, rpf_data

    system = _system(args)
    phi = _potential(args, system)
    depth = args.depth or max(phi.depth - 1, 1)
    L = build_transfer_matrix(system, phi, depth=depth)
    gibbs = rpf_data(L, seed=args.seed)
    eig = leading_eigenvalues(L.matrix, min(L.size, 2))
    rows = [("pressure", gibbs.pressure), ("leading_eigenvalue", float(abs(eig[0]))),
            ("second_modulus", float(abs(eig[1])) if len(eig) > 1 else 0.0),
            ("gap_delta", gibbs.delta), ("contraction_rate", gibbs.rate), ("C15", gibbs.c15),
            ("depth", depth)]
    return "csv", (["quantity", "value"], rows), []


def cmd_temporal_range(args):
    from .shift import format_word
    from .suspension import temporal_range

    system = _system(args)
    table = temporal_range(system, _roof(args, system), window=args.window)
    notes = [f"window: {table.window}"]
    if not args.rectangles:
        return "csv", (["value"], [(v,) for v in table.values]), notes
    n = system.n_symbols
    rows = [(format_word(table.left_fillers[i], n), format_word(table.right_fillers[j], n),
             float(table.h_values[i, j]))
            for i in range(len(table.left_fillers)) for j in range(len(table.right_fillers))]
    return "csv", (["x1_window", "x2_window", "H_value"], rows), notes


def cmd_make_roof(args):
    from .shift import CylinderFunction
    from .suspension import construct_roof_with_range

    system = _system(args)
    base = None
    if args.base:
        vals = _floats(args.base)
        depth = 1
        while len(vals) > system.n_symbols ** depth and depth < 12:
            depth += 1
        base = CylinderFunction(system, depth, vals)
    roof = construct_roof_with_range(system, args.alpha, args.beta, args.depth, base=base)
    return "json", roof.to_json(), []


def cmd_diophantine(args):
    from .diophantine import circle_pair_scan, diophantine_exponent

    if args.alpha is not None or args.beta is not None:
        if args.alpha is None or args.beta is None:
            raise ValidationError("circle scan needs both --alpha and --beta")
        cert = diophantine_exponent(args.alpha / args.beta, args.Q)
        scan = circle_pair_scan(args.alpha, args.beta, _b_grid(args), cert.gamma, cert.C, check=False)
        notes = [f"C5: {fmt(scan.C5)}", f"C6: {fmt(scan.C6)}", f"min_slack: {fmt(scan.min_slack)}"]
        return "csv", (["b", "circle_value", "bound", "slack"], list(scan.rows())), notes
    cert = diophantine_exponent(args.theta, args.Q)
    rows = [("theta", cert.theta), ("C", cert.C), ("gamma", cert.gamma), ("Q", cert.Q),
            ("worst_q", cert.worst_q),
            ("partial_quotients", " ".join(str(a) for a in cert.partial_quotients))]
    return "csv", (["quantity", "value"], rows), []


def cmd_certify(args):
    from .diophantine import circle_pair_scan, diophantine_exponent, four_point_certificate, range_pair
    from .suspension import temporal_range

    system = _system(args)
    roof = _roof(args, system)
    table = temporal_range(system, roof, window=args.window)
    alpha, beta = range_pair(table, roof.meta.get("targets"))
    cert = diophantine_exponent(alpha / beta, args.Q)
    grid = _b_grid(args)
    scan = circle_pair_scan(alpha, beta, grid, cert.gamma, cert.C, check=False)
    rows = []
    for b, circle in zip(grid, scan.value):
        w = four_point_certificate(system, roof, b, table=table, cert=cert)
        rows.append((b, w.value, w.bound, w.value - w.bound, float(circle), w.loop_sum))
    return "csv", (["b", "value", "bound", "slack", "circle_value", "loop_sum"], rows), \
        [f"alpha: {fmt(alpha)}", f"beta: {fmt(beta)}", f"C5: {fmt(cert.gamma)}", f"C6: {fmt(cert.C)}"]


def cmd_contraction(args):
    from .dolgopyat import contraction_report

    system = _system(args)
    roof = _roof(args, system)
    gibbs, phi_p = _normalized(args, system)
    rep = contraction_report(system, phi_p, roof, _b_grid(args), depth=args.depth or 10,
                             c13=args.c13, gibbs=gibbs, threads=args.threads, window=args.window,
                             c10=args.c10)
    running = rep.running_c9()
    rows = [(row.b, row.n_b, row.spectral_radius, row.factor, c9, row.mu_U, row.gap)
            for row, c9 in zip(rep.rows, running)]
    notes = [f"C9: {fmt(rep.c9)}", f"C10: {fmt(rep.c10)}", f"C11: {fmt(rep.c11)}",
             f"C16: {fmt(rep.c16)}", f"C18: {fmt(rep.c18)}"]
    return "csv", (["b", "n_b", "spectral_radius", "factor", "fitted_C9_running", "mu_U", "gap"], rows), notes


def cmd_cancel(args):
    from .diophantine import four_point_certificate
    from .dolgopyat import cancellation_search, make_context
    from .errors import NoWitness, PreconditionUnmet
    from .shift import CylinderFunction, format_word
    from .suspension import temporal_range

    system = _system(args)
    roof = _roof(args, system)
    _, phi_p = _normalized(args, system)
    witness = None
    table = temporal_range(system, roof, window=args.window)
    if any(v != 0 for v in table.values):
        try:
            witness = four_point_certificate(system, roof, args.b, table=table)
        except (NoWitness, PreconditionUnmet):
            witness = None
    one = CylinderFunction.constant(system, 1.0)
    pair = cancellation_search(system, phi_p, roof, one, args.b, c13=args.c13,
                               ctx=make_context(phi_p, roof, args.b), witness=witness, seed=args.seed)
    n = system.n_symbols
    rows = [("b", args.b), ("n_b", pair.n_b), ("gap", pair.gap), ("method", pair.method),
            ("x", format_word(pair.x, n)), ("y1", format_word(pair.y1, n)), ("y2", format_word(pair.y2, n))]
    return "csv", (["quantity", "value"], rows), []


def cmd_correlate(args):
    from .mixing import Observable, correlation, standard_observable

    system = _system(args)
    roof = _roof(args, system)
    gibbs, _ = _normalized(args, system)
    E = Observable.from_json(system, _read_json(args.observable)) if args.observable else standard_observable(system)
    F = Observable.from_json(system, _read_json(args.observable_f)) if args.observable_f else E
    if args.t_points < 1 or args.t_max < 0:
        raise ValidationError("need t-max >= 0 and t-points >= 1")
    t_grid = np.linspace(0.0, args.t_max, args.t_points)
    kw = {"samples": args.samples, "seed": args.seed, "threads": args.threads} if args.method == "montecarlo" else {}
    series = correlation(E, F, t_grid, gibbs, roof, method=args.method, **kw)
    return "csv", (["t", "rho_real", "rho_imag", "stderr"], list(series.rows())), \
        [f"estimator: {series.estimator}", f"samples: {series.samples}"]


def cmd_fit_decay(args):
    from .mixing import CorrelationSeries, decay_fit

    if not args.input:
        raise ValidationError("fit-decay needs --input (a correlate CSV)")
    try:
        lines = [ln for ln in Path(args.input).read_text().splitlines() if not ln.startswith("#")]
    except FileNotFoundError as exc:
        raise ValidationError(f"input file not found: {args.input}") from exc
    reader = csv.DictReader(lines)
    try:
        recs = [(float(r["t"]), complex(float(r["rho_real"]), float(r["rho_imag"])), float(r["stderr"]))
                for r in reader]
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"malformed correlation CSV: {exc}") from exc
    t, rho, se = (np.array(v) for v in zip(*recs)) if recs else ([], [], [])
    series = CorrelationSeries(t, rho, se, "file")
    fit = decay_fit(series, args.t_min, args.t_max)
    rows = [("exponent", fit.exponent), ("intercept", fit.intercept), ("t_below_floor", fit.t_below_floor),
            ("n_points", fit.n_points), ("flag", fit.flag),
            ("early_exponent", fit.early_exponent), ("late_exponent", fit.late_exponent)]
    return "csv", (["quantity", "value"], rows), []


def cmd_count_orbits(args):
    from .orbits import enumerate_prime_orbits
    from .shift import format_word

    system = _system(args)
    roof = _roof(args, system)
    recs = enumerate_prime_orbits(system, roof, args.T, threads=args.threads)
    return "csv", (["n", "word", "period"],
                   [(rec.n, format_word(rec.word, system.n_symbols), rec.period) for rec in recs]), \
        [f"count: {len(recs)}"]


def cmd_pot(args):
    from .orbits import pot_deviation

    system = _system(args)
    roof = _roof(args, system)
    rep = pot_deviation(system, roof, _floats(args.T_grid), threads=args.threads, window=args.window)
    rows = [(c.T, c.count, c.li_value, c.deviation, c.ratio, c.scaled_deviation) for c in rep.censuses]
    return "csv", (["T", "count", "li", "deviation", "ratio", "scaled_deviation"], rows), \
        [f"entropy: {fmt(rep.entropy)}", f"fit_C: {fmt(rep.C)}", f"fit_delta: {fmt(rep.delta)}"]


COMMANDS = {
    "spectrum": cmd_spectrum, "temporal-range": cmd_temporal_range, "make-roof": cmd_make_roof,
    "diophantine": cmd_diophantine, "certify": cmd_certify, "contraction": cmd_contraction,
    "cancel": cmd_cancel, "correlate": cmd_correlate, "fit-decay": cmd_fit_decay,
    "count-orbits": cmd_count_orbits, "pot": cmd_pot,
}

# (flag, dest, type, default) per command; defaults may be overridden by a config file
OPTIONS = {
    "spectrum": [("--potential", str, None), ("--depth", int, None)],
    "temporal-range": [("--roof", str, None), ("--window", int, None), ("--rectangles", int, 0)],
    "make-roof": [("--alpha", float, 1.0), ("--beta", float, (1 + 5 ** 0.5) / 2), ("--depth", int, 6),
                  ("--base", str, None)],
    "diophantine": [("--theta", float, (5 ** 0.5 - 1) / 2), ("--Q", int, 10_000),
                    ("--alpha", float, None), ("--beta", float, None), ("--b-min", float, 10.0),
                    ("--b-max", float, 1e4), ("--points", int, 64)],
    "certify": [("--roof", str, None), ("--b-min", float, 10.0), ("--b-max", float, 1e4),
                ("--points", int, 64), ("--window", int, None), ("--Q", int, 10_000)],
    "contraction": [("--roof", str, None), ("--potential", str, None), ("--b-min", float, 10.0),
                    ("--b-max", float, 1e4), ("--points", int, 64), ("--depth", int, 10),
                    ("--c13", float, 4.0), ("--c10", float, None), ("--window", int, None)],
    "cancel": [("--roof", str, None), ("--potential", str, None), ("--b", float, 100.0),
               ("--c13", float, 4.0), ("--window", int, None)],
    "correlate": [("--roof", str, None), ("--potential", str, None), ("--observable", str, None),
                  ("--observable-f", str, None), ("--t-max", float, 40.0), ("--t-points", int, 81),
                  ("--method", str, "montecarlo"), ("--samples", int, 10 ** 6)],
    "fit-decay": [("--input", str, None), ("--t-min", float, None), ("--t-max", float, None)],
    "count-orbits": [("--roof", str, None), ("--T", float, 10.0)],
    "pot": [("--roof", str, None), ("--T-grid", str, "8,10,12,14,16"), ("--window", int, None)],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tempomix", description="Suspension-flow mixing laboratory.")
    parser.add_argument("--version", action="version", version=f"tempomix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config: file paths, 'params' block, 'seed', 'output_dir'")
        p.add_argument("--system", default=None, help="system JSON (default: full 2-shift)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output path (default: stdout)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: $TEMPOMIX_THREADS, else all cores)")
        p.add_argument("--check", action="store_true",
                       help="verify the provenance header of --out against the current inputs")
        for flag, typ, _ in OPTIONS[name]:
            p.add_argument(flag, type=typ, default=None)
    return parser


def resolve(args) -> argparse.Namespace:
    """Fill unset options from --config, then from built-in defaults."""
    cfg = _read_json(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    params = dict(cfg.get("params", {}))
    base = Path(args.config).parent if args.config else Path(".")
    for key in FILE_KEYS:
        if key in cfg and getattr(args, key, None) is None and hasattr(args, key):
            setattr(args, key, str(base / cfg[key]))
    for flag, typ, default in OPTIONS[args.command]:
        dest = flag.lstrip("-").replace("-", "_")
        if getattr(args, dest) is None:
            setattr(args, dest, typ(params[dest]) if dest in params and params[dest] is not None else default)
    if args.seed is None:
        args.seed = int(cfg.get("seed", 0))
    if args.out is None and cfg.get("output_dir"):
        ext = "json" if args.command == "make-roof" else "csv"
        args.out = str(base / cfg["output_dir"] / f"{args.command}.{ext}")
    if args.threads is None:
        from ._parallel import resolve_threads

        args.threads = resolve_threads(None)
    return args


def config_hash(args) -> str:
    """SHA-256 over the command, resolved parameters, seed and input-file contents."""
    params, inputs = {}, {}
    for key, val in sorted(vars(args).items()):
        if key in RUNTIME_KEYS:
            continue
        if key in FILE_KEYS:
            if val is not None:
                try:
                    inputs[key] = hashlib.sha256(Path(val).read_bytes()).hexdigest()
                except FileNotFoundError as exc:
                    raise ValidationError(f"input file not found: {val}") from exc
            continue
        params[key] = val
    doc = {"command": args.command, "params": params, "inputs": inputs, "version": __version__}
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=str).encode()).hexdigest()


def header(args, digest: str) -> dict:
    return {"tempomix": __version__, "command": args.command, "config_sha256": digest, "seed": args.seed}


def render(args, kind, payload, notes, digest) -> str:
    prov = header(args, digest)
    if kind == "json":
        doc = dict(payload)
        doc["provenance"] = prov
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    lines = [f"# {k}: {v}" for k, v in prov.items()] + [f"# {n}" for n in notes]
    return "\n".join(lines) + "\n" + _csv_text(*payload)


def read_provenance(path) -> dict:
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        return dict(json.loads(text).get("provenance", {}))
    prov = {}
    for line in text.splitlines():
        if not line.startswith("#"):
            break
        key, _, val = line[1:].strip().partition(": ")
        prov[key] = val
    return prov


def check(args, digest: str) -> dict:
    if not args.out or not Path(args.out).exists():
        raise ValidationError("--check needs an existing --out file")
    prov = read_provenance(args.out)
    expected = {k: str(v) for k, v in header(args, digest).items()}
    found = {k: str(prov.get(k)) for k in expected}
    if found != expected:
        raise ValidationError(f"provenance mismatch: expected {expected}, found {found}")
    return {"status": "ok", "file": args.out, "config_sha256": digest}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = resolve(args)
        digest = config_hash(args)
        if args.check:
            sys.stdout.write(json.dumps(check(args, digest)) + "\n")
            return 0
        kind, payload, notes = COMMANDS[args.command](args)
        text = render(args, kind, payload, notes, digest)
        if args.out:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0
    except TempomixError as exc:
        sys.stderr.write(json.dumps({**exc.to_record(), "exit_code": exc.exit_code}) + "\n")
        return exc.exit_code
    except (ValueError, KeyError, TypeError) as exc:
        rec = {"error": "ValidationError", "message": f"{type(exc).__name__}: {exc}", "exit_code": 2}
        sys.stderr.write(json.dumps(rec) + "\n")
        return 2


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
