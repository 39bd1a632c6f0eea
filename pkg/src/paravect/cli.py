"""Command-line front end.

Exit status: 0 when every check passes, 1 when any check fails, 2 on bad
input or configuration.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, circuits, lawcheck, positional
from .files import (
    FormatError,
    dumps,
    load_model,
    load_table,
    matrix_to_json,
    read_json,
    save_model,
    table_from_json,
    table_to_json,
    write_json,
)
from .report import CheckResult

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2

DIM_KEYS = {"d": "d", "dk": "d_k", "d_k": "d_k", "dv": "d_v", "d_v": "d_v", "n": "n",
            "a": "a_dim", "a_dim": "a_dim", "x": "x_dim", "x_dim": "x_dim"}


class UsageError(Exception):
    pass


def parse_dims(text: str) -> dict[str, int]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        key, sep, val = part.partition("=")
        if not sep or key.strip() not in DIM_KEYS:
            raise UsageError(f"--dims: cannot parse {part!r} (keys: d, dk, dv, n, a, x)")
        try:
            v = int(val)
        except ValueError:
            raise UsageError(f"--dims: {key} must be an integer, got {val!r}") from None
        if v < 1:
            raise UsageError(f"--dims: {key} must be positive")
        out[DIM_KEYS[key.strip()]] = v
    return out


def parse_tols(items: list[str]) -> dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"--tol expects name=value, got {item!r}")
        try:
            v = float(val)
        except ValueError:
            raise UsageError(f"--tol {name}: {val!r} is not a number") from None
        if not v > 0:
            raise UsageError(f"--tol {name}: tolerance must be positive")
        out[name] = v
    return out


def make_report(command: str, config: dict, checks: list[CheckResult], extra: dict | None = None) -> dict:
    report = {
        "tool_version": __version__,
        "command": command,
        "config": config,
        "passed": all(c.passed for c in checks),
        "checks": [c.to_json() for c in checks],
    }
    if extra:
        report.update(extra)
    return report


def emit(report: dict, out: str | None) -> None:
    text = dumps(report) + "\n"
    if out and out != "-":
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _exit_code(report: dict) -> int:
    return EXIT_OK if report["passed"] else EXIT_FAIL


# --- subcommands -------------------------------------------------------------


def cmd_lawcheck(args) -> int:
    dims = parse_dims(args.dims) if args.dims else {}
    if args.depth is not None:
        dims["depth"] = args.depth
    cfg = lawcheck.SuiteConfig(seed=args.seed, trials=args.trials, tolerances=parse_tols(args.tol), **dims)
    try:
        results = lawcheck.run_suite(cfg)
    except KeyError as exc:
        raise UsageError(str(exc.args[0])) from None
    config = {
        "seed": cfg.seed, "trials": cfg.trials,
        "dims": {"d": cfg.d, "d_k": cfg.d_k, "d_v": cfg.d_v, "n": cfg.n, "a_dim": cfg.a_dim, "x_dim": cfg.x_dim},
        "depth": cfg.depth, "tolerances": cfg.tolerances,
    }
    report = make_report("lawcheck", config, results)
    emit(report, args.out)
    for r in results:
        if not r.passed:
            print(f"FAIL {r.name}: residual {r.residual:.3e} > tolerance {r.tolerance:.3e}", file=sys.stderr)
    return _exit_code(report)


def _encoding_from_args(kind: str, dim: int, base_freq: float, base: str | None):
    if kind == "sinusoidal":
        return positional.SinusoidalEncoding(dim, base_freq)
    if kind == "additive":
        if base:
            vec = [float(v) for v in base.split(",")]
            if len(vec) != dim:
                raise UsageError(f"--base has {len(vec)} entries, expected --dim={dim}")
        else:
            vec = [1.0] + [0.0] * (dim - 1)
        return positional.AdditiveEncoding(vec)
    raise UsageError(f"unknown encoding kind {kind!r}")


def cmd_encode(args) -> int:
    if args.dim < 1:
        raise UsageError("--dim must be positive")
    if args.kind == "sinusoidal" and args.dim % 2:
        raise UsageError(f"--dim must be even for sinusoidal encodings, got {args.dim}")
    if args.positions < 1:
        raise UsageError("--positions must be positive")
    try:
        enc = _encoding_from_args(args.kind, args.dim, args.base_freq, args.base)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    table = enc.table(args.positions)
    meta = {"base_freq": args.base_freq} if args.kind == "sinusoidal" else {"base": enc.base.tolist()}
    write_json(args.table, table_to_json(table, args.kind, **meta))

    checks = []
    if args.positions >= 2:
        t0 = time.perf_counter()
        r = positional.check_injectivity(enc, args.positions)
        r.elapsed_seconds = time.perf_counter() - t0
        checks.append(r)
    if args.kind == "sinusoidal":
        t0 = time.perf_counter()
        max_m = max(1, min(16, (args.positions - 1) // 2))
        w = positional.nonadditivity_witness(enc, max_m)
        defect = 0.0 if w is None else w[2]
        checks.append(CheckResult(
            "positional.nonadditivity_witness", w is not None, defect, 1e-12,
            None if w is None else {"m": w[0], "m_prime": w[1], "defect": w[2]},
            {"max_m": max_m}, time.perf_counter() - t0,
        ))
    else:
        t0 = time.perf_counter()
        r = positional.check_action_laws(enc, min(64, args.positions))
        r.elapsed_seconds = time.perf_counter() - t0
        checks.append(r)
    config = {"kind": args.kind, "dim": args.dim, "positions": args.positions,
              "base_freq": args.base_freq, "table": str(args.table)}
    report = make_report("encode", config, checks)
    emit(report, args.out)
    return _exit_code(report)


def cmd_circuits(args) -> int:
    model = load_model(args.weights)
    t0 = time.perf_counter()
    terms = circuits.expand_paths(model)
    paths = [
        {"route": [list(s) for s in t.layer_head_sequence], "frobenius_norm": t.flat_map.frobenius()}
        for t in terms
    ]
    checks = []
    for fn in (circuits.check_path_sum, circuits.circuits_as_para):
        t0 = time.perf_counter()
        r = fn(model)
        r.elapsed_seconds = time.perf_counter() - t0
        checks.append(r)
    ranks = circuits.circuit_ranks(model)
    excess = max([max(r["qk_rank"], r["ov_rank"]) - r["d_head"] for r in ranks], default=0)
    checks.append(CheckResult("circuits.rank_bounds", excess <= 0, float(max(excess, 0)), 0.0))
    config = {"weights": str(args.weights), "d_model": model.d_model, "d_vocab": model.d_vocab,
              "n": model.n, "heads_per_layer": [len(layer) for layer in model.layers]}
    report = make_report("circuits", config, checks, {"path_count": len(terms), "paths": paths,
                                                      "circuit_ranks": ranks})
    emit(report, args.out)
    return _exit_code(report)


def cmd_factor(args) -> int:
    if args.positions < 1:
        raise UsageError("--positions must be at least 1")
    if args.source_table:
        source = positional.ExternalEncoding(load_table(args.source_table))
        src_desc = {"table": str(args.source_table)}
    else:
        if args.dim is None:
            raise UsageError("factor needs --dim for a sinusoidal source (or --source-table)")
        try:
            source = positional.SinusoidalEncoding(args.dim, args.base_freq)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        src_desc = {"kind": "sinusoidal", "dim": args.dim, "base_freq": args.base_freq}
    target = positional.ExternalEncoding(load_table(args.target))
    for name, enc in (("source", source), ("target", target)):
        if isinstance(enc, positional.ExternalEncoding) and enc.length < args.positions:
            raise UsageError(f"{name} table has {enc.length} rows, fewer than --positions={args.positions}")
    t0 = time.perf_counter()
    fz = positional.factor_through(source, target, args.positions)
    tol = args.residual_tol
    check = CheckResult("positional.factor_through", fz.residual <= tol, fz.residual, tol, None,
                        {"rank": fz.rank, "unique": fz.unique}, time.perf_counter() - t0)
    config = {"source": src_desc, "target": str(args.target), "positions": args.positions}
    report = make_report("factor", config, [check], {
        "f": matrix_to_json(fz.f), "residual": fz.residual, "rank": fz.rank, "unique": fz.unique,
    })
    emit(report, args.out)
    return _exit_code(report)


def cmd_stack(args) -> int:
    dims = parse_dims(args.dims) if args.dims else {}
    a_dim, x_dim = dims.get("a_dim", 2), dims.get("x_dim", 2)
    results = lawcheck.run_stack_sweep(args.seed, args.trials, a_dim, x_dim, args.depth)
    config = {"seed": args.seed, "trials": args.trials, "a_dim": a_dim, "x_dim": x_dim, "max_depth": args.depth}
    report = make_report("stack", config, results)
    emit(report, args.out)
    return _exit_code(report)


def cmd_model(args) -> int:
    try:
        heads = [int(h) for h in args.heads.split(",") if h.strip()] if args.heads else []
    except ValueError:
        raise UsageError(f"--heads: expected comma-separated integers, got {args.heads!r}") from None
    rng = np.random.default_rng(args.seed)
    m = circuits.random_model(args.d_model, args.d_vocab, args.n, heads, args.d_head, rng)
    save_model(args.out, m)
    return EXIT_OK


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="paravect", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help="report path (default: stdout)"):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--trials", type=int, default=100)
        sp.add_argument("--out", default=None, help=out_help)
        sp.add_argument("--format", choices=["json"], default="json")

    lc = sub.add_parser("lawcheck", help="run the algebraic law suite")
    common(lc)
    lc.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                    help="override a check's tolerance (repeatable)")
    lc.add_argument("--dims", default=None, help="e.g. d=3,dk=2,dv=2,n=4,a=2,x=2")
    lc.add_argument("--depth", type=int, default=None, help="free-monad truncation depth (default 3)")
    lc.set_defaults(func=cmd_lawcheck)

    en = sub.add_parser("encode", help="write a positional-encoding table")
    en.add_argument("--kind", choices=["sinusoidal", "additive"], default="sinusoidal")
    en.add_argument("--dim", "-d", type=int, required=True)
    en.add_argument("--positions", "-N", type=int, required=True)
    en.add_argument("--base-freq", type=float, default=10000.0)
    en.add_argument("--base", default=None, help="additive generator, comma-separated")
    en.add_argument("--table", required=True, help="output table path")
    en.add_argument("--out", default=None, help="report path (default: stdout)")
    en.add_argument("--format", choices=["json"], default="json")
    en.set_defaults(func=cmd_encode)

    ci = sub.add_parser("circuits", help="path expansion and circuit statistics of a weight file")
    ci.add_argument("weights")
    ci.add_argument("--out", default=None)
    ci.add_argument("--format", choices=["json"], default="json")
    ci.set_defaults(func=cmd_circuits)

    fa = sub.add_parser("factor", help="factor a target encoding table through a source encoding")
    fa.add_argument("--source-table", default=None, help="source table file (default: sinusoidal)")
    fa.add_argument("--dim", "-d", type=int, default=None, help="sinusoidal source dimension")
    fa.add_argument("--base-freq", type=float, default=10000.0)
    fa.add_argument("--target", required=True)
    fa.add_argument("--positions", "-N", type=int, required=True)
    fa.add_argument("--residual-tol", type=float, default=1e-10)
    fa.add_argument("--out", default=None)
    fa.add_argument("--format", choices=["json"], default="json")
    fa.set_defaults(func=cmd_factor)

    st = sub.add_parser("stack", help="free-monad law residuals for each depth up to --depth")
    common(st)
    st.set_defaults(trials=20)
    st.add_argument("--depth", type=int, default=3)
    st.add_argument("--dims", default=None, help="a=..,x=..")
    st.set_defaults(func=cmd_stack)

    mo = sub.add_parser("model", help="write a random toy-model weight file")
    mo.add_argument("--seed", type=int, default=0)
    mo.add_argument("--d-model", type=int, default=4)
    mo.add_argument("--d-vocab", type=int, default=5)
    mo.add_argument("--d-head", type=int, default=2)
    mo.add_argument("--n", type=int, default=3)
    mo.add_argument("--heads", default="1", help="heads per layer, comma-separated ('' for none)")
    mo.add_argument("--out", required=True)
    mo.set_defaults(func=cmd_model)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if getattr(args, "trials", 1) < 1:
        print("error: --trials must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "depth", None) is not None and args.depth < 0:
        print("error: --depth must be nonnegative", file=sys.stderr)
        return EXIT_INPUT
    if getattr(args, "seed", 0) < 0 or getattr(args, "seed", 0) >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (UsageError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
