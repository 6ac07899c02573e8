"""Command-line interface: verify, convert, prolong, certify, catalog.

Exit codes: 0 success, 1 axiom or precondition failure, 2 schema violation,
3 evaluation pole, 4 path dependence, 5 rank deficiency.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .abundant import AbundantStructure, verify_abundant
from .catalog import check_euler_unit, get_entry, list_entries
from .correspondence import (abundant_roundtrip, abundant_to_product, product_to_abundant,
                             roundtrip_check)
from .errors import (DomainError, IntegrabilityError, PoleError, PreconditionError,
                     RankDeficiencyError, SchemaError)
from .hamiltonics import superintegrability_certificate
from .paths import POLE_MARGIN
from .product import (ProductStructure, check_hessian_flatness, check_hessian_potential,
                      check_nabla_compat, check_trace_closed, check_wdvv)
from .prolongation import (ClosedFormKilling, integrate_basis, k_plugin_residual,
                           v_plugin_residual)
from .reports import DEFAULT_POINTS, DEFAULT_SEED, DEFAULT_TOL, sample_points

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_POLE, EXIT_PATH, EXIT_RANK = range(6)


def _threads():
    try:
        return max(1, int(os.environ.get("FROBSIA_THREADS", "1")))
    except ValueError:
        return 1


def _pool_map(funcs):
    """Run thunks on the worker pool; results keep submission order."""
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        return list(pool.map(lambda f: f(), funcs))


def _csv(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _basepoint(args, structure):
    if args.basepoint:
        b = np.array(_csv(args.basepoint))
        if b.shape != (structure.dim,):
            raise SchemaError(f"--basepoint needs {structure.dim} values")
        return b
    box = structure.domain
    ones = np.ones(structure.dim)
    if np.all(ones > box[:, 0] + POLE_MARGIN) and np.all(ones < box[:, 1] - POLE_MARGIN):
        return ones
    return box.mean(axis=1)


def _points(args, structure):
    return sample_points(structure.domain, args.points, args.seed, inset=POLE_MARGIN)


def _header(args, command):
    return {"command": command, "source": args.source, "seed": args.seed, "tol": args.tol,
            "points": args.points}


# commands


def _p2_with_basepoint(P, X, b, tol):
    r = check_nabla_compat(P, X, tol)
    r.details["residual_at_basepoint"] = check_nabla_compat(P, b[None], tol).residual
    return r


def cmd_verify(args):
    res = io.resolve(args.source)
    S = res.structure
    X = _points(args, S)
    out = _header(args, "verify")
    out["sample_points"] = X.tolist()
    tol = args.tol
    jobs = []
    products = []
    abundants = []
    if isinstance(S, ProductStructure):
        products.append(S)
        if res.entry is not None and res.entry.abundant is not None:
            abundants.append(res.entry.abundant)
    else:
        abundants.append(S)
    for P in products:
        b = _basepoint(args, P)
        out["basepoint"] = b.tolist()
        jobs += [lambda P=P: check_wdvv(P, X, tol), lambda P=P, b=b: _p2_with_basepoint(P, X, b, tol),
                 lambda P=P: check_trace_closed(P, X, tol),
                 lambda P=P: check_hessian_flatness(P, X, tol, 1),
                 lambda P=P: check_hessian_flatness(P, X, tol, -1),
                 lambda P=P, b=b: check_hessian_potential(P, b, X, tol)]
    if res.entry is not None and res.entry.euler is not None:
        jobs.append(lambda: check_euler_unit(res.entry, X, max(tol, 1e-12)))
    for A in abundants:
        jobs.append(lambda A=A: verify_abundant(A, X, tol))
    reports = []
    for r in _pool_map(jobs):
        reports.extend(r if isinstance(r, list) else [r])
    out["reports"] = [r.to_dict(with_points=False) for r in reports]
    out["pass"] = all(r.passed for r in reports)
    return out, EXIT_OK if out["pass"] else EXIT_FAIL


def cmd_convert(args):
    want = args.to
    res = io.resolve(args.source, which="abundant" if want == "product" else None)
    S = res.structure
    out = _header(args, "convert")
    if want == "abundant":
        if not isinstance(S, ProductStructure):
            raise SchemaError("convert --to abundant needs a product structure")
        b = _basepoint(args, S)
        X = _points(args, S)
        conv = product_to_abundant(S, b, X, args.tol, force=args.force, seed=args.seed)
        new = conv.structure
        out.update(basepoint=b.tolist(), t_gauge=conv.t_gauge, closed_form_t=conv.closed_form_t,
                   diagnostics=conv.diagnostics)
        if args.roundtrip:
            out["roundtrip"] = roundtrip_check(S, b, X, args.tol, args.seed).to_dict(False)
        structure = io.structure_to_dict(new, None if conv.closed_form_t else X[:10])
    else:
        if not isinstance(S, AbundantStructure):
            raise SchemaError("convert --to product needs an abundant structure")
        X = _points(args, S)
        reps = verify_abundant(S, X, args.tol)
        out["preconditions"] = {r.axiom: r.residual for r in reps}
        if not args.force and not all(r.passed for r in reps):
            raise PreconditionError("abundant structure fails its axioms (use --force)", reps)
        new = abundant_to_product(S, check=False)
        new.meta["axioms_ok"] = all(r.passed for r in reps)
        out["axioms_ok"] = new.meta["axioms_ok"]
        if args.roundtrip:
            b = _basepoint(args, S)
            out["basepoint"] = b.tolist()
            out["roundtrip"] = abundant_roundtrip(S, b, X, 1e-8, args.seed).to_dict(False)
        structure = io.structure_to_dict(new)
    if args.out:
        Path(args.out).write_text(io.dumps(structure))
        out["written"] = args.out
    else:
        out["structure"] = structure
    out["pass"] = True
    if args.roundtrip:
        out["pass"] = bool(out["roundtrip"]["pass"])
    return out, EXIT_OK if out["pass"] else EXIT_FAIL


def _abundant_for(args):
    res = io.resolve(args.source, which="abundant" if args.source.startswith("catalog:") else None)
    S = res.structure
    converted = False
    if isinstance(S, ProductStructure):
        S = product_to_abundant(S, _basepoint(args, S), tol=args.tol, force=args.force,
                                seed=args.seed).structure
        converted = True
    X = _points(args, S)
    reps = verify_abundant(S, X, args.tol)
    pre = {r.axiom: r.residual for r in reps}
    if not args.force and not all(r.passed for r in reps):
        raise PreconditionError("abundant structure fails its axioms (use --force)", reps)
    return res, S, pre, converted


def cmd_prolong(args):
    res, A, pre, converted = _abundant_for(args)
    b = _basepoint(args, A)
    targets = sample_points(A.domain, args.points, args.seed, shrink=0.1, inset=POLE_MARGIN)
    basis = integrate_basis(A, b, targets, args.which)
    out = _header(args, "prolong")
    out.update(basis.to_dict())
    out["preconditions"] = pre
    out["converted_from_product"] = converted
    out["expected_rank"] = A.dim + 2 if args.which == "V" else A.dim * (A.dim + 1) // 2
    entry = res.entry
    if entry is not None and entry.v_basis is not None:
        if args.which == "V":
            out["plugin"] = [{"V": str(v), "residual": v_plugin_residual(A, v, targets).residual}
                             for v in entry.v_basis]
        else:
            out["plugin"] = [{"K": [[str(e) for e in row] for row in K],
                              "residual": k_plugin_residual(A, ClosedFormKilling(K),
                                                            targets).residual}
                             for K in entry.k_basis]
    out["pass"] = basis.rank == out["expected_rank"]
    return out, EXIT_OK if out["pass"] else EXIT_FAIL


def cmd_certify(args):
    res, A, pre, _ = _abundant_for(args)
    if not args.coeffs:
        raise SchemaError("certify needs --coeffs")
    b = _basepoint(args, A)
    v_basis = res.entry.v_basis if res.entry is not None else None
    cert = superintegrability_certificate(A, _csv(args.coeffs), b, v_basis=v_basis,
                                          seed=args.seed)
    out = _header(args, "certify")
    out["preconditions"] = pre
    out["basepoint"] = b.tolist()
    out["certificate"] = cert
    out["pass"] = cert["pass"]
    return out, EXIT_OK if out["pass"] else EXIT_FAIL


def cmd_catalog(args):
    if args.action == "list":
        return {"command": "catalog list", "entries": list_entries()}, EXIT_OK
    if not args.name:
        raise SchemaError("catalog export needs an entry name")
    entry = get_entry(args.name)
    S = entry.abundant if args.kind == "abundant" else entry.product
    if S is None:
        raise SchemaError(f"catalog entry {entry.name} has no {args.kind} structure")
    structure = io.structure_to_dict(S)
    out = {"command": "catalog export", "name": entry.name, "kind": args.kind}
    if args.out:
        Path(args.out).write_text(io.dumps(structure))
        out["written"] = args.out
    else:
        out["structure"] = structure
    return out, EXIT_OK


# rendering


def render_text(out):
    lines = []
    for key in ("command", "source", "seed", "tol", "points"):
        if key in out:
            lines.append(f"{key:<12} {out[key]}")
    for r in out.get("reports", []):
        status = "PASS" if r["pass"] else "FAIL"
        lines.append(f"{r['axiom']:<20} {r['residual']:>12.3e}  tol {r['tol']:.1e}  {status}")
        for k, v in sorted(r.get("details", {}).items()):
            val = f"{v:.3e}" if isinstance(v, float) else v
            lines.append(f"  {k:<28} {val}")
    if "entries" in out:
        lines.extend(out["entries"])
    for key in ("which", "rank", "expected_rank", "path_residual", "closed_form_t", "written"):
        if key in out:
            lines.append(f"{key:<12} {out[key]}")
    if "roundtrip" in out:
        lines.append(f"roundtrip    {out['roundtrip']['residual']:.3e}")
    for p in out.get("plugin", []):
        label = p.get("V", "K")
        lines.append(f"plugin {str(label)[:40]:<40} {p['residual']:.3e}")
    cert = out.get("certificate")
    if cert:
        for key in ("bracket_max", "rank", "drift", "time_reversal"):
            lines.append(f"{key:<14} {cert[key]}")
        lines.append("integrals     " + ", ".join(i["label"] for i in cert["integrals"]))
    if "structure" in out and "reports" not in out:
        lines.append(io.dumps(out["structure"]).rstrip())
    if "error" in out:
        lines.append(f"error        {out['error']}")
    if "pass" in out:
        lines.append(f"RESULT       {'PASS' if out['pass'] else 'FAIL'}")
    return "\n".join(lines) + "\n"


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--points", type=int, help=f"sample count (default {DEFAULT_POINTS}, "
                        "10 targets for prolong)")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--format", choices=["text", "json"], default="text")
    common.add_argument("--out", help="write the main artifact here")
    common.add_argument("--basepoint", help="comma-separated basepoint")
    common.add_argument("--force", action="store_true", help="skip precondition refusal")
    common.add_argument("--dim", type=int, help="dimension for 'catalog list'")

    ap = argparse.ArgumentParser(prog="frobsia", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("verify", parents=[common], help="run the axiom suites")
    p.add_argument("source")
    p = sub.add_parser("convert", parents=[common], help="apply a correspondence map")
    p.add_argument("source")
    p.add_argument("--to", choices=["product", "abundant"], required=True)
    p.add_argument("--roundtrip", action="store_true")
    p = sub.add_parser("prolong", parents=[common], help="integrate the V or K system")
    p.add_argument("source")
    p.add_argument("--which", choices=["V", "K"], default="V")
    p = sub.add_parser("certify", parents=[common], help="superintegrability certificate")
    p.add_argument("source")
    p.add_argument("--coeffs", help="comma-separated potential coefficients over the V basis")
    p = sub.add_parser("catalog", parents=[common], help="list or export built-in structures")
    p.add_argument("action", choices=["list", "export"])
    p.add_argument("name", nargs="?")
    p.add_argument("--kind", choices=["product", "abundant"], default="product")
    return ap


COMMANDS = {"verify": cmd_verify, "convert": cmd_convert, "prolong": cmd_prolong,
            "certify": cmd_certify, "catalog": cmd_catalog}


def run(argv=None):
    """Parse, dispatch and map exceptions to exit codes; returns (report, code)."""
    args = build_parser().parse_args(argv)
    if args.points is None:
        args.points = 10 if args.command == "prolong" else DEFAULT_POINTS
    if args.command == "catalog" and args.action == "list" and args.dim:
        return {"command": "catalog list", "entries": list_entries((args.dim,))}, EXIT_OK, args
    errors = [(SchemaError, EXIT_SCHEMA), (PoleError, EXIT_POLE),
              (IntegrabilityError, EXIT_PATH), (RankDeficiencyError, EXIT_RANK),
              (PreconditionError, EXIT_FAIL), (DomainError, EXIT_FAIL), (KeyError, EXIT_SCHEMA),
              (FileNotFoundError, EXIT_SCHEMA), (ValueError, EXIT_SCHEMA)]
    try:
        out, code = COMMANDS[args.command](args)
    except tuple(e for e, _ in errors) as exc:
        code = next(c for e, c in errors if isinstance(exc, e))
        out = {"command": args.command, "source": getattr(args, "source", None),
               "seed": args.seed, "error": f"{type(exc).__name__}: {exc}", "pass": False}
        if isinstance(exc, PreconditionError):
            out["reports"] = [r.to_dict(with_points=False) for r in exc.reports]
        if isinstance(exc, (IntegrabilityError, RankDeficiencyError)):
            out["diagnostic"] = getattr(exc, "residual", None) or getattr(exc, "rank", None)
    out["exit_code"] = code
    return out, code, args


def main(argv=None):
    out, code, args = run(argv)
    text = io.dumps(out) if args.format == "json" else render_text(out)
    try:
        sys.stdout.write(text)
        sys.stdout.flush()
    except BrokenPipeError:
        pass
    return code


if __name__ == "__main__":
    sys.exit(main())
