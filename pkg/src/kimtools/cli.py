"""The ``kim`` command line.

Every report starts with a ``#`` header that echoes the command with its
full flag set, followed by a SHA-256 digest of the inputs.  Any run can
therefore be reproduced from its own output.  A successful run exits with
0.  Domain errors exit with 1 after printing the error name; usage errors
exit with 2.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from . import cohomdim, criteria, formalgroup, intersect, liecore, transport
from .connection import (build_S_chain, build_universal, chart_from_json, connection_from_json, is_flat,
                         reduce_to_reduced_form, universal_form_space)
from .errors import KimError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: D401 - argparse hook
        raise UsageError(message)


def _read_json(path: str) -> tuple[Any, bytes]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(raw), raw
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc.msg}") from exc


def _chart(name: str):
    try:
        if name.strip().startswith("{"):
            return chart_from_json(json.loads(name))
        return chart_from_json(name)
    except (ValueError, json.JSONDecodeError) as exc:
        raise UsageError(str(exc)) from exc


def _fraction_list(text: str) -> list[Fraction]:
    try:
        return [Fraction(x) for x in text.split(",")]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad rational list {text!r}") from exc


# ---------------------------------------------------------------------------
# subcommand handlers return (json-able result, text lines)


def _lie_spec(args) -> liecore.LieAlgebraSpec:
    if args.spec:
        data, _ = _read_json(args.spec)
        return liecore.LieAlgebraSpec.from_json(data)
    if args.gens is None or args.nclass is None:
        raise UsageError("give --spec or both --gens and --class")
    try:
        if args.quotient == "surface":
            genus = args.genus if args.genus is not None else args.gens // 2
            return liecore.LieAlgebraSpec(args.gens, args.nclass, "surface", genus=genus, metabelian=args.metabelian)
        return liecore.LieAlgebraSpec(args.gens, args.nclass, args.quotient, metabelian=args.metabelian)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_lie(args):
    spec = _lie_spec(args)
    if args.action == "dims":
        dims = liecore.graded_dims(spec)
        return {"spec": spec.to_json(), "dims": dims}, [" ".join(map(str, dims))]
    if args.action == "basis":
        hb = liecore.hall_basis(spec)
        return {"spec": spec.to_json(), "basis": hb.labels, "degrees": hb.degrees}, \
            [f"{d}  {lab}" for d, lab in zip(hb.degrees, hb.labels)]
    if args.action == "ihara":
        rows = liecore.ihara_module_check(spec)
        data = [{"degree": r.degree, "syzygy": r.syzygy_dim, "correction": r.correction,
                 "expected": r.expected, "lie_dim": r.lie_dim, "match": r.match} for r in rows]
        lines = ["degree  syzygy  correction  expected  lie_dim  match"]
        lines += [f"{r.degree:>6}  {r.syzygy_dim:>6}  {r.correction:>10}  {r.expected:>8}  {r.lie_dim:>7}  "
                  f"{str(r.match).lower()}" for r in rows]
        return {"rows": data}, lines
    if args.action == "injectivity":
        v = _fraction_list(args.vector) if args.vector else [Fraction(1)] + [Fraction(0)] * (spec.generators - 1)
        degrees = range(1, spec.nilpotency_class)
        rep = liecore.ad_injectivity_check(spec, v, degrees)
        data = {"degrees": rep.degrees, "ranks": rep.ranks, "source_dims": rep.source_dims,
                "all_injective": rep.all_injective}
        return data, [f"degree {d}: rank {r} of {s}" for d, r, s in zip(rep.degrees, rep.ranks, rep.source_dims)] + \
            [f"injective: {str(rep.all_injective).lower()}"]
    raise UsageError(f"unknown lie action {args.action}")


def cmd_connection(args):
    if args.action == "universal":
        u = build_universal(_chart(args.chart), args.depth)
        flat = is_flat(u.connection)
        from .connection import certify
        cert = certify(u.connection, u.chain).certified
        data = {"chart": list(u.space.chart), "depth": u.depth, "blocks": u.connection.blocks,
                "omega": [n for _, n in u.omega], "flat": flat, "reduced": cert}
        if args.full:
            data["connection"] = u.connection.to_json()
        lines = [f"blocks {' '.join(map(str, u.connection.blocks))}", f"flat {str(flat).lower()}",
                 f"reduced {str(cert).lower()}"]
        return data, lines
    if args.action == "reduce":
        if not args.file:
            raise UsageError("reduce needs an input file")
        data, _ = _read_json(args.file)
        chart = chart_from_json(data.get("chart", "p1-three"))
        space, groups = universal_form_space(chart)
        s1 = data.get("s1") or [n for g in groups for n in g]
        chain = build_S_chain(space, [{n: Fraction(1)} for n in s1], len(data["blocks"]) - 1)
        conn = connection_from_json(space, data)
        report, gauge = reduce_to_reduced_form(conn, chain)
        out = {"reduced": report.connection.to_json(), "gauge": gauge.to_json(), "certified": report.certified}
        return out, [json.dumps(out["reduced"], sort_keys=True), f"certified {str(report.certified).lower()}"]
    raise UsageError(f"unknown connection action {args.action}")


def _base(text: str | None, chart: Sequence[str]) -> list[Fraction]:
    if text is None:
        return [Fraction(1, 2)] * len(chart)
    vals = _fraction_list(text)
    if len(vals) != len(chart):
        raise UsageError(f"base needs {len(chart)} coordinates")
    return vals


def cmd_transport(args):
    u = build_universal(_chart(args.chart), args.depth)
    base = _base(args.base, u.space.chart)
    hlog = transport.solve_J(u, base, args.order)
    labels = liecore.hall_basis(u.spec).labels
    if args.action == "solve":
        data = {"base": [str(b) for b in base], "order": args.order,
                "J": {labels[i]: hlog.coordinate(i).to_text() for i in range(u.algebra.dim)}}
        return data, [f"{labels[i]}: {hlog.coordinate(i)}" for i in range(u.algebra.dim)]
    if args.action == "verify":
        system = transport.compute_theta(u)
        res = {
            "horizontality": transport.horizontality_residual(hlog),
            "grouplike": transport.verify_grouplike(hlog),
            "theta_identity": transport.nonzero_coefficients(transport.verify_theta_identity(system)),
            "pullback": transport.nonzero_coefficients(transport.pullback_theta(system, hlog)),
        }
        return res, [f"{k} {v}" for k, v in res.items()]
    raise UsageError(f"unknown transport action {args.action}")


def cmd_intersect(args):
    if args.action == "demo":
        if args.target != "p1-cross":
            raise UsageError(f"unknown demo {args.target}")
        a, b = intersect.p1_cross_forms()
        locus = intersect.colinearity_locus([(a, b)])
        eq = intersect.colinearity_equation(a, b)
        data = {"forms": [str(a), str(b)], "kind": locus.kind, "locus": locus.texts(), "equation": eq}
        return data, [f"locus {'; '.join(locus.texts())}", f"equation {eq}"]
    if args.action == "analyze":
        if not args.target:
            raise UsageError("analyze needs an input file")
        data, _ = _read_json(args.target)
        u = build_universal(chart_from_json(data.get("chart", "p1-three")), int(data.get("depth", 1)))
        V = intersect.FormalSubvariety.from_strings(
            data.get("params", []), data["parameterization"], data.get("base"),
            data.get("equations", []), ambient=transport.lie_coordinate_names(u.algebra) + u.space.chart)
        rep = intersect.unlikely_report(V, u, int(data.get("order", args.order)))
        out = rep.to_json()
        lines = [f"{k} {v}" for k, v in out.items() if k not in ("relations", "certificate")]
        if rep.certificate is not None:
            lines.append(f"certificate {rep.certificate.kind}")
        return out, lines
    raise UsageError(f"unknown intersect action {args.action}")


def cmd_cohom(args):
    data, _ = _read_json(args.file)
    if args.action == "euler":
        reps = data if isinstance(data, list) else [data]
        vals = [cohomdim.euler_h1(cohomdim.RepDescriptor.from_json(r)) for r in reps]
        return {"h1": vals}, [" ".join(map(str, vals))]
    if args.action == "ledger":
        graded = [(int(row["degree"]), cohomdim.RepDescriptor.from_json(row)) for row in data["degrees"]]
        ledger = cohomdim.h1_ledger(graded, bool(data.get("twisted", True)))
        return ledger.to_json(), ledger.to_text().splitlines()
    if args.action == "intersect":
        rep = cohomdim.intersection_codim(cohomdim.SubspaceData.from_json(data))
        out = rep.__dict__
        return out, [f"intersection {rep.dim_intersection}", f"codim {rep.codim_in_first}"]
    raise UsageError(f"unknown cohom action {args.action}")


def cmd_criteria(args):
    path = args.file
    if not Path(path).exists() and Path(path).name == path.split("/")[-1]:
        candidate = criteria.fixture_path(Path(path).name)
        if candidate.exists():
            path = str(candidate)
            args.file = path  # so the digest covers the bytes actually read
    raw, _ = _read_json(path)
    curve = criteria.CurveData.from_json(raw)
    names = [args.criterion] if args.criterion else ["depth1", "siksek"]
    results = {n: criteria.run_criterion(n, curve, raw) for n in names}
    lines = []
    for n, r in results.items():
        if n == "siksek":
            lines.append(f"siksek: {r['summary']}")
        elif "verdict" in r:
            lines.append(f"{n}: bound {r['bound']}, verdict {r['verdict']}")
        else:
            lines.append(f"{n}: {json.dumps(r, sort_keys=True)}")
    return results, lines


def cmd_formalgroup(args):
    try:
        curve = formalgroup.WeierstrassCurve.from_string(args.curve)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    log = formalgroup.formal_log(curve, args.order)
    if args.action == "log":
        return {"curve": [str(c) for c in curve.coefficients], "order": args.order,
                "log": log.to_text()}, [str(log)]
    if args.action == "exp":
        exp = formalgroup.formal_exp(log)
        return {"curve": [str(c) for c in curve.coefficients], "order": args.order,
                "exp": exp.to_text()}, [str(exp)]
    raise UsageError(f"unknown formalgroup action {args.action}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="kim", description="Exact computations for unipotent Chabauty-style finiteness.")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    lie = sub.add_parser("lie", help="graded nilpotent Lie algebras")
    lie.add_argument("action", choices=["dims", "basis", "ihara", "injectivity"])
    lie.add_argument("--gens", type=int)
    lie.add_argument("--class", dest="nclass", type=int)
    lie.add_argument("--quotient", default="free", choices=["free", "metabelian", "surface"])
    lie.add_argument("--genus", type=int)
    lie.add_argument("--metabelian", action="store_true")
    lie.add_argument("--spec", help="JSON spec file")
    lie.add_argument("--vector", help="comma separated degree-one coordinates")
    lie.set_defaults(handler=cmd_lie)

    con = sub.add_parser("connection", help="universal and reduced unipotent connections")
    con.add_argument("action", choices=["universal", "reduce"])
    con.add_argument("file", nargs="?")
    con.add_argument("--chart", default="p1-three")
    con.add_argument("--depth", type=int, default=2)
    con.add_argument("--full", action="store_true")
    con.set_defaults(handler=cmd_connection)

    tr = sub.add_parser("transport", help="horizontal sections and their identities")
    tr.add_argument("action", choices=["solve", "verify"])
    tr.add_argument("--chart", default="p1-three")
    tr.add_argument("--depth", type=int, default=1)
    tr.add_argument("--base")
    tr.add_argument("--order", type=int, default=8)
    tr.set_defaults(handler=cmd_transport)

    it = sub.add_parser("intersect", help="jet ranks and colinearity loci")
    it.add_argument("action", choices=["analyze", "demo"])
    it.add_argument("target", nargs="?")
    it.add_argument("--order", type=int, default=8)
    it.set_defaults(handler=cmd_intersect)

    co = sub.add_parser("cohom", help="Galois cohomology dimension ledgers")
    co.add_argument("action", choices=["euler", "ledger", "intersect"])
    co.add_argument("file")
    co.set_defaults(handler=cmd_cohom)

    cr = sub.add_parser("criteria", help="finiteness criteria audit")
    cr.add_argument("action", choices=["check"])
    cr.add_argument("file")
    cr.add_argument("--criterion", choices=list(criteria.CRITERIA))
    cr.set_defaults(handler=cmd_criteria)

    fg = sub.add_parser("formalgroup", help="formal logarithm and exponential")
    fg.add_argument("action", choices=["log", "exp"])
    fg.add_argument("--curve", required=True, help="a1,a2,a3,a4,a6")
    fg.add_argument("--order", type=int, default=formalgroup.DEFAULT_ORDER)
    fg.set_defaults(handler=cmd_formalgroup)
    return p


def _digest(argv: Sequence[str], args) -> str:
    h = hashlib.sha256()
    h.update("\0".join(argv).encode())
    for name in ("file", "spec", "target"):
        path = getattr(args, name, None)
        if path and Path(path).is_file():
            h.update(Path(path).read_bytes())
    return h.hexdigest()


def run(argv: Sequence[str] | None = None, out=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("missing subcommand")
        result, lines = args.handler(args)
    except UsageError as exc:
        print(f"kim: usage error: {exc}", file=sys.stderr)
        return 2
    except KimError as exc:
        print(f"kim: {exc.name}: {exc}", file=out)
        return 1
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("handler",)}
    digest = _digest(argv, args)
    if args.json:
        payload = {"command": argv, "flags": flags, "sha256": digest, "result": result}
        out.write(json.dumps(payload, sort_keys=True, default=str) + "\n")
    else:
        flag_text = " ".join(f"{k}={v}" for k, v in flags.items())
        out.write(f"# kim {' '.join(argv)}\n# flags: {flag_text}\n# sha256: {digest}\n")
        for line in lines:
            out.write(line + "\n")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
