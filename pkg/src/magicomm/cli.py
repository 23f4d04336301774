"""Command-line interface: ``magicomm <command> ...``.

Exit status is 0 on success with every bound check passing, 1 when a
verification or bound check fails, and 2 on usage or input errors.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from typing import Sequence

import numpy as np

from . import __version__
from .circuit import CircuitSyntaxError, load_circuit
from .gardenhose import (
    GardenHoseError,
    GardenHoseProtocol,
    brute_force_gh,
    evaluate,
    render_path,
    render_protocol,
    xor_compose,
)
from .pdt import InputSplit, compile_unitary, compile_with_postselection, verify_exhaustive
from .problems import (
    AbcdInstance,
    ForrelationInstance,
    abcd_accept_probability,
    equality_pipeline,
    index_pipeline,
    multiplexer_table,
)
from .psm import audit_privacy, load_spec, run_transcript, transform
from .validation import all_bitstrings

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _digest(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _bits(text: str | None, name: str) -> tuple[int, ...]:
    if text is None or text == "-":
        return ()
    if set(text) - {"0", "1"}:
        raise UsageError(f"--{name} must be a string of 0/1, got {text!r}")
    return tuple(int(c) for c in text)


def _load_circuit(path: str):
    try:
        return load_circuit(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _load_protocol(path: str) -> GardenHoseProtocol:
    try:
        with open(path, encoding="utf-8") as fh:
            return GardenHoseProtocol.from_json(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _compile(circuit, split, minimize):
    if any(g.kind == "measure" for g in circuit.gates):
        raise UsageError("circuits with mid-circuit measurements need the adaptive API")
    if any(g.kind == "postselect" for g in circuit.gates):
        return compile_with_postselection(circuit, split, minimize)
    return compile_unitary(circuit, split, minimize)


# -- commands ------------------------------------------------------------------


def cmd_compile_pdt(args) -> tuple[dict, bool]:
    circuit = _load_circuit(args.circuit)
    pdt = _compile(circuit, args.split, args.minimize)
    result = pdt.to_dict()
    return {"inputs": {"circuit": _digest(args.circuit)}, "result": result}, pdt.bounds_hold()


def cmd_verify(args) -> tuple[dict, bool]:
    circuit = _load_circuit(args.circuit)
    pdt = _compile(circuit, args.split, args.minimize)
    if args.exhaustive:
        inputs = list(all_bitstrings(circuit.n_input))
    else:
        rng = np.random.default_rng(np.random.SeedSequence(args.seed))
        rows = rng.integers(0, 2, size=(args.seeds, circuit.n_input))
        inputs = sorted({tuple(int(b) for b in r) for r in rows})
    report = verify_exhaustive(circuit, pdt, inputs)
    result = dict(report.to_dict(), exhaustive=args.exhaustive, bounds_hold=pdt.bounds_hold())
    return {"inputs": {"circuit": _digest(args.circuit)}, "result": result}, report.ok and pdt.bounds_hold()


def cmd_gh(args) -> tuple[dict, bool]:
    if args.gh_command == "eval":
        proto = _load_protocol(args.protocol)
        x, y = _bits(args.x, "x"), _bits(args.y, "y")
        ev = evaluate(proto, x, y)
        result = {
            "output": ev.output,
            "path": list(ev.path),
            "rendered": render_path(proto, x, y),
        }
        return {"inputs": {"protocol": _digest(args.protocol)}, "result": result}, True
    if args.gh_command == "compose":
        protos = [_load_protocol(p) for p in args.protocol]
        out = xor_compose(protos, args.c)
        bound = 4 * sum(p.pipes for p in protos) + 1
        tables = [p.truth_table().astype(int) for p in protos]
        want = (sum(tables) + args.c) % 2
        correct = bool(np.array_equal(out.truth_table(), want))
        result = {
            "protocol": out.to_dict(),
            "pipes": out.pipes,
            "pipe_bound": bound,
            "bound_check": out.pipes <= bound,
            "correct": correct,
            "rendered": render_protocol(out),
        }
        ok = correct and out.pipes <= bound
        return {"inputs": {"protocols": [_digest(p) for p in args.protocol]}, "result": result}, ok
    # search
    na, nb = args.na, args.nb
    table = _bits(args.table, "table")
    if len(table) != 2 ** (na + nb):
        raise UsageError(f"--table needs {2 ** (na + nb)} bits for {na}+{nb} input bits")
    grid = np.array(table, dtype=np.uint8).reshape(2**na, 2**nb)
    proto = brute_force_gh(grid, na, nb, args.max_pipes)
    if proto is None:
        result = {"found": False, "max_pipes": args.max_pipes}
        return {"inputs": {"table": args.table}, "result": result}, False
    result = {
        "found": True,
        "pipes": proto.pipes,
        "protocol": proto.to_dict(),
        "rendered": render_protocol(proto),
    }
    return {"inputs": {"table": args.table}, "result": result}, True


def cmd_psm(args) -> tuple[dict, bool]:
    try:
        spec = load_spec(args.spec)
    except OSError as exc:
        raise UsageError(f"cannot read {args.spec}: {exc.strerror}") from None
    protocol = transform(spec)
    inputs = {"spec": _digest(args.spec)}
    if args.psm_command == "run":
        x, y = _bits(args.x, "x"), _bits(args.y, "y")
        if len(x) != spec.n_x or len(y) != spec.n_y:
            raise UsageError(f"spec expects {spec.n_x} x bits and {spec.n_y} y bits")
        rec = run_transcript(protocol, x, y, np.random.SeedSequence(args.seed))
        result = {"transcript": rec.to_dict(), "cost": protocol.cost_report(),
                  "decoder": str(protocol.decoder)}
        return {"inputs": inputs, "result": result}, protocol.within_68_bound
    report = audit_privacy(protocol, seeds=args.seeds, seed=args.seed)
    result = dict(report.to_dict(), cost=protocol.cost_report())
    return {"inputs": inputs, "result": result}, report.passes and protocol.within_68_bound


def cmd_problems(args) -> tuple[dict, bool]:
    kind = args.problem
    if kind == "abcd":
        inst = AbcdInstance.random(args.n, args.case, seed=np.random.SeedSequence(args.seed))
        p = abcd_accept_probability(inst)
        if args.case == "high":
            ok = p >= 0.95
        elif args.case == "low":
            ok = p <= 0.55
        else:
            ok = True
        result = dict(inst.to_dict(), accept_probability=p, threshold_check=ok)
        return {"result": result}, ok
    if kind == "forrelation":
        inst = ForrelationInstance.random(args.n, args.alpha, seed=np.random.SeedSequence(args.seed))
        result = dict(inst.to_dict(), x=inst.x.tolist(), y=inst.y.tolist())
        return {"result": result}, True
    if kind == "equality":
        rep = equality_pipeline(args.n, seed=args.seed)
        return {"result": rep}, rep["correct"] and rep["bound_check"]
    if kind == "index":
        rep = index_pipeline(args.n, seed=args.seed)
        return {"result": rep}, rep["correct"] and rep["bound_check"]
    rows = multiplexer_table(args.k)
    ok = all(r["recursion_ok"] and r["permutation_ok"] is not False for r in rows)
    return {"result": {"rows": rows}}, ok


# -- argument parsing ------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "text"), default="text")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="magicomm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"magicomm {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile-pdt", help="compile a circuit into a parity decision tree")
    p.add_argument("--circuit", required=True)
    p.add_argument("--split", help="a,b: first a inputs to Alice, next b to Bob")
    p.add_argument("--minimize", action="store_true")
    _common(p)

    p = sub.add_parser("verify", help="check the compiled protocol against the statevector oracle")
    p.add_argument("--circuit", required=True)
    p.add_argument("--split")
    p.add_argument("--minimize", action="store_true")
    p.add_argument("--exhaustive", action="store_true")
    p.add_argument("--seeds", type=int, default=256, help="sampled inputs without --exhaustive")
    _common(p)

    p = sub.add_parser("gh", help="garden-hose tools")
    ghs = p.add_subparsers(dest="gh_command", required=True)
    q = ghs.add_parser("eval")
    q.add_argument("--protocol", required=True)
    q.add_argument("--x", default="")
    q.add_argument("--y", default="")
    _common(q)
    q = ghs.add_parser("compose")
    q.add_argument("--protocol", action="append", required=True)
    q.add_argument("--c", type=int, choices=(0, 1), default=0)
    _common(q)
    q = ghs.add_parser("search")
    q.add_argument("--table", required=True, help="truth table bits, row-major over x then y")
    q.add_argument("--na", type=int, default=1)
    q.add_argument("--nb", type=int, default=1)
    q.add_argument("--max-pipes", type=int, default=4)
    _common(q)

    p = sub.add_parser("psm", help="private simultaneous-message transformation")
    pss = p.add_subparsers(dest="psm_command", required=True)
    q = pss.add_parser("run")
    q.add_argument("--spec", required=True)
    q.add_argument("--x", default="")
    q.add_argument("--y", default="")
    _common(q)
    q = pss.add_parser("audit")
    q.add_argument("--spec", required=True)
    q.add_argument("--seeds", type=int, default=10_000)
    _common(q)

    p = sub.add_parser("problems", help="reference problems")
    prs = p.add_subparsers(dest="problem", required=True)
    q = prs.add_parser("abcd")
    q.add_argument("--n", type=int, default=2)
    q.add_argument("--case", choices=("high", "low", "none"), default="high")
    _common(q)
    q = prs.add_parser("forrelation")
    q.add_argument("--n", type=int, default=16)
    q.add_argument("--alpha", type=float, default=0.1)
    _common(q)
    q = prs.add_parser("equality")
    q.add_argument("--n", type=int, default=2)
    _common(q)
    q = prs.add_parser("index")
    q.add_argument("--n", type=int, default=4)
    _common(q)
    q = prs.add_parser("multiplexer")
    q.add_argument("--k", type=int, default=3)
    _common(q)
    return parser


_HANDLERS = {
    "compile-pdt": cmd_compile_pdt,
    "verify": cmd_verify,
    "gh": cmd_gh,
    "psm": cmd_psm,
    "problems": cmd_problems,
}


def _command_echo(args) -> list[str]:
    parts = [args.command]
    for attr in ("gh_command", "psm_command", "problem"):
        if getattr(args, attr, None):
            parts.append(getattr(args, attr))
    return parts


def _render_text(report: dict) -> str:
    lines = [f"magicomm {report['version']}: {' '.join(report['command'])}  [{report['status']}]"]
    result = report["result"]
    for key in sorted(result):
        val = result[key]
        if key == "rendered":
            continue
        if isinstance(val, (dict, list)):
            val = json.dumps(val, sort_keys=True)
        lines.append(f"  {key}: {val}")
    if "rendered" in result:
        lines.append(result["rendered"])
    return "\n".join(lines)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        payload, ok = _HANDLERS[args.command](args)
    except CircuitSyntaxError as exc:
        print(f"magicomm: syntax error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, GardenHoseError, ValueError) as exc:
        print(f"magicomm: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = {
        "command": _command_echo(args),
        "version": __version__,
        "seed": args.seed,
        "status": "ok" if ok else "failed",
        "inputs": payload.get("inputs", {}),
        "result": payload["result"],
    }
    if args.format == "json":
        print(json.dumps(report, sort_keys=True, default=_json_default))
    else:
        print(_render_text(json.loads(json.dumps(report, default=_json_default))))
    return EXIT_OK if ok else EXIT_FAIL


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


if __name__ == "__main__":
    sys.exit(main())
