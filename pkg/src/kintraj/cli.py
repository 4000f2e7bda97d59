"""Command line front end: build, verify, constants, probe, plot-data.

Exit status is 0 when every requested check passes, 1 on a check failure
(the report is still written) and 2 on a usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from kintraj.documents import dumps, load_json, pair_from_archive, pair_to_archive
from kintraj.errors import KintrajError
from kintraj.trajectory import MAX_STEPS, KineticPoint, build_pair, eval_gamma

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
PROBE_FAMILY = ("constant", "affine", "v_heat")
DEFAULT_EPS = tuple(round(0.1 * i, 1) for i in range(1, 10))


class UsageError(Exception):
    pass


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma separated list of numbers, got {text!r}") from None


def _name_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kintraj", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, k_default=1):
        p.add_argument("--k", type=int, default=k_default, help=f"number of position blocks (1..{MAX_STEPS})")
        p.add_argument("--out", help="write the document here instead of stdout")
        p.add_argument("--format", choices=("structured", "text"), default="structured")

    p = sub.add_parser("build", help="solve the ansatz and emit a trajectory archive")
    common(p)

    p = sub.add_parser("verify", help="run exact and numeric checks")
    common(p)
    p.add_argument("--archive", help="verify a stored archive instead of building")
    p.add_argument("--checks", type=_name_list, help="comma list of checks")
    p.add_argument("--kappa", type=float, default=1.0)

    p = sub.add_parser("constants", help="C0, C1 and R0 over a list of time gaps")
    common(p)
    p.add_argument("--kappa", type=_float_list, default=[1.0])

    p = sub.add_parser("probe", help="empirical Poincare constant for the certified family (d = 1)")
    common(p)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--eps", type=_float_list, default=list(DEFAULT_EPS))
    p.add_argument("--resolution", type=int, default=128, help="finest quadrature resolution per axis")
    p.add_argument("--samples", type=int, default=0, help="Monte Carlo samples for the proof audits (0 skips them)")
    p.add_argument("--family", type=_name_list, default=list(PROBE_FAMILY))

    p = sub.add_parser("plot-data", help="sampled trajectory coordinates as delimited text")
    common(p)
    p.add_argument("--kappa", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=101, help="number of r values")
    p.add_argument("--present", type=_float_list, help="t,x_1..x_k,v of the later endpoint")
    p.add_argument("--past", type=_float_list, help="s,y_1..y_k,w of the earlier endpoint")
    return parser


def _check_config(args) -> None:
    if not 1 <= args.k <= MAX_STEPS:
        raise UsageError(f"--k must lie in 1..{MAX_STEPS}")
    kappas = args.kappa if isinstance(getattr(args, "kappa", None), list) else [getattr(args, "kappa", 1.0)]
    if not kappas or any(not kap > 0 for kap in kappas):
        raise UsageError("--kappa values must be positive")
    if args.command == "probe":
        if args.k != 1:
            raise UsageError("the probe works with k = 1")
        if not args.eps or any(not 0 < e < 1 for e in args.eps):
            raise UsageError("--eps values must lie in (0, 1)")
        if args.resolution < 16:
            raise UsageError("--resolution must be at least 16 (the coarse level uses half of it)")
        if args.samples < 0:
            raise UsageError("--samples must be nonnegative")
    if args.command == "plot-data" and args.samples < 2:
        raise UsageError("--samples must be at least 2")


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _render(doc: dict, fmt: str, text_lines) -> str:
    if fmt == "structured":
        return dumps(doc) + "\n"
    return "\n".join(text_lines(doc)) + "\n"


def _cmd_build(args) -> int:
    doc = pair_to_archive(build_pair(args.k))

    def lines(d):
        yield f"k={d['k']} D={d['D']} kappa={','.join(d['kappa_list'])}"
        yield f"content_hash {d['content_hash']}"

    _emit(_render(doc, args.format, lines), args.out)
    return EXIT_OK


def _cmd_verify(args) -> int:
    from kintraj.verifier import ALL_CHECKS, verify

    if args.checks and set(args.checks) - set(ALL_CHECKS):
        raise UsageError(f"unknown checks {sorted(set(args.checks) - set(ALL_CHECKS))}; known: {','.join(ALL_CHECKS)}")
    pair = pair_from_archive(load_json(args.archive)) if args.archive else build_pair(args.k)
    report = verify(pair, args.checks, kappa=args.kappa)
    doc = report.to_dict()

    def lines(d):
        yield f"k={d['k']} passed={d['passed']}"
        for c in d["checks"]:
            yield f"  {c['name']:<28} {c['mode']:<8} {c['status']}"
        for name in ("C0", "C1"):
            if name in d["constants"]:
                yield f"  {name} = {d['constants'][name]['value']:.10g}"
        if "R0" in d["constants"]:
            yield f"  R0 = {d['constants']['R0']['R0']:.10g}"
        if "p_k" in d["constants"]:
            yield f"  p_k = {d['constants']['p_k']}"

    _emit(_render(doc, args.format, lines), args.out)
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_constants(args) -> int:
    from kintraj.verifier import DEFAULT_TOLERANCES, GapGeometry, compute_R0, estimate_C0, estimate_C1

    pair = build_pair(args.k)
    rows = []
    ok = True
    for kappa in args.kappa:
        geometry = GapGeometry(kappa)
        c0 = estimate_C0(pair, geometry.sigma_range)
        c1 = estimate_C1(pair, geometry)
        r0 = compute_R0(pair, geometry)
        ok &= c0.refinement_delta < DEFAULT_TOLERANCES["c0_refinement"]
        ok &= c1.refinement_delta < DEFAULT_TOLERANCES["c1_refinement"]
        ok &= r0.refinement_delta < DEFAULT_TOLERANCES["r0_refinement"]
        rows.append({"kappa": kappa, "C0": c0.to_dict(), "C1": c1.to_dict(), "R0": r0.to_dict()})
    doc = {"kind": "constants_table", "k": args.k, "rows": rows, "passed": bool(ok)}

    def lines(d):
        yield "kappa C0 C1 R0 R0_geometric"
        for row in d["rows"]:
            yield " ".join(
                format(x, ".10g")
                for x in (
                    row["kappa"],
                    row["C0"]["value"],
                    row["C1"]["value"],
                    row["R0"]["R0"],
                    row["R0"]["R0_geometric"],
                )
            )

    _emit(_render(doc, args.format, lines), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_probe(args) -> int:
    from kintraj import probe

    unknown = set(args.family) - set(probe.KINDS)
    if unknown or not args.family:
        raise UsageError(f"--family entries must come from {','.join(probe.KINDS)}")
    pair = build_pair(1)
    geometry = probe.CylinderGeometry.from_pair(pair, args.kappa)
    specs = [probe.make_subsolution(kind, geometry=geometry) for kind in args.family]
    result = probe.sweep(specs, args.eps, geometry, resolutions=(args.resolution // 2, args.resolution))
    doc = result.to_dict()
    finite = all(np.isfinite(r.ratio) for r in result.rows)
    ok = finite and result.refinement_delta < 0.05 and not result.geometry_violation
    if args.samples:
        heat = next((s for s in specs if s.name == "v_heat"), specs[-1])
        doc["audits"] = {
            "change_of_variables": [
                probe.change_of_variables_audit(pair, r, -(1.0 + args.kappa), [0.0], 0.0, samples=args.samples).to_dict()
                for r in (0.25, 0.5, 0.75)
            ],
            "trajectory_gradient": [
                probe.trajectory_gradient_audit(pair, heat, k_exp, geometry, samples=args.samples).to_dict()
                for k_exp in (-0.5, 0.0)
            ],
        }
        ok &= all(a["relative_error"] < 0.02 for a in doc["audits"]["change_of_variables"])
        ok &= all(a["containment"] == 1.0 for a in doc["audits"]["trajectory_gradient"])
    doc["passed"] = bool(ok)

    def lines(d):
        yield f"empirical C = {d['empirical_constant']:.10g} (refinement delta {d['refinement_delta']:.3g})"
        yield "spec eps lhs g u ratio"
        for row in d["rows"]:
            yield f"{row['spec']} {row['eps']:g} {row['lhs']:.10g} {row['g']:.10g} {row['u']:.10g} {row['ratio']:.10g}"

    _emit(_render(doc, args.format, lines), args.out)
    return EXIT_OK if ok else EXIT_FAIL


def _endpoint(values, k: int, default) -> KineticPoint:
    values = default if values is None else values
    if len(values) != k + 2:
        raise UsageError(f"endpoints need {k + 2} numbers: t, x_1..x_{k}, v")
    return KineticPoint(values[0], np.array(values[1:-1])[:, None], [values[-1]])


def plot_rows(pair, present: KineticPoint, past: KineticPoint, count: int) -> list[list[float]]:
    rows = []
    for r in np.linspace(0.0, 1.0, count):
        point = eval_gamma(pair, past, present, float(r))
        rows.append([float(r), point.t, *point.x[:, 0].tolist(), float(point.v[0])])
    return rows


def _cmd_plot_data(args) -> int:
    k = args.k
    present = _endpoint(args.present, k, [0.0] + [0.0] * k + [1.0])
    past = _endpoint(args.past, k, [-1.0 - args.kappa] + [0.0] * k + [-1.0])
    pair = build_pair(k)
    rows = plot_rows(pair, present, past, args.samples)
    header = ["r", "t"] + [f"x{i + 1}" for i in range(k)] + ["v"]
    if args.format == "structured":
        text = dumps({"kind": "plot_data", "k": k, "columns": header, "rows": rows}) + "\n"
    else:
        text = ",".join(header) + "\n" + "".join(",".join(format(x, ".17g") for x in row) + "\n" for row in rows)
    _emit(text, args.out)
    return EXIT_OK


COMMANDS = {
    "build": _cmd_build,
    "verify": _cmd_verify,
    "constants": _cmd_constants,
    "probe": _cmd_probe,
    "plot-data": _cmd_plot_data,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        _check_config(args)
        return COMMANDS[args.command](args)
    except (UsageError, KintrajError, ValueError, OSError) as exc:
        print(f"kintraj {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
