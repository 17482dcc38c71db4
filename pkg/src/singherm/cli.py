"""Command-line interface.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 a check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import _fd, checks, integrability, positivity, psh, regularize
from .curvature import (HERMITIAN_DEFECT_LIMIT, DegeneratePointError, curvature_exact,
                        curvature_fd, nakano_lower_bound_matrix, nakano_matrix)
from .metric import ClosedFormDualMetric, HolomorphicSection, SectionInducedMetric
from .parse import ParseError
from .scenarios import (Check, RunReport, Scenario, ScenarioError, apply_dual_shift,
                        load_scenario)
from .sesqui import SesquiPolynomial, matrix_evaluate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_CHECK = 4


class UsageError(ValueError):
    pass


def _fmt(x: float) -> str:
    return format(float(x) + 0.0, ".17g")


def _threads(args) -> int:
    if args.single_thread:
        return 1
    if args.threads == "auto":
        return os.cpu_count() or 1
    try:
        t = int(args.threads)
    except ValueError as exc:
        raise UsageError("--threads must be an integer or 'auto'") from exc
    if t < 1:
        raise UsageError("--threads must be positive")
    return t


def _floats(text: str, flag: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"{flag} expects comma-separated numbers") from exc


def _point(text: str, n: int) -> np.ndarray:
    try:
        vals = [complex(v.strip().replace("i", "j")) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"cannot parse point {text!r}") from exc
    if len(vals) != n:
        raise UsageError(f"point needs {n} coordinates")
    return np.array(vals)


def _point_columns(n: int) -> list[str]:
    return [c for k in range(1, n + 1) for c in (f"point_re_{k}", f"point_im_{k}")]


def _point_values(x) -> list[str]:
    return [_fmt(v) for c in x for v in (c.real, c.imag)]


def _point_label(x) -> str:
    return ";".join(f"{_fmt(c.real)}{'+' if c.imag >= 0 else '-'}{_fmt(abs(c.imag))}i" for c in x)


def _seed(args, sc: Scenario) -> int:
    return sc.seed if args.seed is None else args.seed


def _shifted(sc: Scenario, eps: float | None, diagonal: str | None):
    m = sc.build_metric()
    if eps is None:
        return m
    if diagonal is not None:
        diag = _floats(diagonal, "--shift-diagonal")
    elif "dual_shift" in sc.metric_spec:
        diag = sc.metric_spec["dual_shift"]["diagonal"]
    else:
        diag = [1.0] * m.rank
    return apply_dual_shift(m, eps, diag)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- subcommands ----------------------------------------------------------------

def cmd_curvature(args, sc: Scenario, out: Path | None):
    m = _shifted(sc, args.eps, args.shift_diagonal)
    pts = sc.grid_points()
    r, n = m.rank, m.n
    size = n * r
    header = _point_columns(n) + [f"nak_{a + 1}_{b + 1}_{part}" for a in range(size)
                                  for b in range(size) for part in ("re", "im")] + ["min_eigenvalue"]
    rows, worst_defect, degenerate = [], 0.0, 0
    for x in pts:
        try:
            c = curvature_exact(m, x) if args.mode == "exact" else curvature_fd(m, x)
            nm = nakano_matrix(c, m)
        except DegeneratePointError:
            degenerate += 1
            rows.append(_point_values(x) + ["nan"] * (2 * size * size + 1))
            continue
        worst_defect = max(worst_defect, nm.hermitian_defect)
        vals = [_fmt(v) for e in nm.matrix.ravel() for v in (e.real, e.imag)]
        rows.append(_point_values(x) + vals + [_fmt(nm.min_eigenvalue)])
    if degenerate == len(pts):
        raise DegeneratePointError("metric is degenerate at every grid point")
    if out:
        _write_csv(out / "curvature.csv", header, rows)
    return [Check("nakano_hermitian_defect", f"curvature_engine.curvature_{args.mode}",
                  HERMITIAN_DEFECT_LIMIT, True, worst_defect,
                  {"points": len(pts), "degenerate_points": degenerate})]


def cmd_positivity(args, sc: Scenario, out: Path | None):
    eps_list = _floats(args.eps_list, "--eps-list") if args.eps_list else [None]
    pts = [_point(args.point, sc.n)] if args.point else list(sc.grid_points())
    seed = _seed(args, sc)
    rows, verdicts = [], []
    for eps in eps_list:
        if eps is not None and eps <= 0:
            raise UsageError("--eps-list values must be positive")
        m = _shifted(sc, eps, args.shift_diagonal)
        rep = positivity.positivity_report(m, pts, args.C, mode=args.mode, seed=seed)
        for v in rep.points:
            ok_point = v.status == "ok"
            tol = None
            if ok_point:
                nm = nakano_lower_bound_matrix(
                    nakano_matrix(curvature_exact(m, v.point) if args.mode == "exact"
                                  else curvature_fd(m, v.point), m), m, v.point, args.C)
                tol = positivity.psd_tolerance(nm.matrix)
                value = v.nakano_min_eig if args.test == "nakano" else v.griffiths_min
                passed = value >= -tol
                verdicts.append(passed)
            else:
                passed = False
            rows.append(["" if eps is None else _fmt(eps), _fmt(args.C), _point_label(v.point),
                         _fmt(v.nakano_min_eig), _fmt(v.griffiths_min), str(passed)])
    if not verdicts:
        raise DegeneratePointError("metric is degenerate at every probe point")
    if out:
        _write_csv(out / "positivity.csv",
                   ["eps", "C", "point", "min_eig", "griffiths_min", "passed"], rows)
    mins = [float(r[3]) for r in rows if r[3] != "nan"]
    return [Check(f"{args.test}_semipositive", f"positivity_tests.{args.test}",
                  f"{positivity.PSD_RTOL} relative", all(verdicts) or not args.require_pass,
                  min(mins), {"verdict": all(verdicts), "rows": len(rows)})]


def cmd_psh(args, sc: Scenario, out: Path | None):
    m = sc.build_metric()
    fn = psh.positivity_verdict if args.test == "positivity" else psh.negativity_verdict
    rep = fn(m, sc.chart, degree=args.degree, trials=args.trials, seed=_seed(args, sc),
             tol=sc.tolerance("psh", psh.DEFAULT_TOL))
    if out:
        (out / "psh.json").write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
    return [Check(f"{args.test}_verdict", f"psh_check.{args.test}_verdict",
                  sc.tolerance("psh", psh.DEFAULT_TOL), rep.passed or not args.require_pass,
                  rep.worst_violation, rep.to_dict())]


def cmd_integrability(args, sc: Scenario, out: Path | None):
    m = sc.build_metric()
    text = args.section.strip()
    try:
        exprs = json.loads(text)
    except json.JSONDecodeError:
        # allow unquoted expressions such as [z, w]
        if not (text.startswith("[") and text.endswith("]")):
            raise UsageError("--section must be a list such as [0,1] or [z,w]") from None
        exprs = [e.strip() for e in text[1:-1].split(",")]
    if not isinstance(exprs, list) or len(exprs) != m.rank:
        raise UsageError(f"--section must list {m.rank} component expressions")
    s = HolomorphicSection.parse([str(e) for e in exprs], m.n)
    center = _point(args.center, m.n)
    threads = _threads(args)
    seed = _seed(args, sc)
    kw = {"samples_per_shell": args.samples}
    v = integrability.eh_membership(m, s, center, seed=seed, threads=threads, **kw)
    result = {"section": exprs, "center": _point_label(center), "eh_membership": v.to_dict()}
    if isinstance(m, SectionInducedMetric) and m.is_euclidean:
        red = integrability.reduce_membership(m.sections, s, center, seed=seed,
                                              threads=threads, **kw)
        result["reduced"] = red.to_dict()
    if out:
        (out / "integrability.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    print(f"classification: {v.classification} (rate {v.fitted_exponent:.4g}, "
          f"margin {v.margin:.4g}, {v.reason})")
    agree = "reduced" not in result or result["reduced"]["classification"] == v.classification
    return [Check("eh_membership", "integrability.eh_membership", integrability.DELTA, True,
                  v.fitted_exponent, {"classification": v.classification,
                                      "reduced_agrees": agree})]


def _smoothing_prediction(m, eps_chi):
    """``P + eps_chi * sum_k d_k dbar_k P`` entrywise; exact for degree <= 3."""
    if isinstance(m, SectionInducedMetric):
        m = m.dual_metric()
    if not isinstance(m, ClosedFormDualMetric) or m.scale is not None:
        return None
    if max(p.degree for row in m.entries for p in row) > 3:
        return None
    pred = []
    for row in m.entries:
        prow = []
        for p in row:
            lap = SesquiPolynomial.zero(m.n)
            for k in range(1, m.n + 1):
                lap = lap + p.d(k).dbar(k)
            prow.append(p + lap.scale(eps_chi))
        pred.append(prow)
    return pred


def cmd_regularize(args, sc: Scenario, out: Path | None):
    m = sc.build_metric()
    k = regularize.make_kernel(args.rho, args.power, dim_real=2 * m.n)
    margin = max(sc.grid["margin"], args.rho)
    if margin >= float(np.min(sc.chart.radius)):
        raise UsageError("kernel radius does not fit inside the chart")
    per_axis = args.per_axis or sc.grid["per_axis"]
    X = sc.chart.grid(per_axis, margin=margin)
    D = regularize.convolve_dual(m, k, X, sc.chart)
    pred = _smoothing_prediction(m, k.eps_chi)
    resid = (np.max(np.abs(D - matrix_evaluate(pred, X)), axis=(-1, -2)) if pred is not None
             else np.full(len(X), np.nan))
    r = m.rank
    header = (_point_columns(m.n)
              + [f"dual_{a + 1}_{b + 1}_{p}" for a in range(r) for b in range(r) for p in ("re", "im")]
              + [f"h_{a + 1}_{b + 1}_{p}" for a in range(r) for b in range(r) for p in ("re", "im")]
              + ["identity_residual"])
    rows = []
    for x, Dx, res in zip(X, D, resid):
        hv = regularize.convolve_metric(m, k, x, sc.chart)
        rows.append(_point_values(x)
                    + [_fmt(v) for e in Dx.ravel() for v in (e.real, e.imag)]
                    + [_fmt(v) for e in hv.entries.ravel() for v in (e.real, e.imag)]
                    + [_fmt(res)])
    if out:
        _write_csv(out / "regularize.csv", header, rows)
    tol = sc.tolerance("convolution", 1e-6)
    worst = float(np.max(resid)) if pred is not None else None
    return [Check("convolution_identity", "regularize.convolve_metric", tol,
                  pred is None or worst <= tol, worst,
                  {"rho": k.rho, "power": k.power, "eps_chi": k.eps_chi,
                   "applicable": pred is not None, "points": len(X)})]


def cmd_reproduce(args, sc: Scenario, out: Path | None):
    if args.target != "example42":
        raise UsageError(f"unknown reproduction target {args.target!r}")
    cs = checks.reproduce_checks(seed=_seed(args, sc), threads=_threads(args))
    if out:
        table = next(c for c in cs if c.name == "blowup_formulas").details["table"]
        _write_csv(out / "blowup.csv", ["family", "C", "eps", "min_eig", "closed_form"],
                   [[t["family"], _fmt(t["C"]), _fmt(t["eps"]), _fmt(t["min_eig"]),
                     _fmt(t["closed_form"])] for t in table])
    return cs


COMMANDS = {
    "curvature": cmd_curvature,
    "positivity": cmd_positivity,
    "psh": cmd_psh,
    "integrability": cmd_integrability,
    "regularize": cmd_regularize,
    "reproduce": cmd_reproduce,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="example42", help="built-in name or JSON path")
    common.add_argument("--out", help="directory for CSV/JSON artifacts")
    common.add_argument("--mode", choices=("exact", "fd"), default="exact")
    common.add_argument("--seed", type=int, help="overrides the scenario seed")
    common.add_argument("--threads", default="1", help="INT or 'auto'")
    common.add_argument("--single-thread", action="store_true")
    common.add_argument("--require-pass", action="store_true",
                        help="exit 4 when a verdict is negative (verdicts are data otherwise)")

    p = argparse.ArgumentParser(prog="singherm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("curvature", parents=[common], help="Nakano matrices on the scenario grid")
    c.add_argument("--eps", type=float, help="shift the dual by eps * diag")
    c.add_argument("--shift-diagonal", help="CSV diagonal for the dual shift")

    c = sub.add_parser("positivity", parents=[common], help="Nakano/Griffiths lower-bound test")
    c.add_argument("--test", choices=("nakano", "griffiths"), default="nakano")
    c.add_argument("--C", type=float, default=0.0)
    c.add_argument("--eps-list", help="CSV of eps values for the shifted-dual family")
    c.add_argument("--shift-diagonal", help="CSV diagonal for the dual shift")
    c.add_argument("--point", help="single point 'z1,z2' instead of the grid")

    c = sub.add_parser("psh", parents=[common], help="curvature-sign verdict by sub-mean values")
    c.add_argument("--test", choices=("positivity", "negativity"), default="positivity")
    c.add_argument("--trials", type=int, default=50)
    c.add_argument("--degree", type=int, default=2)

    c = sub.add_parser("integrability", parents=[common], help="local L^1 test of |s|_h^2")
    c.add_argument("--section", required=True, help='JSON list, e.g. "[0,1]"')
    c.add_argument("--center", required=True, help="comma-separated complex coordinates")
    c.add_argument("--samples", type=int, default=integrability.SAMPLES_PER_SHELL)

    c = sub.add_parser("regularize", parents=[common], help="convolution smoothing of the dual")
    c.add_argument("--rho", type=float, default=0.3)
    c.add_argument("--power", type=int, default=3)
    c.add_argument("--per-axis", type=int)

    c = sub.add_parser("reproduce", parents=[common], help="run the full reproduction suite")
    c.add_argument("target", help="reproduction target (example42)")
    return p


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start = time.perf_counter()
    try:
        _threads(args)
        sc = load_scenario(args.scenario)
        out = Path(args.out) if args.out else None
        if out:
            out.mkdir(parents=True, exist_ok=True)
        results = COMMANDS[args.command](args, sc, out)
    except (ScenarioError, ParseError, UsageError, regularize.MarginError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegeneratePointError, _fd.StencilError, np.linalg.LinAlgError, ArithmeticError,
            psh.DualUndefinedError, regularize.SingularIntegrandError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = RunReport(args.command, sc.to_dict(), results,
                       wall_time=time.perf_counter() - start)
    for chk in report.checks:
        val = "" if chk.value is None else f" value={chk.value:.6g}"
        print(f"{'PASS' if chk.passed else 'FAIL'} {chk.name} [{chk.operation}, tol={chk.tolerance}]{val}")
    print(f"{'PASSED' if report.passed else 'FAILED'} {args.command} in {report.wall_time:.1f}s")
    if out:
        (out / "report.json").write_text(report.dumps())
    return EXIT_OK if report.passed else EXIT_CHECK


def main() -> None:
    sys.exit(run())
