"""Command-line driver for the convergence experiments.

Example::

    vkmorley --example 1 --levels 5 --out results/example1.csv
"""
import argparse
import csv
import io
import logging
import subprocess
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .analysis import DEFAULT_ERROR_DEGREE, ConvergenceReport, LevelResult, broken_error, rates
from .forms import DEFAULT_ASSEMBLY_DEGREE, DEFAULT_LOAD_DEGREE, problem_operator
from .mesh import level_mesh
from .morley import MorleySpace
from .problems import EXAMPLES, check_clamped
from .solver import NewtonOptions, newton_solve

log = logging.getLogger("vkmorley")

CSV_HEADER = (
    "level,n,unknowns,h,e2_u,rate2_u,e1_u,rate1_u,e0_u,rate0_u,"
    "e2_v,rate2_v,e1_v,rate1_v,e0_v,rate0_v"
)
ERROR_KEYS = ("e2_u", "e1_u", "e0_u", "e2_v", "e1_v", "e0_v")


@dataclass
class RunConfig:
    example: int = 1
    levels: int = 5
    p_over_D: float = None
    tolerance: float = 1e-10
    max_iterations: int = 20
    quad_assembly: int = DEFAULT_ASSEMBLY_DEGREE
    quad_load: int = DEFAULT_LOAD_DEGREE
    quad_error: int = DEFAULT_ERROR_DEGREE
    corner_depth: int = 10
    deterministic: bool = True
    mesh_family: str = "red"
    out: str = None

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ValueError(f"example must be one of {sorted(EXAMPLES)}, got {self.example}")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")


class NewtonFailure(RuntimeError):
    def __init__(self, report, level, status):
        super().__init__(f"Newton {status} at level {level}")
        self.report, self.level, self.status = report, level, status


def _fmt(x):
    return "" if x is None else f"{x:.9g}"


def report_to_csv(report):
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    rate_cols = {k: report.rate_column(k) for k in ERROR_KEYS}
    for i, row in enumerate(report.rows):
        cells = [str(row.level), str(row.n), str(row.unknowns), _fmt(row.h)]
        for k in ERROR_KEYS:
            cells += [_fmt(row.errors[k]), _fmt(rate_cols[k][i])]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def report_from_csv(text, example=0):
    reader = csv.DictReader(io.StringIO(text))
    if ",".join(reader.fieldnames) != CSV_HEADER:
        raise ValueError("unexpected CSV header")
    rep = ConvergenceReport(example)
    for rec in reader:
        rep.rows.append(
            LevelResult(
                level=int(rec["level"]),
                n=int(rec["n"]),
                unknowns=int(rec["unknowns"]),
                h=float(rec["h"]),
                errors={k: float(rec[k]) for k in ERROR_KEYS},
            )
        )
    return rep


def format_table(report):
    """Plain-text tables in the layout of the published ones, one per field."""
    lines = []
    for field in ("u", "v"):
        keys = [f"e2_{field}", f"e1_{field}", f"e0_{field}"]
        lines.append(f"{'# unknowns':>10} | {'|e|_2,h':>13} {'Order':>7} | "
                     f"{'|e|_1,h':>13} {'Order':>7} | {'||e||_L2':>13} {'Order':>7}   ({field})")
        rr = {k: report.rate_column(k) for k in keys}
        for i, row in enumerate(report.rows):
            parts = [f"{row.unknowns:>10}"]
            for k in keys:
                r = rr[k][i]
                parts.append(f"{row.errors[k]:13.6e} {('-' if r is None else f'{r:.4f}'):>7}")
            lines.append(" | ".join(parts))
        lines.append("")
    return "\n".join(lines)


def _git_describe():
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
        return out.stdout.strip() or "unknown"
    except (OSError, subprocess.SubprocessError):
        return "unknown"


def write_meta(path, config, report):
    meta = dict(asdict(config))
    meta.update(report.metadata)
    meta["git_describe"] = _git_describe()
    with open(path, "w") as fh:
        for k in sorted(meta):
            fh.write(f"{k}={meta[k]}\n")


def solve_level(problem, level, config):
    mesh, n = level_mesh(problem.domain, level, config.mesh_family)
    space = MorleySpace(mesh)
    op = problem_operator(space, problem, config.quad_assembly, config.quad_load)
    opts = NewtonOptions(config.tolerance, config.max_iterations)
    state, nlog = newton_solve(op, opts)
    errors = {}
    for fld, exact, coefs in (("u", problem.exact_u, state.u), ("v", problem.exact_v, state.v)):
        for m in (2, 1, 0):
            errors[f"e{m}_{fld}"] = broken_error(
                space, coefs, exact, m, config.quad_error, config.corner_depth
            )
    row = LevelResult(level, n, space.n_free, mesh.h, errors, nlog.iterations, nlog.status)
    return row, nlog


def run(config):
    """Solve every level, returning the report; CSV and sidecar are written if ``out`` is set.

    Raises :class:`NewtonFailure` (after flushing the partial CSV) when a
    level does not converge.
    """
    problem = EXAMPLES[config.example]()
    if config.p_over_D is not None:
        problem = problem.with_p_over_D(config.p_over_D)
    check_clamped(problem)
    report = ConvergenceReport(config.example)
    report.metadata.update(
        problem=problem.name,
        domain=problem.domain,
        effective_p_over_D=problem.p_over_D,
        alpha_expected=problem.alpha_expected,
    )
    out = Path(config.out) if config.out else None
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
    try:
        for level in range(1, config.levels + 1):
            t0 = time.perf_counter()
            row, nlog = solve_level(problem, level, config)
            report.rows.append(row)
            report.metadata[f"newton_level{level}"] = (
                f"{nlog.status}:{nlog.iterations}:"
                + ";".join(f"{r:.3e}" for r in nlog.residuals)
            )
            if not config.deterministic:
                report.metadata[f"seconds_level{level}"] = f"{time.perf_counter() - t0:.3f}"
            log.info("level %d: %d unknowns, newton %s in %d its", level, row.unknowns,
                     nlog.status, nlog.iterations)
            if not nlog.converged:
                raise NewtonFailure(report, level, nlog.status)
    finally:
        if out:
            out.write_text(report_to_csv(report))
            write_meta(out.with_suffix(".meta"), config, report)
    return report


def fitted_slopes(report, last=3):
    """Least-squares slopes of log(error) against log(unknowns)."""
    rows = report.rows[-last:]
    if len(rows) < 2:
        return {}
    x = np.log([r.unknowns for r in rows])
    return {k: float(np.polyfit(x, np.log([r.errors[k] for r in rows]), 1)[0]) for k in ERROR_KEYS}


def emit_plot_script(report, title=None):
    """Gnuplot script drawing every error column against the unknowns on log-log axes."""
    title = title or f"Example {report.example}"
    lines = [
        f"# convergence history, {title}",
        "set logscale xy",
        "set xlabel '# unknowns'",
        "set ylabel 'error'",
        "set key outside right",
        f"set title '{title}'",
        "$data << EOD",
        "# unknowns " + " ".join(ERROR_KEYS),
    ]
    for r in report.rows:
        lines.append(" ".join([str(r.unknowns)] + [f"{r.errors[k]:.9e}" for k in ERROR_KEYS]))
    lines.append("EOD")
    slopes = fitted_slopes(report)
    if slopes:
        for k in ERROR_KEYS:
            rr = report.rate_column(k)
            last = report.rows[-1]
            lines.append(
                f"set label '{k}: rate {rr[-1]:.4f}, slope {slopes[k]:.3f}' "
                f"at {last.unknowns},{last.errors[k]:.9e} offset 1,0"
            )
    if len(report.rows) >= 1:
        n0 = report.rows[0].unknowns
        e2 = report.rows[0].errors["e2_u"]
        e1 = report.rows[0].errors["e1_u"]
        lines.append(f"ref1(x) = {e2:.9e} * (x / {n0}.0) ** (-0.5)")
        lines.append(f"ref2(x) = {e1:.9e} * (x / {n0}.0) ** (-1.0)")
    plots = [f"$data using 1:{i + 2} with linespoints title '{k}'" for i, k in enumerate(ERROR_KEYS)]
    plots += ["ref1(x) with lines dt 2 title 'slope -1/2'", "ref2(x) with lines dt 3 title 'slope -1'"]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def build_parser():
    p = argparse.ArgumentParser(prog="vkmorley", description=__doc__.splitlines()[0])
    p.add_argument("--example", type=int, default=1, choices=sorted(EXAMPLES))
    p.add_argument("--levels", type=int, default=5)
    p.add_argument("--p-over-d", dest="p_over_D", type=float, default=None)
    p.add_argument("--tol", dest="tolerance", type=float, default=1e-10)
    p.add_argument("--max-iter", dest="max_iterations", type=int, default=20)
    p.add_argument("--quad-assembly", type=int, default=DEFAULT_ASSEMBLY_DEGREE)
    p.add_argument("--quad-load", type=int, default=DEFAULT_LOAD_DEGREE)
    p.add_argument("--quad-error", type=int, default=DEFAULT_ERROR_DEGREE)
    p.add_argument("--corner-depth", type=int, default=10,
                   help="graded subdivision levels for error integrals at singular corners")
    p.add_argument("--deterministic", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--mesh-family", choices=("red", "crisscross"), default="red")
    p.add_argument("--out", default=None, help="CSV path; a .meta sidecar is written next to it")
    p.add_argument("--plot", default=None, help="also write a gnuplot script here")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    kw = vars(args).copy()
    plot = kw.pop("plot")
    kw.pop("verbose")
    try:
        config = RunConfig(**kw)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    status = 0
    try:
        report = run(config)
    except NewtonFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        report, status = exc.report, 1
    print(format_table(report))
    if plot:
        Path(plot).write_text(emit_plot_script(report))
    return status


if __name__ == "__main__":
    sys.exit(main())
