"""Command-line interface: CSV ingestion, reports and plot-data files.

Every subcommand builds a :class:`RunReport`.  Human mode prints
``key=value`` lines (4 decimals); ``--json`` prints the report with sorted
keys and 15 significant digits, so identical flags give identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .constants import rescaling_constants, solve_robust
from .errors import IngestionError, NotFoundError, OSCVError
from .kernels import (
    Kernel,
    OneSidedKernel,
    QuadratureConfig,
    functionals,
    negativity_crossing,
    one_sided,
    parse_kernel,
    tail_threshold,
)
from .regression import Dataset, perturb_ties
from .risk import sample_size_threshold, threshold_prefactors
from .selection import (
    BandwidthGrid,
    CriterionCurve,
    Method,
    MinimumChoice,
    SelectionRule,
    cv_curve,
    default_cv_grid,
    default_oscv_grid,
    oscv_curve,
    select_bandwidth,
)
from .simulation import FUNCTIONS, Design, SimScenario, run_study, truth

__all__ = ["CsvDataset", "RunReport", "ingest", "emit_curve", "read_curve", "build_parser", "main"]

MIN_ROWS = 5
NA = "NA"


# ---------------------------------------------------------------------------
# ingestion


@dataclass(frozen=True)
class CsvDataset:
    """A CSV file and the columns holding x and y (header names or 0-based indices)."""

    path: str | Path
    x_column: str | int = 0
    y_column: str | int = 1


def _as_index(col):
    if isinstance(col, int):
        return col
    try:
        return int(col)
    except ValueError:
        return None


def _parse_float(cell):
    try:
        v = float(cell)
    except (TypeError, ValueError):
        return None
    return v if math.isfinite(v) else None


def ingest(spec: CsvDataset) -> tuple[Dataset, list[str]]:
    """Read ``spec`` into a :class:`Dataset` and return it with any warnings.

    Rows are sorted by x, repeated x values are nudged apart, and x is
    shifted to start at 0 so that ``a = max(x) - min(x)``.  Cells that do
    not parse as finite numbers drop their row.
    """
    try:
        with open(spec.path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except OSError as exc:
        raise IngestionError(f"cannot read {spec.path}: {exc}") from None
    if not rows:
        raise IngestionError(f"{spec.path} is empty")

    xi, yi = _as_index(spec.x_column), _as_index(spec.y_column)
    header = None
    if xi is None or yi is None:
        header = [c.strip() for c in rows[0]]
        try:
            xi = header.index(spec.x_column) if xi is None else xi
            yi = header.index(spec.y_column) if yi is None else yi
        except ValueError:
            raise IngestionError(f"columns {spec.x_column!r}/{spec.y_column!r} not in header {header}") from None
        rows = rows[1:]
    elif rows and (_parse_float(_cell(rows[0], xi)) is None or _parse_float(_cell(rows[0], yi)) is None):
        # first row is taken as a header when it is not numeric
        header = rows[0]
        rows = rows[1:]

    xs, ys, dropped = [], [], 0
    for r in rows:
        x, y = _parse_float(_cell(r, xi)), _parse_float(_cell(r, yi))
        if x is None or y is None:
            dropped += 1
            continue
        xs.append(x)
        ys.append(y)
    warnings = []
    if dropped:
        warnings.append(f"dropped {dropped} unparseable row(s)")
    if len(xs) < MIN_ROWS:
        raise IngestionError(f"need at least {MIN_ROWS} valid rows, found {len(xs)}")

    x = np.asarray(xs)
    y = np.asarray(ys)
    order = np.lexsort((y, x))
    x = x[order] - x[order[0]]
    a = float(x[-1])
    if not a > 0:
        raise IngestionError("all x values are equal")
    x, ties = perturb_ties(x)
    if ties:
        warnings.append(f"perturbed {ties} duplicate x value(s)")
    return Dataset(x, y[order], max(a, float(x[-1]))), warnings


def _cell(row, i):
    return row[i] if 0 <= i < len(row) else None


# ---------------------------------------------------------------------------
# curve files


def emit_curve(curve: CriterionCurve, path) -> None:
    """Write ``b value`` lines (17 significant digits, NaN as NA) under a comment header."""
    lines = [
        f"# method: {curve.method}",
        f"# kernel: {curve.kernel}",
        "# global_min: " + (f"{curve.global_min[0]:.17g}" if curve.global_min else NA),
        "# local_minima: " + " ".join(f"{b:.17g}" for b, _ in curve.local_minima),
        "# columns: b value",
    ]
    for b, v in zip(curve.grid.points, curve.values):
        lines.append(f"{b:.17g} {NA if math.isnan(v) else format(v, '.17g')}")
    try:
        Path(path).write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise IngestionError(f"cannot write {path}: {exc}") from None


def read_curve(path) -> tuple[dict, np.ndarray, np.ndarray]:
    """Parse a file written by :func:`emit_curve` into (header, b, values)."""
    header, bs, vals = {}, [], []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            header[key.strip()] = value.strip()
        elif line.strip():
            b, v = line.split()
            bs.append(float(b))
            vals.append(math.nan if v == NA else float(v))
    return header, np.array(bs), np.array(vals)


# ---------------------------------------------------------------------------
# reports


def _round15(v):
    if isinstance(v, dict):
        return {str(k): _round15(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round15(x) for x in v]
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    v = float(v)
    if not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return float(f"{v:.15g}")


@dataclass
class RunReport:
    command: str
    config: dict
    outputs: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    seed: int = 0
    version: str = __version__
    # keys printed at full precision in human mode
    exact_keys: tuple[str, ...] = ()

    def to_json(self) -> str:
        doc = {
            "command": self.command,
            "config": self.config,
            "outputs": self.outputs,
            "warnings": self.warnings,
            "seed": self.seed,
            "version": self.version,
        }
        return json.dumps(_round15(doc), sort_keys=True, indent=2)

    def to_text(self) -> str:
        lines = []
        for key, value in _flatten(self.outputs):
            exact = key.split(".")[0] in self.exact_keys
            lines.append(f"{key}={_fmt(value, exact)}")
        return "\n".join(lines)


def _flatten(d, prefix=""):
    for key in sorted(d):
        value = d[key]
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            yield from _flatten(value, name + ".")
        else:
            yield name, value


def _fmt(value, exact=False):
    if isinstance(value, (list, tuple)):
        return ",".join(_fmt(v, exact) for v in value)
    if isinstance(value, (bool, str)) or value is None:
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    if math.isnan(value):
        return NA
    return f"{value:.15g}" if exact else f"{value:.4f}"


# ---------------------------------------------------------------------------
# subcommands


def _quad(args):
    if args.quad_tol is None:
        return QuadratureConfig()
    return QuadratureConfig(abs_tol=args.quad_tol, rel_tol=args.quad_tol)


def _cmd_constants(args, report):
    rc = rescaling_constants(args.k, args.h, _quad(args))
    report.outputs.update(
        C=rc.c_smooth,
        C_star=rc.c_nonsmooth,
        E_C=rc.e_c,
        E_MASE=rc.e_mase,
        x=rc.x,
        J_K=rc.k.j,
        J_L=rc.l.j,
    )


def _cmd_solve_robust(args, report):
    lo, hi = args.bracket
    sol = solve_robust(args.k, args.sigma, (lo, hi), _quad(args), cells=args.cells)
    report.outputs.update(alphas=sol.alphas, c_unified=sol.c_unified, n_roots=len(sol.alphas))
    report.exact_keys = ("alphas",)
    if not sol.alphas:
        report.warnings.append("no root in the bracket")


def _cmd_functionals(args, report):
    quad = _quad(args)
    g: Kernel | OneSidedKernel = one_sided(args.kernel, quad) if args.one_sided else args.kernel
    f = functionals(g, quad)
    report.outputs.update(R=f.r, mu2=f.mu2, mu2_sq=f.mu2**2, J=f.j, B=f.b, efficiency=f.efficiency)
    try:
        report.outputs["negativity_crossing"] = negativity_crossing(args.kernel)
    except NotFoundError:
        pass
    if args.one_sided and args.tail_factor is not None:
        ref = functionals(one_sided(Kernel.gaussian(), quad), quad).j
        report.outputs["tail_threshold"] = tail_threshold(g, args.tail_factor, ref)


def _load(args, report):
    data, warnings = ingest(CsvDataset(args.csv, args.x_column, args.y_column))
    report.warnings.extend(warnings)
    report.outputs.update(n=data.n, a=data.a)
    return data


def _curve_for(args, data):
    method = Method(args.method)
    if method is Method.CV:
        return cv_curve(data, args.k, args.grid or default_cv_grid(data))
    return oscv_curve(data, method.cv_kernel, args.grid or default_oscv_grid(data))


def _note_undefined(curve, report):
    if curve.n_undefined:
        report.warnings.append(f"{curve.n_undefined} grid value(s) undefined")


def _cmd_select(args, report):
    data = _load(args, report)
    rule = SelectionRule(args.method, args.minimum)
    sel = select_bandwidth(data, rule, args.grid, _quad(args), args.k)
    value = sel.curve.values[int(np.flatnonzero(sel.curve.grid.points == sel.b_hat)[0])]
    report.outputs.update(
        b_hat=sel.b_hat,
        h_hat=sel.h_hat,
        rescale=sel.rescale,
        criterion=float(value),
        local_minima=[b for b, _ in sel.curve.local_minima],
    )
    _note_undefined(sel.curve, report)


def _cmd_curve(args, report):
    data = _load(args, report)
    curve = _curve_for(args, data)
    emit_curve(curve, args.out)
    report.outputs.update(
        points=len(curve.grid),
        global_min=curve.global_min[0],
        local_minima=[b for b, _ in curve.local_minima],
        out=str(args.out),
    )
    _note_undefined(curve, report)


def _cmd_simulate(args, report):
    scn = SimScenario(args.function, args.n, args.sigma, args.replications, args.seed, args.design)
    rep = run_study(scn, args.grid, args.minimum, _quad(args), args.workers)
    report.outputs.update(
        medians=rep.medians,
        delta_b=rep.delta_b,
        ratio_h=rep.ratio_h,
        ratio_b=rep.ratio_b,
        C_phi=rep.c_phi,
        C_I=rep.c_i,
        completed=len(rep.records),
        failures=len(rep.failures),
    )
    for r, msg in rep.failures:
        report.warnings.append(f"replication {r}: {msg}")


def _cmd_thresholds(args, report):
    quad = _quad(args)
    smooth, nonsmooth = threshold_prefactors(quad, args.t_star)
    report.outputs.update(prefactor_smooth=smooth, prefactor_nonsmooth=nonsmooth)
    for name in args.functions:
        report.outputs[f"n_{name}"] = sample_size_threshold(truth(name), args.sigma, quad=quad, t_star=args.t_star)


# ---------------------------------------------------------------------------
# argument parsing


def _arg_type(fn, what):
    def conv(text):
        try:
            return fn(text)
        except (ValueError, OSCVError) as exc:
            raise argparse.ArgumentTypeError(f"invalid {what} {text!r}: {exc}") from None

    conv.__name__ = what
    return conv


def _pair(text):
    lo, hi = (float(v) for v in text.split(","))
    return lo, hi


def _column(text):
    try:
        return int(text)
    except ValueError:
        return text


_kernel = _arg_type(parse_kernel, "kernel")
_grid = _arg_type(BandwidthGrid.parse, "grid")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--quad-tol", type=float, default=None, help="quadrature tolerance")
    common.add_argument("--grid", type=_grid, default=None, help="bandwidth grid lo:hi:count:log|lin")
    common.add_argument("--json", action="store_true", help="print a machine-readable report")

    p = argparse.ArgumentParser(prog="oscv", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, parents=[common], help=help_)
        sp.set_defaults(func=fn)
        return sp

    sp = add("constants", _cmd_constants, "rescaling constants for a kernel pair")
    sp.add_argument("--k", type=_kernel, default=Kernel.gaussian(), help="estimation kernel")
    sp.add_argument("--h", type=_kernel, default=Kernel.gaussian(), help="cross-validation kernel")

    sp = add("solve-robust", _cmd_solve_robust, "alphas at which hi(alpha, sigma) is robust")
    sp.add_argument("--k", type=_kernel, default=Kernel.gaussian())
    sp.add_argument("--sigma", type=float, default=10.0)
    sp.add_argument("--bracket", type=_arg_type(_pair, "bracket"), default=(1e-6, 1e-3), help="lo,hi")
    sp.add_argument("--cells", type=int, default=2000, help="scan cells in the bracket")

    sp = add("functionals", _cmd_functionals, "R, mu2, J, B and efficiency of a kernel")
    sp.add_argument("--kernel", type=_kernel, default=Kernel.gaussian())
    sp.add_argument("--one-sided", action="store_true", help="use the one-sided transform")
    sp.add_argument("--tail-factor", type=float, default=None, help="also report tail_threshold")

    for name, fn, help_ in (
        ("select", _cmd_select, "select a bandwidth for a CSV dataset"),
        ("curve", _cmd_curve, "write a criterion curve for a CSV dataset"),
    ):
        sp = add(name, fn, help_)
        sp.add_argument("csv", type=Path)
        sp.add_argument("--x-column", type=_column, default=0)
        sp.add_argument("--y-column", type=_column, default=1)
        sp.add_argument("--method", choices=[m.value for m in Method], default=Method.OSCV_PHI.value)
        sp.add_argument("--k", type=_kernel, default=Kernel.gaussian(), help="estimation kernel")
        if name == "select":
            sp.add_argument("--minimum", choices=[c.value for c in MinimumChoice], default="global")
        else:
            sp.add_argument("--out", type=Path, required=True)

    sp = add("simulate", _cmd_simulate, "Monte Carlo bandwidth study")
    sp.add_argument("--function", choices=sorted(FUNCTIONS), default="r1")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--sigma", type=float, default=1 / 500)
    sp.add_argument("--replications", type=int, default=100)
    sp.add_argument("--design", choices=[d.value for d in Design], default="even")
    sp.add_argument("--minimum", choices=[c.value for c in MinimumChoice], default="global")
    sp.add_argument("--workers", type=int, default=None)

    sp = add("thresholds", _cmd_thresholds, "sample sizes at which the tail becomes irrelevant")
    sp.add_argument("--sigma", type=float, default=1 / 500)
    sp.add_argument("--t-star", type=float, default=16.92)
    sp.add_argument("--functions", nargs="+", choices=sorted(FUNCTIONS), default=sorted(FUNCTIONS))
    return p


def _config(args):
    skip = {"func", "json", "seed"}
    out = {}
    for key, value in sorted(vars(args).items()):
        if key in skip:
            continue
        if isinstance(value, BandwidthGrid):
            value = f"{value.lo!r}:{value.hi!r}:{len(value)}:{value.spacing}"
        elif isinstance(value, (Kernel, Path)):
            value = str(value)
        elif isinstance(value, tuple):
            value = list(value)
        out[key] = value
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    report = RunReport(command=args.command, config=_config(args), seed=args.seed)
    status = 0
    try:
        args.func(args, report)
    except (OSCVError, ValueError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        report.outputs["error"] = f"{type(exc).__name__}: {exc}"
        status = 1
    if args.json:
        print(report.to_json())
    else:
        for w in report.warnings:
            print(f"warning: {w}", file=sys.stderr)
        if status == 0:
            print(report.to_text())
    return status


if __name__ == "__main__":
    sys.exit(main())
