"""Command-line front end: bound, seesaw, sweep, tables, certify"""

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from locc_bounds import __version__
from locc_bounds.config import settings
from locc_bounds.models.bounds import BoundKind, BoundResult, Direction, HierarchyParams, Method
from locc_bounds.models.certificate import CertificateArray1R, CertificateSchemaError
from locc_bounds.models.ensemble import EnsembleValidationError, StateEnsemble
from locc_bounds.models.program import SolveStatus
from locc_bounds.models.strategy import OneRoundStrategy
from locc_bounds.schemas.record import RECORD_HEADER, SWEEP_HEADER, RunRecord
from locc_bounds.schemas.strategy import save_strategy
from locc_bounds.schemas.tables import TABLE_HEADER
from locc_bounds.services import certify
from locc_bounds.services.certify import certify_service
from locc_bounds.services.conic import conic_solver
from locc_bounds.services.ensembles import ensemble_service
from locc_bounds.services.hierarchies import HierarchyService, SizeCapExceeded, saturation_cutoff
from locc_bounds.services.linalg import swap_array
from locc_bounds.services.seesaw import SolverFailure, seesaw_service
from locc_bounds.services.tables import tables_service
from locc_bounds.utils.helpers import MethodItem, format_value, parse_ensemble, parse_method_list, parse_tau_grid

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
EXIT_CERTIFICATE_FAIL = 3
EXIT_USAGE = 64
EXIT_SCHEMA = 65

BOUND_METHODS = {"global": Method.GLOBAL, "ppt": Method.PPT, "1r": Method.ONEROUND, "na": Method.NONADAPTIVE}

LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>"
)


class UsageError(Exception):
    """A flag value that parses but makes no sense"""


class ArgumentParser(argparse.ArgumentParser):
    """argparse with the usage exit code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def configure_logging(level: Optional[str] = None) -> None:
    """stderr sink, plus a rotating file sink when LOCC_BOUNDS_LOG_FILE is set"""
    logger.remove()
    logger.add(
        sys.stderr,
        format=LOG_FORMAT,
        level=level or ("DEBUG" if settings.DEBUG else settings.LOCC_BOUNDS_LOG_LEVEL),
    )
    if settings.LOCC_BOUNDS_LOG_FILE:
        try:
            log_path = Path(settings.LOCC_BOUNDS_LOG_FILE)
            log_path.parent.mkdir(parents=True, exist_ok=True)
            logger.add(log_path, rotation="10 MB", retention=5, level="DEBUG")
        except (PermissionError, OSError) as e:
            logger.warning(f"Could not open log file, using stderr only: {e}")


def _ensemble(text: str) -> StateEnsemble:
    try:
        return parse_ensemble(text)
    except EnsembleValidationError:
        raise
    except ValueError as e:
        raise UsageError(str(e)) from e


def _frame(e: StateEnsemble, direction: Direction) -> StateEnsemble:
    return ensemble_service.swap_parties(e) if direction == Direction.B_TO_A else e


def _write_records(records: Sequence[RunRecord], header: List[str], fmt: str, out) -> None:
    if fmt == "json":
        for record in records:
            out.write(record.model_dump_json(exclude_none=True) + "\n")
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for record in records:
        writer.writerow(record.csv_row(header))


def _open_out(path: Optional[str]):
    return open(path, "w", newline="") if path else sys.stdout


# ---- bound ------------------------------------------------------------------

def cmd_bound(args) -> int:
    e = _ensemble(args.ensemble)
    method = BOUND_METHODS[args.method]
    params = HierarchyParams(args.m, args.k, Direction(args.direction)) if method in (Method.ONEROUND, Method.NONADAPTIVE) else None
    if args.dump_certificate and params is None:
        raise UsageError(f"--dump-certificate needs --method 1r or na, got {args.method}")

    hierarchy = HierarchyService(size_cap=args.size_cap)
    program = hierarchy.build(e, method, params)
    if args.dump_program:
        conic_solver.dump_program(program, args.dump_program)
    report = conic_solver.solve(program, args.eps)

    if report.status == SolveStatus.INFEASIBLE:
        logger.error(f"{program.name} is infeasible")
        return EXIT_INFEASIBLE
    if report.status != SolveStatus.OPTIMAL:
        logger.error(f"{program.name} ended with {report.status.value} (gap {report.gap:.2e})")
        return EXIT_ERROR

    result = BoundResult(
        value=report.primal_value, kind=BoundKind.UPPER, method=method, params=params,
        gap=report.gap, status=report.status, wall_time_s=report.wall_time_s,
    )
    if args.dump_certificate:
        certify_service.save_certificate(
            program.certificate(report), args.dump_certificate, program.measurement(report, original_order=False)
        )
    record = RunRecord.from_result(e.name, args.method, result)
    _write_records([record], RECORD_HEADER, args.format, sys.stdout)
    return EXIT_OK


# ---- seesaw -----------------------------------------------------------------

def _forward_certificate(e: StateEnsemble, strategy, k: int, path: str) -> None:
    measured = seesaw_service.strategy_measurement(e, strategy)
    if isinstance(strategy, OneRoundStrategy):
        certificate = certify.certificate_from_oneround(strategy, k)
        if strategy.direction == Direction.B_TO_A:
            measured = [swap_array(x, e.d_A, e.d_B) for x in measured]
    else:
        certificate = certify.certificate_from_nonadaptive(strategy, k)
    certify_service.save_certificate(certificate, path, measured)


def cmd_seesaw(args) -> int:
    e = _ensemble(args.ensemble)
    direction = Direction(args.direction)
    if args.variant == "1r":
        report = seesaw_service.run_oneround(
            e, args.m, args.restarts, args.max_iters, args.conv_tol, args.seed, direction,
        )
    else:
        if direction != Direction.A_TO_B:
            raise UsageError("the non-adaptive see-saw has no direction")
        report = seesaw_service.run_nonadaptive(
            e, args.m, args.m_b, args.restarts, args.max_iters, args.conv_tol, args.seed,
        )
    if report.failed:
        logger.warning(f"{report.failed} of {len(report.runs)} restarts failed")

    if args.dump_strategy:
        save_strategy(report.strategy, args.dump_strategy, report.result.value)
        logger.info(f"Wrote strategy to {args.dump_strategy}")
    if args.dump_certificate:
        _forward_certificate(e, report.strategy, args.k, args.dump_certificate)

    record = RunRecord.from_result(e.name, report.result.method.value, report.result, seed=args.seed)
    _write_records([record], RECORD_HEADER, args.format, sys.stdout)
    return EXIT_OK


# ---- sweep ------------------------------------------------------------------

def _sweep_point(args, tau: float, item: MethodItem, hierarchy: HierarchyService) -> List[RunRecord]:
    e = ensemble_service.bell_basis_family(args.delta * math.pi, tau, args.xi * math.pi)
    extra = {"tau": round(tau / math.pi, 12)}
    if args.with_tangle:
        extra["tangle"] = ensemble_service.tangle(e.states[0])

    if item.method == Method.ANALYTIC:
        rows = []
        for direction, fn in ((Direction.A_TO_B, certify.analytic_p_succ_AtoB), (Direction.B_TO_A, certify.analytic_p_succ_BtoA)):
            result = BoundResult(fn(tau), BoundKind.ANALYTIC, Method.ANALYTIC, HierarchyParams(2, 1, direction))
            rows.append(RunRecord.from_result(e.name, item.label, result, **extra))
        return rows

    direction = item.direction or Direction.A_TO_B
    if item.method in (Method.GLOBAL, Method.PPT):
        result = hierarchy.upper_bound(e, item.method, eps=args.eps)
    elif item.method in (Method.ONEROUND, Method.NONADAPTIVE):
        params = HierarchyParams(args.m, item.k or args.k, direction)
        result = hierarchy.upper_bound(e, item.method, params, args.eps)
    elif item.method == Method.SEESAW_ONEROUND:
        result, _ = seesaw_service.seesaw_oneround(
            e, args.m, args.restarts, seed=args.seed, direction=direction, workers=1
        )
    else:
        result, _ = seesaw_service.seesaw_nonadaptive(e, args.m, restarts=args.restarts, seed=args.seed, workers=1)

    if result.status != SolveStatus.OPTIMAL:
        raise SolverFailure(f"{item.name} at tau={tau:.6f}: {result.status.value}")
    return [RunRecord.from_result(e.name, item.label, result, seed=args.seed if item.method in (Method.SEESAW_ONEROUND, Method.SEESAW_NONADAPTIVE) else None, **extra)]


def cmd_sweep(args) -> int:
    taus = args.tau_grid
    items = args.methods
    cutoff = saturation_cutoff(2)
    if args.m > cutoff:
        logger.warning(f"m={args.m} exceeds the qubit saturation cutoff; using m={cutoff}")
        args.m = cutoff

    hierarchy = HierarchyService(size_cap=args.size_cap)
    jobs = [(tau, item) for tau in taus for item in items]
    workers = min(settings.LOCC_BOUNDS_THREADS, len(jobs))
    logger.info(f"Sweep: {len(taus)} angles x {len(items)} methods on {workers} workers")

    def run(job):
        tau, item = job
        try:
            return _sweep_point(args, tau, item, hierarchy), None
        except (SizeCapExceeded, SolverFailure, ValueError) as e:
            logger.error(f"Sweep point {item.name} at tau={tau:.6f} failed: {e}")
            return [], e

    if workers <= 1:
        outcomes = [run(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run, jobs))

    header = SWEEP_HEADER + (["tangle"] if args.with_tangle else [])
    records = [record for rows, _ in outcomes for record in rows]
    out = _open_out(args.out)
    try:
        _write_records(records, header, "csv", out)
    finally:
        if out is not sys.stdout:
            out.close()

    failures = [err for _, err in outcomes if err is not None]
    if failures:
        logger.error(f"{len(failures)} of {len(jobs)} sweep points failed")
        return EXIT_ERROR
    return EXIT_OK


# ---- tables -----------------------------------------------------------------

def _render_table(report) -> str:
    columns = list(dict.fromkeys(c.column for c in report.cells))
    buf = io.StringIO()
    buf.write(f"{report.which} (k={report.k})\n")
    buf.write("m  " + "".join(f"{name:>22}" for name in columns) + "\n")
    for m in sorted({c.m for c in report.cells}):
        row = {c.column: c for c in report.cells if c.m == m}
        cells = "".join(f"{format_value(row[n].value, 4) + ' ' + row[n].verdict:>22}" for n in columns)
        buf.write(f"{m:<3}{cells}\n")
    for name, value in report.reference_bounds.items():
        buf.write(f"{name}: {value:.6f}\n")
    return buf.getvalue()


def cmd_tables(args) -> int:
    report = tables_service.reproduce(
        args.which, k=args.k, restarts=args.restarts, seed=args.seed, size_cap=args.size_cap, eps=args.eps,
    )
    sys.stderr.write(_render_table(report))
    if report.chain_violations:
        sys.stderr.write("ordering chain violated:\n" + "\n".join(report.chain_violations) + "\n")
    else:
        sys.stderr.write("ordering chain holds\n")

    out = _open_out(args.out)
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(TABLE_HEADER)
        for cell in report.cells:
            writer.writerow(cell.csv_row())
    finally:
        if out is not sys.stdout:
            out.close()

    failed = [c for c in report.cells if c.verdict not in ("ok", "refused")]
    return EXIT_ERROR if failed or report.chain_violations else EXIT_OK


# ---- certify ----------------------------------------------------------------

def cmd_certify(args) -> int:
    e = _frame(_ensemble(args.ensemble), Direction(args.direction))
    certificate, claimed = certify_service.load_certificate(args.certificate)
    is_1r = isinstance(certificate, CertificateArray1R)
    if is_1r != (args.variant == "1r"):
        raise CertificateSchemaError(f"{args.certificate} is not a {args.variant} certificate")
    check = certify_service.check_1r_certificate if is_1r else certify_service.check_na_certificate
    report = check(certificate, claimed, args.tol, ensemble=e)
    sys.stdout.write(report.model_dump_json(indent=1) + "\n")
    return EXIT_OK if report.passed else EXIT_CERTIFICATE_FAIL


# ---- parser -----------------------------------------------------------------

def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise ValueError(f"expected a positive integer, got {text}")
    return value


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="locc-bounds", description="Bounds on LOCC state discrimination")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="Override LOCC_BOUNDS_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    ensemble_help = "bell:δ,τ,ξ (units of π) | trine | ququart | file:PATH"

    p = sub.add_parser("bound", help="Upper bound from the global, PPT, 1R or NA program")
    p.add_argument("--ensemble", required=True, help=ensemble_help)
    p.add_argument("--method", required=True, choices=sorted(BOUND_METHODS))
    p.add_argument("--m", type=_positive_int, default=2)
    p.add_argument("--k", type=_positive_int, default=1)
    p.add_argument("--direction", choices=["ab", "ba"], default="ab")
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.add_argument("--size-cap", type=_positive_int, default=None)
    p.add_argument("--dump-program", metavar="PATH")
    p.add_argument("--dump-certificate", metavar="PATH")
    p.set_defaults(handler=cmd_bound)

    p = sub.add_parser("seesaw", help="Lower bound from the see-saw heuristic")
    p.add_argument("--ensemble", required=True, help=ensemble_help)
    p.add_argument("--variant", choices=["1r", "na"], default="1r")
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--m-b", type=_positive_int, default=None, help="Bob's outcome count for na (default d_B^2)")
    p.add_argument("--direction", choices=["ab", "ba"], default="ab")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--max-iters", type=_positive_int, default=None)
    p.add_argument("--conv-tol", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=_positive_int, default=1, help="Level of the dumped certificate")
    p.add_argument("--format", choices=["csv", "json"], default="json")
    p.add_argument("--dump-strategy", metavar="PATH")
    p.add_argument("--dump-certificate", metavar="PATH")
    p.set_defaults(handler=cmd_seesaw)

    p = sub.add_parser("sweep", help="Bell-basis family sweep over τ, CSV output")
    p.add_argument("--tau-grid", required=True, type=parse_tau_grid, help="START:STOP:COUNT in units of π")
    p.add_argument("--methods", required=True, type=parse_method_list, help="e.g. ppt,1r:ba,1r:ab@2,analytic,seesaw:na")
    p.add_argument("--m", type=_positive_int, default=2)
    p.add_argument("--k", type=_positive_int, default=1)
    p.add_argument("--delta", type=float, default=0.25, help="δ in units of π")
    p.add_argument("--xi", type=float, default=0.5, help="ξ in units of π")
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--size-cap", type=_positive_int, default=None)
    p.add_argument("--with-tangle", action="store_true")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("tables", help="Recompute the reference tables")
    p.add_argument("--which", required=True, choices=["trine", "ququart"])
    p.add_argument("--k", type=_positive_int, default=None)
    p.add_argument("--restarts", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--size-cap", type=_positive_int, default=None)
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(handler=cmd_tables)

    p = sub.add_parser("certify", help="Check a certificate file")
    p.add_argument("--certificate", required=True, metavar="PATH")
    p.add_argument("--ensemble", required=True, help=ensemble_help)
    p.add_argument("--variant", required=True, choices=["1r", "na"])
    p.add_argument("--direction", choices=["ab", "ba"], default="ab")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(handler=cmd_certify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse, dispatch and map exceptions to exit codes"""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.handler(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except (EnsembleValidationError, CertificateSchemaError, ValidationError) as e:
        logger.error(f"{args.command}: {e}")
        return EXIT_SCHEMA
    except SizeCapExceeded as e:
        logger.error(f"{args.command}: {e} (raise it with --size-cap)")
        return EXIT_ERROR
    except (SolverFailure, ValueError, RuntimeError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR
