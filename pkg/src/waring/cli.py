"""Batch command line: parse a run configuration, dispatch it and write artifacts."""

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from waring import __app_name__, __version__
from waring.artifacts import ArtifactWriter, read_count_column
from waring.baselines import nb_limit_avoidance, nb_limit_curve, poisson_limit_curve
from waring.diagnostics import (
    empirical_summary,
    ergodicity_diagnostic,
    orderliness_limit,
    orderliness_table,
)
from waring.distribution import (
    GwdParams,
    sample_ugwd,
    ugwd_dispersion_index,
    ugwd_moments,
    ugwd_pmf_table,
)
from waring.errors import (
    InfiniteMomentError,
    UsageError,
    ValidationError,
    WaringError,
)
from waring.fitting import fit_moments
from waring.geometry import Backend, QuadratGrid, Window
from waring.marked import MarkedGrid, simulate_marked_counts
from waring.process import (
    avoidance_probability,
    invert_avoidance,
    moment_measures,
    simulate_counts_conditional,
    simulate_counts_cox,
    simulate_points,
    simulate_replicates,
)
from waring.utils import (
    DEFAULT_RESOLUTION,
    compensated_cumsum,
    parse_float_list,
    parse_int_list,
    parse_volumes,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_OPERATION = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

SEED_MAX = 2**64 - 1
GWD_ACTIONS = {
    ("dist", "pmf"),
    ("dist", "cdf"),
    ("dist", "moments"),
    ("dist", "sample"),
    ("process", "simulate"),
    ("process", "points"),
    ("process", "avoidance"),
    ("process", "invert"),
    ("process", "moments"),
    ("marks", "simulate"),
    ("diagnose", "orderliness"),
    ("diagnose", "ergodicity"),
    ("diagnose", "dispersion"),
}
SIMULATORS = {Backend.COX: simulate_counts_cox, Backend.CONDITIONAL: simulate_counts_conditional}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


@dataclass
class RunConfig:
    """Everything a run needs; built from argv only."""

    command: str
    action: str | None
    params: GwdParams | None
    grid: QuadratGrid | None
    seed: int
    replicates: int
    output_dir: Path
    format: str = "csv"
    workers: int = 1
    verbose: bool = False
    options: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0 <= self.seed <= SEED_MAX:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.replicates < 1:
            raise ValidationError(f"replicates must be >= 1, got {self.replicates}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")

    def to_dict(self) -> dict[str, Any]:
        """Argv-equivalent record stored in report.json."""
        return {
            "command": self.command,
            "action": self.action,
            "params": self.params.to_dict() if self.params else None,
            "grid": self.grid.to_dict() if self.grid else None,
            "seed": self.seed,
            "replicates": self.replicates,
            "format": self.format,
            "options": {k: v for k, v in sorted(self.options.items())},
        }


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="Master seed (default: 0)")
    parser.add_argument("--replicates", type=int, default=1, help="Number of replicates")
    parser.add_argument("--out", type=Path, default=Path("out"), help="Output directory")
    parser.add_argument("--format", choices=["csv", "json"], default="csv", help="Table format")
    parser.add_argument("--workers", type=int, default=1, help="Processes for replicates")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")


def _add_gwd(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--a", type=float, required=True, help="Shape a > 0")
    parser.add_argument("--k", type=float, required=True, help="Shape k > 0")
    parser.add_argument("--rho", type=float, required=True, help="Tail parameter rho > 0")


def _add_grid(parser: argparse.ArgumentParser, cells: str = "8,8") -> None:
    parser.add_argument("--window", default="0,0,1,1", help="lo_0,..,lo_d,hi_0,..,hi_d")
    parser.add_argument("--cells", default=cells, help="Cells per axis, e.g. 8,8")
    parser.add_argument("--density", type=float, default=1.0, help="Measure density")
    parser.add_argument(
        "--backend", choices=[b.value for b in SIMULATORS], default="cox", help="Simulator"
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="waring", description="Generalized Waring distributions and processes")
    parser.add_argument("--version", action="version", version=f"{__app_name__} {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    dist = commands.add_parser("dist", help="Univariate distribution")
    dist_actions = dist.add_subparsers(dest="action", required=True, parser_class=_Parser)
    pmf = dist_actions.add_parser("pmf")
    pmf.add_argument("--max-n", type=int, default=None, help="Largest n (default: adaptive)")
    cdf = dist_actions.add_parser("cdf")
    cdf.add_argument("--max-n", type=int, required=True, help="Largest n")
    moments = dist_actions.add_parser("moments")
    moments.add_argument("--orders", default="1,2,3", help="Factorial moment orders")
    sample = dist_actions.add_parser("sample")
    sample.add_argument("--size", type=int, default=1000, help="Number of draws")
    for sub in (pmf, cdf, moments, sample):
        _add_gwd(sub)
        _add_common(sub)

    process = commands.add_parser("process", help="Point process on a window")
    process_actions = process.add_subparsers(dest="action", required=True, parser_class=_Parser)
    simulate = process_actions.add_parser("simulate")
    _add_grid(simulate)
    points = process_actions.add_parser("points")
    points.add_argument("--window", default="0,0,1,1", help="lo_0,..,lo_d,hi_0,..,hi_d")
    points.add_argument("--density", type=float, default=1.0, help="Measure density")
    points.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION, help="Cells/axis")
    avoidance = process_actions.add_parser("avoidance")
    avoidance.add_argument("--volumes", required=True, help="Comma list or 1e-1..1e-8 range")
    invert = process_actions.add_parser("invert")
    invert.add_argument("--p0", required=True, help="Avoidance probabilities, comma list")
    process_moments = process_actions.add_parser("moments")
    process_moments.add_argument("--volumes", required=True, help="Volumes of disjoint sets")
    process_moments.add_argument("--orders", required=True, help="Order per set")
    for sub in (simulate, points, avoidance, invert, process_moments):
        _add_gwd(sub)
        _add_common(sub)

    marks = commands.add_parser("marks", help="Marked process")
    marks_actions = marks.add_subparsers(dest="action", required=True, parser_class=_Parser)
    marked = marks_actions.add_parser("simulate")
    marked.add_argument("--marks", type=int, required=True, help="Number of marks m")
    _add_grid(marked)
    _add_gwd(marked)
    _add_common(marked)

    limits = commands.add_parser("limits", help="Limit-case convergence curves")
    limits_actions = limits.add_subparsers(dest="action", required=True, parser_class=_Parser)
    nb = limits_actions.add_parser("nb")
    nb.add_argument("--a", type=float, required=True, help="Shape a")
    nb.add_argument("--c", type=float, required=True, help="rho = c·k")
    nb.add_argument("--volume", type=float, default=1.0, help="Set volume")
    nb.add_argument("--k", required=True, help="Increasing k values, comma list")
    poisson = limits_actions.add_parser("poisson")
    poisson.add_argument("--lambda", dest="lam", type=float, required=True, help="Intensity")
    poisson.add_argument("--volume", type=float, default=1.0, help="Set volume")
    poisson.add_argument("--c", required=True, help="Increasing c values, comma list")
    for sub in (nb, poisson):
        _add_common(sub)

    fit = commands.add_parser("fit", help="Moment fit of (a, k, rho)")
    fit.add_argument("--input", type=Path, default=None, help="CSV with a 'count' column")
    fit.add_argument("--a", type=float, default=None, help="Generating a (no --input)")
    fit.add_argument("--k", type=float, default=None, help="Generating k (no --input)")
    fit.add_argument("--rho", type=float, default=None, help="Generating rho (no --input)")
    fit.add_argument("--volume", type=float, default=1.0, help="Volume of each count's set")
    fit.add_argument("--size", type=int, default=1_000_000, help="Generated sample size")
    _add_common(fit)

    diagnose = commands.add_parser("diagnose", help="Diagnostics")
    diag_actions = diagnose.add_subparsers(dest="action", required=True, parser_class=_Parser)
    order = diag_actions.add_parser("orderliness")
    order.add_argument("--volumes", default="1e-1..1e-8", help="Comma list or decade range")
    ergodic = diag_actions.add_parser("ergodicity")
    ergodic.add_argument("--volumes", default="1,10,100,1000", help="Increasing volumes")
    dispersion = diag_actions.add_parser("dispersion")
    _add_grid(dispersion, cells="4,4")
    for sub in (order, ergodic, dispersion):
        _add_gwd(sub)
        _add_common(sub)
    return parser


_COMMON_KEYS = {"command", "action", "seed", "replicates", "out", "format", "workers", "verbose"}


def parse_config(argv: Sequence[str]) -> RunConfig:
    """
    Parse argv into a RunConfig.

    Raises:
        UsageError: unknown flags, missing or malformed values.
        WaringError: parameters or grid outside their domain (ValidationError and
            the other DomainError kinds).
    """
    args = build_parser().parse_args(list(argv))
    action = getattr(args, "action", None)
    params = None
    if (args.command, action) in GWD_ACTIONS or (args.command == "fit" and args.input is None):
        if None in (getattr(args, "a", None), getattr(args, "k", None), args.rho):
            raise UsageError("--a, --k and --rho are required unless --input is given")
        params = GwdParams(a=args.a, k=args.k, rho=args.rho)
    grid = None
    if hasattr(args, "cells"):
        window = Window.from_flat(parse_float_list(args.window), density=args.density)
        grid = QuadratGrid(window, tuple(parse_int_list(args.cells)))
    options = {
        key: (str(value) if isinstance(value, Path) else value)
        for key, value in vars(args).items()
        if key not in _COMMON_KEYS
    }
    return RunConfig(
        command=args.command,
        action=action,
        params=params,
        grid=grid,
        seed=args.seed,
        replicates=args.replicates,
        output_dir=args.out,
        format=args.format,
        workers=args.workers,
        verbose=args.verbose,
        options=options,
    )


def _emit_table(
    config: RunConfig,
    writer: ArtifactWriter,
    stem: str,
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
) -> None:
    if config.format == "json":
        writer.write_json(f"{stem}.json", {"rows": [dict(zip(header, row)) for row in rows]})
    else:
        writer.write_table(f"{stem}.csv", header, rows)


def _require_params(config: RunConfig) -> GwdParams:
    if config.params is None:
        raise UsageError(f"{config.command} {config.action} needs --a, --k and --rho")
    return config.params


def _dist_pmf(config: RunConfig, writer: ArtifactWriter) -> None:
    table = ugwd_pmf_table(_require_params(config), max_n=config.options["max_n"])
    _emit_table(config, writer, "pmf", ["n", "probability"], table.to_pairs())


def _dist_cdf(config: RunConfig, writer: ArtifactWriter) -> None:
    max_n = config.options["max_n"]
    values = ugwd_pmf_table(_require_params(config), max_n=max_n).values
    running = np.minimum(compensated_cumsum(values), 1.0)
    _emit_table(config, writer, "cdf", ["n", "cdf"], [(n, float(c)) for n, c in enumerate(running)])


def _finite_or_label(compute: Callable[[], float]) -> float | str:
    try:
        return compute()
    except InfiniteMomentError:
        return "infinite"


def _dist_moments(config: RunConfig, writer: ArtifactWriter) -> None:
    params = _require_params(config)
    moments = ugwd_moments(params)
    orders = parse_int_list(config.options["orders"])
    writer.write_json(
        "moments.json",
        {
            "params": params.to_dict(),
            "mean": _finite_or_label(lambda: moments.mean),
            "variance": _finite_or_label(lambda: moments.variance),
            "dispersion_index": _finite_or_label(lambda: ugwd_dispersion_index(params)),
            "factorial": {
                str(r): _finite_or_label(lambda r=r: moments.factorial(r)) for r in orders
            },
        },
    )


def _dist_sample(config: RunConfig, writer: ArtifactWriter) -> None:
    size = config.options["size"]
    if size < 1:
        raise ValidationError(f"size must be >= 1, got {size}")
    draws = sample_ugwd(_require_params(config), config.seed, size=size)
    _emit_table(config, writer, "samples", ["index", "value"], list(enumerate(draws.tolist())))


def _process_simulate(config: RunConfig, writer: ArtifactWriter) -> None:
    params = _require_params(config)
    assert config.grid is not None
    simulator = SIMULATORS[Backend(config.options["backend"])]
    fields = simulate_replicates(
        simulator, params, config.grid, config.replicates, config.seed, config.workers
    )
    if len(fields) == 1:
        writer.write_count_field("field", fields[0])
        return
    width = len(str(len(fields) - 1))
    for f in fields:
        writer.write_count_field(f"field_{f.meta.replicate:0{width}d}", f)
    writer.write_json("summary.json", asdict(empirical_summary(fields)))


def _process_points(config: RunConfig, writer: ArtifactWriter) -> None:
    window = Window.from_flat(
        parse_float_list(config.options["window"]), density=config.options["density"]
    )
    pattern = simulate_points(
        _require_params(config), window, config.options["resolution"], config.seed
    )
    writer.write_point_pattern("points", pattern)


def _process_avoidance(config: RunConfig, writer: ArtifactWriter) -> None:
    params = _require_params(config)
    volumes = parse_volumes(config.options["volumes"])
    rows = [(v, avoidance_probability(params, v)) for v in volumes]
    _emit_table(config, writer, "avoidance", ["volume", "p0"], rows)


def _process_invert(config: RunConfig, writer: ArtifactWriter) -> None:
    params = _require_params(config)
    rows = [(p0, invert_avoidance(params, p0)) for p0 in parse_float_list(config.options["p0"])]
    _emit_table(config, writer, "invert", ["p0", "volume"], rows)


def _process_moments(config: RunConfig, writer: ArtifactWriter) -> None:
    params = _require_params(config)
    volumes = parse_float_list(config.options["volumes"])
    orders = parse_int_list(config.options["orders"])
    value = moment_measures(params, volumes, orders)
    writer.write_json(
        "moment_measure.json",
        {"params": params.to_dict(), "volumes": volumes, "orders": orders, "value": value},
    )


def _marks_simulate(config: RunConfig, writer: ArtifactWriter) -> None:
    assert config.grid is not None
    marked_grid = MarkedGrid(config.grid, config.options["marks"])
    backend = Backend(config.options["backend"])
    field = simulate_marked_counts(_require_params(config), marked_grid, config.seed, backend)
    writer.write_marked_field("marked", field)


def _limits_nb(config: RunConfig, writer: ArtifactWriter) -> None:
    a, c, volume = config.options["a"], config.options["c"], config.options["volume"]
    k_values = parse_float_list(config.options["k"])
    rows = nb_limit_curve(a, c, volume, k_values)
    _emit_table(
        config, writer, "nb_limit", ["param", "tv_distance"],
        [(r.param, r.tv_distance) for r in rows],
    )
    avoidance = [(k, *nb_limit_avoidance(a, c, volume, k)) for k in k_values]
    _emit_table(config, writer, "nb_avoidance", ["k", "p0", "limit"], avoidance)


def _limits_poisson(config: RunConfig, writer: ArtifactWriter) -> None:
    c_values = parse_float_list(config.options["c"])
    rows = poisson_limit_curve(config.options["lam"], config.options["volume"], c_values)
    _emit_table(
        config, writer, "poisson_limit", ["param", "tv_distance"],
        [(r.param, r.tv_distance) for r in rows],
    )


def _fit(config: RunConfig, writer: ArtifactWriter) -> None:
    volume = config.options["volume"]
    source: dict[str, Any]
    if config.options["input"] is not None:
        counts = read_count_column(Path(config.options["input"]))
        source = {"input": config.options["input"]}
    else:
        params = _require_params(config)
        shape_params = params.with_shape(params.k * volume)
        counts = sample_ugwd(shape_params, config.seed, size=config.options["size"])
        source = {"generated": params.to_dict(), "seed": config.seed}
    result = fit_moments(counts, volume)
    writer.write_json("fit.json", {"source": source, "fit": result.to_dict()})


def _diagnose_orderliness(config: RunConfig, writer: ArtifactWriter) -> None:
    params = _require_params(config)
    rows = orderliness_table(params, parse_volumes(config.options["volumes"]))
    _emit_table(
        config, writer, "orderliness", ["volume", "ratio", "printed_atom_limit"],
        [(r.volume, r.ratio, r.printed_atom_limit) for r in rows],
    )
    writer.write_json("orderliness_limit.json", {"small_volume_limit": orderliness_limit(params)})


def _diagnose_ergodicity(config: RunConfig, writer: ArtifactWriter) -> None:
    volumes = parse_volumes(config.options["volumes"])
    rows = ergodicity_diagnostic(_require_params(config), volumes, config.replicates, config.seed)
    header = [
        "volume", "mean", "variance", "intensity", "theory_variance",
        "poisson_mean", "poisson_variance",
    ]
    table = [[getattr(r, h) for h in header] for r in rows]
    _emit_table(config, writer, "ergodicity", header, table)


def _diagnose_dispersion(config: RunConfig, writer: ArtifactWriter) -> None:
    params = _require_params(config)
    assert config.grid is not None
    simulator = SIMULATORS[Backend(config.options["backend"])]
    fields = simulate_replicates(
        simulator, params, config.grid, config.replicates, config.seed, config.workers
    )
    summary = asdict(empirical_summary(fields))
    theory = _finite_or_label(
        lambda: ugwd_dispersion_index(params.with_shape(params.k * config.grid.cell_volume))
    )
    writer.write_json("dispersion.json", {"empirical": summary, "theory_dispersion_index": theory})


HANDLERS: dict[tuple[str, str | None], Callable[[RunConfig, ArtifactWriter], None]] = {
    ("dist", "pmf"): _dist_pmf,
    ("dist", "cdf"): _dist_cdf,
    ("dist", "moments"): _dist_moments,
    ("dist", "sample"): _dist_sample,
    ("process", "simulate"): _process_simulate,
    ("process", "points"): _process_points,
    ("process", "avoidance"): _process_avoidance,
    ("process", "invert"): _process_invert,
    ("process", "moments"): _process_moments,
    ("marks", "simulate"): _marks_simulate,
    ("limits", "nb"): _limits_nb,
    ("limits", "poisson"): _limits_poisson,
    ("fit", None): _fit,
    ("diagnose", "orderliness"): _diagnose_orderliness,
    ("diagnose", "ergodicity"): _diagnose_ergodicity,
    ("diagnose", "dispersion"): _diagnose_dispersion,
}


def _error_record(e: Exception) -> dict[str, str]:
    return {"type": type(e).__name__, "message": str(e)}


def run(config: RunConfig) -> int:
    """
    Execute a parsed configuration and write report.json.

    Returns:
        0 on success, 1 for an operation error (recorded in the report), 3 for
        a validation error, 4 when artifacts cannot be written.
    """
    writer = ArtifactWriter(config.output_dir)
    handler = HANDLERS[(config.command, config.action)]
    try:
        try:
            handler(config, writer)
        except ValidationError as e:
            logger.error("%s", e)
            writer.write_report(config.to_dict(), "invalid", _error_record(e))
            return EXIT_VALIDATION
        except (WaringError, ArithmeticError, ValueError) as e:
            logger.error("%s", e)
            writer.write_report(config.to_dict(), "error", _error_record(e))
            return EXIT_OPERATION
        writer.write_report(config.to_dict(), "ok")
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_IO
    return EXIT_OK


def main(argv: Sequence[str]) -> int:
    try:
        config = parse_config(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except WaringError as e:
        print(f"waring: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    logging.basicConfig(
        level=logging.DEBUG if config.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return run(config)
