"""Command-line front end: `gk-verify <subcommand> FILE [flags]`.

Exit status: 0 when every selected check passes, 1 when a check fails,
2 on file, configuration, parse or evaluation errors.
"""
import argparse
import logging
import sys
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .config import load_config, setup_logging
from .covderiv import ALL_KINDS, CovKind
from .errors import DefinitionError, VerifyError
from .geodesics import GeodesicTester
from .geomap import MappingSpec, MappingVerifier, load_pair, render_pair
from .kahler import KahlerVerifier
from .report import CheckReport, Reporter, Residual
from .sampling import map_points, sample_points
from .space import Space, load_space
from .tensor import TensorField

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2

logger = logging.getLogger(__name__)


def _read(path: str, report: Optional[CheckReport] = None) -> str:
    with open(path, "rb") as f:
        data = f.read()
    if report is not None:
        report.add_input(path, data)
    return data.decode("utf-8")


def _settings(args: argparse.Namespace, config: Dict) -> Tuple[int, int, float, int]:
    sampling = config["sampling"]
    points = args.points if args.points is not None else int(sampling["points"])
    seed = args.seed if args.seed is not None else int(sampling["seed"])
    tolerance = args.tol if args.tol is not None else float(sampling["tolerance"])
    return points, seed, tolerance, int(sampling["workers"])


def _space_summary(space: Space, points: Sequence[np.ndarray], tolerance: float, workers: int) -> List[Residual]:
    def at(point: np.ndarray) -> Dict[str, float]:
        connection = space.connection_at(point)
        values = {
            "gamma": float(np.max(np.abs(connection.gamma))),
            "torsion": float(np.max(np.abs(connection.torsion))),
            "trace": float(np.max(np.abs(np.einsum("aia->i", connection.torsion)))),
        }
        if space.metric is not None:
            metric = space.metric_at(point)
            values["det"] = abs(metric.det)
            values["antisym"] = float(np.max(np.abs(metric.g_antisym)))
        return values

    samples = map_points(at, points, workers)

    def worst(key: str) -> float:
        return max((s[key] for s in samples), default=0.0)

    mode = "explicit connection" if space.has_explicit_connection else "metric-derived connection"
    gamma = Residual("max |Γ|", "Eq (6)", worst("gamma"), tolerance, informational=True)
    gamma.notes.append(f"N = {space.dimension}, {mode}")
    residuals = [
        gamma,
        Residual("max |torsion|", "Eq (6)", worst("torsion"), tolerance, informational=True),
        Residual("torsion trace", "Eq (16)", worst("trace"), tolerance, informational=True),
    ]
    if space.metric is not None:
        antisym = Residual("max |g∨| (antisymmetric part)", "Eq (2)", worst("antisym"), tolerance, informational=True)
        antisym.notes.append("symmetric metric" if antisym.value <= tolerance else "non-symmetric metric")
        residuals.insert(0, antisym)
        residuals.append(
            Residual(
                "min |det g_sym|",
                "Eq (2)",
                min((s["det"] for s in samples), default=0.0),
                1e-12,
                lower_bound=True,
            )
        )
    return residuals


def cmd_check_space(args: argparse.Namespace, config: Dict, report: CheckReport) -> None:
    space = load_space(_read(args.file, report), args.file)
    count, seed, tolerance, workers = _settings(args, config)
    points = sample_points(space.dimension, space.domain, count, seed, space.excludes)
    report.add(_space_summary(space, points, tolerance, workers), space.domain, count, seed)


def cmd_check_kahler(args: argparse.Namespace, config: Dict, report: CheckReport) -> None:
    space = load_space(_read(args.file, report), args.file)
    count, seed, tolerance, workers = _settings(args, config)
    points = sample_points(space.dimension, space.domain, count, seed, space.excludes)
    result = KahlerVerifier(space, tolerance, workers).run(points)
    report.add(result.residuals, space.domain, count, seed)


def _kinds(value: str) -> Sequence[CovKind]:
    return ALL_KINDS if value == "all" else (CovKind(int(value)),)


def cmd_check_mapping(args: argparse.Namespace, config: Dict, report: CheckReport) -> None:
    pair = load_pair(_read(args.file, report), args.file)
    count, seed, tolerance, workers = _settings(args, config)
    source = pair.source
    points = sample_points(source.dimension, source.domain, count, seed, source.excludes)
    residuals = MappingVerifier(pair, tolerance, workers).run(points, _kinds(args.kind), args.transpose_xi)
    report.add(residuals, source.domain, count, seed)


def cmd_geodesic_test(args: argparse.Namespace, config: Dict, report: CheckReport) -> None:
    pair = load_pair(_read(args.file, report), args.file)
    _, seed, _, workers = _settings(args, config)
    settings = dict(config["geodesics"])
    for key in ("curves", "steps", "step"):
        if getattr(args, key) is not None:
            settings[key] = getattr(args, key)
    tester = GeodesicTester(pair, settings, workers)
    results = tester.run(seed)
    report.add(tester.residuals(results), pair.source.domain, tester.curves, seed)


def _component_texts(items: Sequence[str], rank: int, dimension: int, flag: str) -> Dict[Tuple[int, ...], str]:
    texts: Dict[Tuple[int, ...], str] = {}
    for item in items or ():
        indices, sep, expression = item.partition("=")
        try:
            index = tuple(int(i) - 1 for i in indices.split(","))
        except ValueError:
            index = ()
        if not sep or len(index) != rank or not all(0 <= i < dimension for i in index):
            raise DefinitionError(f"{flag} {item!r}: expected {rank} indices in 1..{dimension} and '=<expr>'")
        texts[index] = expression.strip()
    return texts


def cmd_build_pair(args: argparse.Namespace, config: Dict, report: CheckReport) -> Optional[str]:
    base_text = _read(args.file, report)
    base = load_space(base_text, args.file)
    overlay_text = _read(args.target, report) if args.target else None
    n = base.dimension
    mapping = MappingSpec(
        psi=TensorField.from_texts(n, 0, 1, _component_texts(args.psi, 1, n, "--psi")),
        xi=TensorField.from_texts(n, 1, 2, _component_texts(args.xi, 3, n, "--xi")),
        direction="backward" if args.backward else "forward",
    )
    if args.backward:
        text = render_pair(mapping, source_text=overlay_text, target_text=base_text)
    else:
        text = render_pair(mapping, source_text=base_text, target_text=overlay_text)
    pair = load_pair(text, args.out or "<build-pair>")
    logger.info(f"Built pair {pair!r}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(text)
        logger.info(f"Pair written to {args.out}")
        return None
    return text


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML run configuration")
    common.add_argument("--points", type=int, default=None, help="sample points (default 50)")
    common.add_argument("--tol", type=float, default=None, help="residual tolerance (default 1e-9)")
    common.add_argument("--seed", type=int, default=None, help="sampling seed (default 0)")
    common.add_argument("--json", metavar="PATH", default=None, help="also write the machine report")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="gk-verify",
        description="Numerical verification of generalized Kähler spaces and their geodesic mappings",
    )
    parser.add_argument("--version", action="version", version=f"gk-verify {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-space", parents=[common], help="connection and torsion summary")
    p.add_argument("file")
    p.set_defaults(handler=cmd_check_space)

    p = sub.add_parser("check-kahler", parents=[common], help="generalized Kähler first-kind suite")
    p.add_argument("file")
    p.set_defaults(handler=cmd_check_kahler)

    p = sub.add_parser("check-mapping", parents=[common], help="geodesic mapping condition systems")
    p.add_argument("file")
    p.add_argument("--kind", choices=["1", "2", "3", "4", "all"], default="all")
    p.add_argument("--transpose-xi", action="store_true", help="debug: transpose one xi term's slots")
    p.set_defaults(handler=cmd_check_mapping)

    p = sub.add_parser("geodesic-test", parents=[common], help="geodesics-to-geodesics defect")
    p.add_argument("file")
    p.add_argument("--curves", type=int, default=None)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--step", type=float, default=None)
    p.set_defaults(handler=cmd_geodesic_test)

    p = sub.add_parser("build-pair", parents=[common], help="emit a pair file from a space and (psi, xi)")
    p.add_argument("file", help="space the mapping deforms")
    p.add_argument("--psi", action="append", metavar="I=EXPR", help="psi component, 1-based")
    p.add_argument("--xi", action="append", metavar="I,J,K=EXPR", help="xi component, 1-based")
    p.add_argument("--target", default=None, help="space file with the metric/structure overlay")
    p.add_argument("--backward", action="store_true", help="treat FILE as the target and deform it by (-psi, -xi)")
    p.add_argument("--out", default=None, help="write the pair here instead of stdout")
    p.set_defaults(handler=cmd_build_pair)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
    except VerifyError as e:
        print(f"❌ {e}", file=sys.stderr)
        return EXIT_ERROR
    setup_logging(config, verbose=args.verbose)

    report = CheckReport(command=args.command)
    reporter = Reporter()
    try:
        emitted = args.handler(args, config, report)
    except (VerifyError, OSError, UnicodeDecodeError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR

    if args.command == "build-pair":
        if emitted:
            sys.stdout.write(emitted)
        return EXIT_OK

    sys.stdout.write(reporter.emit_report(report, "human"))
    if args.json:
        try:
            reporter.write_json(report, args.json)
        except OSError as e:
            logger.error(f"cannot write {args.json}: {e}")
            return EXIT_ERROR
    reporter.log_summary(report)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED
