"""
Command-line front end: configuration, study orchestration and table emission.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, Optional, Sequence

from nsfem import __version__
from nsfem.core.config import settings
from nsfem.core.errors import ConfigError, DomainError, StudyError
from nsfem.models.enums import ConvectiveMode, ElementPair, OutputFormat, parse_enum
from nsfem.models.models import NewtonConfig, StudyConfig
from nsfem.services.newton_service import configure_iteration_log
from nsfem.services.report_persistence import report_persistence
from nsfem.services.study_service import run_study

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_SOLVER_FAILURE = 1
EXIT_USAGE = 2
EXIT_IO = 3

# config-file key -> converter
STUDY_KEYS = {
    "p": float,
    "delta": float,
    "nu0": float,
    "element": lambda raw: parse_enum(ElementPair, raw),
    "convective": lambda raw: parse_enum(ConvectiveMode, raw),
    "levels": int,
    "beta": float,
    "out": str,
    "format": lambda raw: parse_enum(OutputFormat, raw),
    "full_tables": lambda raw: _parse_bool(raw),
    "verbose": lambda raw: _parse_bool(raw),
}
NEWTON_KEYS = {
    "abs_tol": float,
    "max_iters": int,
    "max_halvings": int,
    "continuation_start": float,
    "continuation_step": float,
}


def _parse_bool(raw: str) -> bool:
    lower = str(raw).strip().lower()
    if lower in ("1", "true", "yes", "on"):
        return True
    if lower in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: '{raw}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsfem",
        description="Convergence studies for generalized Navier-Stokes flows with (p, delta)-structure",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one convergence study and emit its table")
    run_p.add_argument("--config", type=Path, help="plain-text file of `key = value` lines")
    # None marks "not given" so file values survive
    run_p.add_argument("--p", type=float)
    run_p.add_argument("--delta", type=float)
    run_p.add_argument("--nu0", type=float)
    run_p.add_argument("--element", help="br1 | p2p0 | ccr")
    run_p.add_argument("--convective", help="reconstruction | temam | none")
    run_p.add_argument("--levels", type=int, help="compute mesh levels 0..LEVELS")
    run_p.add_argument("--beta", type=float)
    run_p.add_argument("--out", help="output file; stdout when omitted")
    run_p.add_argument("--format", dest="format", help="csv | md | parquet")
    run_p.add_argument("--full-tables", dest="full_tables", action="store_const", const=True)
    run_p.add_argument("--verbose", action="store_const", const=True)

    newton = run_p.add_argument_group("newton overrides")
    newton.add_argument("--abs-tol", dest="abs_tol", type=float)
    newton.add_argument("--max-iters", dest="max_iters", type=int)
    newton.add_argument("--max-halvings", dest="max_halvings", type=int)
    newton.add_argument("--continuation-start", dest="continuation_start", type=float)
    newton.add_argument("--continuation-step", dest="continuation_step", type=float)
    return parser


def read_config_file(path: Path) -> Dict[str, str]:
    """Raw `key = value` pairs; blank lines and `#` comments are skipped."""
    values: Dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected `key = value`")
        key, raw = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in STUDY_KEYS and key not in NEWTON_KEYS:
            raise ConfigError(f"{path}:{number}: unknown key '{key}'")
        values[key] = raw
    return values


def _convert(key: str, raw):
    converter = STUDY_KEYS.get(key) or NEWTON_KEYS[key]
    try:
        return converter(raw)
    except ValueError as exc:
        raise ConfigError(f"invalid value for {key}: {exc}") from exc


def parse_config(args: argparse.Namespace, file: Optional[Path] = None) -> StudyConfig:
    """Settings defaults, then file values, then command-line flags."""
    values = {}
    if file is not None:
        values.update({key: _convert(key, raw) for key, raw in read_config_file(file).items()})
    for key in list(STUDY_KEYS) + list(NEWTON_KEYS):
        given = getattr(args, key, None)
        if given is not None:
            values[key] = _convert(key, given) if isinstance(given, str) else given

    if "p" not in values:
        raise ConfigError("--p is required")
    verbose = bool(values.get("verbose", False))
    newton_values = {key: values[key] for key in NEWTON_KEYS if key in values}
    try:
        newton = NewtonConfig(verbose=verbose, **newton_values)
        return StudyConfig(
            p=values["p"],
            delta=values.get("delta", settings.DEFAULT_DELTA),
            nu0=values.get("nu0", settings.DEFAULT_NU0),
            element=values.get("element", ElementPair.CCR_P1DG),
            convective=values.get("convective", ConvectiveMode.RECONSTRUCTION),
            levels=values.get("levels", settings.MAX_CI_LEVEL),
            beta=values.get("beta", settings.DEFAULT_BETA),
            out=values.get("out"),
            fmt=values.get("format", OutputFormat.CSV),
            full_tables=bool(values.get("full_tables", False)),
            verbose=verbose,
            newton=newton,
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc


def default_output_path(config: StudyConfig) -> Path:
    name = f"study_{config.element.value}_{config.convective.value}_p{config.p:g}.{config.fmt.value}"
    return Path(settings.OUTPUT_DIR) / name


def run(config: StudyConfig) -> int:
    """Run the study and emit its table; returns the process exit code."""
    if config.convective is ConvectiveMode.TEMAM and not config.temam_admissible:
        logger.warning(
            "p = %g is below 4/3, outside the admissible range p >= 2d/(d+1) of the Temam form",
            config.p,
        )
    try:
        report = run_study(config)
    except StudyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE

    try:
        if config.out is None and config.fmt is not OutputFormat.PARQUET:
            sys.stdout.write(report_persistence.render(report, config.fmt))
        else:
            path = Path(config.out) if config.out is not None else default_output_path(config)
            report_persistence.write(report, path, config.fmt)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = parse_config(args, args.config)
    except ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.INFO if config.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if config.verbose:
        configure_iteration_log(sys.stderr)
    logger.info("Starting study: p=%g element=%s convective=%s levels=0..%d",
                config.p, config.element.value, config.convective.value, config.levels)
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
