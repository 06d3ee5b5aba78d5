import json
import logging
from pathlib import Path
from typing import Optional
import click
from app.dependencies import Settings, configure_logging, get_settings
from app.errors import INLSError
from app.experiments import COMMANDS, write_outputs
from app.schemas import parse_rational

logger = logging.getLogger("app.cli")

# Settings that seed a command config when set in the environment
SETTINGS_FIELDS = {
    "GRID_POINTS": "points",
    "GRID_HALF_LENGTH": "half_length",
    "BLOWUP_FACTOR": "blowup_factor",
    "PICARD_MAX_ITER": "max_iter",
    "PICARD_TOL": "tol",
    "SAMPLE_MAX_DENOMINATOR": "max_denominator",
    "SAMPLE_MAX_RESAMPLES": "max_resamples",
    "INEQUALITY_RTOL": "rtol",
    "WORKERS": "workers",
}

# Subcommands that exit 1 when a verdict fails
GATED_COMMANDS = ("admissible", "verify")


class RationalParamType(click.ParamType):
    """
    Exact rational given as "p/q", an integer or a decimal.
    """

    name = "rational"

    def convert(self, value, param, ctx):
        try:
            return parse_rational(value)
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


class TripleParamType(click.ParamType):
    """
    Pair "1/r,gamma" of rationals; 1/q follows from the scaling relation.
    """

    name = "1/r,gamma"

    def convert(self, value, param, ctx):
        if isinstance(value, (list, tuple)):
            return list(value)
        parts = value.split(",")
        if len(parts) != 2:
            self.fail(f"Expected '1/r,gamma', got {value!r}", param, ctx)
        try:
            return [parse_rational(part) for part in parts]
        except ValueError as exc:
            self.fail(str(exc), param, ctx)


RATIONAL = RationalParamType()
TRIPLE = TripleParamType()


def resolve_config(
    name: str,
    config_path: Optional[str],
    overrides: dict,
    settings: Settings,
):
    """
    Resolve a command config: environment settings, then the JSON file,
    then explicit flags.

    :param name: subcommand name
    :param config_path: optional JSON file of config fields
    :param overrides: flag values; None and empty tuples are ignored
    :param settings: Settings

    :returns: the command's pydantic config

    :raises: ValueError on malformed JSON or invalid fields.
    """
    model, _ = COMMANDS[name]
    values = {}
    for key, field in SETTINGS_FIELDS.items():
        if key not in settings.__fields_set__ or field not in model.__fields__:
            continue
        if isinstance(model.__fields__[field].default, list):
            continue
        values[field] = getattr(settings, key)
    if config_path:
        loaded = json.loads(Path(config_path).read_text())
        if not isinstance(loaded, dict):
            raise ValueError(f"{config_path} does not hold a JSON object")
        values.update(loaded)
    for field, value in overrides.items():
        if value is None or value == ():
            continue
        values[field] = list(value) if isinstance(value, tuple) else value
    return model(**values)


def run_command(name: str, config_path, out, overrides: dict):
    """
    Resolve, run and write one subcommand, then set the exit code.
    """
    settings = get_settings()
    configure_logging(settings)
    _, command = COMMANDS[name]
    try:
        config = resolve_config(name, config_path, overrides, settings)
        logger.info("Running %s", name)
        output = command(config)
    except INLSError as exc:
        raise click.ClickException(str(exc))
    except ValueError as exc:
        raise click.UsageError(str(exc))

    out_dir = Path(out) if out else Path(settings.OUTPUT_DIR) / name
    path = write_outputs(output, out_dir)
    report = output.report
    click.echo(f"Report written to {path}")
    for key, passed in sorted(report.verdict.items()):
        click.echo(f"  {key}: {'pass' if passed else 'FAIL'}")
    for key in sorted(report.failures):
        click.echo(f"  {key}: {report.failures[key]['error']}")
    if name in GATED_COMMANDS and not report.passed:
        click.get_current_context().exit(1)


def common_options(func):
    func = click.option(
        "--out",
        type=click.Path(file_okay=False),
        default=None,
        help="Output directory (default: $OUTPUT_DIR/<command>)",
    )(func)
    func = click.option("--seed", type=int, default=None, help="Seed")(func)
    func = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="JSON file of config fields",
    )(func)
    return func


def problem_options(func):
    func = click.option("--lambda", "lam", type=int, default=None)(func)
    func = click.option("--beta", type=RATIONAL, default=None)(func)
    func = click.option("--alpha", type=RATIONAL, default=None)(func)
    func = click.option("--d", type=int, default=None, help="Dimension")(func)
    return func


def grid_options(func):
    func = click.option("--half-length", type=float, default=None)(func)
    func = click.option("--points", type=int, default=None)(func)
    return func


@click.group()
def inls():
    """
    Numerical laboratory for i u_t + Lap u = lambda |x|^-alpha |u|^beta u.
    """


@inls.command()
@common_options
@click.option("--mode", type=click.Choice(["l2", "hs"]), default=None)
@click.option("--d", type=int, default=None, help="Dimension")
@click.option("--alpha", type=RATIONAL, default=None)
@click.option("--beta", type=RATIONAL, default=None)
@click.option("--s", type=RATIONAL, default=None)
@click.option("--n", type=int, default=None, help="Number of triples")
@click.option("--max-denominator", type=int, default=None)
@click.option("--workers", type=int, default=None)
def admissible(config_path, seed, out, **overrides):
    """Sample admissible triples and audit their duals."""
    run_command("admissible", config_path, out, dict(overrides, seed=seed))


@inls.command()
@common_options
@problem_options
@grid_options
@click.option(
    "--method", type=click.Choice(["picard", "splitstep", "both"]), default=None
)
@click.option("--s", type=RATIONAL, default=None)
@click.option("--norm", type=float, default=None, help="L^2 norm of the data")
@click.option("--T", "T", type=float, default=None, help="Horizon")
@click.option("--n-t", type=int, default=None, help="Time steps")
@click.option("--max-iter", type=int, default=None)
@click.option("--tol", type=float, default=None)
@click.option("--windows", type=int, default=None, help="Chained Picard windows")
@click.option("--dump/--no-dump", default=None, help="Write traj.bin")
def solve(config_path, seed, out, **overrides):
    """Solve with Picard iteration and/or split-step and compare."""
    run_command("solve", config_path, out, dict(overrides, seed=seed))


@inls.command()
@common_options
@problem_options
@grid_options
@click.option("--s", type=RATIONAL, default=None)
@click.option("--hs-alpha", type=RATIONAL, default=None)
@click.option("--hs-beta", type=RATIONAL, default=None)
@click.option("--hs-s", type=RATIONAL, default=None)
@click.option("--norm", type=float, default=None, help="L^2 norm of the data")
@click.option("--T", "T", type=float, default=None, help="Horizon")
@click.option("--n-t", type=int, default=None, help="Time steps")
@click.option("--samples", type=int, default=None)
@click.option("--workers", type=int, default=None)
def verify(config_path, seed, out, **overrides):
    """Conservation, scaling and nonlinear-estimate audits."""
    run_command("verify", config_path, out, dict(overrides, seed=seed))


@inls.command()
@common_options
@click.option("--d", type=int, default=None, help="Dimension")
@click.option("--s", type=RATIONAL, default=None)
@click.option(
    "--triple",
    "triples",
    type=TRIPLE,
    multiple=True,
    help="Admissible triple as '1/r,gamma' (repeatable)",
)
@click.option("--n", type=int, default=None, help="Ensemble size")
@click.option(
    "--points", type=int, multiple=True, help="Grid sizes (repeatable)"
)
@click.option("--half-length", type=float, default=None)
@click.option("--T", "T", type=float, default=None, help="Horizon")
@click.option("--n-t", type=int, default=None, help="Time steps")
@click.option("--p", type=float, default=None, help="Spectral decay")
@click.option("--divergence/--no-divergence", default=None)
@click.option("--divergence-gamma", type=RATIONAL, default=None)
@click.option("--workers", type=int, default=None)
def strichartz(config_path, seed, out, **overrides):
    """Weighted Strichartz ratios under grid refinement."""
    run_command("strichartz", config_path, out, dict(overrides, seed=seed))


@inls.command()
@common_options
@problem_options
@grid_options
@click.option(
    "--amplitude",
    "amplitudes",
    type=float,
    multiple=True,
    help="Data amplitude (repeatable)",
)
@click.option(
    "--family", type=click.Choice(["scaling", "amplitude"]), default=None
)
@click.option("--norm", type=float, default=None, help="Base L^2 norm")
@click.option("--n-t", type=int, default=None, help="Time steps")
@click.option("--T-min", "T_min", type=float, default=None)
@click.option("--T-max", "T_max", type=float, default=None)
@click.option("--bisections", type=int, default=None)
@click.option("--workers", type=int, default=None)
def lifespan(config_path, seed, out, **overrides):
    """Life span of the contraction against the data norm."""
    run_command("lifespan", config_path, out, dict(overrides, seed=seed))


@inls.command()
@common_options
@problem_options
@grid_options
@click.option("--norm", type=float, default=None, help="L^2 norm of the data")
@click.option("--T", "T", type=float, default=None, help="Horizon")
@click.option("--dt", type=float, default=None, help="Time step")
@click.option("--save-every", type=int, default=None)
def scatter(config_path, seed, out, **overrides):
    """Cauchy tail of e^{-itLap} u(t) for small data."""
    run_command("scatter", config_path, out, dict(overrides, seed=seed))


if __name__ == "__main__":  # pragma: no cover
    inls()
