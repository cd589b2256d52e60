"""Command line entry point: serve, simulate, replay.

Every flag can also be set through an environment variable named
CLASSPULSE_<FLAG> (flag name uppercased, dashes as underscores).
Diagnostics go to stderr; machine-readable output (CSV path, summary
line) goes to stdout.
"""
from __future__ import annotations

import logging
import socket
import sys
from pathlib import Path

import click

from . import config as config_mod
from .errors import ClasspulseError
from .evaluation import EvaluationParams
from .headpose import HeadPoseConfig
from .sensors import default_confusion_model, identity_confusion_model, load_confusion_model
from .simulation import CohortSpec, SweepConfig, Weighting, run_sweep, write_csv


def _load_config(path: str | None) -> dict[str, str]:
    return config_mod.load_config_file(path) if path else {}


@click.group()
@click.option("--config", envvar="CLASSPULSE_CONFIG", type=click.Path(exists=True),
              default=None, help="Key/value configuration file.")
@click.option("--seed", envvar="CLASSPULSE_SEED", type=int, default=0, show_default=True,
              help="Random seed shared by stochastic subcommands.")
@click.option("--log-level", envvar="CLASSPULSE_LOG_LEVEL", default="info",
              type=click.Choice(["debug", "info", "warning", "error"]), show_default=True)
@click.pass_context
def cli(ctx: click.Context, config: str | None, seed: int, log_level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, log_level.upper()),
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    ctx.obj = {"config": _load_config(config), "seed": seed}


@cli.command()
@click.option("--port", envvar="CLASSPULSE_PORT", type=int, default=8080, show_default=True)
@click.option("--host", envvar="CLASSPULSE_HOST", default="127.0.0.1", show_default=True)
@click.option("--tick-ms", envvar="CLASSPULSE_TICK_MS", type=int, default=1000, show_default=True,
              help="Class evaluation period.")
@click.option("--log-dir", envvar="CLASSPULSE_LOG_DIR", type=click.Path(), default="logs",
              show_default=True, help="Directory for per-classroom event logs.")
@click.option("--static-dir", envvar="CLASSPULSE_STATIC_DIR", type=click.Path(), default=None,
              help="Optional dashboard assets to serve at /.")
@click.pass_context
def serve(ctx: click.Context, port: int, host: str, tick_ms: int,
          log_dir: str, static_dir: str | None) -> None:
    """Run the live classroom service."""
    import uvicorn

    from .service import ClassroomManager, create_app

    values = ctx.obj["config"]
    manager = ClassroomManager(
        log_dir=log_dir,
        headpose_config=config_mod.headpose_config_from(values) if values else HeadPoseConfig(),
        params=config_mod.evaluation_params_from(values) if values else EvaluationParams(),
        tick_ms=config_mod.service_tick_ms(values, tick_ms),
    )
    app = create_app(manager, static_dir=static_dir)

    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        click.echo(f"cannot bind {host}:{port}: {exc}", err=True)
        sys.exit(1)
    sock.listen(128)
    click.echo(f"classpulse serving on {host}:{port} (tick {manager.tick_ms} ms)")
    server = uvicorn.Server(uvicorn.Config(app, log_level="warning", ws="websockets"))
    try:
        server.run(sockets=[sock])
    finally:
        manager.close_all()


@cli.command()
@click.option("--students", envvar="CLASSPULSE_STUDENTS", type=int, default=30, show_default=True)
@click.option("--trials", envvar="CLASSPULSE_TRIALS", type=int, default=1000, show_default=True)
@click.option("--step", envvar="CLASSPULSE_STEP", type=float, default=0.1, show_default=True)
@click.option("--seed", "seed_override", envvar="CLASSPULSE_SEED", type=int, default=None,
              help="Overrides the shared --seed.")
@click.option("--weighting", envvar="CLASSPULSE_WEIGHTING", show_default=True,
              type=click.Choice(["weighted", "uniform"]), default="weighted")
@click.option("--out", envvar="CLASSPULSE_OUT", type=click.Path(), default="sweep.csv",
              show_default=True)
@click.option("--confusion", envvar="CLASSPULSE_CONFUSION", default="default", show_default=True,
              help="'default', 'identity', or a confusion table file.")
@click.option("--fixed-cohort", envvar="CLASSPULSE_FIXED_COHORT", is_flag=True, default=False,
              help="Draw one cohort per sweep instead of one per trial.")
@click.pass_context
def simulate(ctx: click.Context, students: int, trials: int, step: float,
             seed_override: int | None, weighting: str, out: str,
             confusion: str, fixed_cohort: bool) -> None:
    """Run the Monte Carlo sweep and write one CSV row per target."""
    seed = ctx.obj["seed"] if seed_override is None else seed_override
    values = ctx.obj["config"]
    params = config_mod.evaluation_params_from(values) if values else EvaluationParams()

    # group sizes follow the 16:10:4 composition, scaled to the roster size
    n_pos = round(students * 16 / 30)
    n_neg = round(students * 10 / 30)
    spec = CohortSpec(
        n_students=students,
        n_more_positive=n_pos,
        n_more_negative=n_neg,
        n_balanced=students - n_pos - n_neg,
    )
    cfg = SweepConfig(
        step=step, trials_per_case=trials, seed=seed, weighting=Weighting(weighting),
        target_min=params.negative_value, target_max=params.positive_value,
    )
    if confusion == "default":
        model = default_confusion_model()
    elif confusion == "identity":
        model = identity_confusion_model()
    else:
        model = load_confusion_model(confusion)

    try:
        result = run_sweep(spec, cfg, model, params, fixed_cohort=fixed_cohort)
        write_csv(result, out)
    except (ClasspulseError, OSError) as exc:
        click.echo(f"simulate failed: {exc}", err=True)
        sys.exit(1)
    click.echo(str(Path(out)))
    click.echo(f"summary mean_level_accuracy={result.mean_level_accuracy!r} "
               f"cases={len(result.targets)} weighting={weighting} seed={seed}")


@cli.command()
@click.option("--trace", envvar="CLASSPULSE_TRACE", type=click.Path(exists=True), required=True)
@click.option("--target", envvar="CLASSPULSE_TARGET", default="127.0.0.1:8080", show_default=True,
              help="host:port of a running server.")
@click.option("--classroom", envvar="CLASSPULSE_CLASSROOM", default=None,
              help="Classroom id; overrides the trace's join message.")
@click.option("--speed", envvar="CLASSPULSE_SPEED", type=float, default=1.0, show_default=True,
              help="Playback rate multiplier.")
def replay(trace: str, target: str, classroom: str | None, speed: float) -> None:
    """Play one recorded student stream against a server."""
    from .replay import play_trace

    try:
        sent = play_trace(trace, target, classroom=classroom, speed=speed)
    except (ClasspulseError, OSError, ConnectionError, ValueError) as exc:
        click.echo(f"replay failed: {exc}", err=True)
        sys.exit(1)
    click.echo(f"replayed {sent} messages")


def main() -> None:
    cli(auto_envvar_prefix="CLASSPULSE")


if __name__ == "__main__":
    main()
