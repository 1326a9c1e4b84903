"""Command-line driver for the atlas pipeline.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 transport
error.
"""

from __future__ import annotations

import logging
import sys

import click

from . import pipeline, snapshotgen
from .config import load_config
from .errors import ConfigError, DataError, TransportError


def _config_from(ctx: click.Context, **overrides):
    merged = dict(ctx.obj or {})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    path = merged.pop("config_path", None)
    return load_config(path, merged)


def _common_overrides(disciplines, periods, offline, out):
    overrides = {}
    if disciplines:
        overrides["disciplines"] = [d.strip() for d in disciplines.split(",") if d.strip()]
    if periods:
        overrides["periods"] = [p.strip() for p in periods.split(",") if p.strip()]
    if offline:
        overrides["mode"] = "offline"
    if out:
        overrides["out_dir"] = out
    return overrides


def common_options(fn):
    fn = click.option("--disciplines", default=None,
                      help="Comma-separated discipline names (default: all 15).")(fn)
    fn = click.option("--periods", default=None,
                      help="Comma-separated period labels, e.g. 1991-2000.")(fn)
    fn = click.option("--offline", is_flag=True, default=False,
                      help="Force offline mode (snapshot replay only).")(fn)
    fn = click.option("--out", default=None, help="Output directory for figures.")(fn)
    return fn


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="TOML config file; flags override its fields.")
@click.option("-v", "--verbose", is_flag=True, default=False)
@click.pass_context
def cli(ctx, config_path, verbose):
    """Generate science-collaboration atlas figures from OpenAlex data."""
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config_path": config_path}


@cli.command()
@common_options
@click.pass_context
def fetch(ctx, disciplines, periods, offline, out):
    """Download concepts, works, and institutions into the snapshot."""
    overrides = _common_overrides(disciplines, periods, offline, out)
    overrides["mode"] = "offline" if offline else "online"
    config = _config_from(ctx, **overrides)
    pipeline.cmd_fetch(config)
    click.echo(f"snapshot updated: {config.snapshot_dir}")


@cli.command()
@common_options
@click.pass_context
def build(ctx, disciplines, periods, offline, out):
    """Parse the snapshot into analysis-ready corpora."""
    config = _config_from(ctx, **_common_overrides(disciplines, periods, offline, out))
    for stats in pipeline.cmd_build(config):
        click.echo(
            f"{stats.discipline}: {stats.works} works, {stats.institutions} institutions "
            f"(excluded: {stats.year_unknown} year-unknown, {stats.out_of_range} out-of-window, "
            f"{stats.duplicates} duplicates; {stats.unresolved_institution_ids} "
            f"unresolved institution ids)"
        )


@cli.command()
@common_options
@click.pass_context
def analyze(ctx, disciplines, periods, offline, out):
    """Compute rankings, pair counts, matrices, and dendrograms."""
    config = _config_from(ctx, **_common_overrides(disciplines, periods, offline, out))
    pipeline.cmd_analyze(config)
    click.echo(f"analytics written: {config.analytics_dir}")


@cli.command()
@common_options
@click.pass_context
def render(ctx, disciplines, periods, offline, out):
    """Emit the figure families and tables under out/."""
    config = _config_from(ctx, **_common_overrides(disciplines, periods, offline, out))
    pipeline.cmd_render(config)
    click.echo(f"figures written: {config.out_dir}")


@cli.command(name="all")
@common_options
@click.pass_context
def run_all(ctx, disciplines, periods, offline, out):
    """Run fetch (online mode only), build, analyze, and render."""
    config = _config_from(ctx, **_common_overrides(disciplines, periods, offline, out))
    manifest = pipeline.run_all(config)
    click.echo(f"pipeline complete; run manifest: {manifest}")


@cli.command()
@click.option("--seed", type=int, default=1)
@click.option("--institutions", "n_institutions", type=int, default=40)
@click.option("--works", "n_works", type=int, default=600)
@click.argument("snapshot_dir", type=click.Path())
def fixture(seed, n_institutions, n_works, snapshot_dir):
    """Write a deterministic synthetic snapshot for offline runs and tests."""
    snapshotgen.write_fixture_snapshot(
        snapshot_dir, seed=seed, n_institutions=n_institutions, n_works=n_works)
    click.echo(f"fixture snapshot written: {snapshot_dir}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Abort:
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 1
    except DataError as exc:
        click.echo(f"data error: {exc}", err=True)
        return 2
    except TransportError as exc:
        click.echo(f"transport error: {exc}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
