"""Command line entry point: ``teloinv <experiment> [options]``."""
from __future__ import annotations

import sys

import click

from . import io
from .errors import TeloinvError
from .experiments import EXPERIMENTS, ExperimentSpec, run


def _common(f):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="key=value model configuration."),
        click.option("--out", type=click.Path(file_okay=False), required=True, help="Output directory."),
        click.option("--seed", type=click.IntRange(0, 2 ** 64 - 1), default=0, show_default=True),
        click.option("--digits", type=click.IntRange(10), default=None,
                     help="Working decimal digits (default: enough for K, at least 200)."),
        click.option("--K", "K", type=click.IntRange(1), default=None, help="Gaver-Stehfest order."),
        click.option("--nd", type=click.IntRange(1), default=None, help="Number of simulated lineages."),
        click.option("--bandwidth", default="auto", show_default=True, help="nrd, sj or a numeric value."),
        click.option("--points", type=click.IntRange(3), default=200, show_default=True,
                     help="Points of the x grid."),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


@click.group()
def main():
    """Estimate initial telomere-length laws from senescence times."""


def _make(name):
    @_common
    def command(config_path, out, seed, digits, K, nd, bandwidth, points):
        config = None
        if config_path:
            config, precision = io.load_config(config_path)
            digits = digits if digits is not None else precision
        spec = ExperimentSpec(name, out, config, seed, digits, K, nd, bandwidth, points)
        try:
            result = run(spec)
        except TeloinvError as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            sys.exit(2)
        for k, v in result.summary.items():
            click.echo(f"{k}={v}")
        click.echo(f"wrote {len(result.files)} files to {spec.out}")

    command.__doc__ = f"Run the {name.replace('_', ' ')} experiment."
    return main.command(name.replace("_", "-"))(command)


for _name in EXPERIMENTS:
    _make(_name)


if __name__ == "__main__":
    main()
