"""
Command-line front end: classify, analyze, sweep and validate.

Reports go to stdout as JSON; logs go to stderr. Exit codes: 0 success,
1 failed property or consistency check, 2 invalid input.
"""
import logging
import sys
from dataclasses import fields

import click

from config import DEFAULT_LOG_LEVEL, AnalysisSettings, Config
from services.classifier import classify
from services.errors import KinematicsError
from services.plotting import render_sweep_svg, render_workspace_svg
from services.report import build_report, dumps_report
from services.sweep import MODES, label_domains, parse_axis, parse_fixed, run_sweep
from services.topology import analyze_workspace
from services.validator import WorkspaceValidator
from utils.file_parser import FileParser
from utils.log_config import setup_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INPUT = 2


def _fail_input(message: str):
    click.echo(f"Error: {message}", err=True)
    sys.exit(EXIT_INPUT)


def _write_text(path, text):
    with open(path, 'w', encoding='utf-8') as f:
        f.write(text)
    logger.info(f"Wrote {path}")


def _parse_set(ctx, param, items):
    """--set name=value pairs, converted to the setting's type."""
    types = {f.name: f.type for f in fields(AnalysisSettings)}
    overrides = {}
    for item in items:
        key, sep, text = item.partition('=')
        key = key.strip().replace('-', '_')
        if not sep or key not in types:
            raise click.BadParameter(f"expected <setting>=<value> with a known setting, got '{item}'")
        kind = types[key]
        try:
            overrides[key] = text.strip().lower() in ('1', 'true', 'yes') if kind is bool else kind(text.strip())
        except ValueError:
            raise click.BadParameter(f"{key} takes a {kind.__name__}, got '{text}'")
    return overrides


def _settings(ctx, **overrides) -> AnalysisSettings:
    """Built-in defaults, then the settings file, then --set, then the command's own options."""
    try:
        settings = FileParser().read_settings(ctx.obj['settings_file'], ctx.obj['base_settings'])
        settings = settings.with_overrides(**ctx.obj['set'])
        return settings.with_overrides(strict=ctx.obj['strict'] or None, **overrides)
    except ValueError as e:
        _fail_input(str(e))


def _geometry(path):
    try:
        return FileParser().read_geometry(path)
    except KinematicsError as e:
        _fail_input(str(e))


@click.group()
@click.option('--settings', 'settings_file', type=click.Path(dir_okay=False), default=None,
              help='YAML file overriding analysis settings.')
@click.option('--set', 'set_items', multiple=True, callback=_parse_set, metavar='NAME=VALUE',
              help='Override one analysis setting, e.g. --set cert_eps=1e-8; repeatable.')
@click.option('--log-level', default=DEFAULT_LOG_LEVEL, show_default=True,
              type=click.Choice(['DEBUG', 'INFO', 'WARNING', 'ERROR'], case_sensitive=False))
@click.option('--strict', is_flag=True, help='Fail on unresolved regions instead of warning.')
@click.pass_context
def cli(ctx, settings_file, set_items, log_level, strict):
    """Workspace topology of orthogonal 3R manipulators."""
    setup_logging(log_level)
    ctx.ensure_object(dict)
    ctx.obj['settings_file'] = settings_file
    ctx.obj['base_settings'] = AnalysisSettings.from_config(Config)
    ctx.obj['strict'] = strict
    ctx.obj['set'] = set_items


@cli.command('classify')
@click.argument('geometry_file', type=click.Path(dir_okay=False))
@click.option('--json', 'json_path', type=click.Path(dir_okay=False), default=None)
@click.pass_context
def classify_command(ctx, geometry_file, json_path):
    """Family, surfaces and type label without curve tracing."""
    geom = _geometry(geometry_file)
    settings = _settings(ctx)
    result = classify(geom, settings, analyze=False)
    text = build_report(geom, result, settings).to_json()
    if json_path:
        _write_text(json_path, text)
    click.echo(text, nl=False)


@cli.command('analyze')
@click.argument('geometry_file', type=click.Path(dir_okay=False))
@click.option('--grid', type=click.IntRange(min=64), default=None, help='Torus grid size.')
@click.option('--raster', type=click.IntRange(min=200), default=None, help='Region raster size.')
@click.option('--svg', 'svg_path', type=click.Path(dir_okay=False), default=None)
@click.option('--json', 'json_path', type=click.Path(dir_okay=False), default=None)
@click.pass_context
def analyze_command(ctx, geometry_file, grid, raster, svg_path, json_path):
    """Full singularity and region analysis plus classification."""
    geom = _geometry(geometry_file)
    settings = _settings(ctx, grid_n=grid, raster_n=raster)
    try:
        analysis = analyze_workspace(geom, settings)
    except KinematicsError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_FAILED)
    result = classify(geom, settings, computed=analysis.topology)
    text = build_report(geom, result, settings, analysis).to_json()
    if json_path:
        _write_text(json_path, text)
    if svg_path:
        render_workspace_svg(analysis, svg_path)
    click.echo(text, nl=False)


@cli.command('sweep')
@click.option('--x', 'x_spec', required=True, help='Swept parameter, name:lo:hi:n.')
@click.option('--y', 'y_spec', required=True, help='Swept parameter, name:lo:hi:n.')
@click.option('--fixed', multiple=True, help='Fixed parameter k=v; repeat or space-separate.')
@click.option('--mode', type=click.Choice(MODES), default='label', show_default=True)
@click.option('--csv', 'csv_path', type=click.Path(dir_okay=False), default=None)
@click.option('--svg', 'svg_path', type=click.Path(dir_okay=False), default=None)
@click.option('--grid', type=click.IntRange(min=64), default=None, help='Torus grid size (nodes mode).')
# '--fixed d2=0 r2=1 r3=0' leaves the trailing pairs as positional arguments
@click.argument('fixed_rest', nargs=-1)
@click.pass_context
def sweep_command(ctx, x_spec, y_spec, fixed, mode, csv_path, svg_path, grid, fixed_rest):
    """Label (or off-axis node count) over a two-parameter grid."""
    settings = _settings(ctx, grid_n=grid)
    try:
        items = [item for group in fixed + fixed_rest for item in group.split()]
        sweep = run_sweep(parse_axis(x_spec), parse_axis(y_spec), parse_fixed(items), mode, settings)
    except ValueError as e:
        _fail_input(str(e))
    if csv_path:
        _write_text(csv_path, sweep.to_csv())
    if svg_path:
        render_sweep_svg(sweep, svg_path)
    document = sweep.to_dict()
    document['domains'] = label_domains(sweep)
    click.echo(dumps_report(document), nl=False)


@cli.command('validate')
@click.argument('geometry_file', type=click.Path(dir_okay=False))
@click.option('--samples', type=click.IntRange(min=1), default=200, show_default=True)
@click.option('--seed', type=int, default=None, help='Probe seed (defaults to the configured seed).')
@click.pass_context
def validate_command(ctx, geometry_file, samples, seed):
    """Oracle, symmetry, scale and determinant property suites."""
    geom = _geometry(geometry_file)
    settings = _settings(ctx, seed=seed)
    report = WorkspaceValidator(geom, settings, samples=samples, seed=settings.seed).run()
    for result in report.results:
        click.echo(f"{result.name}: {'PASS' if result.passed else 'FAIL'}", err=True)
        if not result.passed and result.failing_probe is not None:
            click.echo(f"  failing probe (seed {settings.seed}): {result.failing_probe}", err=True)
    click.echo(dumps_report(report.to_dict()), nl=False)
    sys.exit(EXIT_OK if report.ok else EXIT_FAILED)


if __name__ == '__main__':
    cli()
