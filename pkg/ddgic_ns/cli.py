"""
CLI interface for ddgic-ns.
"""

import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import click
from dotenv import load_dotenv

from . import __version__
from .cases import CaseCatalog
from .config import (
    EnvironmentSettings,
    RunConfig,
    build_config,
    parse_config,
    validate_config,
    with_overrides,
)
from .errors import DDGICError
from .mesh import load_mesh
from .meshgen import builtin_mesh, parse_builtin
from .runner import CaseRunner


# Configure logging
def setup_logging(log_level: str, log_file: Optional[str] = None):
    """Setup logging configuration."""
    numeric_level = getattr(logging, log_level.upper(), logging.INFO)

    handlers = [logging.StreamHandler(sys.stdout)]
    if log_file:
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=numeric_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True,
    )

    return logging.getLogger('ddgic-ns')


def _environment():
    load_dotenv()
    settings = EnvironmentSettings.from_env()
    return settings, setup_logging(settings.log_level, settings.log_file)


def _int_list(raw: str) -> List[int]:
    try:
        return [int(x) for x in raw.split(',') if x.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got '{raw}'")


def load_run_config(target: str, settings: EnvironmentSettings, **overrides) -> RunConfig:
    """A case file path or a registered case name, with command-line overrides."""
    if Path(target).is_file():
        config = parse_config(target)
    else:
        config = validate_config(build_config(target))
    if config.output_dir == RunConfig.output_dir:
        config.output_dir = settings.output_dir
    if config.threads == RunConfig.threads:
        config.threads = settings.threads
    return with_overrides(config, **overrides)


def _echo_metrics(metrics):
    for key, value in metrics.items():
        if key == 'norms':
            click.echo("  Error norms (L2, Linf):")
            for name, (l2, linf) in value.items():
                click.echo(f"    {name:>6}: {l2:.6e}  {linf:.6e}")
        elif isinstance(value, float):
            click.echo(f"  {key}: {value:.6g}")
        else:
            click.echo(f"  {key}: {value}")


@click.group()
@click.version_option(version=__version__)
def cli():
    """ddgic-ns: discontinuous Galerkin solver for 2-D compressible Navier-Stokes.

    Runs the built-in verification and validation cases (or a case file)
    with the direct DG scheme with interface correction on triangular
    meshes and writes fields, histories and diagnostics per run.
    """
    pass


@cli.command()
@click.argument('target')
@click.option('--degree', '-k', type=int, default=None, help='Polynomial degree')
@click.option('--mesh', default=None, help='Built-in mesh (square:N, plate, cylinder) or mesh file')
@click.option('--final-time', type=float, default=None, help='Final time for final-time runs')
@click.option('--cfl', type=float, default=None, help='CFL number')
@click.option('--output-dir', default=None, help='Directory for run output (overrides .env)')
@click.option('--threads', type=int, default=None, help='Worker threads for residual assembly')
@click.option('--seed', type=int, default=None, help='Seed for the jittered square mesh')
def solve(target: str, degree: Optional[int], mesh: Optional[str], final_time: Optional[float],
          cfl: Optional[float], output_dir: Optional[str], threads: Optional[int], seed: Optional[int]):
    """Run a case by name or from a case file."""
    settings, logger = _environment()

    logger.info("=" * 80)
    logger.info("SOLVE")
    logger.info("=" * 80)
    logger.info(f"Target: {target}")

    try:
        config = load_run_config(target, settings, degree=degree, mesh=mesh, final_time=final_time,
                                 cfl=cfl, output_dir=output_dir, threads=threads, seed=seed)
    except DDGICError as e:
        logger.error(str(e))
        click.echo(f"\n✗ {e}")
        sys.exit(2)

    runner = CaseRunner()
    runner.set_logger(logger)
    result = runner.run_case(config)

    logger.info("=" * 80)
    if result['success']:
        click.echo(f"\n✓ {result['message']}")
        _echo_metrics(result['metrics'])
    else:
        click.echo(f"\n✗ {result['message']}")
    if result['run_dir'] is not None:
        click.echo(f"\nOutput: {result['run_dir']}")
        for path in result['artifacts']:
            click.echo(f"  {Path(path).name}")
    if not result['success']:
        sys.exit(1)


@cli.command()
@click.argument('target')
@click.option('--levels', default='0,1,2', help='Comma-separated square mesh levels')
@click.option('--degrees', default='1,2,3', help='Comma-separated polynomial degrees')
@click.option('--output-dir', default=None, help='Directory for run output (overrides .env)')
@click.option('--threads', type=int, default=None, help='Worker threads for residual assembly')
def study(target: str, levels: str, degrees: str, output_dir: Optional[str], threads: Optional[int]):
    """Error and convergence-order table over mesh levels and degrees."""
    settings, logger = _environment()
    level_list = _int_list(levels)
    degree_list = _int_list(degrees)

    logger.info("=" * 80)
    logger.info("CONVERGENCE STUDY")
    logger.info("=" * 80)
    logger.info(f"Target: {target}  levels: {level_list}  degrees: {degree_list}")

    try:
        config = load_run_config(target, settings, output_dir=output_dir, threads=threads)
    except DDGICError as e:
        logger.error(str(e))
        click.echo(f"\n✗ {e}")
        sys.exit(2)

    runner = CaseRunner()
    runner.set_logger(logger)
    result = runner.convergence_study(config, level_list, degree_list)

    for path in result['artifacts']:
        if Path(path).suffix == '.txt':
            click.echo('\n' + Path(path).read_text(encoding='utf-8'))
    if result['success']:
        click.echo(f"✓ {result['message']}")
    else:
        click.echo(f"✗ {result['message']} (partial table written)")
        sys.exit(1)


@cli.command('mesh-info')
@click.argument('mesh')
def mesh_info(mesh: str):
    """Summarize a built-in mesh or a mesh file."""
    _, logger = _environment()
    try:
        try:
            parse_builtin(mesh)
            loaded = builtin_mesh(mesh)
        except DDGICError:
            if not Path(mesh).exists():
                raise
            loaded = load_mesh(Path(mesh))
    except DDGICError as e:
        logger.error(str(e))
        click.echo(f"\n✗ {e}")
        sys.exit(1)

    summary = loaded.summary()
    click.echo(f"\nMesh: {summary['name']}")
    click.echo("=" * 80)
    click.echo(f"  Vertices: {summary['vertices']}")
    click.echo(f"  Cells: {summary['cells']}")
    click.echo(f"  Interior edges: {summary['interior_edges']}")
    click.echo(f"  Boundary edges: {summary['boundary_edges']}")
    click.echo(f"  Periodic pairs: {summary['periodic_pairs']}")
    click.echo(f"  Area: {summary['area']:.6g}")
    click.echo(f"  h_min / h_max: {summary['h_min']:.4e} / {summary['h_max']:.4e}")
    click.echo("\nBoundary tags:")
    for name, (kind, count) in summary['tags'].items():
        click.echo(f"  {name}: {kind or '(untagged)'} ({count} edges)")


@cli.command()
@click.argument('query', required=False)
def cases(query: Optional[str]):
    """List the built-in cases."""
    catalog = CaseCatalog()
    entries = catalog.search_cases(query) if query else catalog.get_all_cases()
    if not entries:
        click.echo(f"\n⚠ No cases match '{query}'")
        return
    click.echo("\nBuilt-in cases:")
    for entry in entries:
        click.echo(f"  {entry['name']:<18} {entry['description']}")
        defaults = ', '.join(f"{k}={v}" for k, v in entry['defaults'].items())
        click.echo(f"  {'':<18} {defaults}")


@cli.command()
def status():
    """Show configuration and status."""
    load_dotenv()

    click.echo("\nddgic-ns Status")
    click.echo("=" * 80)

    try:
        settings = EnvironmentSettings.from_env()
    except DDGICError as e:
        click.echo(f"  ✗ {e}")
        sys.exit(1)

    click.echo("\nConfiguration:")
    click.echo(f"  Version: {__version__}")
    click.echo(f"  Output directory: {settings.output_dir}")
    click.echo(f"  Threads: {settings.threads}")
    click.echo(f"  Log level: {settings.log_level}")
    click.echo(f"  Log file: {settings.log_file or '(none)'}")
    click.echo(f"  Available CPUs: {os.cpu_count()}")

    click.echo("\nPath checks:")
    out = Path(settings.output_dir)
    click.echo(f"  Output directory exists: {out.exists()}")
    if settings.threads > (os.cpu_count() or 1):
        click.echo("  ⚠ More threads requested than CPUs available")
    else:
        click.echo("  ✓ Thread count fits the machine")


def main():
    """Main entry point."""
    cli()


if __name__ == '__main__':
    main()
