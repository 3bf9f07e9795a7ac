"""
CLI - solve single cases, run convergence studies and query stored runs

    python cli.py solve --case circle --p 2 --k 1 --n 32 --out results/circle.json
    python cli.py converge --case circle --p 2,3 --k 0,1,2 --n0 16 --levels 4 --out results/circle.csv
    python cli.py runs --db results/runs.db --case circle

Exit codes: 0 success, 1 pipeline error, 2 bad arguments.
"""

import logging
import sys

import click

import config
import init_db
from convergence import convergence_study, rates_frame, write_csv, write_json
from processor import PipelineError, run_case, validate_run_arguments

logger = logging.getLogger(__name__)

EXIT_PIPELINE_ERROR = 1
EXIT_BAD_ARGUMENTS = 2


def _int_list(ctx, param, value):
    if value is None:
        return None
    try:
        items = [int(v) for v in str(value).split(',') if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma separated integers, got '{value}'")
    if not items:
        raise click.BadParameter("expected at least one value")
    return items


def _bad_arguments(message: str):
    click.echo(f"Error: {message}", err=True)
    sys.exit(EXIT_BAD_ARGUMENTS)


def _pipeline_failed(error: Exception):
    logger.error(f"Pipeline failed: {error}")
    click.echo(f"❌ Pipeline error: {error}", err=True)
    sys.exit(EXIT_PIPELINE_ERROR)


@click.group()
def cli():
    """Unfitted finite element solver for the Poisson problem"""
    logging.basicConfig(
        filename=config.LOG_FILE or None,
        level=getattr(logging, config.LOG_LEVEL, logging.INFO),
        format=config.LOG_FORMAT,
    )


@cli.command()
@click.option('--case', 'case_id', required=True, type=click.Choice(config.CASE_IDS))
@click.option('--p', 'p', required=True, type=int, help='Polynomial degree (1-3)')
@click.option('--k', 'k', required=True, type=int, help='Taylor order of the boundary correction')
@click.option('--n', 'n', required=True, type=int, help='Elements per side of the background mesh')
@click.option('--gamma-g', 'gamma_g', default=config.GHOST_PENALTY, show_default=True, type=float)
@click.option('--out', 'out', default=None, type=click.Path(dir_okay=False), help='Write the run as JSON')
@click.option('--db', 'db_path', default=None, type=click.Path(dir_okay=False), help='Store the run')
def solve(case_id, p, k, n, gamma_g, out, db_path):
    """Solve one manufactured case and report its errors"""
    try:
        validate_run_arguments(case_id, p, k, n, gamma_g)
    except ValueError as e:
        _bad_arguments(str(e))

    try:
        record = run_case(case_id, p, k, n, gamma_g, db_path=db_path)
    except PipelineError as e:
        _pipeline_failed(e)

    if out:
        write_json(record, out)
    click.echo(f"✅ {record.case} p={record.p} k={record.k} n={record.n}: dofs={record.dofs} "
               f"L2={record.l2_error:.6e} H1={record.h1_semi_error:.6e} "
               f"triple={record.triple_error:.6e} residual={record.residual:.2e}")


@cli.command()
@click.option('--case', 'case_id', required=True, type=click.Choice(config.CASE_IDS))
@click.option('--p', 'p_list', required=True, callback=_int_list, help='Degrees, e.g. 2,3')
@click.option('--k', 'k_list', required=True, callback=_int_list, help='Taylor orders, e.g. 0,1,2')
@click.option('--n0', 'n0', required=True, type=int)
@click.option('--levels', 'levels', required=True, type=int)
@click.option('--gamma-g', 'gamma_g', default=config.GHOST_PENALTY, show_default=True, type=float)
@click.option('--out', 'out', required=True, type=click.Path(dir_okay=False), help='CSV output path')
@click.option('--db', 'db_path', default=None, type=click.Path(dir_okay=False), help='Store the study')
def converge(case_id, p_list, k_list, n0, levels, gamma_g, out, db_path):
    """Run a refinement sequence and write the CSV table"""
    if levels < 3:
        _bad_arguments(f"--levels must be at least 3, got {levels}")
    try:
        for p in p_list:
            for k in k_list:
                validate_run_arguments(case_id, p, k, n0, gamma_g)
    except ValueError as e:
        _bad_arguments(str(e))

    try:
        tables = convergence_study(case_id, p_list, k_list, n0, levels, gamma_g, db_path=db_path)
    except PipelineError as e:
        _pipeline_failed(e)

    write_csv(tables, out)
    click.echo(rates_frame(tables).to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    click.echo(f"📁 Wrote {out}")


@cli.command('init-db')
@click.option('--db', 'db_path', default=config.DB_PATH, show_default=True, type=click.Path(dir_okay=False))
def init_db_command(db_path):
    """Create or migrate the results database"""
    init_db.ensure_database(db_path)
    click.echo(f"✅ Database ready at {db_path}")


@cli.command()
@click.option('--db', 'db_path', default=config.DB_PATH, show_default=True, type=click.Path(dir_okay=False))
@click.option('--case', 'case_id', default=None, type=click.Choice(config.CASE_IDS))
def runs(db_path, case_id):
    """List stored runs"""
    frame = init_db.fetch_runs(db_path, case_id)
    if frame.empty:
        click.echo("No runs stored")
        return
    columns = ['id', 'study_id', 'case_id', 'p', 'k', 'n', 'dofs', 'l2_error', 'h1_semi_error', 'min_xi']
    click.echo(frame[columns].to_string(index=False))


if __name__ == "__main__":
    cli()
