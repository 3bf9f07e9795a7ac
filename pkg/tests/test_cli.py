import json
import shlex
from pathlib import Path

import pytest
from click.testing import CliRunner

import cli
from cli import cli as command
from convergence import CSV_COLUMNS
from processor import PipelineError


@pytest.fixture
def runner():
    return CliRunner()


def test_solve_writes_json(runner, tmp_path):
    out = tmp_path / 'run.json'
    result = runner.invoke(command, ['solve', '--case', 'halfplane', '--p', '1', '--k', '0', '--n', '8',
                                     '--out', str(out)])
    assert result.exit_code == 0, result.output
    data = json.loads(out.read_text())
    assert data['case'] == 'halfplane'
    assert data['l2_error'] < 1e-9


@pytest.mark.parametrize('args', [
    ['solve', '--case', 'circle', '--p', '5', '--k', '1', '--n', '16'],
    ['solve', '--case', 'circle', '--p', '2', '--k', '3', '--n', '16'],
    ['solve', '--case', 'circle', '--p', '2', '--k', '1', '--n', '4'],
    ['solve', '--case', 'square', '--p', '2', '--k', '1', '--n', '16'],
    ['solve', '--case', 'circle', '--p', 'two', '--k', '1', '--n', '16'],
    ['converge', '--case', 'circle', '--p', '2', '--k', '1', '--n0', '16', '--levels', '2', '--out', 'x.csv'],
    ['converge', '--case', 'circle', '--p', '2,x', '--k', '1', '--n0', '16', '--levels', '3', '--out', 'x.csv'],
])
def test_bad_arguments_exit_2(runner, args):
    result = runner.invoke(command, args)
    assert result.exit_code == 2


def test_pipeline_error_exit_1(runner, monkeypatch):
    def fail(*args, **kwargs):
        raise PipelineError('assemble', RuntimeError('boom'))

    monkeypatch.setattr(cli, 'run_case', fail)
    result = runner.invoke(command, ['solve', '--case', 'circle', '--p', '1', '--k', '1', '--n', '8'])
    assert result.exit_code == 1


def test_converge_and_runs(runner, tmp_path):
    out = tmp_path / 'study.csv'
    db = tmp_path / 'runs.db'
    result = runner.invoke(command, ['converge', '--case', 'halfplane', '--p', '1', '--k', '0,1', '--n0', '8',
                                     '--levels', '3', '--out', str(out), '--db', str(db)])
    assert result.exit_code == 0, result.output
    lines = out.read_text().splitlines()
    assert lines[0] == ','.join(CSV_COLUMNS)
    assert len(lines) == 1 + 2 * 3

    result = runner.invoke(command, ['runs', '--db', str(db), '--case', 'halfplane'])
    assert result.exit_code == 0
    assert 'halfplane' in result.output


def test_init_db_command(runner, tmp_path):
    db = tmp_path / 'store.db'
    result = runner.invoke(command, ['init-db', '--db', str(db)])
    assert result.exit_code == 0
    assert db.exists()
    result = runner.invoke(command, ['runs', '--db', str(db)])
    assert 'No runs stored' in result.output


def _driver_studies():
    script = Path(__file__).resolve().parent.parent / 'run_studies.sh'
    for line in script.read_text().splitlines():
        if line.startswith('run_study '):
            yield shlex.split(line)[2:]


def test_driver_studies_are_valid_sweeps(runner, tmp_path, monkeypatch):
    calls = {}

    def fake_study(case_id, p_list, k_list, n0, levels, gamma_g, db_path=None):
        calls.setdefault(case_id, set()).update((p, k) for p in p_list for k in k_list)
        return []

    monkeypatch.setattr(cli, 'convergence_study', fake_study)
    for args in _driver_studies():
        result = runner.invoke(command, ['converge', *args, '--out', str(tmp_path / 'study.csv')])
        assert result.exit_code == 0, (args, result.output)

    full_sweep = {(p, k) for p in (2, 3) for k in (0, 1, 2)}
    assert full_sweep <= calls['circle']
    assert full_sweep <= calls['annulus']
    assert full_sweep <= calls['flower']
