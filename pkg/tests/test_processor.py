import math

import pytest

import init_db
import processor
from linear_solver import SingularSystemError
from processor import PipelineError, RunRecord, run_case


@pytest.mark.parametrize('k', [0, 1, 2])
def test_halfplane_reproduction(k):
    record = run_case('halfplane', 2, k, 16)
    assert record.l2_error <= 1e-9
    assert record.h1_semi_error <= 1e-8
    assert record.trace_error <= 1e-8
    assert record.min_xi is None
    assert record.delta_h == 0.0


def test_circle_record_populated():
    record = run_case('circle', 1, 1, 32)
    assert record.case == 'circle'
    assert record.dofs > 0
    assert record.residual <= 1e-10
    assert record.min_xi is not None and record.min_xi > 0
    assert record.num_patches > 0
    assert 0 < record.delta_h < record.h ** 2
    assert math.isfinite(record.star_error)
    assert 0 < record.trace_error <= record.triple_error


def test_deterministic_output():
    a = run_case('circle', 1, 1, 16).model_dump(exclude={'wall_time'})
    b = run_case('circle', 1, 1, 16).model_dump(exclude={'wall_time'})
    assert a == b


@pytest.mark.parametrize('args', [('ellipse', 1, 1, 16), ('circle', 4, 1, 16), ('circle', 1, 3, 16),
                                  ('circle', 1, -1, 16), ('circle', 1, 1, 4)])
def test_bad_arguments(args):
    with pytest.raises(ValueError):
        run_case(*args)


def test_stage_tagged_failure(monkeypatch):
    def fail(system):
        raise SingularSystemError("zero pivot", pivot_index=None)

    monkeypatch.setattr(processor, 'solve_linear_system', fail)
    with pytest.raises(PipelineError) as err:
        run_case('circle', 1, 1, 8)
    assert err.value.stage == 'solve'
    assert isinstance(err.value.cause, SingularSystemError)


def test_record_rejects_negative_errors():
    fields = dict(case='circle', p=1, k=1, gamma_g=0.1, n=8, h=0.1, dofs=10, l2_error=-1.0,
                  h1_semi_error=0.1, trace_error=0.1, triple_error=0.1, star_error=0.1, delta_h=0.0,
                  area_omega_h=3.0, length_gamma_h=6.0, residual=0.0)
    with pytest.raises(ValueError):
        RunRecord(**fields)
    fields['l2_error'] = float('nan')
    with pytest.raises(ValueError):
        RunRecord(**fields)


def test_run_is_persisted(tmp_path):
    db = str(tmp_path / 'runs.db')
    record = run_case('halfplane', 1, 0, 8, db_path=db)
    frame = init_db.fetch_runs(db)
    assert len(frame) == 1
    assert frame.loc[0, 'case_id'] == 'halfplane'
    assert frame.loc[0, 'dofs'] == record.dofs
