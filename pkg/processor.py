"""
Processor - runs one manufactured case through the full CutFEM pipeline
mesh -> classify -> topology -> space -> assemble -> solve -> errors -> diagnostics
"""

import logging
import math
import time
from typing import Optional

from pydantic import BaseModel, Field, field_validator

import config
import init_db
from assembly import AssemblyConfig, assemble_system
from background_mesh import BoundingBox, build_structured_mesh
from cut_topology import OpenChainError, TopologyError, build_cut_topology, build_patches, geometry_diagnostics, patch_xi
from error_norms import compute_errors
from fe_space import build_dof_map
from level_set_geometry import RayRootConfig
from linear_solver import solve_linear_system
from manufactured import make_manufactured

logger = logging.getLogger(__name__)


class PipelineError(RuntimeError):
    """A pipeline stage failed; stage names it and the cause is chained"""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


class RunRecord(BaseModel):
    case: str
    p: int
    k: int
    gamma_g: float
    n: int
    h: float
    dofs: int
    l2_error: float
    h1_semi_error: float
    trace_error: float
    triple_error: float
    star_error: float
    delta_h: float
    area_omega_h: float
    length_gamma_h: float
    min_xi: Optional[float] = None
    num_patches: int = 0
    residual: float
    wall_time: float = Field(default=0.0, ge=0)

    @field_validator('l2_error', 'h1_semi_error', 'trace_error', 'triple_error', 'star_error',
                     'delta_h', 'residual')
    @classmethod
    def _finite_nonnegative(cls, value: float) -> float:
        if not math.isfinite(value) or value < 0:
            raise ValueError(f"must be finite and nonnegative, got {value}")
        return value


def validate_run_arguments(case_id: str, p: int, k: int, n: int, gamma_g: float) -> None:
    """Raises ValueError for arguments outside the supported range"""
    if case_id not in config.CASE_IDS:
        raise ValueError(f"Unknown case '{case_id}', expected one of {config.CASE_IDS}")
    if p not in config.SUPPORTED_DEGREES:
        raise ValueError(f"Degree p={p} not supported, expected one of {config.SUPPORTED_DEGREES}")
    if not 0 <= k <= config.MAX_TAYLOR_ORDER:
        raise ValueError(f"Taylor order k={k} outside 0..{config.MAX_TAYLOR_ORDER}")
    if n < config.MIN_MESH_N:
        raise ValueError(f"Mesh resolution n={n} below the minimum {config.MIN_MESH_N}")
    if gamma_g < 0:
        raise ValueError(f"Ghost penalty parameter must be nonnegative, got {gamma_g}")


def _min_patch_xi(mesh, topology):
    try:
        patches = build_patches(mesh, topology)
    except OpenChainError as e:
        logger.info(f"No closed boundary chains, patch diagnostic skipped: {e}")
        return None, 0
    except TopologyError as e:
        logger.warning(f"Patch construction failed, patch diagnostic skipped: {e}")
        return None, 0
    if not patches:
        return None, 0
    return min(patch_xi(patch, mesh, topology) for patch in patches), len(patches)


def run_case(case_id: str, p: int, k: int, n: int, gamma_g: float = config.GHOST_PENALTY,
             db_path: Optional[str] = None, study_id: Optional[int] = None) -> RunRecord:
    """
    Solve one manufactured problem and measure its errors.

    Args:
        case_id: halfplane | circle | annulus | flower
        p: polynomial degree
        k: Taylor order of the boundary value correction
        n: elements per side of the background mesh
        gamma_g: ghost penalty parameter
        db_path: store the record in this results database when given
        study_id: convergence study the run belongs to

    Returns:
        RunRecord

    Raises:
        ValueError: arguments out of range
        PipelineError: a stage failed
    """
    validate_run_arguments(case_id, p, k, n, gamma_g)
    start = time.perf_counter()
    logger.info(f"Running {case_id}: p={p}, k={k}, n={n}, gamma_g={gamma_g}")

    stage = 'mesh'
    try:
        problem = make_manufactured(case_id, p)
        mesh = build_structured_mesh(BoundingBox(*config.BOUNDING_BOXES[case_id]), n)
        root_cfg = RayRootConfig(initial_step=min(mesh.h ** 2, config.ROOT_SMAX))

        stage = 'topology'
        topology = build_cut_topology(mesh, problem.level_set)

        stage = 'space'
        space = build_dof_map(mesh, topology.active_elements, p)

        stage = 'assemble'
        cfg = AssemblyConfig(degree=p, taylor_order=k, gamma_g=gamma_g, root=root_cfg)
        system = assemble_system(mesh, topology, space, problem, cfg)

        stage = 'solve'
        report = solve_linear_system(system)

        stage = 'errors'
        errors = compute_errors(space, report.solution, problem, topology, ghost=system.ghost,
                                boundary=system.boundary, taylor_order=k)

        stage = 'diagnostics'
        geometry = geometry_diagnostics(mesh, topology, problem.level_set, root_cfg)
        min_xi, num_patches = _min_patch_xi(mesh, topology)
    except Exception as e:
        logger.error(f"Pipeline failed for {case_id} (p={p}, k={k}, n={n}) in stage '{stage}': {e}")
        raise PipelineError(stage, e) from e

    record = RunRecord(
        case=case_id,
        p=p,
        k=k,
        gamma_g=gamma_g,
        n=n,
        h=mesh.h,
        dofs=space.num_dofs,
        l2_error=errors['l2'],
        h1_semi_error=errors['h1_semi'],
        trace_error=errors['trace'],
        triple_error=errors['triple'],
        star_error=errors['star'],
        delta_h=geometry['delta_h'],
        area_omega_h=geometry['area_omega_h'],
        length_gamma_h=geometry['length_gamma_h'],
        min_xi=min_xi,
        num_patches=num_patches,
        residual=report.residual,
        wall_time=time.perf_counter() - start,
    )
    logger.info(f"✅ {case_id} p={p} k={k} n={n}: {record.dofs} dofs, L2={record.l2_error:.3e}, "
                f"H1={record.h1_semi_error:.3e}, min_xi={record.min_xi}, {record.wall_time:.2f}s")

    if db_path:
        try:
            init_db.insert_run(record, study_id=study_id, db_path=db_path)
        except Exception as e:
            logger.error(f"Failed to store run in {db_path}: {e}")
            raise PipelineError('persist', e) from e

    return record
