"""
Configuration for the CutFEM Poisson solver.
Paths, logging and numerical defaults shared by the CLI, the pipeline and the tests.
"""

import os

# --- Paths -------------------------------------------------------------------
RESULTS_DIR = os.environ.get('CUTFEM_RESULTS_DIR', 'results')
DB_PATH = os.environ.get('CUTFEM_DB_PATH', os.path.join(RESULTS_DIR, 'runs.db'))

# --- Logging -----------------------------------------------------------------
# Empty LOG_FILE logs to stderr
LOG_FILE = os.environ.get('CUTFEM_LOG_FILE', '')
LOG_LEVEL = os.environ.get('CUTFEM_LOG_LEVEL', 'INFO').upper()
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# --- Geometry ----------------------------------------------------------------
CASE_IDS = ('halfplane', 'circle', 'annulus', 'flower')

BOUNDING_BOXES = {
    'halfplane': (-1.3, -1.3, 1.3, 1.3),
    'circle': (-1.3, -1.3, 1.3, 1.3),
    'annulus': (-1.0, -1.0, 1.0, 1.0),
    'flower': (-1.3, -1.3, 1.3, 1.3),
}

HALFPLANE_OFFSET = 0.63

# Nodal values with |v| < SNAP_FACTOR * h are moved to -SNAP_FACTOR * h
SNAP_FACTOR = 1e-12
DEGENERATE_SEGMENT_FACTOR = 1e-14

# --- Ray root finding (discrete projection onto the exact boundary) ---------
ROOT_TOL = 1e-12
ROOT_SMAX = 0.25
ROOT_MAX_ITER = 200

# --- Boundary patches --------------------------------------------------------
PATCH_CORE_SIZE = 4
PATCH_MIN_LENGTH_FACTOR = 1.0

# --- Discretization ----------------------------------------------------------
GHOST_PENALTY = 0.1
SUPPORTED_DEGREES = (1, 2, 3)
MAX_TAYLOR_ORDER = 2
MIN_MESH_N = 8

# --- Linear solver -----------------------------------------------------------
# Iterative refinement steps after the LU solve; stops early once the relative
# residual is at SOLVER_RESIDUAL_TARGET
SOLVER_REFINEMENT_STEPS = 3
SOLVER_RESIDUAL_TARGET = 1e-14
