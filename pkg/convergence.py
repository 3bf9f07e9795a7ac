"""
Convergence - mesh refinement sequences, least-squares rates and CSV/JSON output
"""

import logging
import os
from typing import Dict, Iterable, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

import config
import init_db
from processor import RunRecord, run_case

logger = logging.getLogger(__name__)

CSV_COLUMNS = ['case', 'p', 'k', 'gamma_g', 'n', 'h', 'dofs', 'l2_error', 'h1_semi_error',
               'triple_error', 'delta_h', 'min_xi', 'residual']
RATE_NORMS = ('l2_error', 'h1_semi_error', 'trace_error', 'triple_error')
MIN_RATE_LEVELS = 3
CSV_FLOAT_FORMAT = '%.12e'


def least_squares_rate(h: Iterable[float], errors: Iterable[float]) -> float:
    """Slope of the least-squares line through (log h, log error)"""
    h = np.asarray(list(h), dtype=float)
    errors = np.asarray(list(errors), dtype=float)
    if len(h) != len(errors) or len(h) < 2:
        raise ValueError(f"Need at least two matching (h, error) pairs, got {len(h)} and {len(errors)}")
    if np.any(h <= 0) or np.any(errors <= 0):
        raise ValueError("Rates need positive mesh sizes and errors")
    slope, _ = np.polyfit(np.log(h), np.log(errors), 1)
    return float(slope)


class ConvergenceTable(BaseModel):
    case: str
    p: int
    k: int
    gamma_g: float
    records: List[RunRecord] = Field(default_factory=list)
    rates: Dict[str, float] = Field(default_factory=dict)

    def compute_rates(self) -> Dict[str, float]:
        """Rates per norm; empty below three levels"""
        if len(self.records) < MIN_RATE_LEVELS:
            self.rates = {}
            return self.rates
        h = [r.h for r in self.records]
        rates = {}
        for norm in RATE_NORMS:
            errors = [getattr(r, norm) for r in self.records]
            try:
                rates[norm] = least_squares_rate(h, errors)
            except ValueError as e:
                logger.warning(f"No {norm} rate for {self.case} p={self.p} k={self.k}: {e}")
        self.rates = rates
        return rates


def convergence_study(case_id: str, p_list: Iterable[int], k_list: Iterable[int], n0: int, levels: int,
                      gamma_g: float = config.GHOST_PENALTY, db_path: Optional[str] = None) -> List[ConvergenceTable]:
    """
    Run n = n0 * 2^j, j = 0..levels-1 for every (p, k) pair.

    Returns:
        one ConvergenceTable per (p, k), in input order
    """
    if levels < MIN_RATE_LEVELS:
        raise ValueError(f"A convergence study needs at least {MIN_RATE_LEVELS} levels, got {levels}")

    tables = []
    for p in p_list:
        for k in k_list:
            table = ConvergenceTable(case=case_id, p=p, k=k, gamma_g=gamma_g)
            for j in range(levels):
                table.records.append(run_case(case_id, p, k, n0 * 2 ** j, gamma_g))
            table.compute_rates()
            rates = ', '.join(f"{norm}={rate:.3f}" for norm, rate in table.rates.items())
            logger.info(f"📈 {case_id} p={p} k={k}: {rates}")
            if db_path:
                init_db.insert_study(table, db_path=db_path)
            tables.append(table)
    return tables


def records_frame(records: Iterable[RunRecord]) -> pd.DataFrame:
    rows = [r.model_dump() for r in records]
    return pd.DataFrame(rows, columns=list(RunRecord.model_fields))[CSV_COLUMNS]


def rates_frame(tables: Iterable[ConvergenceTable]) -> pd.DataFrame:
    rows = [{'case': t.case, 'p': t.p, 'k': t.k, **{norm: t.rates.get(norm) for norm in RATE_NORMS}}
            for t in tables]
    return pd.DataFrame(rows, columns=['case', 'p', 'k', *RATE_NORMS])


def _ensure_parent(path: str):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)


def write_csv(tables: Iterable[ConvergenceTable], path: str) -> None:
    """All runs of all tables, one row per run, in the fixed column order"""
    records = [r for t in tables for r in t.records]
    _ensure_parent(path)
    records_frame(records).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    logger.info(f"Wrote {len(records)} runs to {path}")


def write_json(record: RunRecord, path: str) -> None:
    _ensure_parent(path)
    with open(path, 'w') as f:
        f.write(record.model_dump_json(indent=2))
        f.write('\n')
    logger.info(f"Wrote run record to {path}")
