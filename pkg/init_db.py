"""
Database Schema Initialization for the CutFEM results store
Creates the runs/studies tables and stores or lists RunRecords
"""

import logging
import os
import sqlite3
from typing import Optional

import pandas as pd

import config

logger = logging.getLogger(__name__)

RUN_COLUMNS = [
    'case_id', 'p', 'k', 'gamma_g', 'n', 'h', 'dofs', 'l2_error', 'h1_semi_error', 'triple_error',
    'delta_h', 'min_xi', 'residual', 'area_omega_h', 'length_gamma_h', 'star_error', 'num_patches',
    'wall_time', 'trace_error',
]


def _connect(db_path: Optional[str]) -> sqlite3.Connection:
    db_path = db_path or config.DB_PATH
    directory = os.path.dirname(db_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    return sqlite3.connect(db_path)


def init_database(db_path: Optional[str] = None):
    """Initialize the database with all required tables"""
    conn = _connect(db_path)
    cursor = conn.cursor()

    # --- STUDIES TABLE (one convergence sequence) ---
    cursor.execute('''
        CREATE TABLE IF NOT EXISTS studies (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            case_id TEXT NOT NULL,
            p INTEGER NOT NULL,
            k INTEGER NOT NULL,
            gamma_g REAL NOT NULL,
            n0 INTEGER NOT NULL,
            levels INTEGER NOT NULL,
            l2_rate REAL,
            h1_semi_rate REAL,
            triple_rate REAL,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
        )
    ''')

    # --- RUNS TABLE (one solve) ---
    cursor.execute('''
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            study_id INTEGER,
            case_id TEXT NOT NULL,
            p INTEGER NOT NULL,
            k INTEGER NOT NULL,
            gamma_g REAL NOT NULL,
            n INTEGER NOT NULL,
            h REAL NOT NULL,
            dofs INTEGER NOT NULL,
            l2_error REAL NOT NULL,
            h1_semi_error REAL NOT NULL,
            triple_error REAL NOT NULL,
            delta_h REAL,
            min_xi REAL,
            residual REAL,
            area_omega_h REAL,
            length_gamma_h REAL,
            created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP,
            FOREIGN KEY (study_id) REFERENCES studies(id) ON DELETE CASCADE
        )
    ''')

    cursor.execute('CREATE INDEX IF NOT EXISTS idx_runs_case ON runs(case_id, p, k, n)')
    cursor.execute('CREATE INDEX IF NOT EXISTS idx_runs_study ON runs(study_id)')
    cursor.execute('CREATE INDEX IF NOT EXISTS idx_studies_case ON studies(case_id, p, k)')

    conn.commit()
    conn.close()
    logger.info(f"Database initialized at {db_path or config.DB_PATH}")


def migrate(db_path: Optional[str] = None):
    """Safely apply schema changes to an existing DB without data loss"""
    conn = _connect(db_path)
    cursor = conn.cursor()

    for table, col, definition in [
        ('runs',    'star_error',  'REAL'),
        ('runs',    'num_patches', 'INTEGER DEFAULT 0'),
        ('runs',    'wall_time',   'REAL'),
        ('runs',    'trace_error', 'REAL'),
        ('studies', 'trace_rate',  'REAL'),
    ]:
        try:
            cursor.execute(f"ALTER TABLE {table} ADD COLUMN {col} {definition}")
            logger.info(f"Added {col} column to {table}")
        except sqlite3.OperationalError:
            pass  # Column already exists

    conn.commit()
    conn.close()


def ensure_database(db_path: Optional[str] = None):
    init_database(db_path)
    migrate(db_path)


def _insert_run_row(conn: sqlite3.Connection, record, study_id: Optional[int]) -> int:
    data = record.model_dump()
    data['case_id'] = data.pop('case')
    values = [data[col] for col in RUN_COLUMNS]
    cursor = conn.execute(
        f"INSERT INTO runs (study_id, {', '.join(RUN_COLUMNS)}) "
        f"VALUES ({', '.join('?' * (len(RUN_COLUMNS) + 1))})",
        [study_id] + values,
    )
    return cursor.lastrowid


def insert_run(record, study_id: Optional[int] = None, db_path: Optional[str] = None) -> int:
    """
    Store one RunRecord.

    Returns:
        id of the inserted row
    """
    ensure_database(db_path)
    conn = _connect(db_path)
    try:
        run_id = _insert_run_row(conn, record, study_id)
        conn.commit()
    except Exception as e:
        conn.rollback()
        logger.error(f"Database error storing run {record.case} n={record.n}: {e}")
        raise
    finally:
        conn.close()
    logger.info(f"Stored run #{run_id} ({record.case} p={record.p} k={record.k} n={record.n})")
    return run_id


def insert_study(table, db_path: Optional[str] = None) -> int:
    """
    Store a ConvergenceTable and its runs in one transaction.

    Returns:
        id of the study row
    """
    ensure_database(db_path)
    rates = table.rates
    conn = _connect(db_path)
    try:
        cursor = conn.execute(
            'INSERT INTO studies (case_id, p, k, gamma_g, n0, levels, l2_rate, h1_semi_rate, triple_rate, '
            'trace_rate) VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)',
            (table.case, table.p, table.k, table.gamma_g, table.records[0].n, len(table.records),
             rates.get('l2_error'), rates.get('h1_semi_error'), rates.get('triple_error'),
             rates.get('trace_error')),
        )
        study_id = cursor.lastrowid
        for record in table.records:
            _insert_run_row(conn, record, study_id)
        conn.commit()
    except Exception as e:
        conn.rollback()
        logger.error(f"Database error storing study {table.case} p={table.p} k={table.k}: {e}")
        raise
    finally:
        conn.close()

    logger.info(f"Stored study #{study_id} with {len(table.records)} runs")
    return study_id


def fetch_runs(db_path: Optional[str] = None, case_id: Optional[str] = None) -> pd.DataFrame:
    """Stored runs ordered by case, p, k, n; optionally for one case"""
    ensure_database(db_path)
    query = 'SELECT * FROM runs'
    params = ()
    if case_id:
        query += ' WHERE case_id = ?'
        params = (case_id,)
    query += ' ORDER BY case_id, p, k, n, id'
    conn = _connect(db_path)
    try:
        return pd.read_sql_query(query, conn, params=params)
    finally:
        conn.close()


if __name__ == "__main__":
    ensure_database()
    print("✅ Database initialized successfully!")
    print(f"📁 Location: {config.DB_PATH}")
    print("\nTables created:")
    print("  - studies (convergence sequences with rates)")
    print("  - runs (one solve per row)")
