import json
import logging
import sqlite3
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)


class ResultsStore:
    def __init__(self, db_path: str = 'linearml_results.db'):
        """Open (or create) the benchmark history database"""
        try:
            self.db_path = db_path
            self.conn = sqlite3.connect(db_path)
            self.conn.row_factory = sqlite3.Row
            self.cursor = self.conn.cursor()
            self._create_tables()
        except Exception as e:
            logger.error(f"Results database initialization error: {str(e)}")
            raise

    def _create_tables(self):
        self.cursor.execute('''
            CREATE TABLE IF NOT EXISTS bench_results (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run_label TEXT NOT NULL,
                dataset_id TEXT NOT NULL,
                algorithm TEXT NOT NULL,
                seed INTEGER NOT NULL,
                split TEXT,
                n INTEGER,
                correct INTEGER,
                accuracy REAL,
                metrics_json TEXT,
                wall_time REAL,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        ''')
        self.conn.commit()

    def save_report(self, report, run_label: str) -> int:
        """Insert every row of a BenchReport; returns the number of rows written"""
        try:
            self.conn.execute("BEGIN TRANSACTION")
            for row in report.rows:
                self.cursor.execute('''
                    INSERT INTO bench_results
                    (run_label, dataset_id, algorithm, seed, split, n, correct, accuracy, metrics_json, wall_time)
                    VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
                ''', (
                    run_label,
                    row.dataset_id,
                    row.algorithm,
                    row.seed,
                    row.split,
                    row.metrics.n,
                    row.metrics.correct,
                    row.metrics.accuracy,
                    json.dumps(row.metrics.to_dict()),
                    row.wall_time,
                ))
            self.conn.commit()
            logger.info(f"Saved {len(report.rows)} benchmark rows to {self.db_path} as '{run_label}'")
            return len(report.rows)
        except Exception as e:
            logger.error(f"Error saving benchmark report: {str(e)}")
            self.conn.rollback()
            raise

    def get_rows(self, dataset_id: Optional[str] = None) -> List[Dict[str, Any]]:
        """Stored rows, oldest first, optionally for one dataset"""
        query = "SELECT * FROM bench_results"
        params = []
        if dataset_id is not None:
            query += " WHERE dataset_id = ?"
            params.append(dataset_id)
        query += " ORDER BY id"
        self.cursor.execute(query, params)
        return [dict(row) for row in self.cursor.fetchall()]

    def test_connection(self) -> Dict[str, Any]:
        """Test database connection and return status"""
        try:
            self.cursor.execute("SELECT COUNT(*) FROM bench_results")
            return {
                "status": "connected",
                "database_path": self.db_path,
                "row_count": self.cursor.fetchone()[0],
            }
        except Exception as e:
            return {
                "status": "error",
                "error": str(e),
                "database_path": self.db_path,
            }

    def close(self):
        if self.conn:
            self.conn.close()
            self.conn = None
