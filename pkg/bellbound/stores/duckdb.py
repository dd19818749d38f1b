import io
import json

from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence

import duckdb
import numpy as np

from rich import print

from bellbound.loader.models import RunRecord


class DuckDBStore:
    """Run records and cached moment bases in one duckdb file."""

    def __init__(self, db_name: Optional[str] = None) -> None:
        self.db_name = db_name if db_name else "./bellbound.db"
        with duckdb.connect(self.db_name) as conn:
            conn.sql(
                """CREATE TABLE IF NOT EXISTS runs (
                     run_id VARCHAR,
                     name VARCHAR,
                     inequality VARCHAR,
                     dims INTEGER[],
                     method VARCHAR,
                     value DOUBLE,
                     per_block VARCHAR,
                     seed INTEGER,
                     wall_time DOUBLE,
                     complete BOOLEAN,
                     config VARCHAR,
                     version VARCHAR,
                     run_time TIMESTAMP
                     )"""
            )
            conn.sql(
                """CREATE TABLE IF NOT EXISTS moment_bases (
                     scenario_hash VARCHAR,
                     dims INTEGER[],
                     rank_class VARCHAR,
                     settings VARCHAR,
                     rank INTEGER,
                     basis BLOB,
                     created_at TIMESTAMP
                     )"""
            )

    def insert_results(self, record: RunRecord, run_time: Optional[datetime] = None):
        run_time = run_time if run_time else datetime.now()
        with duckdb.connect(self.db_name) as conn:
            conn.execute(
                "INSERT INTO runs VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                [
                    record.run_id,
                    record.name,
                    record.scenario.inequality,
                    list(record.scenario.dims),
                    record.method,
                    record.value,
                    json.dumps(record.per_block),
                    record.seed,
                    record.wall_time,
                    record.complete,
                    json.dumps(record.config, default=str),
                    record.version,
                    run_time,
                ],
            )

    def export_results(self, run_id: str) -> Dict[str, Any]:
        results = {"summary": {}, "incomplete": []}
        with duckdb.connect(self.db_name) as conn:
            summary = conn.execute(
                """SELECT
                     COUNT(*) AS total_runs,
                     SUM(CASE WHEN complete THEN 1 ELSE 0 END) AS complete_runs,
                     SUM(CASE WHEN NOT complete THEN 1 ELSE 0 END) AS incomplete_runs
                   FROM runs
                   WHERE run_id = ?""",
                [run_id],
            ).fetchone()
            results["summary"] = {
                "total_runs": summary[0],
                "complete_runs": summary[1] or 0,
                "incomplete_runs": summary[2] or 0,
            }
            rows = conn.execute(
                """SELECT name, inequality, method, value
                   FROM runs
                   WHERE run_id = ? AND NOT complete
                   LIMIT 20""",
                [run_id],
            ).fetchall()
            columns = ["name", "inequality", "method", "value"]
            results["incomplete"] = [dict(zip(columns, row)) for row in rows]
        return results

    def fetch_runs(self, run_id: Optional[str] = None) -> List[Dict[str, Any]]:
        query = "SELECT name, inequality, dims, method, value, per_block, complete FROM runs"
        params = []
        if run_id:
            query += " WHERE run_id = ?"
            params.append(run_id)
        with duckdb.connect(self.db_name) as conn:
            rows = conn.execute(query, params).fetchall()
        columns = ["name", "inequality", "dims", "method", "value", "per_block", "complete"]
        return [dict(zip(columns, row)) for row in rows]

    def load_basis(
        self, scenario_hash: str, rank_class: str, settings: str
    ) -> Optional[np.ndarray]:
        """Latest span sampled for this scenario, class and sampling settings."""
        with duckdb.connect(self.db_name) as conn:
            row = conn.execute(
                """SELECT basis FROM moment_bases
                   WHERE scenario_hash = ? AND rank_class = ? AND settings = ?
                   ORDER BY created_at DESC
                   LIMIT 1""",
                [scenario_hash, rank_class, settings],
            ).fetchone()
        if not row:
            return None
        return np.load(io.BytesIO(bytes(row[0])), allow_pickle=False)

    def save_basis(
        self,
        scenario_hash: str,
        dims: Sequence[int],
        rank_class: str,
        settings: str,
        vectors: np.ndarray,
    ):
        buffer = io.BytesIO()
        np.save(buffer, vectors, allow_pickle=False)
        with duckdb.connect(self.db_name) as conn:
            conn.execute(
                "INSERT INTO moment_bases VALUES (?, ?, ?, ?, ?, ?, ?)",
                [
                    scenario_hash,
                    list(dims),
                    rank_class,
                    settings,
                    int(vectors.shape[0]),
                    buffer.getvalue(),
                    datetime.now(),
                ],
            )


class StoreFactory:
    @staticmethod
    def create_store(db_name: Optional[str] = None, verbose: bool = False) -> DuckDBStore:
        if verbose:
            print(f"Using store [green]{db_name}[/green]")
        return DuckDBStore(db_name)
