import json

from datetime import datetime
from typing import Any, Dict, List, Optional

import pandas as pd

from rich.console import Console
from rich.table import Table

from bellbound.loader.models import OutputFormat, RunRecord
from bellbound.stores import DuckDBStore


console = Console()

# Left out of the flat (CSV) payload.
NESTED_FIELDS = ("config", "extras", "notes")


def fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.6f}"


def record_payload(record: RunRecord) -> Dict[str, Any]:
    return record.model_dump(mode="json", by_alias=True)


def flat_payload(record: RunRecord) -> pd.DataFrame:
    payload = {k: v for k, v in record_payload(record).items() if k not in NESTED_FIELDS}
    payload["scenario"]["dims"] = list(record.scenario.dims)
    return pd.json_normalize(payload, sep=".")


def write_record(record: RunRecord, path: str, format: OutputFormat = OutputFormat.json):
    if format == OutputFormat.csv:
        flat_payload(record).to_csv(path, index=False, float_format="%.17g")
    else:
        with open(path, "w") as stream:
            json.dump(record_payload(record), stream, indent=2)


def export_results(
    run_id: str,
    store: DuckDBStore,
    run_ts: Optional[datetime] = None,
    verbose: bool = False,
) -> Dict[str, Any]:
    """Summary of the stored run; incomplete records are listed when verbose."""
    results = store.export_results(run_id)
    summary = results["summary"]
    if verbose:
        stamp = run_ts.strftime("%Y-%m-%d %H:%M:%S") if run_ts else ""
        console.print(
            f"Run {run_id[:8]} {stamp}: {summary['total_runs']} records, "
            f"{summary['incomplete_runs']} incomplete"
        )
        for item in results["incomplete"]:
            console.print(
                f"  [yellow]{item['name']}[/yellow] ({item['inequality']}, {item['method']}): "
                f"{fmt(item['value'])}"
            )
    return results


def print_results(records: List[RunRecord], show_ids: bool = False):
    columns = ["Name", "Inequality", "Dims", "Method", "Value", "Blocks", "Seed", "Complete"]
    if show_ids:
        columns = ["Record Id"] + columns
    table = Table(*columns)
    for record in records:
        blocks = ", ".join(f"{k}={fmt(v)}" for k, v in record.per_block.items())
        row = [
            record.name,
            str(record.scenario.inequality),
            ",".join(map(str, record.scenario.dims)),
            str(record.method),
            fmt(record.value),
            blocks,
            str(record.seed),
            ":white_check_mark:" if record.complete else ":warning:",
        ]
        if show_ids:
            row = [record.extras.get("record_id", "")[:16]] + row
        table.add_row(*row)
    console.print(table)
    for record in records:
        for note in record.notes:
            console.print(f"[yellow]{record.name}[/yellow]: {note}")
