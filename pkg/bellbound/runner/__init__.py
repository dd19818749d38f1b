import uuid

from datetime import datetime
from typing import List, Optional

from pydantic import ValidationError
from rich.progress import Progress

from bellbound.bounds import BoundFactory
from bellbound.errors import UsageError
from bellbound.loader.models import BaseConfig, RunRecord
from bellbound.stores import DuckDBStore, StoreFactory


def run_jobs(
    run_id: str,
    config: BaseConfig,
    store: Optional[DuckDBStore],
    verbose=False,
) -> List[RunRecord]:
    results = []
    bounds = []
    with Progress(transient=False) as progress:
        for job in config.jobs:
            bounds.append(BoundFactory.create_bound(run_id, job, store))
        if verbose:
            task = progress.add_task(f"[cyan]Running bounds", total=len(bounds) * 10)
        for bound in bounds:
            results.extend(bound.run(verbose))
            if verbose:
                progress.update(task, advance=10)
    return results


def pre_run_config(
    config: dict,
    compile_only: bool = False,
    skip_store: bool = False,
    verbose: bool = False,
) -> dict:
    if not config:
        raise UsageError("Empty configuration")
    try:
        base_config = BaseConfig(**config)
    except ValidationError as e:
        raise UsageError(f"Invalid configuration: {e}")
    context = {
        "config": base_config,
        "store": None,
        "run_id": str(uuid.uuid4()),
        "run_ts": datetime.now(),
    }
    if compile_only:
        # Scenarios and functionals are built, nothing is solved.
        for job in base_config.jobs:
            try:
                BoundFactory.create_bound(context["run_id"], job)
            except ValidationError as e:
                raise UsageError(f"Invalid job {job.name}: {e}")
        return context
    if not skip_store:
        context["store"] = StoreFactory.create_store(base_config.store, verbose)
    return context
