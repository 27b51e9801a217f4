import asyncio
import time
from collections.abc import Callable, Hashable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Any
from uuid import uuid4

import structlog

from . import metrics
from .config import configure_logging
from .errors import CoarseBoundError

log = structlog.get_logger()


class JobStatus(str, Enum):
    PENDING = "pending"
    IN_PROGRESS = "in_progress"
    COMPLETED = "completed"
    FAILED = "failed"


class CellStatus(str, Enum):
    SUCCESS = "success"
    FAILED = "failed"


@dataclass
class CellResult:
    key: Hashable
    status: CellStatus
    value: Any = None
    error: str | None = None
    duration_ms: float = 0


@dataclass
class SweepJob:
    job_id: str
    total: int = 0
    status: JobStatus = JobStatus.PENDING
    completed: int = 0
    successful: int = 0
    failed: int = 0
    started_at: float = 0
    ended_at: float = 0
    results: dict = field(default_factory=dict)
    errors: list[dict] = field(default_factory=list)
    cell_timings: list[dict] = field(default_factory=list)


def _run_cell(fn: Callable, key: Hashable, args: tuple) -> CellResult:
    # exceptions are flattened to text so they cross the process boundary
    start = time.perf_counter()
    try:
        value = fn(*args)
    except Exception as e:
        return CellResult(key, CellStatus.FAILED, error=f"{type(e).__name__}: {e}",
                          duration_ms=(time.perf_counter() - start) * 1000)
    return CellResult(key, CellStatus.SUCCESS, value, duration_ms=(time.perf_counter() - start) * 1000)


async def run_sweep(fn: Callable, cells: dict[Hashable, tuple], jobs: int = 1) -> SweepJob:
    """Evaluate fn(*args) for every cell on a bounded process pool."""
    job = SweepJob(job_id=f"sweep_{uuid4().hex[:12]}", total=len(cells), started_at=time.time())
    job.status = JobStatus.IN_PROGRESS
    semaphore = asyncio.Semaphore(max(1, jobs))
    loop = asyncio.get_running_loop()

    with ProcessPoolExecutor(max_workers=max(1, jobs), initializer=configure_logging) as pool:

        async def process_cell(key, args) -> CellResult:
            async with semaphore:
                return await loop.run_in_executor(pool, _run_cell, fn, key, args)

        tasks = [asyncio.create_task(process_cell(key, args)) for key, args in cells.items()]
        for coro in asyncio.as_completed(tasks):
            result = await coro
            job.completed += 1
            metrics.record_sweep_cell(result.status.value)
            if result.status == CellStatus.SUCCESS:
                job.successful += 1
                job.results[result.key] = result.value
            else:
                job.failed += 1
                job.errors.append({"cell": repr(result.key), "error": result.error})
            job.cell_timings.append({
                "cell": repr(result.key),
                "status": result.status.value,
                "duration_ms": round(result.duration_ms, 2),
            })

    job.results = dict(sorted(job.results.items()))
    job.status = JobStatus.FAILED if job.failed else JobStatus.COMPLETED
    job.ended_at = time.time()
    log.info("sweep_finished", job_id=job.job_id, total=job.total, failed=job.failed,
             elapsed_ms=int((job.ended_at - job.started_at) * 1000))
    return job


def run_sweep_sync(fn: Callable, cells: dict[Hashable, tuple], jobs: int = 1) -> dict:
    """Sorted results of a sweep; serial in-process when jobs == 1."""
    if jobs <= 1:
        results = {}
        for key in sorted(cells):
            results[key] = fn(*cells[key])
            metrics.record_sweep_cell(CellStatus.SUCCESS.value)
        return results
    job = asyncio.run(run_sweep(fn, cells, jobs))
    if job.failed:
        first = job.errors[0]
        raise CoarseBoundError(f"{job.failed} of {job.total} sweep cells failed; {first['cell']}: {first['error']}")
    return job.results
