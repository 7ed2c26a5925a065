"""
romschwarz Run Scheduler

Bounded worker pool for independent runs (one per Pe value, study cell or
table row). Runs execute in a thread executor behind an asyncio semaphore;
results come back in submission order and every task keeps its status.
"""

import asyncio
import time
import uuid
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence

from hub.logger import get_logger


logger = get_logger("scheduler")


class TaskStatus(Enum):
    """Task execution status"""
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class RunTask:
    """One independent run"""
    name: str
    function: Callable[..., Any]
    args: List[Any] = field(default_factory=list)
    kwargs: Dict[str, Any] = field(default_factory=dict)
    id: str = field(default_factory=lambda: str(uuid.uuid4()))
    status: TaskStatus = TaskStatus.PENDING
    result: Any = None
    error: Optional[BaseException] = None
    elapsed: float = 0.0
    created_at: datetime = field(default_factory=datetime.utcnow)
    metadata: Dict[str, Any] = field(default_factory=dict)


class RunScheduler:
    """Runs tasks with at most `workers` in flight"""

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        self.workers = workers
        self.tasks: Dict[str, RunTask] = {}
        logger.debug("run scheduler initialized", workers=workers)

    def submit(self, name: str, function: Callable[..., Any], *args, **kwargs) -> RunTask:
        task = RunTask(name=name, function=function, args=list(args), kwargs=kwargs)
        self.tasks[task.id] = task
        return task

    async def _execute(self, task: RunTask, semaphore: asyncio.Semaphore, executor: ThreadPoolExecutor):
        async with semaphore:
            task.status = TaskStatus.RUNNING
            started = time.perf_counter()
            loop = asyncio.get_running_loop()
            try:
                task.result = await loop.run_in_executor(
                    executor, lambda: task.function(*task.args, **task.kwargs))
                task.status = TaskStatus.COMPLETED
                logger.debug("task completed", task=task.name)
            except Exception as e:
                task.error = e
                task.status = TaskStatus.FAILED
                logger.error("task failed", task=task.name, error=str(e))
            finally:
                task.elapsed = time.perf_counter() - started
        return task

    async def run_async(self, tasks: Sequence[RunTask], raise_on_error: bool = True) -> List[Any]:
        """Execute `tasks`; results in submission order"""
        semaphore = asyncio.Semaphore(self.workers)
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            done = await asyncio.gather(*(self._execute(t, semaphore, executor) for t in tasks))
        failed = [t for t in done if t.status is TaskStatus.FAILED]
        if failed and raise_on_error:
            raise failed[0].error
        return [t.result for t in done]

    def run(self, tasks: Sequence[RunTask], raise_on_error: bool = True) -> List[Any]:
        return asyncio.run(self.run_async(tasks, raise_on_error))

    def map(self, name: str, function: Callable[..., Any], items: Sequence[Any]) -> List[Any]:
        """function(item) for every item, in order"""
        tasks = [self.submit(f"{name}[{i}]", function, item) for i, item in enumerate(items)]
        return self.run(tasks)

    def get_scheduler_stats(self) -> Dict[str, Any]:
        status_counts: Dict[str, int] = {}
        for task in self.tasks.values():
            status_counts[task.status.value] = status_counts.get(task.status.value, 0) + 1
        return {
            "total_tasks": len(self.tasks),
            "workers": self.workers,
            "status_breakdown": status_counts,
            "elapsed_total": sum(t.elapsed for t in self.tasks.values()),
        }
