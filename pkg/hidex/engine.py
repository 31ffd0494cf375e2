"""
Task execution engine for hidex.
Runs sweeps in worker threads and tracks their lifecycle for the MCP server.
"""

import asyncio
import sys
import uuid
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any

from .config import config
from .errors import HidexError, SweepCancelled
from .harness import find_detection_knee, find_sinr_threshold, run_sweep
from .models import ExperimentConfig, Scenario, Task, TaskStatus
from .output import render_outputs


def _log(msg: str):
    """Log to stderr."""
    print(msg, file=sys.stderr, flush=True)


def summarize(rows) -> str:
    """One line per row, the way result CSVs read."""
    lines = []
    for row in rows:
        text = f"{row.receiver} snr={row.snr_db:g} sinr={row.sinr_db:.2f} {row.metric.value}={row.value:.4g}"
        interval = row.interval()
        if interval is not None:
            text += f" [{interval[0]:.3g}, {interval[1]:.3g}]"
        lines.append(f"{text} n={row.count}")
    return "\n".join(lines)


class TaskEngine:
    """
    Core task execution engine.
    Manages task lifecycle and runs sweeps off the event loop.
    """

    def __init__(self):
        self.tasks: dict[str, Task] = {}
        self._cleanup_task: asyncio.Task | None = None
        config.print_warnings()

    def start_cleanup_loop(self):
        """Start background task cleanup loop."""
        if self._cleanup_task is None:
            self._cleanup_task = asyncio.create_task(self._cleanup_old_tasks())

    def stop_cleanup_loop(self):
        """Stop background task cleanup loop."""
        if self._cleanup_task:
            self._cleanup_task.cancel()
            self._cleanup_task = None

    async def _cleanup_old_tasks(self):
        """Background task to drop finished tasks after 5 minutes."""
        while True:
            try:
                await asyncio.sleep(60)
                now = datetime.now()
                stale = [
                    task_id for task_id, task in self.tasks.items()
                    if task.completion_time and (now - task.completion_time) > timedelta(minutes=5)
                ]
                for task_id in stale:
                    del self.tasks[task_id]
            except asyncio.CancelledError:
                break
            except Exception as e:
                _log(f"Error in cleanup_old_tasks: {e}")

    def create_task(self, command: str, args: dict, context: Any = None) -> Task:
        """Create and register a new task."""
        task = Task(
            task_id=str(uuid.uuid4()),
            status=TaskStatus.PENDING.value,
            command=command,
            args=args,
            start_time=datetime.now(),
            context=context,
        )
        self.tasks[task.task_id] = task
        return task

    def get_task(self, task_id: str) -> Task | None:
        """Get a task by ID."""
        return self.tasks.get(task_id)

    async def stop_task(self, task: Task):
        """Ask a running sweep to stop at the next batch boundary and wait for it."""
        task.cancel_event.set()
        if task.async_task and not task.async_task.done():
            try:
                await task.async_task
            except (asyncio.CancelledError, Exception):
                pass

    async def kill_all_tasks(self):
        """Stop all running tasks. Used for graceful shutdown."""
        for task in list(self.tasks.values()):
            if task.status in [TaskStatus.PENDING.value, TaskStatus.RUNNING.value]:
                await self.stop_task(task)
                task.status = TaskStatus.CANCELLED.value
                task.error = "Server shutdown"
                task.completion_time = datetime.now()

    async def _send_notification(self, task: Task, level: str, message: str):
        """Send notification via task context if available."""
        if not task.context:
            return
        handler = getattr(task.context, level, None)
        if not callable(handler):
            handler = getattr(task.context, "info", None)
        if handler:
            try:
                await asyncio.shield(handler(message))
            except Exception as e:
                _log(f"[ERROR] Failed to send {level} notification: {e}")

    async def _emit_task_notification(self, task: Task):
        """Emit task completion/failure notification."""
        prefix = "[hidex]"
        if task.status == TaskStatus.COMPLETED.value:
            await self._send_notification(task, "info", f"{prefix} Task {task.task_id[:8]} completed")
        elif task.status == TaskStatus.FAILED.value:
            error_preview = (task.error or "")[:100]
            await self._send_notification(task, "error", f"{prefix} Task {task.task_id[:8]} failed: {error_preview}")

    def _progress_sink(self, task: Task, loop: asyncio.AbstractEventLoop):
        """Callback for the worker thread: store the line and forward it to the client."""
        def sink(line: str):
            task.progress_lines.append(line)
            if task.context:
                asyncio.run_coroutine_threadsafe(
                    self._send_notification(task, "info", f"[{task.task_id[:8]}] {line}"), loop
                )
        return sink

    async def run_sweep_task(self, task: Task, cfg: ExperimentConfig, out: str | Path,
                             formats: tuple[str, ...] = ("csv", "svg"), workers: int | None = None):
        """Run one sweep for a task, write its outputs and record the outcome."""
        loop = asyncio.get_running_loop()
        sink = self._progress_sink(task, loop)
        task.status = TaskStatus.RUNNING.value

        def work():
            if cfg.scenario == Scenario.THRESHOLD:
                result = find_sinr_threshold(cfg, workers, sink, task.cancel_event)
                header = (
                    f"threshold_db={result.threshold_db:.3f}" if result.in_range
                    else f"threshold out of range (max ratio {result.max_ratio:.3g})"
                )
                rows = result.rows
            elif cfg.scenario == Scenario.DETECT_PROB:
                knee = find_detection_knee(cfg, workers, sink, task.cancel_event)
                header, rows = knee.describe(), knee.rows
            else:
                rows = run_sweep(cfg, workers, sink, task.cancel_event)
                header = f"{len(rows)} rows"
            paths = render_outputs(rows, out, formats)
            return f"{header}\n{summarize(rows)}", [str(p) for p in paths]

        try:
            task.result, task.outputs = await asyncio.to_thread(work)
            task.status = TaskStatus.COMPLETED.value
        except SweepCancelled as e:
            task.status = TaskStatus.CANCELLED.value
            task.error = str(e)
            task.error_code = e.code.value
        except asyncio.CancelledError:
            task.cancel_event.set()
            task.status = TaskStatus.CANCELLED.value
            task.completion_time = datetime.now()
            raise
        except HidexError as e:
            task.status = TaskStatus.FAILED.value
            task.error = str(e)
            task.error_code = e.code.value
        except Exception as e:
            task.status = TaskStatus.FAILED.value
            task.error = f"Error running sweep: {e}"
            task.error_code = "EXECUTION_FAILED"
        task.completion_time = datetime.now()
        await self._emit_task_notification(task)


# Global engine instance
engine = TaskEngine()
