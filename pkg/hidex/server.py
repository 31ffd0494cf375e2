#!/usr/bin/env python3
"""
MCP server exposing hidex sweeps as background tasks.
A client starts a sweep, then polls or waits for its result rows and output files.
"""

import asyncio
import json
import os
import sys
from datetime import datetime
from pathlib import Path

from mcp.server.fastmcp import Context, FastMCP
from mcp.server.session import ServerSession
from pydantic import Field

from .config import config
from .engine import engine
from .errors import ErrorCode, HidexError
from .experiment import PRESETS, load_experiment
from .models import Scenario, Task, TaskResponse, TaskStatus

mcp = FastMCP("hidex-server")

FINISHED = (TaskStatus.COMPLETED.value, TaskStatus.FAILED.value, TaskStatus.CANCELLED.value)


def _log(msg: str):
    """Log progress to stderr for CLI visibility."""
    print(msg, file=sys.stderr, flush=True)


def _duration(task: Task) -> float | None:
    return (task.completion_time - task.start_time).total_seconds() if task.completion_time else None


def _finished_response(task: Task) -> dict:
    """Response for a task that reached a final state."""
    if task.status == TaskStatus.COMPLETED.value:
        return TaskResponse(
            success=True,
            task_id=task.task_id,
            status=task.status,
            content=task.result,
            outputs=task.outputs,
            duration_seconds=_duration(task),
        ).model_dump()
    default_code = ErrorCode.CANCELLED if task.status == TaskStatus.CANCELLED.value else ErrorCode.EXECUTION_FAILED
    return TaskResponse(
        success=False,
        task_id=task.task_id,
        status=task.status,
        error=task.error or f"Task {task.status}.",
        error_code=task.error_code or default_code.value,
        duration_seconds=_duration(task),
    ).model_dump()


# === Resources ===

@mcp.resource("hidex://scenarios")
def get_scenarios() -> str:
    """List available scenarios and the defaults each preset changes."""
    return json.dumps({
        "scenarios": {scenario.value: PRESETS[scenario] for scenario in Scenario},
        "output_dir": config.server.output_dir,
        "workers": config.harness.workers,
    }, indent=2)


# === Tools ===

@mcp.tool()
async def start_sweep(
    ctx: Context[ServerSession, None],
    scenario: str = Field(description="uncoded, coded, detect-prob, mse, threshold, components or schedules"),
    config_path: str | None = Field(default=None, description="TOML experiment file"),
    snr_db: list[float] | None = Field(default=None, description="SNR grid in dB"),
    sinr_db: list[float] | None = Field(default=None, description="SINR grid in dB"),
    trials: int | None = Field(default=None, description="Initial trials per grid point"),
    max_trials: int | None = Field(default=None, description="Auto-extension cap (default: HIDEX_TRIAL_CAP)"),
    seed: int | None = Field(default=None, description="Master seed"),
    k_max: int | None = Field(default=None, description="Mixture component budget"),
    out: str | None = Field(default=None, description="Output path stem (default: <HIDEX_OUTPUT_DIR>/<scenario>)"),
) -> dict:
    """Start a Monte Carlo sweep in the background."""
    if config_path:
        config_path = os.path.expanduser(config_path)
        if not os.path.isfile(config_path):
            return TaskResponse(
                success=False, error=f"config_path '{config_path}' does not exist.",
                error_code=ErrorCode.NOT_FOUND.value,
            ).model_dump()
    try:
        cfg = load_experiment(config_path, scenario, {
            "snr_grid_db": snr_db, "sinr_db": sinr_db, "trials": trials, "max_trials": max_trials,
            "seed": seed, "k_max": k_max,
        })
    except HidexError as e:
        return TaskResponse(success=False, error=str(e), error_code=e.code.value).model_dump()

    stem = Path(out) if out else Path(config.server.output_dir) / cfg.scenario.value
    task = engine.create_task(
        command=f"sweep_{cfg.scenario.value}",
        args={"config_path": config_path, "out": str(stem)},
        context=ctx,
    )
    task.async_task = asyncio.create_task(engine.run_sweep_task(task, cfg, stem))

    return TaskResponse(
        success=True,
        task_id=task.task_id,
        status=task.status,
        message=f"{cfg.scenario.value} sweep started. Use wait_for_task to get result.",
    ).model_dump()


@mcp.tool()
async def get_task_result(task_id: str) -> dict:
    """
    Get the result of a sweep without waiting.

    Args:
        task_id: The task ID returned by start_sweep
    """
    task = engine.get_task(task_id)
    if not task:
        return TaskResponse(success=False, error=f"Task '{task_id}' not found.",
                            error_code=ErrorCode.NOT_FOUND.value).model_dump()

    if task.status in FINISHED:
        return _finished_response(task)
    elapsed = (datetime.now() - task.start_time).total_seconds()
    latest = task.progress_lines[-1] if task.progress_lines else "no grid point finished yet"
    return TaskResponse(
        success=True,
        task_id=task_id,
        status=task.status,
        message=f"Task is still {task.status} ({elapsed:.1f}s elapsed); last progress: {latest}",
    ).model_dump()


@mcp.tool()
async def wait_for_task(task_id: str, timeout: int = config.server.task_timeout) -> dict:
    """
    Wait for a sweep to finish and return its result.

    Args:
        task_id: The task ID to wait for
        timeout: Maximum seconds to wait
    """
    task = engine.get_task(task_id)
    if not task:
        return TaskResponse(success=False, error=f"Task '{task_id}' not found.",
                            error_code=ErrorCode.NOT_FOUND.value).model_dump()
    if task.status in FINISHED:
        return _finished_response(task)
    if not task.async_task:
        return TaskResponse(
            success=False,
            task_id=task_id,
            status=task.status,
            error=task.error or f"Task has no async handler (status: {task.status})",
            error_code=ErrorCode.INTERNAL_ERROR.value,
        ).model_dump()

    try:
        await asyncio.wait_for(asyncio.shield(task.async_task), timeout=timeout)
    except asyncio.TimeoutError:
        return TaskResponse(
            success=False,
            task_id=task_id,
            status="timeout",
            error=f"Task still running after {timeout}s. Use get_task_result to check later.",
            error_code=ErrorCode.TIMEOUT.value,
        ).model_dump()
    except asyncio.CancelledError:
        # The wait was aborted; the sweep keeps running
        return TaskResponse(
            success=True,
            task_id=task_id,
            status=task.status,
            message="Wait aborted. Task still running. Use get_task_result or wait_for_task later.",
        ).model_dump()
    except Exception as e:
        task.status = TaskStatus.FAILED.value
        task.error = f"Task failed: {e}"
        task.completion_time = datetime.now()
    return _finished_response(task)


@mcp.tool()
async def list_tasks(
    status_filter: str | None = Field(default=None, description="Filter by status: pending, running, completed, failed, cancelled"),
    limit: int = Field(default=20, description="Maximum number of tasks to return"),
) -> dict:
    """List tracked sweeps with their current status."""
    tasks_list = []
    for task_id, task in list(engine.tasks.items())[-limit:]:
        if status_filter and task.status != status_filter:
            continue
        tasks_list.append({
            "task_id": task_id,
            "command": task.command,
            "status": task.status,
            "elapsed_seconds": round((datetime.now() - task.start_time).total_seconds(), 1),
            "progress_lines": len(task.progress_lines),
            "has_result": task.result is not None,
            "has_error": task.error is not None,
        })
    return {"success": True, "count": len(tasks_list), "tasks": tasks_list}


@mcp.tool()
async def cancel_task(task_id: str) -> dict:
    """
    Cancel a running sweep. The sweep stops at its next trial batch.

    Args:
        task_id: The task ID to cancel
    """
    task = engine.get_task(task_id)
    if not task:
        return TaskResponse(success=False, error=f"Task '{task_id}' not found.",
                            error_code=ErrorCode.NOT_FOUND.value).model_dump()
    if task.status in FINISHED:
        return TaskResponse(
            success=False,
            task_id=task_id,
            status=task.status,
            error=f"Task already {task.status}, cannot cancel.",
            error_code=ErrorCode.INVALID_PARAMS.value,
        ).model_dump()

    await engine.stop_task(task)
    task.status = TaskStatus.CANCELLED.value
    task.error = "Cancelled by user"
    task.completion_time = task.completion_time or datetime.now()
    return TaskResponse(
        success=True,
        task_id=task_id,
        status=task.status,
        message="Task cancelled successfully.",
    ).model_dump()


def main():
    """Entry point for hidex-server command."""
    import argparse
    import signal

    from . import __version__

    parser = argparse.ArgumentParser(
        prog="hidex-server",
        description="MCP server for background collision-recovery sweeps",
    )
    parser.add_argument("-v", "--version", action="version", version=f"hidex {__version__}")
    parser.parse_args()

    async def run_with_cleanup():
        loop = asyncio.get_running_loop()
        shutdown_event = asyncio.Event()

        def signal_handler(sig):
            _log(f"Received signal {sig}, shutting down...")
            shutdown_event.set()

        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, lambda s=sig: signal_handler(s))
            except NotImplementedError:
                pass

        engine.start_cleanup_loop()
        try:
            server_task = asyncio.create_task(mcp.run_stdio_async())
            shutdown_task = asyncio.create_task(shutdown_event.wait())
            done, _ = await asyncio.wait([server_task, shutdown_task], return_when=asyncio.FIRST_COMPLETED)
            if shutdown_task in done:
                server_task.cancel()
                try:
                    await server_task
                except asyncio.CancelledError:
                    pass
            if server_task in done:
                try:
                    server_task.result()
                except Exception as e:
                    _log(f"Server task ended: {e}")
        except asyncio.CancelledError:
            _log("Server cancelled")
        finally:
            await engine.kill_all_tasks()
            engine.stop_cleanup_loop()
            _log("Server shutdown complete.")

    asyncio.run(run_with_cleanup())


if __name__ == "__main__":
    main()
