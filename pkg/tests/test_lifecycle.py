"""
Integration tests for task lifecycle management.
Runs real (tiny) sweeps through the engine, including cancellation and failure.
"""

import asyncio
from unittest.mock import AsyncMock

from hidex.errors import ErrorCode
from hidex.models import TaskStatus


class TestSweepExecution:
    """Tests for running sweeps as tasks."""

    async def test_successful_sweep(self, engine, tiny_config, tmp_path):
        """A finished sweep records its summary and output files."""
        task = engine.create_task(command="sweep_detect-prob", args={})
        cfg = tiny_config(scenario="detect-prob", sinr_db=[0.0], trials=2)

        await engine.run_sweep_task(task, cfg, tmp_path / "dp", formats=("csv",), workers=1)

        assert task.status == TaskStatus.COMPLETED.value
        assert task.result.startswith("knee: need at least two SINR levels")
        assert "detector" in task.result
        assert task.outputs == [str(tmp_path / "dp.csv")]
        assert (tmp_path / "dp.csv").exists()
        assert task.progress_lines
        assert task.error is None
        assert task.completion_time is not None

    async def test_invalid_sweep_fails(self, engine, tiny_config, tmp_path):
        """Library errors fail the task and keep their code."""
        task = engine.create_task(command="sweep_uncoded", args={})
        cfg = tiny_config(offset_min=40)

        await engine.run_sweep_task(task, cfg, tmp_path / "bad", formats=("csv",), workers=1)

        assert task.status == TaskStatus.FAILED.value
        assert task.error_code == ErrorCode.INVALID_CONFIG.value
        assert "offset range" in task.error
        assert task.outputs is None

    async def test_notifies_context(self, engine, tiny_config, tmp_path):
        """Completion is reported through the client context."""
        ctx = AsyncMock()
        task = engine.create_task(command="sweep_detect-prob", args={}, context=ctx)
        cfg = tiny_config(scenario="detect-prob", sinr_db=[0.0], trials=1)

        await engine.run_sweep_task(task, cfg, tmp_path / "dp", formats=("csv",), workers=1)

        messages = [call.args[0] for call in ctx.info.await_args_list]
        assert any("completed" in m for m in messages)


class TestTaskCancellation:
    """Tests for stopping sweeps."""

    async def test_cancel_before_first_batch(self, engine, tiny_config, tmp_path):
        """A set cancel event ends the task as cancelled with no outputs."""
        task = engine.create_task(command="sweep_uncoded", args={})
        task.cancel_event.set()

        await engine.run_sweep_task(task, tiny_config(), tmp_path / "ber", workers=1)

        assert task.status == TaskStatus.CANCELLED.value
        assert task.error_code == ErrorCode.CANCELLED.value
        assert not (tmp_path / "ber.csv").exists()

    async def test_stop_running_task(self, engine, tiny_config, tmp_path):
        """stop_task waits for the sweep to wind down."""
        task = engine.create_task(command="sweep_uncoded", args={})
        cfg = tiny_config(snr_grid_db=[5.0, 10.0, 15.0, 20.0, 25.0, 30.0])
        task.async_task = asyncio.create_task(engine.run_sweep_task(task, cfg, tmp_path / "ber", workers=1))

        await engine.stop_task(task)

        assert task.async_task.done()
        assert task.status in (TaskStatus.CANCELLED.value, TaskStatus.COMPLETED.value)
        assert task.cancel_event.is_set()

    async def test_kill_all_tasks(self, engine):
        """Shutdown marks every unfinished task cancelled."""
        pending = engine.create_task(command="sweep_uncoded", args={})
        done = engine.create_task(command="sweep_mse", args={})
        done.status = TaskStatus.COMPLETED.value

        await engine.kill_all_tasks()

        assert pending.status == TaskStatus.CANCELLED.value
        assert pending.error == "Server shutdown"
        assert done.status == TaskStatus.COMPLETED.value


class TestTaskLookup:
    """Tests for the task registry."""

    def test_create_and_get(self, engine):
        """Created tasks are pending and retrievable."""
        task = engine.create_task(command="sweep_coded", args={"out": "x"})
        assert task.status == TaskStatus.PENDING.value
        assert engine.get_task(task.task_id) is task

    def test_unknown_id(self, engine):
        """Unknown IDs give None."""
        assert engine.get_task("missing") is None
