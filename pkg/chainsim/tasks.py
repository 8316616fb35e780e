"""
Background simulator runs. These run through Django-Q so that long sweeps
do not block the operator's shell.
"""
import json
import logging
import uuid
from pathlib import Path

from django.conf import settings

from .exceptions import ChainSimError
from .models import SimulationRun
from .simulator import run
from .workload import WorkloadSpec

logger = logging.getLogger(__name__)

PROGRESS_EVERY = 25


def write_outputs(stats, directory):
    """Write txs.csv, blocks.csv and summary.json under directory; returns the directory"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / 'txs.csv', 'w', newline='') as txs, open(directory / 'blocks.csv', 'w', newline='') as blocks:
        stats.to_csv(txs, blocks)
    (directory / 'summary.json').write_text(json.dumps(stats.summary(), indent=2))
    return directory


def execute_run(sim_run, workload, output_dir):
    """Run workload while keeping sim_run's progress counters current"""
    sim_run.mark_running()
    total = workload.epochs or 0

    def progress(height, epochs):
        if height % PROGRESS_EVERY == 0:
            sim_run.update_progress(height, epochs or total, message=f"Mined {height} blocks")

    try:
        stats = run(workload, progress=progress)
        directory = write_outputs(stats, output_dir)
        summary = stats.summary()
        sim_run.mark_completed(summary, directory, message=f"{summary['blocks']} blocks simulated")
        logger.info(f"✓ Simulation {sim_run.run_id} completed: {summary['blocks']} blocks")
        return stats
    except ChainSimError as e:
        logger.error(f"✗ Simulation {sim_run.run_id} failed: {e}")
        sim_run.mark_failed(str(e))
        raise
    except Exception as e:
        logger.exception(f"✗ Simulation {sim_run.run_id} crashed")
        sim_run.mark_failed(f"Fatal error: {e}")
        raise


def async_run_simulation(run_id, workload_json):
    """
    Background task: replay a workload and store its summary.

    Args:
        run_id: SimulationRun.run_id for tracking
        workload_json: WorkloadSpec.to_dict() serialized as JSON
    """
    sim_run = SimulationRun.objects.get(run_id=run_id)
    try:
        workload = WorkloadSpec.from_dict(json.loads(workload_json))
    except Exception as e:
        logger.error(f"✗ Simulation {run_id} has an unreadable workload: {e}")
        sim_run.mark_failed(f"Fatal error: {e}")
        return
    try:
        execute_run(sim_run, workload, Path(settings.UWEB_DATA_DIR) / 'simulations' / run_id)
    except Exception:
        # execute_run has already marked the run failed
        pass


def queue_simulation(workload):
    """Create a pending SimulationRun and hand it to the Django-Q cluster"""
    from django_q.tasks import async_task

    run_id = str(uuid.uuid4())
    SimulationRun.objects.create(
        run_id=run_id,
        workload_name=workload.name,
        workload=workload.to_dict(),
        seed=workload.seed,
        status='pending',
        message=f'Queuing {workload.name} simulation...',
    )
    async_task(
        async_run_simulation,
        run_id=run_id,
        workload_json=json.dumps(workload.to_dict()),
        task_name=f'simulation_{workload.name}_{run_id[:8]}',
    )
    logger.info(f"Queued simulation {run_id} ({workload.name})")
    return run_id
