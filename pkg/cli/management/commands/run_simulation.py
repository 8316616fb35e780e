"""
Management command to replay a workload on the chain simulator
"""
import uuid
from pathlib import Path

from django.core.management.base import CommandError

from chainsim.models import SimulationRun
from chainsim.stats import FINANCIAL, MAX_RATE
from chainsim.tasks import execute_run, queue_simulation
from chainsim.workload import PRESETS, load_workload, preset
from cli.base import EXIT_VALIDATION, UWebCommand


class Command(UWebCommand):
    help = 'Run a writer/financial workload through the simulator and write txs.csv, blocks.csv, summary.json'

    def add_command_arguments(self, parser):
        source = parser.add_mutually_exclusive_group()
        source.add_argument('--workload', help='Workload JSON file')
        source.add_argument('--preset', choices=sorted(PRESETS), help='Built-in workload')
        parser.add_argument('--writers', type=int, help='Override the writer count')
        parser.add_argument('--epochs', type=int, help='Stop after this many blocks')
        parser.add_argument('--multiplier', type=int, help='Financial load multiplier (1-10)')
        parser.add_argument('--output', help='Output directory (default: <data dir>/simulations/<run id>)')
        parser.add_argument('--async', action='store_true', dest='run_async',
                            help='Queue the run on the Django-Q cluster and return at once')

    def run(self, config, **options):
        if options['workload']:
            workload = load_workload(options['workload'])
        elif options['preset']:
            workload = preset(options['preset'])
        else:
            raise CommandError('Give --workload or --preset', returncode=EXIT_VALIDATION)

        overrides = {
            'writers': options['writers'],
            'epochs': options['epochs'],
            'financial_multiplier': options['multiplier'],
            'seed': options['seed'],
            'epoch_seconds': options['epoch_seconds'],
            'fee_rate': options['fee_rate'],
        }
        workload = workload.with_overrides(**{k: v for k, v in overrides.items() if v is not None})

        if options['run_async']:
            run_id = queue_simulation(workload)
            return {'message': f'Queued simulation {run_id}', 'run_id': run_id, 'queued': True,
                    'workload': workload.to_dict()}

        run_id = str(uuid.uuid4())
        sim_run = SimulationRun.objects.create(
            run_id=run_id,
            workload_name=workload.name,
            workload=workload.to_dict(),
            seed=workload.seed,
            status='pending',
            message=f'Running {workload.name} simulation...',
        )
        output = Path(options['output']) if options['output'] else config.data_dir / 'simulations' / run_id
        stats = execute_run(sim_run, workload, output)
        summary = stats.summary()
        return {
            'message': f"Simulated {summary['blocks']} blocks of {workload.name}",
            'run_id': run_id,
            'queued': False,
            'output': str(output),
            'summary': summary,
        }

    def render(self, result):
        if result['queued']:
            self.success(result['message'])
            self.stdout.write('  Follow it in the admin under Simulation Runs')
            return
        summary = result['summary']
        self.success(result['message'])
        self.table([
            ('Writers', summary['writers']),
            ('Space utilization', f"{summary['space_utilization']:.2%}"),
            ('Txn utilization', f"{summary['txn_utilization']:.2%}"),
            ('Peak mempool', f"{summary['peak_mempool_bytes']:,} B ({summary['peak_mempool_gib']:.2f} GiB)"),
            ('Last confirmation', f"{summary['last_confirmation_hours']:.2f} h"),
            ('Output', result['output']),
        ])
        for klass in (FINANCIAL, MAX_RATE):
            stats = summary[klass]
            if not stats['confirmed']:
                self.stdout.write(f"  {klass}: {stats['count']} txs, none confirmed")
                continue
            pct = ', '.join(f'p{k}={v:.0f}s' for k, v in stats['percentiles'].items())
            self.stdout.write(
                f"  {klass}: {stats['confirmed']}/{stats['count']} confirmed, "
                f"mean {stats['mean_delay']:.0f}s, max {stats['max_delay']:.0f}s ({pct})"
            )
