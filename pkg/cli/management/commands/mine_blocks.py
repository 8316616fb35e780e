"""
Management command to advance the simulated chain
"""
from django.core.management.base import CommandError

from cli.base import EXIT_VALIDATION, UWebCommand


class Command(UWebCommand):
    help = 'Mine blocks on the local simulated chain, one epoch each'

    def add_command_arguments(self, parser):
        parser.add_argument('count', type=int, nargs='?', default=1, help='Blocks to mine (default: 1)')

    def run(self, config, **options):
        if options['count'] < 1:
            raise CommandError('Block count must be at least 1', returncode=EXIT_VALIDATION)
        with self.node(config) as state:
            blocks = state.chain.mine_blocks(options['count'])
            return {
                'message': f'Mined {len(blocks)} blocks; height {state.chain.height}',
                'height': state.chain.height,
                'time': state.chain.time,
                'mempool': len(state.chain.mempool),
                'blocks': [
                    {'height': b.height, 'timestamp': b.timestamp, 'txs': b.tx_count, 'size': b.total_size}
                    for b in blocks
                ],
            }

    def render(self, result):
        for b in result['blocks']:
            self.stdout.write(f"  #{b['height']:<6} t={b['timestamp']:>10.1f}s  {b['txs']:>5} txs  {b['size']:>10,} B")
        self.success(result['message'])
        self.stdout.write(f"  {result['mempool']} transactions still in the mempool")
