"""
Management command to read content back from the local chain
"""
from pathlib import Path

from cli.base import UWebCommand
from uweb.access import access


class Command(UWebCommand):
    help = 'Fetch a file by path or root txid; always scans the whole local chain'

    def add_command_arguments(self, parser):
        parser.add_argument('target', help='Directory path (e.g. /news/day1) or root txid')
        parser.add_argument('--publisher', help='Publisher id or name when a path exists under several')
        parser.add_argument('--output', '-o', help='Write the content to this file')

    def run(self, config, **options):
        with self.node(config, save=False) as state:
            found = access(state.chain, options['target'], state.index, publisher=options['publisher'])
        output = None
        if options['output']:
            output = Path(options['output'])
            output.parent.mkdir(parents=True, exist_ok=True)
            output.write_bytes(found.data)
        return {
            'message': f'Read {len(found.data):,} bytes from {found.path or found.root_txid}',
            'target': options['target'],
            'path': found.path,
            'publisher': found.publisher,
            'root_txid': found.root_txid,
            'size': len(found.data),
            'sha256': found.sha256,
            'construct_txs': found.construct_txs,
            'spending_txs': found.spending_txs,
            'removed': found.removed,
            'output': str(output) if output else None,
        }

    def render(self, result):
        self.success(result['message'])
        if result['removed']:
            self.stdout.write(self.style.WARNING(f"⚠ {result['path']} has been removed by its publisher"))
        self.table([
            ('Publisher', result['publisher'] or '-'),
            ('Root txid', result['root_txid']),
            ('SHA-256', result['sha256']),
            ('Construct txs', f"{result['construct_txs']} ({result['spending_txs']} spending)"),
            ('Written to', result['output'] or '-'),
        ])
