"""
Management command to bring the content index up to the chain tip
"""
from cli.base import UWebCommand
from uweb.index import ContentIndex


class Command(UWebCommand):
    help = 'Scan new blocks into the content index and list publishers and live files'

    def add_command_arguments(self, parser):
        parser.add_argument('--full', action='store_true', help='Discard the index and rescan from genesis')
        parser.add_argument('--publisher', help='Only list files of this publisher id')

    def run(self, config, **options):
        with self.node(config, save=False) as state:
            if options['full']:
                config.index_path.unlink(missing_ok=True)
                state.index = ContentIndex(config.index_path)
            start = state.index.scan_height
            index = state.index.scan(state.chain.read_blocks())
            files = [
                {'publisher': pid, 'path': path, 'size': record.latest.size,
                 'root_txid': record.latest.root_txid, 'versions': len(record.versions)}
                for pid, path, record in index.listing(options['publisher'])
            ]
            return {
                'message': f'Scanned blocks {start}..{index.scan_height}: '
                           f'{len(index.publishers)} publishers, {len(files)} live files',
                'scan_height': index.scan_height,
                'publishers': {pid: record.name for pid, record in index.publishers.items()},
                'files': files,
                'quarantined': [{'txid': txid, 'reason': reason} for txid, reason in index.quarantined],
            }

    def render(self, result):
        self.success(result['message'])
        for pid, name in result['publishers'].items():
            self.stdout.write(f'  Publisher {name} ({pid})')
        for f in result['files']:
            self.stdout.write(f"    {f['path']:<40} {f['size']:>12,} B  v{f['versions']}  {f['root_txid'][:16]}")
        if result['quarantined']:
            self.stdout.write(self.style.WARNING(f"{len(result['quarantined'])} quarantined entries:"))
            for q in result['quarantined']:
                self.stdout.write(f"    {q['txid']}: {q['reason']}")
