"""
Management command to compare data insertion techniques on one payload size
"""
from django.core.management.base import CommandError

from attacks.comparison import compare_techniques
from cli.base import EXIT_VALIDATION, UWebCommand


class Command(UWebCommand):
    help = 'Build every insertion technique for a random payload and compare size, cost and attack safety'

    def add_command_arguments(self, parser):
        parser.add_argument('size', type=int, help='Payload size in bytes')
        parser.add_argument('--mutations', type=int, default=64,
                            help='Input mutations tried per technique (default: 64)')

    def run(self, config, **options):
        size = options['size']
        if size <= 0:
            raise CommandError('Payload size must be positive', returncode=EXIT_VALIDATION)
        metrics = compare_techniques(size, config.cost_model(), seed=config.seed, mutations=options['mutations'])
        rows = []
        for m in metrics:
            row = m.as_dict()
            row['cost_mltc'] = config.mltc(m.cost)
            rows.append(row)
        safe = [m for m in metrics if m.output_mod_safe and m.input_mod_safe]
        best = max(safe, key=lambda m: m.goodput).name if safe else None
        return {
            'message': f'Compared {len(rows)} techniques on {size:,} bytes; best safe goodput: {best}',
            'payload_size': size,
            'best_safe': best,
            'techniques': rows,
        }

    def render(self, result):
        self.stdout.write(f"{'technique':<16} {'txs':>6} {'bytes':>12} {'goodput':>8} "
                          f"{'cost (mLTC)':>12} {'B/tx':>8}  safe(out/in)")
        for row in result['techniques']:
            safety = f"{'yes' if row['output_mod_safe'] else 'NO'}/{'yes' if row['input_mod_safe'] else 'NO'}"
            self.stdout.write(
                f"{row['name']:<16} {row['transactions']:>6} {row['total_bytes']:>12,} "
                f"{row['goodput']:>8.3f} {row['cost_mltc']:>12.3f} {row['payload_per_tx']:>8,}  {safety}"
            )
        self.success(result['message'])
