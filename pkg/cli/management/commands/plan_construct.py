"""
Management command to lay out a max-rate construct for a payload
"""
import gzip
from pathlib import Path

from django.core.management.base import CommandError

from cli.base import EXIT_VALIDATION, UWebCommand
from maxrate.planner import (
    estimate_construct_size, estimate_goodput, estimate_throughput, plan_construct, throughput_limit,
)


class Command(UWebCommand):
    help = 'Plan the preparing, funding and spending transactions that would carry a payload'

    def add_command_arguments(self, parser):
        parser.add_argument('payload', nargs='?', help='Payload file')
        parser.add_argument('--size', type=int, help='Plan for this many bytes instead of a file')
        parser.add_argument('--gzip', action='store_true', help='Plan for the gzip-compressed file, as store does')
        parser.add_argument('--sources', type=int,
                            help='Source coins on hand; fewer than the funding lanes adds a preparing tree')

    def run(self, config, **options):
        if options['size'] is not None:
            size = options['size']
        elif options['payload']:
            data = Path(options['payload']).read_bytes()
            size = len(gzip.compress(data, mtime=0)) if options['gzip'] and data else len(data)
        else:
            raise CommandError('Give a payload file or --size', returncode=EXIT_VALIDATION)
        if size <= 0:
            raise CommandError('Payload is empty; nothing to plan', returncode=EXIT_VALIDATION)

        model = config.cost_model()
        plan = plan_construct(size, model, sources=options.get('sources'))
        result = plan.as_dict()
        result.update({
            'message': (f'{sum(plan.preparing_levels)} preparing, {plan.funding_tx_count} funding, '
                        f'{plan.spending_tx_count} spending, {plan.epochs} epochs'),
            'total_fee_mltc': config.mltc(plan.total_fee),
            'required_source_value_mltc': config.mltc(plan.required_source_value),
            'estimated_throughput': estimate_throughput(size, model),
            'throughput_limit': throughput_limit(model),
            'estimated_construct_size': estimate_construct_size(size, model),
            'estimated_goodput': estimate_goodput(size, model),
            'epoch_seconds': model.epoch_seconds,
            'bandwidth': model.upload_bandwidth,
        })
        return result

    def render(self, result):
        self.stdout.write(f"Construct plan for {result['payload_size']:,} bytes "
                          f"({result['chunk_count']:,} chunks)")
        self.success(result['message'])
        self.table([
            ('Preparing levels', ', '.join(map(str, result['preparing_levels'])) or '-'),
            ('Funding outputs', f"{sum(result['funding_outputs']):,}"),
            ('Inputs per spending tx', _inputs_summary(result['inputs_per_spending_tx'])),
            ('Construct size', f"{result['construct_total_size']:,} B"),
            ('Goodput', f"{result['goodput']:.2%} (estimate {result['estimated_goodput']:.2%})"),
            ('Total fee', f"{result['total_fee']:,} ({result['total_fee_mltc']:.3f} mLTC)"),
            ('Dust surcharge', f"{result['dust_surcharge']:,}"),
            ('Source value needed', f"{result['required_source_value']:,} "
                                    f"({result['required_source_value_mltc']:.3f} mLTC)"),
            ('Throughput estimate', f"{result['estimated_throughput'] / 1000:,.1f} KB/s "
                                    f"(limit {result['throughput_limit'] / 1000:,.1f} KB/s)"),
        ])


def _inputs_summary(counts):
    if not counts:
        return '-'
    full = max(counts)
    partial = [c for c in counts if c != full]
    text = f'{counts.count(full)} x {full}'
    if partial:
        text += ' + ' + ', '.join(map(str, partial))
    return text
