"""
Management command to run an integrity attack against a writer's spending transaction
"""
from django.core.management.base import CommandError

from attacks.harness import (
    ATTACK_KINDS, OUTPUT_MOD, ByteEdit, attack_scenario, fuzz_input_modification, head_start_sweep,
    input_modification_attack, manifest_scenario, output_modification_attack, win_rate, write_report,
)
from cli.base import EXIT_VALIDATION, UWebCommand
from maxrate.manifest import load_manifest


def parse_edit(text):
    """input:push:offset:value, e.g. 0:1:17:0"""
    try:
        parts = [int(p, 0) for p in text.split(':')]
        return ByteEdit(*parts)
    except (TypeError, ValueError) as e:
        raise CommandError(f'Bad --edit {text!r}; expected input:push:offset:value', returncode=EXIT_VALIDATION) from e


def parse_grid(text):
    try:
        return [float(p) for p in text.split(',') if p.strip()]
    except ValueError as e:
        raise CommandError(f'Bad --sweep {text!r}; expected comma-separated seconds', returncode=EXIT_VALIDATION) from e


def verdict(outcome):
    if outcome.forged_tx is None:
        return f'forgery not applicable: {outcome.reason}'
    if not outcome.forged_standard:
        return f"forgery nonstandard: {', '.join(outcome.rule_ids) or outcome.reason}"
    if outcome.data_corrupted:
        return 'corruption succeeded'
    return 'forgery lost the race'


class Command(UWebCommand):
    help = 'Forge a victim spending transaction and race the forgery against it on a fresh simulated chain'

    def add_command_arguments(self, parser):
        parser.add_argument('kind', choices=ATTACK_KINDS, help='Attack kind')
        target = parser.add_mutually_exclusive_group()
        target.add_argument('--technique', choices=['max-rate', 'staged-baseline'], default='max-rate',
                            help='Writer to attack with a random payload (default: max-rate)')
        target.add_argument('--manifest', help='Attack a construct described by a manifest file')
        parser.add_argument('--payload-size', type=int, default=20_000, help='Random payload size (default: 20000)')
        parser.add_argument('--victim-index', type=int, default=-1, help='Which spending tx to attack (default: last)')
        parser.add_argument('--head-start', type=float, default=1.0,
                            help='Seconds the forgery reaches the miner ahead of the victim (default: 1)')
        parser.add_argument('--edit', help='Input edit input:push:offset:value (default: flip the first data byte)')
        parser.add_argument('--fuzz', type=int, default=0, help='Also try this many random input edits')
        parser.add_argument('--sweep', help='Comma-separated head starts to sweep, e.g. -2,-1,0,1,2')
        parser.add_argument('--report', help='Write a JSON report with victim and forged hex')

    def scenario(self, config, options):
        if options['manifest']:
            return manifest_scenario(load_manifest(options['manifest']), config.seed, options['victim_index'])
        return attack_scenario(options['technique'], options['payload_size'], config.seed,
                               options['victim_index'], config.cost_model())

    def run(self, config, **options):
        if options['payload_size'] <= 0:
            raise CommandError('Payload size must be positive', returncode=EXIT_VALIDATION)
        kind = options['kind']
        scenario = self.scenario(config, options)
        victim = scenario.victim
        edit = None
        if kind != OUTPUT_MOD:
            if options['edit']:
                edit = parse_edit(options['edit'])
            else:
                first = victim.inputs[0].script_sig.pushes()[0]
                edit = ByteEdit(0, 0, 0, first[0] ^ 0xff)

        spent = scenario.spent
        if kind == OUTPUT_MOD:
            outcome = output_modification_attack(scenario.chain, victim, head_start=options['head_start'])
        else:
            outcome = input_modification_attack(scenario.chain, victim, edit, head_start=options['head_start'])

        result = {
            'message': verdict(outcome),
            'kind': kind,
            'technique': scenario.technique,
            'seed': config.seed,
            'outcome': outcome.as_dict(),
        }
        if options['fuzz'] > 0:
            forgeries = fuzz_input_modification(victim, spent, options['fuzz'], config.seed)
            standard = [f for f in forgeries if f.standard]
            result['fuzz'] = {'samples': len(forgeries), 'standard_forgeries': len(standard)}
        if options['sweep']:
            points = head_start_sweep(lambda: self.scenario(config, options), parse_grid(options['sweep']),
                                      kind, edit)
            result['sweep'] = [{'head_start': h, 'forged_win_rate': rate} for h, rate in win_rate(points)]
        if options['report']:
            result['report'] = str(write_report([outcome], options['report'], kind=kind,
                                                technique=result['technique'], seed=config.seed))
        return result

    def render(self, result):
        outcome = result['outcome']
        self.stdout.write(f"{result['kind']} against {result['technique']} victim {outcome['victim_txid']}")
        if outcome['data_corrupted']:
            self.failure(result['message'])
        else:
            self.success(result['message'])
        self.table([
            ('Forged txid', outcome['forged_txid'] or '-'),
            ('Forgery standard', outcome['forged_standard']),
            ('Forgery mined first', outcome['forged_mined_first']),
            ('Value redirected', f"{outcome['stolen_value']:,}"),
            ('Head start', f"{outcome['head_start']}s" if outcome['head_start'] is not None else '-'),
        ])
        if 'fuzz' in result:
            self.stdout.write(f"  Fuzzed {result['fuzz']['samples']} edits: "
                              f"{result['fuzz']['standard_forgeries']} gave standard forgeries")
        for point in result.get('sweep', []):
            self.stdout.write(f"  head start {point['head_start']:>6.1f}s  forged win rate {point['forged_win_rate']:.2f}")
        if result.get('report'):
            self.stdout.write(f"  Report written to {result['report']}")
