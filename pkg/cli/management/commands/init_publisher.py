"""
Management command to create the local publisher and publish its root directory
"""
from cli.base import UWebCommand
from maxrate.builder import owner_script
from uweb.exceptions import UWebError
from uweb.signatures import PublisherIdentity


class Command(UWebCommand):
    help = 'Create a publisher identity, fund it from the simulated genesis and publish its INIT entry'

    def add_command_arguments(self, parser):
        parser.add_argument('--name', default='publisher', help='Publisher name in the certificate')
        parser.add_argument('--scheme', help='Signature scheme (default: UWEB_SIGNATURE_SCHEME)')
        parser.add_argument('--attributes', default='', help='Free-form certificate attributes')

    def run(self, config, **options):
        with self.node(config) as state:
            if state.has_identity:
                identity = state.identity()
            else:
                identity = PublisherIdentity.generate(
                    options['name'], options['scheme'] or config.scheme,
                    seed=f"{options['name']}:{config.seed}".encode(),
                    attributes=options['attributes'].encode(),
                )
                state.save_identity(identity)

            publisher = state.publisher()
            publisher.refresh()
            if identity.publisher_id in state.index.publishers:
                raise UWebError(f"publisher {identity.publisher_id} is already initialized")

            granted = None
            if publisher.wallet.balance == 0:
                granted = state.chain.grant(owner_script(identity.public_key), config.genesis_value)
                state.chain.mine_block()

            before = publisher.wallet.balance
            op = publisher.client_setup()
            cost = before - publisher.wallet.balance
            return {
                'message': f'Publisher {identity.name} ({identity.publisher_id}) initialized',
                'publisher_id': identity.publisher_id,
                'name': identity.name,
                'scheme': identity.scheme,
                'granted': str(granted) if granted else None,
                'init_txs': [tx.txid_hex for tx in op.entry_txs],
                'blocks': op.blocks,
                'cost': cost,
                'cost_mltc': config.mltc(cost),
                'balance': publisher.wallet.balance,
                'height': state.chain.height,
            }

    def render(self, result):
        self.success(result['message'])
        if result['granted']:
            self.stdout.write(f"  Genesis grant at {result['granted']}")
        self.table([
            ('Scheme', result['scheme']),
            ('INIT transactions', len(result['init_txs'])),
            ('Root directory tip', f"{result['init_txs'][-1]}:1"),
            ('Cost', f"{result['cost']:,} ({result['cost_mltc']:.3f} mLTC)"),
            ('Balance', f"{result['balance']:,}"),
            ('Chain height', result['height']),
        ])
