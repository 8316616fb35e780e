"""
Shared plumbing for operator commands: configuration flags, the state
directory lock, error translation to exit codes and the CommandLog audit row.
"""
import json
import logging
import time

from django.core.management.base import BaseCommand, CommandError

from attacks.exceptions import AttackError
from chainsim.exceptions import ChainSimError, WorkloadError
from maxrate.builder import owner_script
from maxrate.exceptions import InsufficientFundsError, MaxRateError
from maxrate.manifest import construct_manifest, write_manifest
from txcodec.exceptions import TxCodecError
from uweb.exceptions import ChainTipError, IncompleteContentError, IntegrityError, UWebError

from .config import Config
from .exceptions import ConfigError, StateLockedError
from .models import CommandLog
from .state import NodeState

logger = logging.getLogger('cli')

EXIT_VALIDATION = 2
EXIT_CHAIN = 3

# first match wins
ERROR_CODES = (
    (InsufficientFundsError, EXIT_CHAIN),
    (WorkloadError, EXIT_VALIDATION),
    (ChainSimError, EXIT_CHAIN),
    ((ChainTipError, IncompleteContentError, IntegrityError), EXIT_CHAIN),
    (StateLockedError, EXIT_CHAIN),
    ((ConfigError, MaxRateError, UWebError, AttackError, TxCodecError, OSError), EXIT_VALIDATION),
)


def exit_code_for(error):
    for kinds, code in ERROR_CODES:
        if isinstance(error, kinds):
            return code
    return None


class UWebCommand(BaseCommand):
    """
    Subclasses implement run(config, **options) returning a JSON-able dict
    and render(result) printing it for people. --json prints the dict instead.
    """

    def add_arguments(self, parser):
        group = parser.add_argument_group('configuration')
        group.add_argument('--config', help='Env-style file with UWEB_* values')
        group.add_argument('--data-dir', help='State directory (chain, index, identity)')
        group.add_argument('--seed', type=int, help='Simulator seed')
        group.add_argument('--fee-rate', type=int, help='Fee rate in base units per byte')
        group.add_argument('--epoch-seconds', type=float, help='Expected seconds between blocks')
        group.add_argument('--bandwidth', type=float, help='Upload bandwidth in bytes/sec for estimates')
        group.add_argument('--json', action='store_true', help='Print machine-readable JSON')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def run(self, config, **options):
        raise NotImplementedError

    def render(self, result):
        self.stdout.write(json.dumps(result, indent=2, default=str))

    @property
    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]

    def handle(self, *args, **options):
        start = time.time()
        config = None
        try:
            config = Config.resolve(
                options.get('config'),
                data_dir=options.get('data_dir'),
                seed=options.get('seed'),
                fee_rate=options.get('fee_rate'),
                epoch_seconds=options.get('epoch_seconds'),
                bandwidth=options.get('bandwidth'),
            )
            run_options = {k: v for k, v in options.items() if k != 'config'}
            result = self.run(config, **run_options)
        except CommandError as e:
            self._log_to_database(config, 'failed', str(e), time.time() - start)
            raise
        except Exception as e:
            code = exit_code_for(e)
            if code is None:
                logger.exception(f"✗ {self.command_name} crashed")
                self._log_to_database(config, 'error', f"Unexpected error: {e}", time.time() - start)
                raise
            status = 'failed' if code == EXIT_VALIDATION else 'error'
            details = {'error': type(e).__name__}
            if getattr(e, 'rule_id', None):
                details['rule_id'] = e.rule_id
            logger.error(f"✗ {self.command_name}: {e}")
            self._log_to_database(config, status, str(e), time.time() - start, details)
            raise CommandError(f"{type(e).__name__}: {e}", returncode=code) from e

        duration = time.time() - start
        self._log_to_database(config, 'success', result.get('message', ''), duration, result)
        if options.get('json'):
            self.stdout.write(json.dumps(result, indent=2, default=str))
        else:
            self.render(result)

    def node(self, config, save=True):
        return NodeState(config, save=save)

    def _log_to_database(self, config, status, message, duration, details=None):
        try:
            CommandLog.objects.create(
                command=self.command_name,
                status=status,
                data_dir=str(config.data_dir) if config else '',
                message=message,
                details=json.loads(json.dumps(details or {}, default=str)),
                duration=duration,
            )
        except Exception as e:
            logger.error(f"Failed to log {self.command_name} to database: {e}")

    # Output helpers

    def money(self, config, base_units):
        return f"{base_units:,} ({config.mltc(base_units):.3f} mLTC)"

    def success(self, message):
        self.stdout.write(self.style.SUCCESS(f'✓ {message}'))

    def failure(self, message):
        self.stdout.write(self.style.ERROR(f'✗ {message}'))

    def table(self, rows):
        width = max(len(label) for label, _ in rows)
        for label, value in rows:
            self.stdout.write(f'  {label.ljust(width)}  {value}')


class PublisherCommand(UWebCommand):
    """Commands that append to the local publisher's directory"""

    def publish(self, config, action, manifest_path=None):
        """Run action(publisher) under the state lock and describe the Operation it returns"""
        with self.node(config) as state:
            publisher = state.publisher()
            publisher.refresh()
            before = publisher.wallet.balance
            op = action(publisher)
            cost = before - publisher.wallet.balance
            result = op.as_dict()
            result.update({
                'message': f'{op.directive.name} {op.path}: {len(op.transactions)} txs over {op.blocks} blocks',
                'publisher_id': publisher.publisher_id,
                'transactions': len(op.transactions),
                'cost': cost,
                'cost_mltc': config.mltc(cost),
                'height': state.chain.height,
                'manifest': None,
            })
            if manifest_path and op.construct is not None:
                manifest = construct_manifest(op.construct, owner_script(publisher.pubkey), label=op.path)
                result['manifest'] = str(write_manifest(manifest, manifest_path))
            return result

    def render(self, result):
        self.success(result['message'])
        rows = [
            ('Entry transactions', len(result['entry_txs'])),
            ('Construct transactions', result['construct_txs']),
            ('Bytes on chain', f"{result['bytes']:,}"),
            ('Cost', f"{result['cost']:,} ({result['cost_mltc']:.3f} mLTC)"),
            ('Chain height', result['height']),
        ]
        if result['root_txid']:
            rows.insert(0, ('Root txid', result['root_txid']))
        if result['manifest']:
            rows.append(('Manifest', result['manifest']))
        self.table(rows)
