import json
import tempfile
from io import StringIO
from pathlib import Path
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings

from chainsim.exceptions import RejectedTransaction, WorkloadError
from chainsim.models import SimulationRun
from maxrate.exceptions import InsufficientFundsError, PlanError
from uweb.exceptions import IntegrityError, NotFoundError, UWebError

from .base import EXIT_CHAIN, EXIT_VALIDATION, exit_code_for
from .config import Config
from .exceptions import ConfigError, StateLockedError
from .models import CommandLog
from .state import NodeState


def run(name, /, *args, **options):
    """call_command with --json; returns the decoded result"""
    out = StringIO()
    call_command(name, *args, json=True, stdout=out, **options)
    return json.loads(out.getvalue())


def random_file(directory, name, size, seed=0):
    path = Path(directory) / name
    path.write_bytes(np.random.default_rng(seed).bytes(size))
    return path


class ConfigTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def write(self, text):
        path = Path(self.tmp.name) / 'uweb.env'
        path.write_text(text)
        return path

    @override_settings(UWEB_FEE_RATE=2, UWEB_SEED=7)
    def test_settings_defaults(self):
        config = Config.resolve()
        self.assertEqual(config.fee_rate, 2)
        self.assertEqual(config.seed, 7)

    def test_file_then_flags(self):
        path = self.write('UWEB_FEE_RATE=4\nUWEB_EPOCH_SECONDS=600\nUWEB_SEED=3\n')
        config = Config.resolve(path, seed=9)
        self.assertEqual(config.fee_rate, 4)
        self.assertEqual(config.epoch_seconds, 600.0)
        self.assertEqual(config.seed, 9)
        self.assertEqual(config.cost_model().epoch_seconds, 600.0)

    def test_unknown_file_key_is_ignored(self):
        path = self.write('UWEB_FEE_RATE=2\nSOMETHING_ELSE=1\n')
        with self.assertLogs('cli', level='WARNING'):
            config = Config.resolve(path)
        self.assertEqual(config.fee_rate, 2)

    def test_invalid_values(self):
        with self.assertRaises(ConfigError):
            Config.resolve(fee_rate=0)
        with self.assertRaises(ConfigError):
            Config.resolve(self.write('UWEB_BANDWIDTH=fast\n'))
        with self.assertRaises(ConfigError):
            Config.resolve(self.write('UWEB_SIGNATURE_SCHEME=rot13\n'))
        with self.assertRaises(ConfigError):
            Config.resolve(Path(self.tmp.name) / 'missing.env')

    def test_mltc(self):
        config = Config.resolve()
        self.assertAlmostEqual(config.mltc(426_300), 4.263)

    def test_exit_codes(self):
        self.assertEqual(exit_code_for(ConfigError('x')), EXIT_VALIDATION)
        self.assertEqual(exit_code_for(PlanError('x')), EXIT_VALIDATION)
        self.assertEqual(exit_code_for(NotFoundError('x')), EXIT_VALIDATION)
        self.assertEqual(exit_code_for(WorkloadError('x')), EXIT_VALIDATION)
        self.assertEqual(exit_code_for(InsufficientFundsError('x')), EXIT_CHAIN)
        self.assertEqual(exit_code_for(RejectedTransaction('x', 'min-fee')), EXIT_CHAIN)
        self.assertEqual(exit_code_for(IntegrityError('x')), EXIT_CHAIN)
        self.assertEqual(exit_code_for(StateLockedError('x')), EXIT_CHAIN)
        self.assertIsNone(exit_code_for(KeyError('x')))


class CommandTestCase(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.data_dir = str(Path(self.tmp.name) / 'state')

    def run_in_state(self, name, /, *args, **options):
        return run(name, *args, data_dir=self.data_dir, **options)

    def assertExitCode(self, code, name, /, *args, **options):
        with self.assertRaises(CommandError) as ctx:
            call_command(name, *args, data_dir=self.data_dir, stdout=StringIO(), **options)
        self.assertEqual(ctx.exception.returncode, code)
        return ctx.exception


class PlanConstructCommandTests(CommandTestCase):
    def test_single_epoch_capacity(self):
        result = self.run_in_state('plan_construct', size=2936 * 1568)
        self.assertEqual(result['funding_tx_count'], 1)
        self.assertEqual(result['funding_outputs'], [2937])
        self.assertEqual(result['spending_tx_count'], 50)
        self.assertEqual(result['epochs'], 2)
        self.assertEqual(result['message'], '0 preparing, 1 funding, 50 spending, 2 epochs')

    def test_large_payload_funds_in_one_epoch(self):
        result = self.run_in_state('plan_construct', size=10_000_000)
        self.assertEqual(result['epochs'], 2)
        self.assertEqual(result['preparing_tree_depth'], 0)
        self.assertEqual(result['funding_lanes'], 3)
        one_coin = self.run_in_state('plan_construct', size=10_000_000, sources=1)
        self.assertEqual(one_coin['message'], '1 preparing, 3 funding, 109 spending, 3 epochs')

    def test_throughput_estimate(self):
        result = self.run_in_state('plan_construct', size=46_000_000, bandwidth=125_000_000)
        self.assertAlmostEqual(result['estimated_throughput'], 154_000, delta=2_000)

    def test_file_payload_and_text_output(self):
        path = random_file(self.tmp.name, 'bundle.bin', 10_000)
        out = StringIO()
        call_command('plan_construct', str(path), data_dir=self.data_dir, stdout=out)
        self.assertIn('1 funding, 1 spending', out.getvalue())
        self.assertIn('mLTC', out.getvalue())

    def test_empty_file_is_usage_error(self):
        path = Path(self.tmp.name) / 'empty.bin'
        path.write_bytes(b'')
        self.assertExitCode(EXIT_VALIDATION, 'plan_construct', str(path))
        self.assertExitCode(EXIT_VALIDATION, 'plan_construct')

    def test_missing_file(self):
        self.assertExitCode(EXIT_VALIDATION, 'plan_construct', str(Path(self.tmp.name) / 'nope.bin'))

    def test_bad_flag_value(self):
        self.assertExitCode(EXIT_VALIDATION, 'plan_construct', size=1000, fee_rate=0)
        log = CommandLog.objects.get()
        self.assertEqual(log.status, 'failed')
        self.assertTrue(log.is_failed)


class CompareTechniquesCommandTests(CommandTestCase):
    def test_max_rate_best_safe(self):
        result = self.run_in_state('compare_techniques', '20000', mutations=8)
        self.assertEqual(result['best_safe'], 'max-rate')
        names = [row['name'] for row in result['techniques']]
        self.assertEqual(names, ['p2pkh-address', 'op-return', 'staged-baseline', 'max-rate'])
        self.assertTrue(all(row['cost_mltc'] > 0 for row in result['techniques']))


class PublisherCommandTests(CommandTestCase):
    def setUp(self):
        super().setUp()
        self.init = self.run_in_state('init_publisher', name='news')

    def store(self, name='day1.html', size=20_000, seed=0, **options):
        path = random_file(self.tmp.name, name, size, seed)
        return path, self.run_in_state('store_file', '/news', str(path), **options)

    def test_init_publishes_root(self):
        self.assertTrue(self.init['init_txs'])
        self.assertIsNotNone(self.init['granted'])
        scan = self.run_in_state('scan_chain')
        self.assertEqual(scan['publishers'], {self.init['publisher_id']: 'news'})
        self.assertEqual(scan['files'], [])

    def test_init_twice_is_validation_error(self):
        self.assertExitCode(EXIT_VALIDATION, 'init_publisher', name='news')

    def test_store_then_access_by_path_and_txid(self):
        path, stored = self.store()
        self.assertEqual(stored['directive'], 'FILE')
        self.assertEqual(stored['path'], '/news/day1.html')
        self.assertGreater(stored['cost'], 0)
        self.assertAlmostEqual(stored['cost_mltc'], stored['cost'] / 100_000)

        out = Path(self.tmp.name) / 'out.html'
        by_path = self.run_in_state('access_content', '/news/day1.html', output=str(out))
        self.assertEqual(out.read_bytes(), path.read_bytes())
        by_txid = self.run_in_state('access_content', stored['root_txid'])
        self.assertEqual(by_txid['sha256'], by_path['sha256'])
        self.assertEqual(by_txid['size'], path.stat().st_size)

    def test_update_and_remove(self):
        self.store(seed=1)
        new = random_file(self.tmp.name, 'day1-v2.html', 5_000, seed=2)
        updated = self.run_in_state('update_file', '/news', 'day1.html', str(new))
        self.assertEqual(updated['directive'], 'UPDATE')
        out = Path(self.tmp.name) / 'out.html'
        self.run_in_state('access_content', '/news/day1.html', output=str(out))
        self.assertEqual(out.read_bytes(), new.read_bytes())

        removed = self.run_in_state('remove_file', '/news', 'day1.html')
        self.assertIsNone(removed['root_txid'])
        self.assertExitCode(EXIT_VALIDATION, 'access_content', '/news/day1.html')
        scan = self.run_in_state('scan_chain')
        self.assertEqual(scan['files'], [])

    def test_no_create_and_unknown_file(self):
        path = random_file(self.tmp.name, 'x.bin', 1_000)
        self.assertExitCode(EXIT_VALIDATION, 'store_file', '/missing', str(path), no_create=True)
        self.assertExitCode(EXIT_VALIDATION, 'update_file', '/news', 'nothing', str(path))

    def test_full_rescan_matches_incremental(self):
        self.store()
        incremental = self.run_in_state('scan_chain')
        full = self.run_in_state('scan_chain', full=True)
        self.assertEqual(full['files'], incremental['files'])
        self.assertEqual(full['scan_height'], incremental['scan_height'])

    def test_state_survives_between_commands(self):
        self.store()
        mined = self.run_in_state('mine_blocks', '2')
        self.assertEqual(len(mined['blocks']), 2)
        again = self.run_in_state('mine_blocks')
        self.assertEqual(again['height'], mined['height'] + 1)

    def test_manifest_attack(self):
        manifest = Path(self.tmp.name) / 'day1.manifest.json'
        _, stored = self.store(manifest=str(manifest))
        self.assertEqual(stored['manifest'], str(manifest))
        result = self.run_in_state('run_attack', 'input-mod', manifest=str(manifest))
        self.assertEqual(result['message'], 'forgery nonstandard: script-verify')
        self.assertFalse(result['outcome']['data_corrupted'])

    def test_commands_are_logged(self):
        self.store()
        commands = list(CommandLog.objects.order_by('id').values_list('command', 'status'))
        self.assertEqual(commands, [('init_publisher', 'success'), ('store_file', 'success')])
        self.assertTrue(CommandLog.objects.filter(command='store_file').get().is_success)


class StateCommandTests(CommandTestCase):
    def test_store_requires_init(self):
        path = random_file(self.tmp.name, 'a.bin', 1_000)
        self.assertExitCode(EXIT_VALIDATION, 'store_file', '/news', str(path))

    def test_mine_count_must_be_positive(self):
        self.assertExitCode(EXIT_VALIDATION, 'mine_blocks', '0')

    def test_lock_serializes_commands(self):
        config = Config.resolve(data_dir=self.data_dir)
        with NodeState(config):
            self.assertExitCode(EXIT_CHAIN, 'mine_blocks')
        self.run_in_state('mine_blocks')
        log = CommandLog.objects.filter(status='error').get()
        self.assertEqual(log.details['error'], 'StateLockedError')

    def test_empty_chain_access(self):
        self.assertExitCode(EXIT_VALIDATION, 'access_content', '/news/day1.html')

    def test_lock_released_after_failure(self):
        config = Config.resolve(data_dir=self.data_dir)
        with self.assertRaises(UWebError):
            with NodeState(config):
                raise UWebError('boom')
        with NodeState(config) as state:
            self.assertEqual(state.chain.height, 0)


class RunAttackCommandTests(CommandTestCase):
    def test_output_modification_of_max_rate(self):
        result = self.run_in_state('run_attack', 'output-mod', payload_size=5_000)
        self.assertEqual(result['message'], 'forgery nonstandard: min-fee')
        self.assertEqual(result['outcome']['rule_ids'], ['min-fee'])

    def test_input_modification_of_baseline(self):
        report = Path(self.tmp.name) / 'report.json'
        result = self.run_in_state('run_attack', 'input-mod', technique='staged-baseline', payload_size=5_000,
                                   head_start=2.0, report=str(report))
        self.assertEqual(result['message'], 'corruption succeeded')
        data = json.loads(report.read_text())
        self.assertEqual(data['corrupted'], 1)
        self.assertEqual(data['technique'], 'staged-baseline')

    def test_sweep_and_fuzz(self):
        result = self.run_in_state('run_attack', 'output-mod', technique='staged-baseline', payload_size=5_000,
                                   sweep='-1,1', fuzz=20)
        self.assertEqual([p['forged_win_rate'] for p in result['sweep']], [0.0, 1.0])
        self.assertEqual(result['fuzz']['samples'], 20)

    def test_bad_edit(self):
        self.assertExitCode(EXIT_VALIDATION, 'run_attack', 'input-mod', payload_size=5_000, edit='zero')

    def test_unknown_kind(self):
        with self.assertRaises(CommandError):
            call_command('run_attack', 'sniping', data_dir=self.data_dir, stdout=StringIO())

    def test_text_output(self):
        out = StringIO()
        call_command('run_attack', 'input-mod', technique='staged-baseline', payload_size=5_000,
                     head_start=2.0, data_dir=self.data_dir, no_color=True, stdout=out)
        self.assertIn('✗ corruption succeeded', out.getvalue())


class RunSimulationCommandTests(CommandTestCase):
    WORKLOAD = {'name': 'tiny', 'writers': 2, 'epochs': 12, 'financial': {'duration': 1_800}}

    def workload_file(self, data=None):
        path = Path(self.tmp.name) / 'workload.json'
        path.write_text(json.dumps(data or self.WORKLOAD))
        return str(path)

    def test_run_writes_outputs(self):
        output = Path(self.tmp.name) / 'sim'
        result = self.run_in_state('run_simulation', workload=self.workload_file(), output=str(output))
        self.assertEqual(result['summary']['blocks'], 12)
        self.assertTrue((output / 'txs.csv').exists())
        self.assertTrue((output / 'blocks.csv').exists())
        sim_run = SimulationRun.objects.get(run_id=result['run_id'])
        self.assertEqual(sim_run.status, 'completed')

    def test_same_seed_same_csv(self):
        first, second = Path(self.tmp.name) / 'a', Path(self.tmp.name) / 'b'
        self.run_in_state('run_simulation', workload=self.workload_file(), output=str(first), seed=5)
        self.run_in_state('run_simulation', workload=self.workload_file(), output=str(second), seed=5)
        self.assertEqual((first / 'txs.csv').read_text(), (second / 'txs.csv').read_text())

    def test_invalid_workload(self):
        path = self.workload_file({'writers': 2, 'colour': 'red'})
        self.assertExitCode(EXIT_VALIDATION, 'run_simulation', workload=path)
        self.assertExitCode(EXIT_VALIDATION, 'run_simulation')

    def test_unwritable_output_fails_the_run(self):
        blocker = Path(self.tmp.name) / 'blocker'
        blocker.write_text('not a directory')
        self.assertExitCode(EXIT_VALIDATION, 'run_simulation', workload=self.workload_file(),
                            output=str(blocker / 'sim'))
        sim_run = SimulationRun.objects.get()
        self.assertEqual(sim_run.status, 'failed')
        self.assertEqual(CommandLog.objects.get(command='run_simulation').status, 'failed')

    def test_async_queues(self):
        with mock.patch('cli.management.commands.run_simulation.queue_simulation',
                        return_value='run-42') as queue:
            result = self.run_in_state('run_simulation', workload=self.workload_file(), run_async=True)
        self.assertEqual(result['run_id'], 'run-42')
        self.assertTrue(result['queued'])
        self.assertEqual(queue.call_args.args[0].writers, 2)
