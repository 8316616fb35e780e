import json
import math
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from chainsim.chain import SimChain
from maxrate.builder import extract_payload, owner_script, p2pkh_spend
from txcodec.transaction import Transaction, TxOutput

from .baseline import BASELINE_CHANGE
from .comparison import TECHNIQUES, compare_techniques
from .exceptions import AttackError
from .harness import (
    DEFAULT_OWNER, OUTPUT_MOD, AttackOutcome, ByteEdit, attack_scenario, fuzz_input_modification,
    head_start_sweep, input_modification_attack, output_modification_attack, win_rate, write_report,
)


class OutputModificationTests(SimpleTestCase):
    def test_max_rate_forgery_is_nonstandard(self):
        for index in (0, -1):
            scenario = attack_scenario('max-rate', 100_000, victim_index=index)
            outcome = output_modification_attack(scenario.chain, scenario.victim)
            self.assertFalse(outcome.forged_standard)
            self.assertEqual(outcome.rule_ids, ['min-fee'])
            self.assertEqual(outcome.stolen_value, 0)
            self.assertFalse(outcome.data_corrupted)
            self.assertTrue(scenario.chain.is_confirmed(scenario.victim.txid_hex))

    def test_baseline_value_is_stolen(self):
        scenario = attack_scenario('staged-baseline', 20_000)
        outcome = output_modification_attack(scenario.chain, scenario.victim, head_start=1.0)
        self.assertTrue(outcome.forged_standard)
        self.assertTrue(outcome.forged_mined_first)
        self.assertTrue(outcome.data_corrupted)
        self.assertGreaterEqual(outcome.stolen_value, BASELINE_CHANGE)
        self.assertFalse(scenario.chain.is_confirmed(scenario.victim.txid_hex))
        self.assertNotIn(scenario.victim.txid_hex, scenario.chain.mempool)

    def test_baseline_victim_wins_when_first(self):
        scenario = attack_scenario('staged-baseline', 20_000)
        outcome = output_modification_attack(scenario.chain, scenario.victim, head_start=-1.0)
        self.assertTrue(outcome.forged_standard)
        self.assertFalse(outcome.forged_mined_first)
        self.assertFalse(outcome.data_corrupted)

    def test_signed_victim_not_applicable(self):
        chain = SimChain()
        outpoint = chain.grant(owner_script(DEFAULT_OWNER), 100_000)
        chain.mine_block()
        victim = Transaction(1, [p2pkh_spend(outpoint, DEFAULT_OWNER)],
                             [TxOutput(owner_script(DEFAULT_OWNER), 90_000)])
        outcome = output_modification_attack(chain, victim)
        self.assertIsNone(outcome.forged_tx)
        self.assertIn('signature', outcome.reason)
        self.assertFalse(outcome.data_corrupted)


class InputModificationTests(SimpleTestCase):
    def test_max_rate_fuzz_corpus(self):
        scenario = attack_scenario('max-rate', 20_000, seed=1)
        forgeries = fuzz_input_modification(scenario.victim, scenario.spent, samples=10_000, seed=1)
        self.assertEqual(len(forgeries), 10_000)
        self.assertFalse(any(f.standard for f in forgeries))
        self.assertTrue(all(f.rule_ids == ['script-verify'] for f in forgeries))

    def test_max_rate_race_never_corrupts(self):
        scenario = attack_scenario('max-rate', 20_000, seed=2)
        outcome = input_modification_attack(scenario.chain, scenario.victim, ByteEdit(0, 1, 17, 0x00))
        self.assertFalse(outcome.forged_standard)
        self.assertFalse(outcome.data_corrupted)
        self.assertEqual(extract_payload([scenario.victim]), scenario.construct.payload)

    def test_baseline_data_corruption(self):
        scenario = attack_scenario('staged-baseline', 20_000, seed=3)
        edit = ByteEdit(0, 0, 5, scenario.victim.inputs[0].script_sig.pushes()[0][5] ^ 0xff)
        outcome = input_modification_attack(scenario.chain, scenario.victim, edit, head_start=2.0)
        self.assertTrue(outcome.forged_standard)
        self.assertTrue(outcome.data_corrupted)
        self.assertTrue(scenario.chain.is_confirmed(outcome.forged_tx.txid_hex))
        mined = outcome.forged_tx.inputs[0].script_sig.pushes()[0]
        self.assertNotEqual(mined, scenario.victim.inputs[0].script_sig.pushes()[0])

    def test_baseline_redeem_edit_fails(self):
        scenario = attack_scenario('staged-baseline', 20_000)
        outcome = input_modification_attack(scenario.chain, scenario.victim, ByteEdit(0, 3, 0, 0x00))
        self.assertFalse(outcome.forged_standard)
        self.assertEqual(outcome.rule_ids, ['script-verify'])

    def test_empty_mutation(self):
        scenario = attack_scenario('staged-baseline', 20_000)
        outcome = input_modification_attack(scenario.chain, scenario.victim, None)
        self.assertIsNone(outcome.forged_tx)
        self.assertFalse(outcome.data_corrupted)
        self.assertTrue(scenario.chain.is_confirmed(scenario.victim.txid_hex))

    def test_baseline_fuzz_finds_valid_forgeries(self):
        scenario = attack_scenario('staged-baseline', 20_000, seed=4)
        forgeries = fuzz_input_modification(scenario.victim, scenario.spent, samples=200, seed=4)
        self.assertTrue(any(f.standard for f in forgeries))


class RaceTests(SimpleTestCase):
    def test_head_start_sweep_is_monotone(self):
        points = head_start_sweep(lambda: attack_scenario('staged-baseline', 5_000), [-2, -1, 0, 1, 2])
        self.assertEqual([won for _, won in points], [False, False, False, True, True])
        rates = [rate for _, rate in win_rate(points)]
        self.assertEqual(rates, sorted(rates))

    def test_max_rate_sweep_never_wins(self):
        points = head_start_sweep(lambda: attack_scenario('max-rate', 5_000), [0, 5, 60], kind=OUTPUT_MOD)
        self.assertFalse(any(won for _, won in points))

    def test_corrupted_outcome_needs_race_win(self):
        scenario = attack_scenario('staged-baseline', 5_000)
        with self.assertRaises(AttackError):
            AttackOutcome('output-mod', scenario.victim, data_corrupted=True)

    def test_unknown_technique(self):
        with self.assertRaises(AttackError):
            attack_scenario('carrier-pigeon')

    def test_report(self):
        scenario = attack_scenario('staged-baseline', 5_000)
        outcome = output_modification_attack(scenario.chain, scenario.victim)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_report([outcome], Path(tmp) / 'report.json', seed=0, technique='staged-baseline')
            report = json.loads(path.read_text())
        self.assertEqual(report['corrupted'], 1)
        self.assertEqual(report['outcomes'][0]['victim_hex'], scenario.victim.hex())
        self.assertEqual(report['outcomes'][0]['forged_hex'], outcome.forged_tx.hex())

    def test_reproducible_from_seed(self):
        first = attack_scenario('max-rate', 5_000, seed=9)
        second = attack_scenario('max-rate', 5_000, seed=9)
        self.assertEqual(first.victim.hex(), second.victim.hex())


class BaselineTests(SimpleTestCase):
    def test_staged_writer_confirms(self):
        scenario = attack_scenario('staged-baseline', 50_000)
        construct = scenario.construct
        self.assertEqual(len(construct.spending), math.ceil(math.ceil(50_000 / 1568) / 20))
        for tx in construct.spending:
            scenario.chain.broadcast(tx)
        scenario.chain.mine_until([tx.txid_hex for tx in construct.spending])

    def test_change_is_spendable(self):
        scenario = attack_scenario('staged-baseline', 5_000)
        self.assertTrue(scenario.victim.outputs[-1].script_pubkey.is_p2pkh())
        self.assertGreaterEqual(scenario.victim.outputs[-1].value, BASELINE_CHANGE)


class ComparisonTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.results = {m.name: m for m in compare_techniques(30_000, mutations=32)}

    def test_all_techniques_measured(self):
        self.assertEqual(list(self.results), list(TECHNIQUES))
        self.assertEqual(self.results['op-return'].transactions, math.ceil(30_000 / 80))
        self.assertEqual(self.results['max-rate'].payload_per_tx, 20 * 1568)

    def test_safety_flags(self):
        for name in ('p2pkh-address', 'op-return', 'max-rate'):
            self.assertTrue(self.results[name].output_mod_safe, name)
            self.assertTrue(self.results[name].input_mod_safe, name)
        self.assertFalse(self.results['staged-baseline'].output_mod_safe)
        self.assertFalse(self.results['staged-baseline'].input_mod_safe)

    def test_max_rate_best_of_safe_techniques(self):
        safe = [m for m in self.results.values() if m.output_mod_safe and m.input_mod_safe]
        best_goodput = max(safe, key=lambda m: m.goodput)
        cheapest = min(safe, key=lambda m: m.cost_per_byte)
        self.assertEqual(best_goodput.name, 'max-rate')
        self.assertEqual(cheapest.name, 'max-rate')
        self.assertGreater(self.results['max-rate'].goodput, 3 * self.results['op-return'].goodput)
        self.assertGreater(self.results['max-rate'].goodput, 0.85)
