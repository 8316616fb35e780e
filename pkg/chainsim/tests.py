import io
import json
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase, TestCase

from maxrate.builder import DEFAULT_PUBKEY, Source, build_construct, extract_payload, owner_script, p2pkh_spend
from maxrate.manifest import construct_manifest, write_manifest
from maxrate.planner import plan_construct
from txcodec.transaction import OutPoint, Transaction, TxOutput

from .chain import Block, SimChain
from .exceptions import ChainSimError, RejectedTransaction, WorkloadError
from .mempool import MAX_ANCESTOR_COUNT, Mempool, MempoolEntry
from .models import SimulationRun
from .simulator import plan_stages, run
from .stats import (
    FINANCIAL, MAX_RATE, GiB, block_size_histogram, compute_utilization, ks_distance,
    writer_throughput_bound,
)
from .tasks import execute_run
from .workload import FinancialTraceSpec, WorkloadSpec, load_workload, preset

OWNER = owner_script(DEFAULT_PUBKEY)
P2PKH_SPEND_SIZE = 192


def spend(outpoint, value, fee, version=1):
    """One-in one-out P2PKH spend back to the default owner"""
    return Transaction(version, [p2pkh_spend(outpoint, DEFAULT_PUBKEY)], [TxOutput(OWNER, value - fee)])


def funded_chain(value=10_000_000, **kwargs):
    chain = SimChain(**kwargs)
    outpoint = chain.grant(OWNER, value)
    chain.mine_block()
    return chain, outpoint


def entry(txid, size, fee, t=0.0, seq=0, klass=MAX_RATE, parents=(), spends=()):
    return MempoolEntry(txid, size, fee, t, seq, frozenset(parents), tuple(spends), klass)


class AdmissionTests(SimpleTestCase):
    def test_p2pkh_spend_size(self):
        _, outpoint = funded_chain()
        self.assertEqual(spend(outpoint, 10_000_000, 1_000).size, P2PKH_SPEND_SIZE)

    def test_accepts_standard_spend(self):
        chain, outpoint = funded_chain()
        tx = spend(outpoint, 10_000_000, 1_000)
        result = chain.submit_tx(tx)
        self.assertTrue(result)
        self.assertIn(tx.txid_hex, chain.mempool)
        self.assertEqual(chain.mempool.get(tx.txid_hex).fee, 1_000)

    def test_zero_fee_rejected(self):
        chain, outpoint = funded_chain()
        result = chain.submit_tx(spend(outpoint, 10_000_000, 0))
        self.assertFalse(result)
        self.assertEqual(result.rule_id, 'min-fee')

    def test_duplicate_rejected(self):
        chain, outpoint = funded_chain()
        tx = spend(outpoint, 10_000_000, 1_000)
        chain.submit_tx(tx)
        self.assertEqual(chain.submit_tx(tx).rule_id, 'duplicate')

    def test_unknown_input_rejected(self):
        chain, _ = funded_chain()
        missing = OutPoint(bytes(range(32)), 0)
        self.assertEqual(chain.submit_tx(spend(missing, 10_000, 1_000)).rule_id, 'missing-inputs')

    def test_nonstandard_version_rejected(self):
        chain, outpoint = funded_chain()
        self.assertEqual(chain.submit_tx(spend(outpoint, 10_000_000, 1_000, version=3)).rule_id, 'version')

    def test_broadcast_raises_with_rule_id(self):
        chain, outpoint = funded_chain()
        with self.assertRaises(RejectedTransaction) as ctx:
            chain.broadcast(spend(outpoint, 10_000_000, 0))
        self.assertEqual(ctx.exception.rule_id, 'min-fee')

    def test_twenty_sixth_chained_tx_rejected(self):
        chain, outpoint = funded_chain()
        value = 10_000_000
        for i in range(MAX_ANCESTOR_COUNT):
            tx = spend(outpoint, value, 1_000)
            self.assertTrue(chain.submit_tx(tx), f"chained tx {i + 1} refused")
            outpoint, value = OutPoint(tx.txid, 0), value - 1_000
        result = chain.submit_tx(spend(outpoint, value, 1_000))
        self.assertEqual(result.rule_id, 'chain-count')
        self.assertEqual(len(chain.mempool), MAX_ANCESTOR_COUNT)

    def test_spending_before_funding_confirms(self):
        payload = bytes(range(256)) * 61
        plan = plan_construct(len(payload))
        chain = SimChain()
        source = Source(chain.grant(OWNER, plan.required_source_value + 5_000), plan.required_source_value + 5_000)
        chain.mine_block()
        construct = build_construct(payload, source)
        for tx in construct.funding:
            self.assertTrue(chain.submit_tx(tx))
        for tx in construct.spending:
            self.assertTrue(chain.submit_tx(tx))
        chain.mine_until([tx.txid_hex for tx in construct.spending])
        fetched = [chain.fetch_transaction(tx.txid_hex) for tx in construct.spending]
        self.assertEqual(extract_payload(fetched), payload)

    def test_full_spending_tx_over_unconfirmed_funding_hits_size_limit(self):
        payload = b'\xab' * (59 * 1568)
        plan = plan_construct(len(payload))
        self.assertEqual(plan.spending_sizes, (99_931,))
        chain = SimChain()
        value = plan.required_source_value + 5_000
        construct = build_construct(payload, Source(chain.grant(OWNER, value), value))
        chain.mine_block()
        self.assertTrue(chain.submit_tx(construct.funding[0]))
        self.assertEqual(chain.submit_tx(construct.spending[0]).rule_id, 'chain-size')
        chain.mine_block()
        self.assertTrue(chain.is_confirmed(construct.funding[0].txid_hex))
        self.assertTrue(chain.submit_tx(construct.spending[0]))


class MiningTests(SimpleTestCase):
    def test_empty_mempool_gives_empty_block(self):
        chain = SimChain()
        block = chain.mine_block()
        self.assertEqual(block.tx_count, 0)
        self.assertEqual(block.total_size, 81)
        self.assertEqual(chain.time, 150)

    def test_grant_goes_first(self):
        chain = SimChain()
        chain.grant(OWNER, 5_000)
        block = chain.mine_block()
        self.assertEqual([e.klass for e in block.entries], ['grant'])

    def test_higher_fee_rate_confirms_first(self):
        chain = SimChain(max_block_size=1_000)
        outpoints = [chain.grant(OWNER, 100_000) for _ in range(6)]
        chain.mine_block()
        txs = [spend(op, 100_000, P2PKH_SPEND_SIZE * (i + 1)) for i, op in enumerate(outpoints)]
        for tx in txs:
            chain.submit_tx(tx)
        block = chain.mine_block()
        self.assertEqual(block.tx_count, 4)
        self.assertEqual(set(block.txids), {tx.txid_hex for tx in txs[2:]})
        self.assertTrue(block.total_size <= 1_000)

    def test_equal_fee_rate_earlier_arrival_wins(self):
        chain = SimChain(max_block_size=1_000)
        outpoints = [chain.grant(OWNER, 100_000) for _ in range(5)]
        chain.mine_block()
        txs = [spend(op, 100_000, 500) for op in outpoints]
        for i, tx in enumerate(txs):
            chain.submit_tx(tx, t=200 - i)
        block = chain.mine_block()
        self.assertNotIn(txs[0].txid_hex, block.txids)
        self.assertEqual(len(chain.mempool), 1)

    def test_two_megabytes_of_min_fee_txs_fill_two_blocks(self):
        pool = Mempool()
        for i in range(20):
            pool.add(entry(f'm{i}', 99_931, 99_931, seq=i))
        room = 1_000_000 - 83
        sizes = []
        for _ in range(2):
            picked = pool.block_template(room)
            pool.remove([e.txid for e in picked])
            sizes.append(sum(e.size for e in picked))
        self.assertEqual(sizes, [999_310, 999_310])
        self.assertEqual(len(pool), 0)

    def test_child_waits_for_parent(self):
        pool = Mempool()
        pool.add(entry('parent', 300, 300, seq=1))
        pool.add(entry('child', 300, 30_000, seq=2, parents=['parent']))
        picked = pool.block_template(10_000)
        self.assertEqual([e.txid for e in picked], ['parent', 'child'])
        self.assertEqual([e.txid for e in pool.block_template(400)], ['parent'])

    def test_conflict_loser_and_descendants_evicted(self):
        chain, outpoint = funded_chain()
        cheap = spend(outpoint, 10_000_000, 1_000)
        rich = spend(outpoint, 10_000_000, 5_000)
        self.assertTrue(chain.submit_tx(cheap))
        self.assertTrue(chain.submit_tx(rich))
        child = spend(OutPoint(cheap.txid, 0), 9_999_000, 1_000)
        self.assertTrue(chain.submit_tx(child))
        block = chain.mine_block()
        self.assertEqual(block.txids, [rich.txid_hex])
        self.assertEqual(len(chain.mempool), 0)
        self.assertIsNone(chain.lookup_output(OutPoint(cheap.txid, 0)))

    def test_mine_until_gives_up(self):
        chain = SimChain()
        with self.assertRaises(ChainSimError):
            chain.mine_until(['00' * 32], limit=3)
        self.assertEqual(chain.height, 3)

    def test_spendable_skips_outputs_spent_in_mempool(self):
        chain, outpoint = funded_chain()
        other = chain.grant(OWNER, 20_000)
        chain.mine_block()
        self.assertEqual([op for op, _ in chain.spendable(OWNER)], [outpoint, other])
        chain.submit_tx(spend(outpoint, 10_000_000, 1_000))
        self.assertEqual([op for op, _ in chain.spendable(OWNER)], [other])


class PersistenceTests(SimpleTestCase):
    def test_save_and_load_round_trip(self):
        chain, outpoint = funded_chain(seed=7)
        first = spend(outpoint, 10_000_000, 1_000)
        chain.submit_tx(first)
        chain.mine_block()
        second = spend(OutPoint(first.txid, 0), 9_999_000, 2_000)
        chain.submit_tx(second, t=333.0)
        pending_grant = chain.grant(OWNER, 50_000)
        with tempfile.TemporaryDirectory() as tmp:
            chain.save(tmp)
            loaded = SimChain.load(tmp)
        self.assertEqual(loaded.height, chain.height)
        self.assertEqual(loaded.time, chain.time)
        self.assertEqual([b.txids for b in loaded.blocks], [b.txids for b in chain.blocks])
        self.assertEqual(set(loaded.mempool.entries), {second.txid_hex})
        self.assertEqual(loaded.mempool.get(second.txid_hex).arrival_time, 333.0)
        self.assertEqual(set(loaded.utxos), set(chain.utxos))
        self.assertIsNotNone(loaded.lookup_output(pending_grant))
        block = loaded.mine_block()
        self.assertEqual(block.entries[0].klass, 'grant')
        self.assertIn(second.txid_hex, block.txids)

    def test_load_keeps_mempool_sequence(self):
        chain, outpoint = funded_chain(seed=3)
        other = chain.grant(OWNER, 10_000_000)
        chain.mine_block()
        txs = [spend(outpoint, 10_000_000, 1_000), spend(other, 10_000_000, 1_000)]
        for tx in txs:
            chain.submit_tx(tx, t=50.0)
        with tempfile.TemporaryDirectory() as tmp:
            chain.save(tmp)
            loaded = SimChain.load(tmp)
        for txid in (tx.txid_hex for tx in txs):
            self.assertEqual(loaded.mempool.get(txid).seq, chain.mempool.get(txid).seq)
        self.assertEqual(loaded.mempool._order,
                         sorted((e.sort_key, e.txid) for e in loaded.mempool.entries.values()))
        self.assertEqual(loaded.mempool._order, chain.mempool._order)

    def test_load_missing_directory(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ChainSimError):
                SimChain.load(Path(tmp) / 'nothing')

    def test_access_log(self):
        chain, outpoint = funded_chain()
        chain.read_blocks()
        tx = spend(outpoint, 10_000_000, 1_000)
        chain.submit_tx(tx)
        self.assertEqual(chain.fetch_transaction(tx.txid_hex), tx)
        self.assertEqual(chain.access_log, [('full-scan', 1), ('tx-fetch', tx.txid_hex)])


class UtilizationTests(SimpleTestCase):
    def test_ten_full_spending_txs(self):
        block = Block(0, 150, [entry(f's{i}', 99_931, 99_931) for i in range(10)])
        util = compute_utilization([block], {f's{i}' for i in range(10)})
        self.assertAlmostEqual(util.space[0], 0.9996, delta=0.0005)
        self.assertEqual(util.txn[0], 1.0)

    def test_no_payload_txs(self):
        blocks = [Block(0, 150, [entry('f0', 250, 2_500)]), Block(1, 300)]
        util = compute_utilization(blocks, set())
        self.assertEqual(util.space, [0.0, 0.0])
        self.assertEqual(util.aggregate_txn, 0.0)

    def test_mixed_block(self):
        block = Block(0, 150, [entry('p', 10_000, 10_000), entry('f', 1_000, 5_000)])
        util = compute_utilization([block], {'p'})
        self.assertAlmostEqual(util.space[0], 10_000 / block.total_size)
        self.assertEqual(util.txn[0], 0.5)

    def test_ks_distance(self):
        self.assertEqual(ks_distance([1, 2, 3], [1, 2, 3]), 0.0)
        self.assertEqual(ks_distance([1, 2], [5, 6]), 1.0)
        self.assertAlmostEqual(ks_distance([1, 2, 3, 4], [3, 4, 5, 6]), 0.5)


class WorkloadTests(SimpleTestCase):
    def test_presets(self):
        self.assertEqual(preset('scaling').writers, 359)
        self.assertEqual(preset('scaling', writers=3000).writers, 3000)
        self.assertEqual(preset('multiplier', financial_multiplier=10).financial_multiplier, 10)
        with self.assertRaises(WorkloadError):
            preset('nope')

    def test_validation(self):
        with self.assertRaises(WorkloadError):
            WorkloadSpec(financial_multiplier=11)
        with self.assertRaises(WorkloadError):
            WorkloadSpec(writers=-1)
        with self.assertRaises(WorkloadError):
            FinancialTraceSpec(arrival='bursty')
        with self.assertRaises(WorkloadError):
            WorkloadSpec.from_dict({'writers': 2, 'colour': 'red'})

    def test_dict_round_trip_through_json(self):
        spec = preset('utilization', seed=4)
        again = WorkloadSpec.from_dict(json.loads(json.dumps(spec.to_dict())))
        self.assertEqual(again, spec)

    def test_load_workload_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'w.json'
            path.write_text(json.dumps({'preset': 'utilization', 'writers': 3, 'financial': {'rate_per_epoch': 5}}))
            spec = load_workload(path)
            with self.assertRaises(WorkloadError):
                load_workload(Path(tmp) / 'missing.json')
        self.assertEqual(spec.writers, 3)
        self.assertEqual(spec.financial.rate_per_epoch, 5)
        self.assertEqual(spec.financial.median_size, 5_620)

    def test_financial_trace_independent_of_writers(self):
        a = WorkloadSpec(writers=1, epochs=40).financial_trace()
        b = WorkloadSpec(writers=3000, epochs=40).financial_trace()
        self.assertEqual(a, b)
        self.assertNotEqual(a, WorkloadSpec(writers=1, epochs=40, seed=1).financial_trace())

    def test_financial_trace_shape(self):
        trace = WorkloadSpec(epochs=100, financial=FinancialTraceSpec(min_fee_count=4, duration=15_000)).financial_trace()
        self.assertAlmostEqual(len(trace) / 100, 100, delta=5)
        self.assertEqual(sum(1 for tx in trace if tx.fee_rate == 1), 4)
        self.assertTrue(all(tx.time < 15_000 for tx in trace))
        self.assertEqual([tx.time for tx in trace], sorted(tx.time for tx in trace))
        self.assertAlmostEqual(float(np.median([tx.size for tx in trace])), 350, delta=15)

    def test_multiplier_copies_trace(self):
        base = WorkloadSpec(epochs=10).financial_trace()
        tripled = WorkloadSpec(epochs=10, financial_multiplier=3).financial_trace()
        self.assertEqual(len(tripled), 3 * len(base))

    def test_writer_stages(self):
        self.assertEqual([[tx.size for tx in s] for s in plan_stages(WorkloadSpec(writers=1))],
                         [[99_931] * 4 + [10_876]])
        stages = plan_stages(WorkloadSpec(writers=1, prefunded=False))
        self.assertEqual([s[0].role for s in stages], ['funding', 'spending'])
        self.assertTrue(all(tx.fee >= tx.size for s in stages for tx in s))


class SimulatorTests(SimpleTestCase):
    def small(self, **kwargs):
        base = dict(writers=4, writer_payload=380_005, write_window=600,
                    financial=FinancialTraceSpec(duration=3_000))
        base.update(kwargs)
        return WorkloadSpec(**base)

    def test_zero_writer_control(self):
        stats = run(self.small(writers=0))
        self.assertEqual(len(stats.of_class(MAX_RATE)), 0)
        self.assertEqual(stats.unconfirmed(FINANCIAL), 0)
        self.assertTrue(stats.delays(FINANCIAL).max() <= 150)
        self.assertEqual(stats.utilization(), (0.0, 0.0))

    def test_financial_delays_unaffected_by_writers(self):
        control = run(self.small(writers=0))
        loaded = run(self.small(writers=12))
        np.testing.assert_array_equal(control.delays(FINANCIAL), loaded.delays(FINANCIAL))
        self.assertEqual(loaded.unconfirmed(MAX_RATE), 0)

    def test_deterministic(self):
        a = run(self.small(exponential_blocks=True, seed=3))
        b = run(self.small(exponential_blocks=True, seed=3))
        self.assertEqual(a.summary(), b.summary())
        self.assertEqual([r.confirm_time for r in a.records.values()],
                         [r.confirm_time for r in b.records.values()])
        c = run(self.small(exponential_blocks=True, seed=4))
        self.assertNotEqual([blk.timestamp for blk in a.blocks], [blk.timestamp for blk in c.blocks])

    def test_blocks_stay_under_limit(self):
        stats = run(self.small(writers=40))
        self.assertTrue(all(b.size <= 1_000_000 for b in stats.blocks))
        self.assertTrue(all(r.delay >= 0 for r in stats.records.values() if r.delay is not None))
        counts, _ = block_size_histogram(stats.blocks)
        self.assertEqual(counts.sum(), len(stats.blocks))

    def test_financial_confirms_before_max_rate(self):
        stats = run(self.small(writers=40))
        waiting = [r for r in stats.of_class(FINANCIAL) if r.delay is not None and r.delay > 150]
        self.assertEqual(waiting, [])

    def test_staged_writer_waits_one_epoch_per_stage(self):
        stats = run(self.small(writers=1, prefunded=False, write_window=0))
        records = sorted(stats.of_class(MAX_RATE), key=lambda r: r.submit_time)
        funding = [r for r in records if r.role == 'funding']
        spending = [r for r in records if r.role == 'spending']
        self.assertEqual(len(funding), 1)
        self.assertEqual(len(spending), 5)
        self.assertTrue(all(r.submit_time == funding[0].confirm_time for r in spending))
        self.assertTrue(all(r.confirm_time == funding[0].confirm_time + 150 for r in spending))

    def test_manifest_writer(self):
        payload = bytes(range(200)) * 40
        plan = plan_construct(len(payload))
        construct = build_construct(payload, Source(OutPoint(bytes(32), 1), plan.required_source_value + 1_000))
        with tempfile.TemporaryDirectory() as tmp:
            path = write_manifest(construct_manifest(construct), Path(tmp) / 'm.json')
            stats = run(WorkloadSpec(manifests=[{'path': str(path), 'start': 10}],
                                     financial=FinancialTraceSpec(rate_per_epoch=0)))
        records = stats.of_class(MAX_RATE)
        self.assertEqual(len(records), len(construct.transactions()))
        self.assertEqual(stats.unconfirmed(MAX_RATE), 0)
        self.assertEqual(sum(r.fee for r in records), construct.plan.total_fee)
        self.assertEqual(len(stats.blocks), 2)

    def test_csv_output(self):
        stats = run(self.small(writers=1))
        txs, blocks = io.StringIO(), io.StringIO()
        stats.to_csv(txs, blocks)
        tx_lines = txs.getvalue().splitlines()
        self.assertEqual(tx_lines[0], 'txid,class,role,size,fee_rate,submit_time,confirm_time,height')
        self.assertEqual(len(tx_lines), len(stats.records) + 1)
        self.assertEqual(len(blocks.getvalue().splitlines()), len(stats.blocks) + 1)


class PresetTests(SimpleTestCase):
    """Desk-scale replays of the writer experiments"""

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.scaling = {w: run(preset('scaling', writers=w)) for w in (1, 359, 3000)}

    def test_financial_delays_identical_across_writer_counts(self):
        base = self.scaling[1].delays(FINANCIAL)
        for writers in (359, 3000):
            self.assertTrue(ks_distance(base, self.scaling[writers].delays(FINANCIAL)) < 0.01)

    def test_max_rate_delays_grow_with_writers(self):
        means = [self.scaling[w].delays(MAX_RATE).mean() for w in (1, 359, 3000)]
        self.assertEqual(means, sorted(means))
        self.assertTrue(means[0] <= 150)

    def test_three_thousand_writers(self):
        stats = self.scaling[3000]
        peak = stats.peak_mempool()
        self.assertTrue(1.0 <= peak.size / GiB <= 1.1, peak.size / GiB)
        self.assertTrue(50 <= stats.last_confirmation / 3600 <= 55, stats.last_confirmation / 3600)
        self.assertEqual(stats.unconfirmed(MAX_RATE), 0)
        self.assertEqual(len(stats.of_class(MAX_RATE)), 15_000)

    def test_writer_throughput_under_ceiling(self):
        for writers in (359, 3000):
            measured, bound = self.scaling[writers].writer_throughput()
            self.assertTrue(0 < measured <= bound, (writers, measured, bound))

    def test_throughput_bound(self):
        stats = self.scaling[359]
        bound = writer_throughput_bound(stats.blocks[:10], 359)
        expected = np.mean([1_000_000 - b.financial_size for b in stats.blocks[:10]]) / (150 * 359)
        self.assertAlmostEqual(bound, expected)
        self.assertEqual(writer_throughput_bound(stats.blocks, 0), 0.0)

    def test_utilization_preset(self):
        stats = run(preset('utilization'))
        space, txn = stats.utilization()
        self.assertEqual(len(stats.blocks), 20)
        self.assertAlmostEqual(space, 0.88, delta=0.01)
        self.assertAlmostEqual(txn, 0.30, places=6)
        self.assertTrue(all(b.payload_txs == 9 and b.tx_count == 30 for b in stats.blocks))

    def test_financial_multiplier(self):
        tripled = run(preset('multiplier', financial_multiplier=3))
        tenfold = run(preset('multiplier', financial_multiplier=10))
        self.assertTrue(9_000 <= tripled.delays(MAX_RATE).mean() <= 14_000)
        self.assertTrue(12_000 <= tenfold.delays(MAX_RATE).mean() <= 17_000)
        self.assertTrue(tenfold.delays(MAX_RATE).mean() > tripled.delays(MAX_RATE).mean())
        self.assertTrue(tenfold.delays(FINANCIAL).max() <= 600)


class SimulationRunTests(TestCase):
    def test_execute_run_records_summary(self):
        workload = WorkloadSpec(name='tiny', writers=2, epochs=12, financial=FinancialTraceSpec(duration=1_800))
        sim_run = SimulationRun.objects.create(run_id='run-1', workload_name='tiny', workload=workload.to_dict())
        with tempfile.TemporaryDirectory() as tmp:
            execute_run(sim_run, workload, tmp)
            self.assertTrue((Path(tmp) / 'txs.csv').exists())
            summary = json.loads((Path(tmp) / 'summary.json').read_text())
        sim_run.refresh_from_db()
        self.assertEqual(sim_run.status, 'completed')
        self.assertEqual(sim_run.summary['blocks'], 12)
        self.assertEqual(summary['max-rate']['count'], 10)
        self.assertEqual(sim_run.progress_percentage, 100)
        self.assertIsNotNone(sim_run.duration)

    def test_unwritable_output_marks_run_failed(self):
        workload = WorkloadSpec(name='tiny', writers=1, epochs=4, financial=FinancialTraceSpec(duration=600))
        sim_run = SimulationRun.objects.create(run_id='run-3', workload_name='tiny', workload=workload.to_dict())
        with tempfile.TemporaryDirectory() as tmp:
            blocker = Path(tmp) / 'blocker'
            blocker.write_text('not a directory')
            with self.assertLogs('chainsim.tasks', level='ERROR'):
                with self.assertRaises(OSError):
                    execute_run(sim_run, workload, blocker / 'out')
        sim_run.refresh_from_db()
        self.assertEqual(sim_run.status, 'failed')
        self.assertTrue(sim_run.message.startswith('Fatal error: '))

    def test_mark_failed(self):
        sim_run = SimulationRun.objects.create(run_id='run-2')
        sim_run.mark_failed('boom')
        sim_run.refresh_from_db()
        self.assertTrue(sim_run.is_finished)
        self.assertEqual(sim_run.error_details, ['boom'])
