import hashlib
import json
import random
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from txcodec.script import OP_PUSHDATA2, Push, Script, p2pkh_script
from txcodec.standardness import ChainContext, check_standard
from txcodec.transaction import OutPoint, TxOutput
from txcodec.varint import varint_size

from .builder import (
    DEFAULT_PUBKEY, Source, build_construct, build_funding_tx, build_preparing_tree,
    build_spending_txs, extract_payload, owner_script, read_marker,
)
from .exceptions import ChunkError, InsufficientFundsError, ManifestError, PlanError
from .manifest import construct_manifest, load_manifest, verify_manifest, write_manifest
from .planner import (
    CostModel, _tree_levels, estimate_construct_size, estimate_cost, estimate_goodput,
    estimate_throughput, plan_construct, throughput_limit,
)
from .scripts import (
    PAYLOAD_PER_SCRIPT, PayloadChunk, build_data_script, chunk_payload, extract_chunk,
    split_chunk, verify_spend,
)

MiB = 2 ** 20
BASE_UNITS_PER_MLTC = 100_000
SOURCE_OUTPOINT = OutPoint(hashlib.sha256(b'maxrate test source').digest(), 0)


def funded_source(plan, extra=10_000):
    return Source(SOURCE_OUTPOINT, plan.required_source_value + extra)


def ledger(construct):
    """ChainContext resolving every output the construct creates or spends"""
    spent = {construct.source.outpoint: TxOutput(owner_script(construct.pubkey), construct.source.value)}
    for tx in construct.transactions():
        for i, out in enumerate(tx.outputs):
            spent[OutPoint(tx.txid, i)] = out
    return ChainContext(spent)


def greedy_pack(payload_size, max_inputs=59, max_outputs=2936, max_size=100_000):
    """
    Independent packer: fills spending transactions input by input while
    they stay under max_size, then funding transactions output by output.
    """
    full, rem = divmod(payload_size, PAYLOAD_PER_SCRIPT)
    sizes = [PAYLOAD_PER_SCRIPT] * full + ([rem] if rem else [])
    spending, current = [], []

    def tx_size(inputs):
        return 4 + varint_size(len(inputs)) + sum(inputs) + 1 + 34 + 4

    for chunk in sizes:
        tail = min(8, chunk)
        redeem = 71 + tail
        sig = 9 + chunk - tail + redeem + (1 if redeem < 0x4c else 2)
        inp = 36 + varint_size(sig) + sig + 4
        if current and (len(current) == max_inputs or tx_size(current + [inp]) > max_size):
            spending.append(current)
            current = []
        current.append(inp)
    spending.append(current)
    funding = []
    remaining = len(sizes)
    while remaining:
        k = min(max_outputs, remaining)
        funding.append(4 + 1 + 148 + varint_size(k + 1) + 32 * k + 34 + 4)
        remaining -= k
    return {
        'chunks': len(sizes),
        'spending': [len(s) for s in spending],
        'spending_size': sum(tx_size(s) for s in spending),
        'funding': len(funding),
        'funding_size': sum(funding),
    }


class ChunkTests(SimpleTestCase):
    def test_exact_fit(self):
        chunks = chunk_payload(b'\x01' * 1568)
        self.assertEqual(len(chunks), 1)
        self.assertEqual(chunks[0].size, 1568)

    def test_single_epoch_capacity(self):
        self.assertEqual(len(chunk_payload(bytes(2936 * 1568))), 2936)

    def test_round_trip(self):
        rng = random.Random(7)
        data = rng.randbytes(10_240)
        chunks = chunk_payload(data)
        self.assertEqual(b''.join(c.payload for c in chunks), data)
        self.assertTrue(all(c.size == 1568 for c in chunks[:-1]))
        self.assertEqual(len(chunks), -(-len(data) // 1568))

    def test_empty_payload(self):
        with self.assertRaises(ChunkError):
            chunk_payload(b'')

    def test_partial_chunk_parts(self):
        chunk = split_chunk(0, bytes(range(256)) * 2 + bytes(37))
        self.assertEqual(
            (len(chunk.part_a), len(chunk.part_b), len(chunk.part_c), len(chunk.tail)),
            (520, 21, 0, 8),
        )
        tiny = split_chunk(3, b'abc')
        self.assertEqual((tiny.part_a, tiny.tail), (b'', b'abc'))

    def test_oversized_parts_rejected(self):
        with self.assertRaises(ChunkError):
            PayloadChunk(0, bytes(521), b'', b'', b'')
        with self.assertRaises(ChunkError):
            PayloadChunk(0, b'', b'', b'', bytes(9))


class DataScriptTests(SimpleTestCase):
    def setUp(self):
        self.rng = random.Random(11)

    def test_full_chunk_sizes(self):
        ds = build_data_script(split_chunk(0, self.rng.randbytes(1568)))
        self.assertEqual(ds.redeem_script.size, 79)
        self.assertEqual(ds.script_sig.size, 1650)
        self.assertEqual(ds.input_size, 1693)
        self.assertEqual(extract_chunk(ds.script_sig), ds.chunk.payload)

    def test_legitimate_spend(self):
        ds = build_data_script(split_chunk(0, self.rng.randbytes(1568)))
        self.assertTrue(verify_spend(TxOutput(ds.script_pubkey, 1693), ds.script_sig))

    def test_swapped_parts_fail(self):
        ds = build_data_script(split_chunk(0, self.rng.randbytes(1568)))
        c = ds.chunk
        swapped = Script.build([
            Push(c.part_b, OP_PUSHDATA2), Push(c.part_a, OP_PUSHDATA2),
            Push(c.part_c, OP_PUSHDATA2), Push(ds.redeem_script.to_bytes()),
        ])
        self.assertFalse(verify_spend(TxOutput(ds.script_pubkey), swapped))

    def test_empty_and_malformed(self):
        ds = build_data_script(split_chunk(0, b'x' * 100))
        output = TxOutput(ds.script_pubkey)
        self.assertFalse(verify_spend(output, Script()))
        truncated = Script.from_bytes(ds.script_sig.to_bytes()[:-5])
        check = verify_spend(output, truncated)
        self.assertFalse(check)
        self.assertTrue(check.reason)

    def test_non_p2sh_output(self):
        ds = build_data_script(split_chunk(0, b'x' * 100))
        self.assertFalse(verify_spend(TxOutput(p2pkh_script(bytes(20))), ds.script_sig))

    def test_random_chunks_verify(self):
        for i in range(1000):
            data = self.rng.randbytes(self.rng.randint(1, 1568))
            ds = build_data_script(split_chunk(i, data))
            self.assertTrue(ds.script_sig.size <= 1650)
            self.assertTrue(verify_spend(TxOutput(ds.script_pubkey), ds.script_sig), f"chunk {i}")

    def test_single_bit_mutations_fail(self):
        chunks = [split_chunk(i, self.rng.randbytes(n)) for i, n in enumerate((1568, 1568, 700, 9))]
        scripts = [build_data_script(c) for c in chunks]
        for trial in range(10_000):
            ds = scripts[trial % len(scripts)]
            payload = bytearray(ds.chunk.payload)
            pos = self.rng.randrange(len(payload))
            payload[pos] ^= 1 << self.rng.randrange(8)
            forged = split_chunk(ds.chunk.index, bytes(payload))
            redeem = bytearray(ds.redeem_script.to_bytes())
            redeem[1:1 + len(forged.tail)] = forged.tail
            script_sig = Script.build([
                Push(forged.part_a, OP_PUSHDATA2), Push(forged.part_b, OP_PUSHDATA2),
                Push(forged.part_c, OP_PUSHDATA2), Push(bytes(redeem)),
            ])
            self.assertFalse(verify_spend(TxOutput(ds.script_pubkey), script_sig), f"trial {trial}")


class PlanTests(SimpleTestCase):
    def test_single_epoch_capacity_plan(self):
        plan = plan_construct(4_603_648)
        self.assertEqual(plan.chunk_count, 2936)
        self.assertEqual(plan.funding_tx_count, 1)
        self.assertEqual(plan.funding_outputs, (2937,))
        self.assertEqual(plan.spending_tx_count, 50)
        self.assertEqual(plan.inputs_per_spending_tx, (59,) * 49 + (45,))
        self.assertEqual(plan.preparing_tree_depth, 0)
        self.assertEqual(plan.epochs, 2)

    def test_minimal_plan(self):
        plan = plan_construct(1568)
        self.assertEqual(plan.funding_tx_count, 1)
        self.assertEqual(plan.funding_outputs, (2,))
        self.assertEqual(plan.inputs_per_spending_tx, (1,))
        self.assertEqual(plan.preparing_tree_depth, 0)

    def test_matches_greedy_packer(self):
        for size in (20_000_000, 380_005, 1, 4_603_649):
            plan = plan_construct(size)
            packed = greedy_pack(size)
            self.assertEqual(plan.chunk_count, packed['chunks'])
            self.assertEqual(list(plan.inputs_per_spending_tx), packed['spending'])
            self.assertEqual(plan.funding_tx_count, packed['funding'])
            self.assertEqual(sum(plan.spending_sizes), packed['spending_size'])
            self.assertEqual(sum(plan.funding_sizes), packed['funding_size'])
            self.assertEqual(sum(plan.inputs_per_spending_tx), plan.chunk_count)
            self.assertTrue(max(plan.spending_sizes) <= 100_000)
            self.assertTrue(max(plan.funding_sizes) <= 100_000)

    def test_first_overflow_batches_funding_in_one_epoch(self):
        plan = plan_construct(2937 * 1568)
        self.assertEqual(plan.preparing_tree_depth, 0)
        self.assertEqual(plan.funding_lanes, 2)
        self.assertEqual(plan.funding_outputs, (2937, 2))
        self.assertEqual(plan.epochs, 2)
        self.assertEqual(plan.source_requirements, plan.funding_requirements)

    def test_first_overflow_from_one_coin_adds_tree_level(self):
        plan = plan_construct(2937 * 1568, sources=1)
        self.assertEqual(plan.preparing_tree_depth, 1)
        self.assertEqual(plan.preparing_levels, (1,))
        self.assertEqual(plan.funding_outputs, (2937, 2))
        self.assertEqual(plan.epochs, 3)

    def test_epochs_follow_funding_outputs_per_block(self):
        for size, epochs in ((10_000_000, 2), (46_051_160, 2), (50_000_000, 3), (100_000_000, 4)):
            plan = plan_construct(size)
            self.assertEqual(plan.preparing_tree_depth, 0, size)
            self.assertEqual(plan.epochs, 1 + -(-size // (1568 * 29_370)), size)
            self.assertEqual(plan.epochs, epochs, size)

    def test_full_epoch_lanes(self):
        plan = plan_construct(100_000_000)
        self.assertEqual(plan.chunk_count, 63_776)
        self.assertEqual(plan.funding_lanes, 11)
        self.assertEqual(plan.funding_tx_count, 24)
        self.assertEqual(plan.funding_epoch_count, 3)
        self.assertEqual(plan.funding_outputs[:11], (2937,) * 10 + (11,))
        self.assertEqual(plan.funding_offsets[11], 29_370)
        self.assertEqual(plan.funding_slot(29_370), (11, 0))
        self.assertEqual(plan.funding_slot(29_369), (10, 9))
        self.assertEqual(plan.lane_predecessor(13), 2)
        self.assertIsNone(plan.lane_predecessor(10))
        self.assertEqual(plan.funding_epoch(23), 2)
        first_block = sum(plan.funding_sizes[:11])
        self.assertLess(first_block, 1_000_000)
        # a lane root carries the whole lane
        lane = [0, 11, 22]
        self.assertEqual(
            plan.funding_requirements[0],
            sum(sum(plan.input_values[plan.funding_offsets[i]:plan.funding_offsets[i] + plan.funding_outputs[i] - 1])
                + plan.funding_sizes[i] for i in lane) + plan.model.p2pkh_dust(),
        )

    def test_bad_source_count(self):
        with self.assertRaises(PlanError):
            plan_construct(1568, sources=0)

    def test_each_level_multiplies_capacity(self):
        self.assertEqual(_tree_levels(1), ())
        self.assertEqual(_tree_levels(2936), (1,))
        self.assertEqual(_tree_levels(2937), (1, 2))
        self.assertEqual(_tree_levels(2936 ** 2), (1, 2936))
        self.assertEqual(len(_tree_levels(2936 ** 2 + 1)), 3)

    def test_tor_archive_spending_count(self):
        plan = plan_construct(int(6.4 * MiB))
        self.assertEqual(plan.chunk_count, 4280)
        self.assertEqual(plan.spending_tx_count, 73)

    def test_daily_payload_spending_sizes(self):
        plan = plan_construct(380_005)
        self.assertEqual(plan.spending_sizes, (99_931,) * 4 + (10_876,))

    def test_fee_rate_floor(self):
        with self.assertRaises(PlanError):
            CostModel(fee_rate=0)

    def test_non_positive_size(self):
        with self.assertRaises(PlanError):
            plan_construct(0)


class FundingTests(SimpleTestCase):
    def setUp(self):
        self.rng = random.Random(5)

    def _scripts(self, n):
        return [build_data_script(c) for c in chunk_payload(self.rng.randbytes(n * 1568))]

    def test_fifty_nine_scripts(self):
        scripts = self._scripts(59)
        plan = plan_construct(59 * 1568)
        source = funded_source(plan)
        tx = build_funding_tx(plan, source, scripts)
        self.assertEqual(len(tx.outputs), 60)
        data_total = sum(o.value for o in tx.outputs[:-1])
        self.assertEqual(tx.outputs[-1].value, source.value - data_total - tx.size)
        ctx = ChainContext({source.outpoint: TxOutput(owner_script(DEFAULT_PUBKEY), source.value)})
        report = check_standard(tx, ctx)
        self.assertTrue(report.passed, report.rule_ids)
        self.assertEqual(report.fee, tx.size)

    def test_full_funding_tx(self):
        scripts = self._scripts(2936)
        plan = plan_construct(2936 * 1568)
        tx = build_funding_tx(plan, funded_source(plan), scripts)
        self.assertEqual(len(tx.outputs), 2937)
        self.assertEqual(tx.size, 94_146)
        self.assertTrue(check_standard(tx).passed)

    def test_insufficient_funds_names_shortfall(self):
        scripts = self._scripts(3)
        plan = plan_construct(3 * 1568)
        with self.assertRaises(InsufficientFundsError) as ctx:
            build_funding_tx(plan, Source(SOURCE_OUTPOINT, plan.required_source_value - 100), scripts)
        self.assertEqual(ctx.exception.shortfall, 100)

    def test_no_scripts(self):
        plan = plan_construct(1568)
        with self.assertRaises(PlanError):
            build_funding_tx(plan, funded_source(plan), [])


class SpendingTests(SimpleTestCase):
    def test_daily_payload(self):
        payload = random.Random(1).randbytes(380_005)
        construct = build_construct(payload, Source(SOURCE_OUTPOINT, 10 ** 8))
        self.assertEqual([tx.size for tx in construct.spending], [99_931] * 4 + [10_876])
        ctx = ledger(construct)
        for tx in construct.spending:
            self.assertEqual(len(tx.outputs), 1)
            self.assertEqual(tx.outputs[0].value, 0)
            report = check_standard(tx, ctx)
            self.assertTrue(report.passed, report.rule_ids)
            self.assertEqual(report.fee, tx.size)
        self.assertEqual(extract_payload(construct.spending), payload)

    def test_marker_order_survives_shuffle(self):
        payload = random.Random(2).randbytes(200_000)
        construct = build_construct(payload, Source(SOURCE_OUTPOINT, 10 ** 8))
        shuffled = list(construct.spending)
        random.Random(3).shuffle(shuffled)
        self.assertEqual(extract_payload(shuffled), payload)
        ordinal, digest = read_marker(construct.spending[1])
        self.assertEqual(ordinal, 1)
        self.assertEqual(digest, hashlib.sha256(payload).digest()[:16])

    def test_script_count_mismatch(self):
        plan = plan_construct(3 * 1568)
        scripts = [build_data_script(c) for c in chunk_payload(bytes(2 * 1568))]
        with self.assertRaises(PlanError):
            build_spending_txs(plan, bytes(32), scripts)


class PreparingTreeTests(SimpleTestCase):
    def test_first_overflow_tree(self):
        payload = random.Random(4).randbytes(2937 * 1568)
        construct = build_construct(payload, Source(SOURCE_OUTPOINT, 10 ** 8))
        self.assertEqual(len(construct.preparing), 1)
        self.assertEqual(len(construct.funding), 2)
        root = construct.preparing[0][0]
        self.assertEqual(len(root.outputs), 3)
        for j, funding in enumerate(construct.funding):
            self.assertEqual(funding.inputs[0].outpoint, OutPoint(root.txid, j))
        nodes = [tx.size for level in construct.preparing for tx in level]
        self.assertEqual(nodes, [s for level in construct.plan.preparing_sizes for s in level])
        ctx = ledger(construct)
        for tx in construct.transactions():
            report = check_standard(tx, ctx)
            self.assertTrue(report.passed, f"{tx.txid_hex}: {report.rule_ids}")
        self.assertEqual(len(construct.stages()), construct.plan.epochs)

    def test_lanes_chain_through_change(self):
        model = CostModel(max_funding_outputs_per_block=3_000)
        payload = random.Random(6).randbytes(6_000 * 1568)
        second = Source(OutPoint(hashlib.sha256(b'second source').digest(), 0), 10 ** 8)
        construct = build_construct(payload, [Source(SOURCE_OUTPOINT, 10 ** 8), second], model)
        plan = construct.plan
        self.assertEqual(plan.preparing_tree_depth, 0)
        self.assertEqual(plan.funding_outputs, (2937, 65, 2937, 65))
        self.assertEqual(plan.epochs, 3)
        self.assertEqual(construct.funding[1].inputs[0].outpoint, second.outpoint)
        for index in (2, 3):
            carrier = construct.funding[index - 2]
            self.assertEqual(construct.funding[index].inputs[0].outpoint,
                             OutPoint(carrier.txid, len(carrier.outputs) - 1))
        ctx = ledger(construct)
        ctx.spent_outputs[second.outpoint] = TxOutput(owner_script(construct.pubkey), second.value)
        for tx in construct.funding:
            report = check_standard(tx, ctx)
            self.assertTrue(report.passed, f"{tx.txid_hex}: {report.rule_ids}")
        self.assertEqual([len(stage) for stage in construct.stages()[:-1]], [2, 2])
        self.assertEqual(extract_payload(construct.spending), payload)

    def test_depth_zero_rejected(self):
        plan = plan_construct(1568)
        with self.assertRaises(PlanError):
            build_preparing_tree(plan, funded_source(plan))

    def test_insufficient_root(self):
        plan = plan_construct(2937 * 1568, sources=1)
        with self.assertRaises(InsufficientFundsError):
            build_preparing_tree(plan, Source(SOURCE_OUTPOINT, 1_000))


class EstimatorTests(SimpleTestCase):
    def test_throughput_example(self):
        rate = estimate_throughput(46 * MiB, CostModel(upload_bandwidth=125_000_000))
        self.assertAlmostEqual(rate / 1024, 154, delta=2)

    def test_throughput_monotonic(self):
        grid = [10 ** k for k in range(3, 13)]
        rates = [estimate_throughput(n) for n in grid]
        self.assertEqual(rates, sorted(rates))

    def test_throughput_limit(self):
        model = CostModel()
        self.assertAlmostEqual(estimate_throughput(10 ** 12, model) / throughput_limit(model), 1, delta=0.01)

    def test_throughput_bandwidth_bound(self):
        model = CostModel(upload_bandwidth=1_000)
        self.assertAlmostEqual(estimate_throughput(10 ** 12, model) / 1_000, 1, delta=0.01)

    def test_goodput_formula(self):
        for n in (1568, 10 ** 6, 10 ** 9):
            self.assertAlmostEqual(estimate_goodput(n), 0.914, delta=0.001)
        self.assertAlmostEqual(estimate_construct_size(10 ** 6) / 10 ** 6, 1 / 0.9144, delta=0.001)

    def test_single_chunk_goodput_below_asymptote(self):
        self.assertLess(plan_construct(1568).goodput, estimate_goodput(1568))

    def test_cost_of_daily_payload(self):
        size = round(370.7 * 1024)
        cost = estimate_cost(size)
        self.assertTrue(4.1 <= cost / BASE_UNITS_PER_MLTC <= 4.3, cost)
        self.assertLess(size, cost)
        self.assertAlmostEqual(cost / size, 1.12, delta=0.03)

    def test_cost_scales_with_fee_rate(self):
        size = 100_000
        base = plan_construct(size)
        for rate in (2, 5):
            cost = estimate_cost(size, CostModel(fee_rate=rate))
            self.assertGreaterEqual(cost, base.construct_total_size * rate)
            self.assertGreater(cost, estimate_cost(size))

    def test_large_construct_goodput(self):
        payload = random.Random(9).randbytes(45 * MiB)
        construct = build_construct(payload, Source(SOURCE_OUTPOINT, 10 ** 9))
        self.assertEqual(construct.total_size, construct.plan.construct_total_size)
        self.assertTrue(0.89 <= construct.goodput <= 0.92, construct.goodput)
        self.assertAlmostEqual(construct.goodput, estimate_goodput(len(payload)), delta=0.01)
        self.assertEqual(extract_payload(construct.spending), payload)
        ctx = ledger(construct)
        for tx in construct.transactions():
            report = check_standard(tx, ctx)
            self.assertTrue(report.passed, report.rule_ids)
            self.assertGreaterEqual(report.fee, tx.size)


class ManifestTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.payload = random.Random(12).randbytes(100_000)
        self.construct = build_construct(self.payload, Source(SOURCE_OUTPOINT, 10 ** 7))
        self.path = Path(self.tmp.name) / 'construct.json'
        write_manifest(construct_manifest(self.construct, owner_script(DEFAULT_PUBKEY)), self.path)

    def test_round_trip(self):
        manifest = load_manifest(self.path)
        self.assertEqual(verify_manifest(manifest), self.payload)
        self.assertEqual(manifest.root.txid, self.construct.funding[0].txid)
        self.assertEqual(manifest.source_outpoint, SOURCE_OUTPOINT)
        self.assertEqual(len(manifest.stages()), self.construct.plan.epochs)

    def test_txid_mismatch(self):
        data = json.loads(self.path.read_text())
        data['transactions'][0]['txid'] = '00' * 32
        self.path.write_text(json.dumps(data))
        with self.assertRaises(ManifestError):
            load_manifest(self.path)

    def test_digest_mismatch(self):
        data = json.loads(self.path.read_text())
        data['payload_sha256'] = '11' * 32
        self.path.write_text(json.dumps(data))
        with self.assertRaises(ManifestError):
            verify_manifest(load_manifest(self.path))

    def test_missing_file(self):
        with self.assertRaises(ManifestError):
            load_manifest(Path(self.tmp.name) / 'absent.json')
