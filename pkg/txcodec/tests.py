import hashlib
import random

from django.test import SimpleTestCase

from .exceptions import DecodingError, EncodingError
from .hashing import display_hex, from_display_hex, hash160, sha256d
from .script import (
    OP_1, OP_CHECKMULTISIG, OP_DUP, OP_HASH160, OP_PUSHDATA2, OP_RETURN,
    Opaque, Push, Script, execute, op_return_script, p2pkh_script, p2sh_for,
    p2sh_script, verify_p2sh_spend,
)
from .standardness import RULES, ChainContext, check_standard, dust_threshold
from .transaction import (
    OutPoint, Transaction, TxInput, TxOutput, deserialize_tx, serialize_tx, txid,
)
from .varint import decode_varint, encode_varint

VARINT_BOUNDARIES = [0, 252, 253, 2 ** 16 - 1, 2 ** 16, 2 ** 32 - 1, 2 ** 32, 2 ** 64 - 1]


def reference_varint(n):
    """Written separately from encode_varint, used as its oracle"""
    if n <= 252:
        return n.to_bytes(1, 'little')
    for prefix, width in ((0xfd, 2), (0xfe, 4), (0xff, 8)):
        if n < 1 << (8 * width):
            return bytes([prefix]) + n.to_bytes(width, 'little')


def signed_input(outpoint):
    return TxInput(outpoint, Script.build([b'\x30' * 72, b'\x02' * 33]))


def sample_tx(rng, n_in=None, n_out=None):
    inputs = []
    for _ in range(n_in or rng.randint(1, 4)):
        op = OutPoint(rng.randbytes(32), rng.randint(0, 3000))
        pushes = [rng.randbytes(rng.randint(0, 600)) for _ in range(rng.randint(0, 3))]
        inputs.append(TxInput(op, Script.build(pushes), rng.choice([0, 0xfffffffe, 0xffffffff])))
    outputs = []
    for _ in range(n_out or rng.randint(1, 4)):
        kind = rng.randint(0, 2)
        if kind == 0:
            spk = p2sh_script(rng.randbytes(20))
        elif kind == 1:
            spk = p2pkh_script(rng.randbytes(20))
        else:
            spk = op_return_script(rng.randbytes(rng.randint(0, 80)))
        outputs.append(TxOutput(spk, rng.randint(0, 10 ** 9)))
    return Transaction(rng.choice([1, 2]), inputs, outputs, rng.randint(0, 2 ** 32 - 1))


class VarintTests(SimpleTestCase):
    def test_examples(self):
        self.assertEqual(encode_varint(0), b'\x00')
        self.assertEqual(encode_varint(252), b'\xfc')
        self.assertEqual(encode_varint(253), b'\xfd\xfd\x00')
        self.assertEqual(encode_varint(100000), b'\xfe\xa0\x86\x01\x00')

    def test_boundaries_round_trip_and_match_reference(self):
        for n in VARINT_BOUNDARIES:
            encoded = encode_varint(n)
            self.assertEqual(encoded, reference_varint(n))
            self.assertEqual(decode_varint(encoded), (n, len(encoded)))

    def test_out_of_range(self):
        with self.assertRaises(EncodingError):
            encode_varint(2 ** 64)
        with self.assertRaises(EncodingError):
            encode_varint(-1)

    def test_truncated(self):
        with self.assertRaises(DecodingError):
            decode_varint(b'\xfe\x01\x02')


class HashingTests(SimpleTestCase):
    def test_hash160_empty(self):
        self.assertEqual(hash160(b'').hex(), 'b472a266d0bd89c13706a4132ccfb16f7c3b9fcb')

    def test_hash160_length(self):
        rng = random.Random(1)
        for _ in range(20):
            self.assertEqual(len(hash160(rng.randbytes(rng.randint(0, 300)))), 20)

    def test_display_hex_round_trip(self):
        digest = sha256d(b'abc')
        self.assertEqual(from_display_hex(display_hex(digest)), digest)


class ScriptTests(SimpleTestCase):
    def test_unknown_opcodes_round_trip(self):
        raw = bytes([0xba, 0x51, 0x02, 0xaa, 0xbb, 0xfe])
        self.assertEqual(Script.from_bytes(raw).to_bytes(), raw)

    def test_truncated_push_is_opaque(self):
        raw = b'\x4d\xff\x00\x01'
        script = Script.from_bytes(raw)
        self.assertIsInstance(script.elements[-1], Opaque)
        self.assertTrue(script.is_malformed())
        self.assertEqual(script.to_bytes(), raw)

    def test_explicit_push_opcode_preserved(self):
        script = Script.build([Push(b'\x01\x02', OP_PUSHDATA2)])
        self.assertEqual(script.to_bytes(), b'\x4d\x02\x00\x01\x02')
        self.assertEqual(Script.from_bytes(script.to_bytes()), script)

    def test_push_opcode_must_fit(self):
        with self.assertRaises(EncodingError):
            Push(b'\x00' * 10, 5)

    def test_templates(self):
        h = bytes(range(20))
        self.assertTrue(p2sh_script(h).is_p2sh())
        self.assertTrue(p2pkh_script(h).is_p2pkh())
        self.assertEqual(p2sh_script(h).size, 23)
        self.assertEqual(p2pkh_script(h).size, 25)
        self.assertEqual(op_return_script(b'hi').op_return_data(), b'hi')

    def test_p2sh_spend(self):
        redeem = Script.build([OP_HASH160, hash160(b'secret'), 0x87])
        script_sig = Script.build([b'secret', redeem.to_bytes()])
        final = verify_p2sh_spend(script_sig, p2sh_for(redeem))
        self.assertEqual(final, [b'\x01'])

    def test_execute_return_fails(self):
        from .exceptions import ScriptError
        with self.assertRaises(ScriptError):
            execute(Script.build([OP_RETURN]))


class TransactionTests(SimpleTestCase):
    def test_length_additivity(self):
        script_sig = Script.build([b'\x01' * 10])
        spk = p2pkh_script(b'\x02' * 20)
        tx = Transaction(1, [TxInput(OutPoint(b'\x00' * 32, 0), script_sig)], [TxOutput(spk, 5000)])
        expected = 4 + 1 + (36 + 1 + script_sig.size + 4) + 1 + (8 + 1 + spk.size) + 4
        self.assertEqual(len(serialize_tx(tx)), expected)

    def test_random_round_trip(self):
        rng = random.Random(7)
        seen = set()
        for _ in range(1000):
            tx = sample_tx(rng)
            raw = serialize_tx(tx)
            self.assertEqual(deserialize_tx(raw), tx)
            seen.add(raw)
        self.assertEqual(len(seen), 1000)

    def test_txid_matches_independent_double_sha(self):
        tx = sample_tx(random.Random(3))
        raw = serialize_tx(tx)
        expected = hashlib.sha256(hashlib.sha256(raw).digest()).digest()
        self.assertEqual(txid(tx), expected)
        self.assertEqual(tx.txid_hex, expected[::-1].hex())

    def test_txid_changes_on_any_byte(self):
        tx = sample_tx(random.Random(4), n_in=1, n_out=1)
        base = txid(tx)
        raw = bytearray(serialize_tx(tx))
        for i in range(0, len(raw), 7):
            mutated = bytearray(raw)
            mutated[i] ^= 0x01
            self.assertNotEqual(hashlib.sha256(hashlib.sha256(mutated).digest()).digest(), base)
        self.assertEqual(txid(deserialize_tx(bytes(raw))), base)

    def test_hex_round_trip(self):
        tx = sample_tx(random.Random(5))
        self.assertEqual(Transaction.from_hex(tx.hex()), tx)

    def test_trailing_bytes_rejected(self):
        tx = sample_tx(random.Random(6))
        with self.assertRaises(DecodingError):
            deserialize_tx(serialize_tx(tx) + b'\x00')

    def test_witness_flag_not_serializable(self):
        tx = Transaction(1, [signed_input(OutPoint(b'\x00' * 32, 0))], [], witness_flag=True)
        with self.assertRaises(EncodingError):
            serialize_tx(tx)

    def test_negative_value_names_output(self):
        tx = Transaction(1, [signed_input(OutPoint(b'\x00' * 32, 0))],
                         [TxOutput(p2sh_script(b'\x00' * 20), 1), TxOutput(p2sh_script(b'\x00' * 20), -1)])
        with self.assertRaisesMessage(EncodingError, 'output 1'):
            serialize_tx(tx)


class StandardnessTests(SimpleTestCase):
    SOURCE = OutPoint(b'\x11' * 32, 0)

    def base_tx(self, **changes):
        fields = {
            'version': 1,
            'inputs': [signed_input(self.SOURCE)],
            'outputs': [TxOutput(p2sh_script(b'\x22' * 20), 1000), TxOutput(op_return_script(b'DATA'), 0)],
        }
        fields.update(changes)
        return Transaction(**fields)

    def ctx(self, value=50_000):
        return ChainContext({self.SOURCE: TxOutput(p2pkh_script(b'\x33' * 20), value)})

    def test_base_is_standard(self):
        report = check_standard(self.base_tx(), self.ctx())
        self.assertTrue(report.passed, report.violations)
        self.assertEqual(report.unevaluated, ())

    def test_fee_unevaluated_without_context(self):
        report = check_standard(self.base_tx())
        self.assertTrue(report.passed)
        self.assertEqual(report.unevaluated, ('min-fee',))
        self.assertIsNone(report.fee)

    def test_oversized_transaction(self):
        outputs = [TxOutput(p2pkh_script(b'\x44' * 20), 546)] * 2966
        tx = self.base_tx(outputs=outputs)
        self.assertGreater(tx.size, 100_000)
        self.assertEqual(check_standard(tx).rule_ids, ['size'])

    def test_two_op_returns(self):
        tx = self.base_tx(outputs=[TxOutput(op_return_script(b'a'), 0), TxOutput(op_return_script(b'b'), 0)])
        self.assertEqual(check_standard(tx, self.ctx()).rule_ids, ['op-ret-count'])

    def test_dust_thresholds(self):
        self.assertEqual(dust_threshold(p2sh_script(b'\x00' * 20)), 540)
        self.assertEqual(dust_threshold(p2pkh_script(b'\x00' * 20)), 546)
        self.assertEqual(dust_threshold(op_return_script(b'x')), 0)

    def mutants(self, rng):
        """One generator per rule id, each producing a tx violating only that rule"""
        def version():
            return self.base_tx(version=rng.choice([0, 3, 7, 0x7fffffff]))

        def empty():
            return self.base_tx(outputs=[])

        def size():
            n = rng.randint(2966, 3000)
            return self.base_tx(outputs=[TxOutput(p2pkh_script(b'\x44' * 20), 546)] * n)

        def scriptsig_size():
            parts = [Push(b'\x00' * rng.randint(420, 520), OP_PUSHDATA2) for _ in range(4)]
            return self.base_tx(inputs=[TxInput(self.SOURCE, Script.build(parts))])

        def push_only():
            return self.base_tx(inputs=[TxInput(self.SOURCE, Script.build([b'\x30' * 72, OP_DUP]))])

        def push_size():
            blob = b'\x00' * rng.randint(521, 1000)
            return self.base_tx(inputs=[TxInput(self.SOURCE, Script.build([blob]))])

        def scriptpubkey():
            return self.base_tx(outputs=[TxOutput(Script.build([OP_DUP, rng.randbytes(5)]), 1000)])

        def bare_multisig():
            spk = Script.build([OP_1, rng.randbytes(33), OP_1, OP_CHECKMULTISIG])
            return self.base_tx(outputs=[TxOutput(spk, 1000)])

        def op_ret_count():
            outs = [TxOutput(op_return_script(rng.randbytes(10)), 0) for _ in range(rng.randint(2, 4))]
            return self.base_tx(outputs=outs)

        def op_ret_size():
            return self.base_tx(outputs=[TxOutput(op_return_script(rng.randbytes(rng.randint(81, 200))), 0)])

        def dust():
            return self.base_tx(outputs=[TxOutput(p2sh_script(b'\x22' * 20), rng.randint(1, 539))])

        return {
            'version': version, 'empty': empty, 'size': size, 'scriptsig-size': scriptsig_size,
            'scriptsig-push-only': push_only, 'push-size': push_size, 'scriptpubkey': scriptpubkey,
            'bare-multisig': bare_multisig, 'op-ret-count': op_ret_count, 'op-ret-size': op_ret_size,
            'dust': dust,
        }

    def test_mutant_corpus_maps_each_rule_to_its_id(self):
        rng = random.Random(11)
        mutants = self.mutants(rng)
        rules = sorted(mutants)
        for i in range(200):
            rule = rules[i % len(rules)]
            tx = mutants[rule]()
            report = check_standard(tx, self.ctx(value=10 ** 9))
            self.assertEqual(report.rule_ids, [rule], f"mutant {i}")
            self.assertFalse(report.passed)

    def test_min_fee(self):
        tx = self.base_tx()
        ctx = self.ctx(value=tx.total_out() + tx.size - 1)
        self.assertEqual(check_standard(tx, ctx).rule_ids, ['min-fee'])
        ctx = self.ctx(value=tx.total_out() + tx.size)
        self.assertTrue(check_standard(tx, ctx).passed)

    def test_fee_reported_before_dust(self):
        tx = self.base_tx(outputs=[TxOutput(p2sh_script(b'\x22' * 20), 100)])
        report = check_standard(tx, self.ctx(value=100))
        self.assertEqual(report.rule_ids, ['min-fee', 'dust'])

    def test_every_rule_has_a_mutant_or_case(self):
        covered = set(self.mutants(random.Random(0))) | {'min-fee'}
        self.assertEqual(covered, set(RULES))
