import dataclasses
import gzip
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from chainsim.chain import SimChain
from maxrate.builder import owner_script, p2pkh_spend
from maxrate.exceptions import InsufficientFundsError
from txcodec.standardness import MAX_OP_RETURN_DATA
from txcodec.transaction import OutPoint, Transaction, TxOutput

from .access import access, collect_construct
from .entries import (
    TAG_INIT, Directive, UWebEntry, build_entry_txs, fragment_data, parse_header,
)
from .exceptions import (
    ChainTipError, EntryError, IncompleteContentError, IntegrityError, NotFoundError, SignatureError, UWebError,
)
from .index import ContentIndex, scan_chain
from .publisher import Publisher
from .signatures import Certificate, PublisherIdentity, get_scheme

GENESIS_VALUE = 1_000_000_000


def random_bytes(size, seed=7):
    return np.random.default_rng(seed).bytes(size)


def setup_publisher(name='news', scheme='keyed-hash', chain=None, value=GENESIS_VALUE, **identity):
    chain = chain or SimChain()
    ident = PublisherIdentity.generate(name, scheme, **identity)
    chain.grant(owner_script(ident.public_key), value)
    chain.mine_block()
    publisher = Publisher(chain, ident)
    publisher.client_setup()
    return chain, publisher


class SignatureTests(SimpleTestCase):
    def test_keyed_hash_sign_verify(self):
        scheme = get_scheme('keyed-hash')
        private, public = scheme.generate(b'seed')
        signature = scheme.sign(private, b'message')
        self.assertTrue(scheme.verify(public, b'message', signature))
        self.assertFalse(scheme.verify(public, b'other', signature))

    def test_ecdsa_sign_verify(self):
        scheme = get_scheme(0x02)
        private, public = scheme.generate(b'seed')
        self.assertEqual(len(public), 33)
        signature = scheme.sign(private, b'message')
        self.assertTrue(scheme.verify(public, b'message', signature))
        self.assertFalse(scheme.verify(public, b'message!', signature))
        self.assertFalse(scheme.verify(b'\x02' + bytes(32), b'message', signature))

    def test_unknown_scheme(self):
        with self.assertRaises(SignatureError):
            get_scheme('rsa')

    def test_certificate_verifies_and_tamper_fails(self):
        ident = PublisherIdentity.generate('alice')
        cert = Certificate.from_bytes(ident.certificate)
        self.assertTrue(cert.verify())
        self.assertEqual(cert.publisher_id, ident.publisher_id)
        forged = dataclasses.replace(cert, name='mallory')
        self.assertFalse(forged.verify())

    def test_malformed_certificate(self):
        with self.assertRaises(SignatureError):
            Certificate.from_bytes(b'UWC\x01\x01\xff')
        with self.assertRaises(SignatureError):
            Certificate.from_bytes(b'not a certificate')

    def test_identity_save_load(self):
        ident = PublisherIdentity.generate('alice', 'ecdsa-secp256k1')
        with tempfile.TemporaryDirectory() as tmp:
            path = ident.save(Path(tmp) / 'identity.json')
            self.assertEqual(PublisherIdentity.load(path), ident)
            with self.assertRaises(SignatureError):
                PublisherIdentity.load(Path(tmp) / 'missing.json')


class EntryTests(SimpleTestCase):
    def test_kilobyte_certificate_needs_thirteen_txs(self):
        ident = PublisherIdentity.generate('pub', attributes=b'x' * 945)
        self.assertEqual(len(ident.certificate), 1024)
        entry = UWebEntry(Directive.INIT, certificate=ident.certificate)
        self.assertEqual(len(entry.fragments()), math.ceil((8 + 1 + 3 + 1024) / 80))
        self.assertEqual(len(entry.fragments()), 13)

    def test_fragments_fit_op_return(self):
        entry = UWebEntry(Directive.FILE, 'x' * 200, bytes(32), bytes(32), 12345, 1, bytes(72))
        fragments = entry.fragments()
        self.assertTrue(all(len(f) <= MAX_OP_RETURN_DATA for f in fragments))
        self.assertEqual(b''.join(fragments), entry.encode())

    def test_header_and_record_decode(self):
        entry = UWebEntry(Directive.UPDATE, 'day1.gz', bytes(range(32)), bytes(32), 370_700, 1, b'\x01' * 32)
        header = parse_header(entry.fragments()[0])
        self.assertEqual(header.directive, Directive.UPDATE)
        self.assertEqual(header.length, len(entry.record()))
        self.assertEqual(UWebEntry.from_record(Directive.UPDATE, entry.record()), entry)

    def test_non_entry_fragments(self):
        self.assertIsNone(parse_header(b'DATA\x00\x00\x00'))
        self.assertIsNone(parse_header(b'OP  \x01\x10'))  # FILE belongs under DIR
        self.assertIsNone(parse_header(b'DIR \x09\x10'))

    def test_bad_names_and_records(self):
        with self.assertRaises(EntryError):
            UWebEntry(Directive.FILE, 'a/b')
        with self.assertRaises(EntryError):
            UWebEntry(Directive.FILE, 'n' * 256)
        with self.assertRaises(EntryError):
            UWebEntry.from_record(Directive.FILE, b'\x05ab')

    def test_non_init_entry_needs_chain_tip(self):
        ident = PublisherIdentity.generate('alice')
        with self.assertRaises(EntryError):
            build_entry_txs(UWebEntry(Directive.MKDIR, 'x'), ident.public_key, None)


class ClientSetupTests(SimpleTestCase):
    def test_init_entry_carries_certificate(self):
        chain, publisher = setup_publisher(attributes=b'x' * 945)
        index = scan_chain(chain.read_blocks())
        record = index.publishers[publisher.publisher_id]
        self.assertEqual(record.certificate, publisher.identity.certificate)
        self.assertTrue(Certificate.from_bytes(record.certificate).verify())
        self.assertEqual(index.directory('/', publisher.publisher_id).path, '/')

    def test_first_op_return_starts_with_init_tag(self):
        chain = SimChain()
        ident = PublisherIdentity.generate('pub', attributes=b'x' * 945)
        chain.grant(owner_script(ident.public_key), GENESIS_VALUE)
        chain.mine_block()
        op = Publisher(chain, ident).client_setup()
        self.assertEqual(len(op.entry_txs), 13)
        self.assertEqual(fragment_data(op.entry_txs[0])[:8].hex().upper(), '44495220494E4954')
        self.assertEqual(TAG_INIT.hex().upper(), '44495220494E4954')
        for before, after in zip(op.entry_txs, op.entry_txs[1:]):
            self.assertEqual(after.inputs[0].outpoint, OutPoint(before.txid, 1))

    def test_setup_twice_rejected(self):
        _, publisher = setup_publisher()
        with self.assertRaises(UWebError):
            publisher.client_setup()

    def test_setup_without_funds(self):
        chain = SimChain()
        publisher = Publisher(chain, PublisherIdentity.generate('broke'))
        with self.assertRaises(InsufficientFundsError):
            publisher.client_setup()

    def test_operations_need_setup(self):
        chain = SimChain()
        publisher = Publisher(chain, PublisherIdentity.generate('late'))
        with self.assertRaises(NotFoundError):
            publisher.store('/news', 'a.txt', b'hello')


class StoreAccessTests(SimpleTestCase):
    def setUp(self):
        self.chain, self.publisher = setup_publisher()

    def test_round_trip(self):
        data = random_bytes(300_000)
        op = self.publisher.store('/news', 'day1.gz', data)
        self.assertEqual(op.directive, Directive.FILE)
        result = access(self.chain, '/news/day1.gz')
        self.assertEqual(result.data, data)
        self.assertEqual(result.root_txid, op.root_txid)
        self.assertEqual(result.publisher, self.publisher.publisher_id)

    def test_daily_archive_shape(self):
        op = self.publisher.store('/news', 'day1.gz', random_bytes(370_700))
        construct = op.construct
        self.assertEqual(len(construct.preparing), 0)
        self.assertEqual(len(construct.funding), 1)
        self.assertIn(len(construct.spending), (4, 5))
        self.assertEqual(construct.root, construct.funding[0])

    def test_random_three_megabytes_round_trip(self):
        data = random_bytes(3_000_000, seed=11)
        self.publisher.store('/big', 'blob.bin', data)
        self.assertEqual(access(self.chain, '/big/blob.bin').data, data)

    def test_compressible_content_is_gzipped(self):
        data = b'uweb ' * 50_000
        op = self.publisher.store('/', 'repeat.txt', data)
        self.assertEqual(op.construct.payload, gzip.compress(data, mtime=0))
        self.assertEqual(len(op.construct.spending), 1)
        self.assertEqual(access(self.chain, '/repeat.txt').data, data)

    def test_access_by_txid_equals_access_by_path(self):
        op = self.publisher.store('/news', 'day1.gz', random_bytes(20_000))
        by_path = access(self.chain, '/news/day1.gz')
        by_txid = access(self.chain, op.root_txid)
        self.assertEqual(by_txid.data, by_path.data)
        self.assertEqual(by_txid.path, '/news/day1.gz')

    def test_access_reads_only_full_chain(self):
        self.publisher.store('/news', 'day1.gz', random_bytes(20_000))
        self.chain.access_log.clear()
        access(self.chain, '/news/day1.gz')
        self.assertEqual(self.chain.access_log, [('full-scan', self.chain.height)])

    def test_second_store_becomes_update(self):
        first = self.publisher.store('/news', 'day1.gz', b'first version')
        second = self.publisher.store('/news', 'day1.gz', b'second version')
        self.assertEqual(second.directive, Directive.UPDATE)
        self.assertEqual(second.entry_txs[0].inputs[0].outpoint, OutPoint(first.entry_txs[-1].txid, 2))
        self.assertEqual(access(self.chain, '/news/day1.gz').data, b'second version')

    def test_updates_latest_wins_after_rescan(self):
        self.publisher.store('/news', 'day1.gz', b'v0')
        expected = []
        for k in range(1, 4):
            expected.append(f'v{k}'.encode())
            self.publisher.update('/news', 'day1.gz', expected[-1])
        index = scan_chain(self.chain.read_blocks())
        record = index.resolve('/news/day1.gz')
        self.assertEqual(len(record.versions), 4)
        self.assertEqual(access(self.chain, '/news/day1.gz', index=index).data, expected[-1])
        # older versions stay reachable by their root txid
        self.assertEqual(access(self.chain, record.versions[1].root_txid).data, b'v1')

    def test_remove_then_access(self):
        stored = self.publisher.store('/news', 'day1.gz', b'short lived')
        self.publisher.remove('/news', 'day1.gz')
        with self.assertRaises(NotFoundError):
            access(self.chain, '/news/day1.gz')
        with self.assertLogs('uweb', level='WARNING') as logs:
            result = access(self.chain, stored.root_txid)
        self.assertEqual(result.data, b'short lived')
        self.assertTrue(result.removed)
        self.assertTrue(any('removed by its publisher' in line for line in logs.output))
        with self.assertRaises(NotFoundError):
            self.publisher.remove('/news', 'day1.gz')
        self.publisher.store('/news', 'day1.gz', b'back again')
        self.assertEqual(access(self.chain, '/news/day1.gz').data, b'back again')

    def test_k_operations_give_k_op_entries(self):
        ops = [self.publisher.store('/news', 'a.txt', b'a0')]
        ops.append(self.publisher.update('/news', 'a.txt', b'a1'))
        ops.append(self.publisher.update('/news', 'a.txt', b'a2'))
        ops.append(self.publisher.remove('/news', 'a.txt'))
        chain = self.publisher.index.op_chain('/news/a.txt')
        self.assertEqual([e[0] for e in chain.entries], ['update', 'update', 'remove'])
        head = OutPoint(ops[0].entry_txs[-1].txid, 2)
        self.assertEqual(ops[1].entry_txs[0].inputs[0].outpoint, head)
        for before, after in zip(ops[1:], ops[2:]):
            self.assertEqual(after.entry_txs[0].inputs[0].outpoint, OutPoint(before.entry_txs[-1].txid, 1))

    def test_directories_keep_one_live_tip(self):
        self.publisher.store('/a/b', 'one', b'1')
        self.publisher.store('/a/b', 'two', b'2')
        self.publisher.store('/a', 'three', b'3')
        self.publisher.remove('/a/b', 'one')
        index = self.publisher.index
        for path in ('/', '/a', '/a/b'):
            tips = [op for op, w in index.watch.items()
                    if w == {'kind': 'dir', 'publisher': self.publisher.publisher_id, 'path': path}]
            self.assertEqual(len(tips), 1, path)
            self.assertIsNotNone(self.chain.lookup_output(index.tip(self.publisher.publisher_id, path, 'dir')))
        listing = [path for _, path, _ in index.listing()]
        self.assertEqual(listing, ['/a/b/two', '/a/three'])

    def test_store_without_create(self):
        with self.assertRaises(NotFoundError):
            self.publisher.store('/missing', 'x', b'data', create=False)

    def test_update_unknown_file(self):
        with self.assertRaises(NotFoundError):
            self.publisher.update('/news', 'nope', b'data')

    def test_empty_content_refused(self):
        with self.assertRaises(UWebError):
            self.publisher.store('/news', 'empty', b'')

    def test_spent_tip(self):
        self.publisher.store('/news', 'a.txt', b'a')
        tip = self.publisher.index.tip(self.publisher.publisher_id, '/news/a.txt', 'file')
        self.chain.utxos.pop(tip)
        with self.assertRaises(ChainTipError):
            self.publisher.update('/news', 'a.txt', b'b')

    def test_digest_mismatch(self):
        self.publisher.store('/news', 'a.txt', b'original')
        index = scan_chain(self.chain.read_blocks())
        record = index.resolve('/news/a.txt')
        record.versions[-1] = dataclasses.replace(record.versions[-1], sha256='00' * 32)
        with self.assertRaises(IntegrityError):
            access(self.chain, '/news/a.txt', index=index)

    def test_missing_constituent(self):
        construct, _ = self.publisher._write(random_bytes(10_000))
        with self.assertRaises(IncompleteContentError):
            collect_construct(self.chain.read_blocks(), construct.root.txid_hex)
        with self.assertRaises(IncompleteContentError):
            collect_construct(self.chain.read_blocks(), 'ab' * 32)

    def test_ecdsa_publisher(self):
        chain, publisher = setup_publisher('signed', 'ecdsa-secp256k1')
        publisher.store('/news', 'a.txt', b'really signed')
        self.assertEqual(access(chain, '/news/a.txt').data, b'really signed')


class ScanTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.chain, cls.alice = setup_publisher('alice')
        _, cls.bob = setup_publisher('bob', chain=cls.chain)
        cls.alice.store('/news', 'day1.gz', b'alice day one')
        cls.bob.store('/news', 'day1.gz', b'bob day one')
        cls.alice.store('/news', 'day2.gz', b'alice day two')
        cls.alice.update('/news', 'day1.gz', b'alice day one, fixed')
        cls.bob.remove('/news', 'day1.gz')

    def test_publishers_and_files(self):
        index = scan_chain(self.chain.read_blocks())
        self.assertEqual(set(index.publishers), {self.alice.publisher_id, self.bob.publisher_id})
        self.assertEqual(len(index.listing(self.alice.publisher_id)), 2)
        self.assertEqual(index.listing(self.bob.publisher_id), [])
        self.assertEqual(index.quarantined, [])

    def test_same_path_under_two_publishers(self):
        index = scan_chain(self.chain.read_blocks())
        with self.assertRaises(UWebError):
            index.directory('/news')
        self.assertEqual(index.directory('/news', self.bob.publisher_id).publisher, self.bob.publisher_id)
        self.assertEqual(index.resolve('/news/day1.gz', self.alice.publisher_id).latest.size, 20)

    def test_incremental_scan_equals_full_scan(self):
        blocks = self.chain.read_blocks()
        full = scan_chain(blocks)
        for h in np.random.default_rng(3).integers(0, len(blocks), size=6):
            index = ContentIndex()
            index.scan(blocks[:int(h)])
            index.scan(blocks)
            self.assertEqual(index.snapshot(), full.snapshot(), f'split at {h}')

    def test_event_log_replay(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'index.jsonl'
            blocks = self.chain.read_blocks()
            index = ContentIndex(path)
            index.scan(blocks[:len(blocks) // 2])
            index.scan(blocks)
            loaded = ContentIndex.load(path)
            self.assertEqual(loaded.snapshot(), scan_chain(blocks).snapshot())
            self.assertEqual(ContentIndex.load(Path(tmp) / 'absent.jsonl').scan_height, 0)

    def test_index_ahead_of_chain(self):
        index = scan_chain(self.chain.read_blocks())
        with self.assertRaises(UWebError):
            index.scan(self.chain.read_blocks()[:3])


class SignatureGateTests(SimpleTestCase):
    def test_flipped_signature_is_quarantined(self):
        chain, publisher = setup_publisher()
        tip = publisher.index.tip(publisher.publisher_id, '/', 'dir')
        signed = UWebEntry(Directive.MKDIR, 'forged').with_signature(publisher.identity, tip)
        bad = dataclasses.replace(signed, signature=bytes([signed.signature[0] ^ 1]) + signed.signature[1:])
        txs = build_entry_txs(bad, publisher.pubkey, publisher._entry_funding(bad), tip)
        for tx in txs:
            chain.broadcast(tx)
            publisher.wallet.track(tx, change_only=True)
        chain.mine_until([tx.txid_hex for tx in txs])

        index = scan_chain(chain.read_blocks())
        self.assertEqual(index.quarantined, [(txs[-1].txid_hex, 'invalid signature')])
        with self.assertRaises(NotFoundError):
            index.directory('/forged')
        # the root chain moves on to the quarantined entry's output
        publisher.refresh()
        publisher.mkdir('/real')
        self.assertEqual(publisher.index.directory('/real').path, '/real')

    def test_tip_spent_without_entry_breaks_chain(self):
        chain, publisher = setup_publisher()
        tip = publisher.index.tip(publisher.publisher_id, '/', 'dir')
        coin = publisher.wallet.select(10_000)
        total = chain.lookup_output(tip).value + coin.value
        plain = Transaction(1, [p2pkh_spend(tip, publisher.pubkey), p2pkh_spend(coin.outpoint, publisher.pubkey)],
                            [TxOutput(owner_script(publisher.pubkey), total - 1_000)])
        chain.broadcast(plain)
        chain.mine_until([plain.txid_hex])

        index = scan_chain(chain.read_blocks())
        self.assertEqual(len(index.quarantined), 1)
        self.assertEqual(index.quarantined[0][0], plain.txid_hex)
        self.assertIsNone(index.tip(publisher.publisher_id, '/', 'dir'))
        publisher.refresh()
        with self.assertRaises(ChainTipError):
            publisher.mkdir('/after')

    def test_foreign_certificate_cannot_sign(self):
        chain, publisher = setup_publisher()
        other = PublisherIdentity.generate('mallory')
        tip = publisher.index.tip(publisher.publisher_id, '/', 'dir')
        forged = UWebEntry(Directive.MKDIR, 'hijack').with_signature(other, tip)
        txs = build_entry_txs(forged, publisher.pubkey, publisher._entry_funding(forged), tip)
        for tx in txs:
            chain.broadcast(tx)
        chain.mine_until([tx.txid_hex for tx in txs])
        index = scan_chain(chain.read_blocks())
        self.assertEqual(len(index.quarantined), 1)
        self.assertNotIn((publisher.publisher_id, '/hijack'), index.directories)
