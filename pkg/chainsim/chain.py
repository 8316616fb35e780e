"""
Persistent simulated node: UTXO set, mempool admission with relay policy,
fee-rate block assembly and a JSON-lines block log.
"""
import json
import logging
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from txcodec.exceptions import TxCodecError
from txcodec.script import Script, cast_to_bool, execute, verify_p2sh_spend
from txcodec.standardness import ChainContext, check_standard
from txcodec.transaction import OutPoint, Transaction, TxInput, TxOutput
from txcodec.varint import varint_size

from .exceptions import ChainSimError, RejectedTransaction
from .mempool import Mempool, MempoolEntry

logger = logging.getLogger('chainsim')

BLOCK_HEADER_SIZE = 80
DEFAULT_MAX_BLOCK_SIZE = 1_000_000
GRANT_OUTPOINT = OutPoint(bytes(32), 0xffffffff)
CHAIN_FILE = 'chain.jsonl'
MEMPOOL_FILE = 'mempool.jsonl'


@dataclass
class Block:
    height: int
    timestamp: float
    entries: list = field(default_factory=list)

    @property
    def txs(self):
        return [e.tx for e in self.entries if e.tx is not None]

    @property
    def txids(self):
        return [e.txid for e in self.entries]

    @property
    def tx_count(self):
        return len(self.entries)

    @property
    def total_size(self):
        return BLOCK_HEADER_SIZE + varint_size(len(self.entries)) + sum(e.size for e in self.entries)


@dataclass(frozen=True)
class SubmitResult:
    accepted: bool
    txid: str
    rule_id: str = None
    reason: str = ''

    def __bool__(self):
        return self.accepted


def verify_input(txin, spent_output, checksig=None):
    """Reason the input cannot spend spent_output, or None when it can"""
    spk = spent_output.script_pubkey
    try:
        if spk.is_p2sh():
            verify_p2sh_spend(txin.script_sig, spk, checksig=checksig)
            return None
        if spk.is_p2pkh():
            if not txin.script_sig.is_push_only():
                return 'scriptSig is not push-only'
            final = execute(spk, execute(txin.script_sig, checksig=checksig), checksig=checksig)
            if not final or not cast_to_bool(final[-1]):
                return 'P2PKH spend left false'
            return None
    except TxCodecError as e:
        return str(e)
    return f'output script cannot be spent: {spk.to_asm()[:40]}'


class SimChain:
    """
    Single-node chain with a global, instantaneous mempool.

    Double spends of unconfirmed outputs are admitted to the mempool so that
    competing versions can race; the first one mined wins and the others are
    evicted with their descendants.
    """

    def __init__(self, max_block_size=DEFAULT_MAX_BLOCK_SIZE, epoch_seconds=150, min_fee_rate=1,
                 dust_relay_rate=3, exponential=False, seed=0, checksig=None):
        if max_block_size <= BLOCK_HEADER_SIZE or epoch_seconds <= 0:
            raise ChainSimError("block size and epoch length must be positive")
        self.max_block_size = max_block_size
        self.epoch_seconds = epoch_seconds
        self.min_fee_rate = min_fee_rate
        self.dust_relay_rate = dust_relay_rate
        self.exponential = exponential
        self.seed = seed
        self.checksig = checksig
        self.blocks = []
        self.mempool = Mempool()
        self.utxos = {}
        self.tx_index = {}
        self.access_log = []
        self.time = 0.0
        self._pending_outputs = {}
        self._grants = []
        self._seq = 0
        self._rng = np.random.default_rng([seed, 3])

    @property
    def height(self):
        return len(self.blocks)

    def _next_seq(self):
        self._seq += 1
        return self._seq

    def next_block_time(self):
        if self.exponential:
            return self.time + float(self._rng.exponential(self.epoch_seconds))
        return self.time + self.epoch_seconds

    # Outputs

    def grant(self, script_pubkey, value):
        """
        Coinbase-like transaction paying value to script_pubkey. Its output is
        spendable at once; the transaction itself goes first in the next block.
        """
        nonce = self._next_seq()
        tx = Transaction(1, [TxInput(GRANT_OUTPOINT, Script.build([struct.pack('<Q', nonce)]))],
                         [TxOutput(script_pubkey, value)])
        outpoint = OutPoint(tx.txid, 0)
        self.utxos[outpoint] = tx.outputs[0]
        self._grants.append(MempoolEntry(tx.txid_hex, tx.size, 0, self.time, nonce, klass='grant', tx=tx))
        logger.info(f"✓ Granted {value} to {script_pubkey.to_asm()[:40]} at {outpoint}")
        return outpoint

    def import_utxo(self, outpoint, txout):
        self.utxos[outpoint] = txout

    def lookup_output(self, outpoint):
        if outpoint in self.utxos:
            return self.utxos[outpoint]
        pending = self._pending_outputs.get(outpoint)
        return pending[1] if pending else None

    def spendable(self, script_pubkey):
        """Confirmed outputs paying script_pubkey not spent by a mempool entry, largest first"""
        found = [
            (outpoint, out) for outpoint, out in self.utxos.items()
            if out.script_pubkey == script_pubkey and not self.mempool.conflicts([outpoint])
        ]
        return sorted(found, key=lambda item: (-item[1].value, str(item[0])))

    # Admission

    def _reject(self, tx, rule_id, reason):
        logger.warning(f"✗ Rejected {tx.txid_hex[:16]}: {rule_id} ({reason})")
        return SubmitResult(False, tx.txid_hex, rule_id, reason)

    def submit_tx(self, tx, t=None, klass='payload'):
        """
        Admission in order: duplicate, missing inputs, relay policy (fee
        included), script execution, unconfirmed ancestor limits.
        """
        txid = tx.txid_hex
        if txid in self.mempool or txid in self.tx_index:
            return self._reject(tx, 'duplicate', 'transaction already known')
        outpoints = [txin.outpoint for txin in tx.inputs]
        if len(set(outpoints)) != len(outpoints):
            return self._reject(tx, 'duplicate-inputs', 'an outpoint is spent twice')
        spent = {}
        for outpoint in outpoints:
            out = self.lookup_output(outpoint)
            if out is None:
                return self._reject(tx, 'missing-inputs', f'{outpoint} is unknown or spent')
            spent[outpoint] = out
        report = check_standard(tx, ChainContext(spent, self.min_fee_rate, self.dust_relay_rate))
        if not report.passed:
            return self._reject(tx, report.first_rule(), report.violations[0].reason)
        for i, txin in enumerate(tx.inputs):
            error = verify_input(txin, spent[txin.outpoint], self.checksig)
            if error:
                return self._reject(tx, 'script-verify', f'input {i}: {error}')
        parents = {self._pending_outputs[op][0] for op in outpoints if op in self._pending_outputs}
        limit = self.mempool.check_limits(parents, report.size)
        if limit:
            return self._reject(tx, limit, 'too many unconfirmed ancestors')
        self._admit(tx, report.fee, self.time if t is None else t, klass, parents)
        logger.debug(f"✓ Accepted {txid[:16]} ({report.size} B, fee {report.fee}, {klass})")
        return SubmitResult(True, txid)

    def broadcast(self, tx, t=None, klass='payload'):
        """submit_tx that raises RejectedTransaction instead of returning a refusal"""
        result = self.submit_tx(tx, t, klass)
        if not result:
            raise RejectedTransaction(f"transaction {result.txid} rejected: {result.rule_id} ({result.reason})",
                                      rule_id=result.rule_id, txid=result.txid)
        return result

    def _admit(self, tx, fee, t, klass, parents, seq=None):
        entry = MempoolEntry(
            txid=tx.txid_hex, size=tx.size, fee=fee, arrival_time=t,
            seq=self._next_seq() if seq is None else seq,
            parents=frozenset(parents), spends=tuple(txin.outpoint for txin in tx.inputs),
            klass=klass, tx=tx,
        )
        self.mempool.add(entry)
        for i, out in enumerate(tx.outputs):
            if not out.script_pubkey.is_op_return():
                self._pending_outputs[OutPoint(tx.txid, i)] = (entry.txid, out)
        return entry

    # Mining

    def _confirm(self, entry, height):
        tx = entry.tx
        if entry.klass != 'grant':
            for txin in tx.inputs:
                self.utxos.pop(txin.outpoint, None)
            for i, out in enumerate(tx.outputs):
                outpoint = OutPoint(tx.txid, i)
                self._pending_outputs.pop(outpoint, None)
                if not out.script_pubkey.is_op_return():
                    self.utxos[outpoint] = out
        self.tx_index[entry.txid] = (height, tx)

    def _drop_pending(self, entries):
        for entry in entries:
            for i in range(len(entry.tx.outputs)):
                self._pending_outputs.pop(OutPoint(entry.tx.txid, i), None)

    def mine_block(self, t=None):
        """Assemble and confirm the next block; an empty mempool gives an empty block"""
        t = self.next_block_time() if t is None else t
        grants, self._grants = self._grants, []
        room = self.max_block_size - BLOCK_HEADER_SIZE - 3 - sum(g.size for g in grants)
        selected = self.mempool.block_template(room)
        block = Block(self.height, t, grants + selected)
        mined = {e.txid for e in selected}
        spent = [op for e in selected for op in e.spends]
        self.mempool.remove(mined)
        for entry in block.entries:
            self._confirm(entry, block.height)
        losers = self.mempool.conflicts(spent)
        for txid in list(losers):
            losers |= self.mempool.descendants(txid)
        if losers:
            evicted = self.mempool.remove(losers)
            self._drop_pending(evicted)
            logger.info(f"Evicted {len(evicted)} conflicting mempool txs at height {block.height}")
        self.blocks.append(block)
        self.time = t
        logger.debug(f"[MINE] height {block.height}: {block.tx_count} txs, {block.total_size} B")
        return block

    def mine_blocks(self, count):
        return [self.mine_block() for _ in range(count)]

    def mine_until(self, txids, limit=100):
        """Mine until every txid is confirmed; ChainSimError after limit blocks"""
        pending = set(txids)
        mined = []
        while pending - set(self.tx_index):
            if len(mined) >= limit:
                raise ChainSimError(f"{len(pending - set(self.tx_index))} txs unconfirmed after {limit} blocks")
            mined.append(self.mine_block())
        return mined

    # Reads

    def read_blocks(self):
        """The full block sequence; recorded as a full scan in access_log"""
        self.access_log.append(('full-scan', self.height))
        return list(self.blocks)

    def fetch_transaction(self, txid_hex):
        """Single-transaction lookup; recorded as a tx fetch in access_log"""
        self.access_log.append(('tx-fetch', txid_hex))
        found = self.tx_index.get(txid_hex)
        if found:
            return found[1]
        entry = self.mempool.get(txid_hex)
        return entry.tx if entry else None

    def is_confirmed(self, txid_hex):
        return txid_hex in self.tx_index

    def confirmation_height(self, txid_hex):
        found = self.tx_index.get(txid_hex)
        return found[0] if found else None

    # Persistence

    def _meta(self):
        return {
            'max_block_size': self.max_block_size,
            'epoch_seconds': self.epoch_seconds,
            'min_fee_rate': self.min_fee_rate,
            'dust_relay_rate': self.dust_relay_rate,
            'exponential': self.exponential,
            'seed': self.seed,
            'time': self.time,
            'seq': self._seq,
        }

    def save(self, directory):
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        lines = [json.dumps({'meta': self._meta()})]
        for block in self.blocks:
            lines.append(json.dumps({
                'height': block.height,
                'timestamp': block.timestamp,
                'txs': [_entry_record(e) for e in block.entries],
            }))
        _write_lines(directory / CHAIN_FILE, lines)
        pending = list(self._grants) + sorted(self.mempool.entries.values(), key=lambda e: e.seq)
        _write_lines(directory / MEMPOOL_FILE, [json.dumps(_entry_record(e)) for e in pending])
        logger.debug(f"Saved chain at height {self.height} with {len(self.mempool)} mempool txs to {directory}")

    @classmethod
    def load(cls, directory):
        directory = Path(directory)
        chain_path = directory / CHAIN_FILE
        if not chain_path.exists():
            raise ChainSimError(f"no chain found in {directory}")
        with chain_path.open() as f:
            records = [json.loads(line) for line in f if line.strip()]
        if not records or 'meta' not in records[0]:
            raise ChainSimError(f"{chain_path} has no meta record")
        meta = records[0]['meta']
        chain = cls(
            max_block_size=meta['max_block_size'], epoch_seconds=meta['epoch_seconds'],
            min_fee_rate=meta['min_fee_rate'], dust_relay_rate=meta['dust_relay_rate'],
            exponential=meta['exponential'], seed=meta['seed'],
        )
        for record in records[1:]:
            block = Block(record['height'], record['timestamp'])
            for item in record['txs']:
                entry = chain._restore_entry(item)
                if entry.klass == 'grant':
                    chain.utxos[OutPoint(entry.tx.txid, 0)] = entry.tx.outputs[0]
                chain._confirm(entry, block.height)
                block.entries.append(entry)
            chain.blocks.append(block)
        mempool_path = directory / MEMPOOL_FILE
        if mempool_path.exists():
            with mempool_path.open() as f:
                for line in f:
                    if not line.strip():
                        continue
                    item = json.loads(line)
                    entry = chain._restore_entry(item)
                    if entry.klass == 'grant':
                        chain.utxos[OutPoint(entry.tx.txid, 0)] = entry.tx.outputs[0]
                        chain._grants.append(entry)
                        continue
                    tx = entry.tx
                    parents = {chain._pending_outputs[i.outpoint][0]
                               for i in tx.inputs if i.outpoint in chain._pending_outputs}
                    chain._admit(tx, item['fee'], item['arrival'], entry.klass, parents, seq=item['seq'])
        chain.time = meta['time']
        chain._seq = meta['seq']
        logger.debug(f"Loaded chain at height {chain.height} from {directory}")
        return chain

    def _restore_entry(self, item):
        try:
            tx = Transaction.from_hex(item['hex'])
        except TxCodecError as e:
            raise ChainSimError(f"stored transaction does not decode: {e}") from e
        return MempoolEntry(tx.txid_hex, tx.size, item.get('fee', 0), item.get('arrival', 0.0),
                            item.get('seq', 0), klass=item.get('klass', 'payload'), tx=tx)


def _entry_record(entry):
    return {
        'hex': entry.tx.hex(),
        'klass': entry.klass,
        'fee': entry.fee,
        'arrival': entry.arrival_time,
        'seq': entry.seq,
    }


def _write_lines(path, lines):
    tmp = path.with_suffix(path.suffix + '.tmp')
    tmp.write_text('\n'.join(lines) + '\n')
    os.replace(tmp, path)
