"""
Publisher side of the UWeb directory: client setup, mkdir, store, update
and remove. Content goes on chain through max-rate constructs; entries are
appended to directory and file OP chains by spending the current tip.
"""
import gzip
import hashlib
import logging
from dataclasses import dataclass, field

from maxrate.builder import build_construct
from maxrate.planner import CostModel, plan_construct
from txcodec.standardness import dust_threshold

from .entries import Directive, UWebEntry, build_entry_txs, entry_cost
from .exceptions import ChainTipError, NotFoundError, UWebError
from .index import ROOT, ContentIndex, join_path, normalize_path, split_path
from .wallet import Wallet

logger = logging.getLogger('uweb')


@dataclass
class Operation:
    """Transactions one publisher operation put on chain"""
    directive: Directive
    path: str
    entry_txs: list = field(default_factory=list)
    construct: object = None
    blocks: int = 0

    @property
    def construct_txs(self):
        return self.construct.transactions() if self.construct else []

    @property
    def transactions(self):
        return self.construct_txs + self.entry_txs

    @property
    def txids(self):
        return [tx.txid_hex for tx in self.transactions]

    @property
    def root_txid(self):
        return self.construct.root.txid_hex if self.construct else None

    def as_dict(self):
        return {
            'directive': self.directive.name,
            'path': self.path,
            'entry_txs': [tx.txid_hex for tx in self.entry_txs],
            'construct_txs': len(self.construct_txs),
            'root_txid': self.root_txid,
            'bytes': sum(tx.size for tx in self.transactions),
            'blocks': self.blocks,
        }


class Publisher:
    def __init__(self, chain, identity, index=None, model=None):
        self.chain = chain
        self.identity = identity
        self.index = index if index is not None else ContentIndex()
        self.model = model or CostModel(dust_relay_rate=chain.dust_relay_rate)
        self.pubkey = identity.public_key
        self.wallet = Wallet(chain, self.pubkey)

    @property
    def publisher_id(self):
        return self.identity.publisher_id

    def refresh(self):
        return self.index.scan(self.chain.read_blocks())

    def _require_setup(self):
        if self.publisher_id not in self.index.publishers:
            raise NotFoundError(f"publisher {self.publisher_id} has no root directory; run client setup first")

    def _entry_funding(self, entry):
        floor = dust_threshold(self.wallet.script, self.chain.dust_relay_rate)
        return self.wallet.select(entry_cost(entry, self.model.fee_rate) + floor, f'{entry.kind} entry')

    def _broadcast(self, txs, track=True):
        for tx in txs:
            self.chain.broadcast(tx)
            if track:
                self.wallet.track(tx, change_only=True)

    def _confirm(self, txs):
        mined = self.chain.mine_until([tx.txid_hex for tx in txs])
        return len(mined)

    def client_setup(self):
        """Publish the INIT entry carrying the certificate; it heads the root directory chain"""
        self.refresh()
        if self.publisher_id in self.index.publishers:
            raise UWebError(f"publisher {self.publisher_id} is already initialized")
        entry = UWebEntry(Directive.INIT, certificate=self.identity.certificate)
        txs = build_entry_txs(entry, self.pubkey, self._entry_funding(entry),
                              fee_rate=self.model.fee_rate, dust_relay_rate=self.chain.dust_relay_rate)
        self._broadcast(txs)
        op = Operation(Directive.INIT, ROOT, txs, blocks=self._confirm(txs))
        self.refresh()
        logger.info(f"✓ [SETUP] Publisher {self.publisher_id} initialized with {len(txs)} INIT txs")
        return op

    def _append(self, entry, kind, path, construct=None):
        """Sign entry against the chain tip of path, then confirm it with the construct's last stage"""
        tip = self.index.tip(self.publisher_id, path, kind)
        if tip is None:
            raise ChainTipError(f"no un-spent {kind} chain tip for {path}")
        if self.chain.lookup_output(tip) is None or self.chain.mempool.conflicts([tip]):
            raise ChainTipError(f"chain tip {tip} of {path} is already spent")
        signed = entry.with_signature(self.identity, tip)
        txs = build_entry_txs(signed, self.pubkey, self._entry_funding(signed), tip,
                              fee_rate=self.model.fee_rate, dust_relay_rate=self.chain.dust_relay_rate)
        last_stage = construct.stages()[-1] if construct else []
        self._broadcast(last_stage, track=False)
        self._broadcast(txs)
        blocks = self._confirm(last_stage + txs)
        self.refresh()
        return txs, blocks

    def _write(self, data):
        """Compress data and confirm every construct stage but the spending one"""
        compressed = gzip.compress(data, mtime=0)
        plan = plan_construct(len(compressed), self.model, sources=1)
        source = self.wallet.select(plan.required_source_value, 'construct')
        construct = build_construct(compressed, source, self.model, self.pubkey)
        blocks = 0
        for number, stage in enumerate(construct.stages()[:-1]):
            self._broadcast(stage)
            blocks += self._confirm(stage)
            logger.debug(f"[STORE] stage {number}: {len(stage)} txs confirmed")
        return construct, blocks

    def mkdir(self, path):
        """Create path and any missing parents; existing directories are left alone"""
        self._require_setup()
        path = normalize_path(path)
        if path == ROOT or (self.publisher_id, path) in self.index.directories:
            return None
        parent, name = split_path(path)
        self.mkdir(parent)
        if (self.publisher_id, path) in self.index.files:
            raise UWebError(f"{path} is a file")
        txs, blocks = self._append(UWebEntry(Directive.MKDIR, name), 'dir', parent)
        logger.info(f"✓ [MKDIR] {path}")
        return Operation(Directive.MKDIR, path, txs, blocks=blocks)

    def store(self, directory, name, data, create=True):
        """Write data as directory/name; an existing name becomes an update"""
        self._require_setup()
        if not data:
            raise UWebError("refusing to store empty content")
        directory = normalize_path(directory)
        path = join_path(directory, name)
        if (self.publisher_id, path) in self.index.files:
            return self.update(directory, name, data)
        if (self.publisher_id, directory) not in self.index.directories:
            if not create:
                raise NotFoundError(f"no directory {directory}")
            self.mkdir(directory)
        construct, blocks = self._write(data)
        entry = UWebEntry(Directive.FILE, name, construct.root.txid,
                          hashlib.sha256(data).digest(), len(data))
        txs, more = self._append(entry, 'dir', directory, construct)
        logger.info(f"✓ [STORE] {path}: {len(data)} B, root {construct.root.txid_hex[:16]}, "
                    f"{len(construct.transactions())} construct txs")
        return Operation(Directive.FILE, path, txs, construct, blocks + more)

    def _file(self, directory, name):
        path = join_path(normalize_path(directory), name)
        record = self.index.files.get((self.publisher_id, path))
        if record is None:
            raise NotFoundError(f"no file {path}")
        return path, record

    def update(self, directory, name, data):
        """Whole-file replacement appended to the file's OP chain"""
        self._require_setup()
        if not data:
            raise UWebError("refusing to store empty content")
        path, _ = self._file(directory, name)
        construct, blocks = self._write(data)
        entry = UWebEntry(Directive.UPDATE, name, construct.root.txid,
                          hashlib.sha256(data).digest(), len(data))
        txs, more = self._append(entry, 'file', path, construct)
        logger.info(f"✓ [UPDATE] {path}: {len(data)} B, root {construct.root.txid_hex[:16]}")
        return Operation(Directive.UPDATE, path, txs, construct, blocks + more)

    def remove(self, directory, name):
        self._require_setup()
        path, record = self._file(directory, name)
        if record.removed:
            raise NotFoundError(f"{path} is already removed")
        txs, blocks = self._append(UWebEntry(Directive.REMOVE, name), 'file', path)
        logger.info(f"✓ [REMOVE] {path}")
        return Operation(Directive.REMOVE, path, txs, blocks=blocks)
