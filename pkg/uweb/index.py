"""
Content index built by scanning the full block sequence.

The index is event sourced: scanning turns transactions into JSON events,
and applying the events in order rebuilds every table, including the set of
watched chain outputs and half-read multi-transaction entries. The event
log can be persisted as JSON lines and replayed; the chain stays the
authority and a rescan from height 0 gives the same state.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from txcodec.hashing import display_hex
from txcodec.transaction import OutPoint

from .entries import TAG_DIR, Directive, EntryError, UWebEntry, fragment_data, parse_header
from .exceptions import NotFoundError, SignatureError, UWebError
from .signatures import Certificate, get_scheme

logger = logging.getLogger('uweb.scan')

INDEX_FILE = 'index.jsonl'
ROOT = '/'


def normalize_path(path):
    path = '/' + path.strip().strip('/')
    if '//' in path:
        raise NotFoundError(f"invalid path {path!r}")
    return path


def join_path(parent, name):
    return f'/{name}' if parent == ROOT else f'{parent}/{name}'


def split_path(path):
    path = normalize_path(path)
    parent, _, name = path.rpartition('/')
    return parent or ROOT, name


def parse_outpoint(text):
    txid_hex, index = text.rsplit(':', 1)
    return OutPoint.from_display(txid_hex, int(index))


@dataclass
class PublisherRecord:
    publisher_id: str
    name: str
    scheme_id: int
    public_key: bytes
    certificate: bytes
    init_txid: str
    height: int


@dataclass
class DirRecord:
    publisher: str
    path: str
    entry_txid: str
    height: int


@dataclass
class FileVersion:
    root_txid: str
    sha256: str
    size: int
    entry_txid: str
    height: int


@dataclass
class FileRecord:
    publisher: str
    path: str
    versions: list = field(default_factory=list)
    removed: bool = False

    @property
    def latest(self):
        return self.versions[-1] if self.versions else None


@dataclass
class OpChain:
    """Entries appended to one directory or file chain, in confirmation order"""
    head: str
    entries: list = field(default_factory=list)


class ContentIndex:
    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self.publishers = {}
        self.directories = {}
        self.files = {}
        self.chains = {}
        self.roots = {}
        self.quarantined = []
        self.watch = {}
        self.scan_height = 0
        self.events = []
        self._unsaved = []

    # Events

    def _emit(self, event):
        self.apply(event)
        self.events.append(event)
        self._unsaved.append(event)

    def apply(self, event):
        for outpoint in event.get('unset', ()):
            self.watch.pop(outpoint, None)
        for outpoint, watched in event.get('set', {}).items():
            self.watch[outpoint] = watched
        getattr(self, f"_on_{event['event']}")(event)

    def _on_publisher(self, event):
        pid = event['publisher']
        self.publishers[pid] = PublisherRecord(
            pid, event['name'], event['scheme'], bytes.fromhex(event['public_key']),
            bytes.fromhex(event['certificate']), event['txid'], event['height'],
        )
        self.directories[(pid, ROOT)] = DirRecord(pid, ROOT, event['txid'], event['height'])
        self.chains[(pid, ROOT)] = OpChain(event['txid'])

    def _append_op(self, event, key):
        chain = self.chains.get(key)
        if chain is not None:
            chain.entries.append((event['event'], event['txid'], event['height']))

    def _on_mkdir(self, event):
        pid, path = event['publisher'], event['path']
        self.directories[(pid, path)] = DirRecord(pid, path, event['txid'], event['height'])
        self.chains[(pid, path)] = OpChain(event['txid'])
        self._append_op(event, (pid, event['parent']))

    def _version(self, event):
        return FileVersion(event['root'], event['sha256'], event['size'], event['txid'], event['height'])

    def _on_file(self, event):
        pid, path = event['publisher'], event['path']
        self.files[(pid, path)] = FileRecord(pid, path, [self._version(event)])
        self.roots[event['root']] = (pid, path)
        self.chains[(pid, path)] = OpChain(event['txid'])
        self._append_op(event, (pid, event['parent']))

    def _on_update(self, event):
        key = (event['publisher'], event['path'])
        record = self.files[key]
        record.versions.append(self._version(event))
        record.removed = False
        self.roots[event['root']] = key
        self._append_op(event, key)

    def _on_remove(self, event):
        key = (event['publisher'], event['path'])
        self.files[key].removed = True
        self._append_op(event, key)

    def _on_quarantine(self, event):
        self.quarantined.append((event['txid'], event['reason']))

    def _on_pending(self, event):
        pass

    def _on_scanned(self, event):
        self.scan_height = event['height']

    # Scanning

    def scan(self, blocks):
        """
        Process blocks from scan_height on. Scanning the same blocks in
        several calls gives the same state as one call over all of them.
        """
        if len(blocks) < self.scan_height:
            raise UWebError(f"index is at height {self.scan_height}, chain has {len(blocks)} blocks")
        before = len(self.events)
        for block in blocks[self.scan_height:]:
            for tx in block.txs:
                self._scan_tx(tx, block.height)
        self._emit({'event': 'scanned', 'height': len(blocks)})
        logger.info(f"[SCAN] height {len(blocks)}: {len(self.events) - before - 1} new events, "
                    f"{len(self.publishers)} publishers, {len(self.files)} files")
        self.flush()
        return self

    def _scan_tx(self, tx, height):
        data = fragment_data(tx)
        spent = next((str(i.outpoint) for i in tx.inputs if str(i.outpoint) in self.watch), None)
        txid = tx.txid_hex
        if data is None:
            if spent is not None:
                self._break_chain(tx, height, spent, 'chain output spent by a transaction without OP_RET data')
            return
        if spent is not None and self.watch[spent]['kind'] == 'continuation':
            state = dict(self.watch[spent])
            state['buffer'] += data.hex()
            state['txids'] = state['txids'] + [txid]
            self._advance(tx, height, state, [spent])
            return
        header = parse_header(data)
        if header is None:
            if spent is not None:
                self._break_chain(tx, height, spent, 'chain output spent by a transaction without an entry header')
            return
        if header.directive == Directive.INIT:
            chain, unset = None, []
        elif spent is None:
            logger.debug(f"{txid[:16]}: {header.tag!r} entry off any known chain, ignored")
            return
        else:
            chain, unset = self.watch[spent], [spent]
        state = {
            'kind': 'continuation',
            'chain': chain,
            'chain_input': spent if chain else None,
            'directive': int(header.directive),
            'length': header.length,
            'buffer': header.record_prefix.hex(),
            'txids': [txid],
        }
        self._advance(tx, height, state, unset)

    def _advance(self, tx, height, state, unset):
        buffer = bytes.fromhex(state['buffer'])
        if len(buffer) < state['length']:
            self._emit({
                'event': 'pending', 'txid': tx.txid_hex, 'height': height,
                'unset': unset, 'set': {str(OutPoint(tx.txid, 1)): state},
            })
            return
        self._finish(tx, height, state, buffer[:state['length']], unset)

    def _quarantine(self, base, chain, tip, reason):
        logger.warning(f"✗ Quarantined entry {base['txid'][:16]} at height {base['height']}: {reason}")
        self._emit(dict(base, event='quarantine', reason=reason, set={tip: chain} if chain else {}))

    def _break_chain(self, tx, height, spent, reason):
        """The watched output is gone and nothing continues from it"""
        base = {'txid': tx.txid_hex, 'height': height, 'unset': [spent], 'txids': [tx.txid_hex]}
        self._quarantine(base, None, None, reason)

    def _finish(self, tx, height, state, record, unset):
        tip = str(OutPoint(tx.txid, 1))
        head = str(OutPoint(tx.txid, 2))
        chain = state['chain']
        base = {'txid': tx.txid_hex, 'height': height, 'unset': unset, 'txids': state['txids']}
        try:
            entry = UWebEntry.from_record(state['directive'], record)
        except EntryError as e:
            self._quarantine(base, chain, tip, str(e))
            return

        if entry.directive == Directive.INIT:
            try:
                cert = Certificate.from_bytes(entry.certificate)
            except SignatureError as e:
                self._quarantine(base, None, tip, str(e))
                return
            if not cert.verify():
                self._quarantine(base, None, tip, 'certificate does not verify')
                return
            pid = cert.publisher_id
            if pid in self.publishers:
                self._quarantine(base, None, tip, f'publisher {pid} already initialized')
                return
            self._emit(dict(
                base, event='publisher', publisher=pid, name=cert.name, scheme=cert.scheme_id,
                public_key=cert.public_key.hex(), certificate=entry.certificate.hex(),
                set={tip: {'kind': 'dir', 'publisher': pid, 'path': ROOT}},
            ))
            logger.info(f"✓ Discovered publisher {pid} ({cert.name}) at height {height}")
            return

        pid = chain['publisher']
        publisher = self.publishers[pid]
        expected = 'dir' if entry.tag == TAG_DIR else 'file'
        if chain['kind'] != expected:
            self._quarantine(base, chain, tip, f"{entry.kind} entry on a {chain['kind']} chain")
            return
        message = entry.signed_message(parse_outpoint(state['chain_input']))
        try:
            scheme = get_scheme(publisher.scheme_id)
            valid = entry.scheme_id == publisher.scheme_id and scheme.verify(
                publisher.public_key, message, entry.signature)
        except SignatureError:
            valid = False
        if not valid:
            self._quarantine(base, chain, tip, 'invalid signature')
            return

        parent = chain['path']
        if entry.directive in (Directive.MKDIR, Directive.FILE):
            path = join_path(parent, entry.name)
            if (pid, path) in self.directories or (pid, path) in self.files:
                self._quarantine(base, chain, tip, f'{path} already exists')
                return
            if entry.directive == Directive.MKDIR:
                self._emit(dict(base, event='mkdir', publisher=pid, path=path, parent=parent,
                                set={tip: chain, head: {'kind': 'dir', 'publisher': pid, 'path': path}}))
                return
        if entry.directive in (Directive.FILE, Directive.UPDATE):
            if len(entry.target) != 32 or len(entry.digest) != 32:
                self._quarantine(base, chain, tip, f'{entry.directive.name} entry without target or digest')
                return
            fields = dict(root=display_hex(entry.target), sha256=entry.digest.hex(), size=entry.size)
            if entry.directive == Directive.FILE:
                self._emit(dict(base, event='file', publisher=pid, path=path, parent=parent, **fields,
                                set={tip: chain, head: {'kind': 'file', 'publisher': pid, 'path': path}}))
            else:
                self._emit(dict(base, event='update', publisher=pid, path=parent, **fields, set={tip: chain}))
            return
        self._emit(dict(base, event='remove', publisher=pid, path=parent, set={tip: chain}))

    # Lookups

    def _publisher_key(self, table, path, publisher):
        path = normalize_path(path)
        if publisher is not None:
            return (publisher, path) if (publisher, path) in table else None
        matches = [key for key in table if key[1] == path]
        if len(matches) > 1:
            raise UWebError(f"{path} exists under {len(matches)} publishers; name one")
        return matches[0] if matches else None

    def resolve(self, path, publisher=None):
        """Live FileRecord at path"""
        key = self._publisher_key(self.files, path, publisher)
        if key is None or self.files[key].removed:
            raise NotFoundError(f"no file at {normalize_path(path)}")
        return self.files[key]

    def directory(self, path, publisher=None):
        key = self._publisher_key(self.directories, path, publisher)
        if key is None:
            raise NotFoundError(f"no directory at {normalize_path(path)}")
        return self.directories[key]

    def file_for_root(self, root_txid):
        """
        (FileRecord, FileVersion) whose content starts at root_txid, or None.
        Removal only hides a path from resolve(); the record may be removed.
        """
        key = self.roots.get(root_txid)
        if key is None:
            return None
        record = self.files[key]
        version = next(v for v in reversed(record.versions) if v.root_txid == root_txid)
        return record, version

    def tip(self, publisher, path, kind):
        """Un-spent chain output of a directory ('dir') or file ('file') chain, or None"""
        wanted = {'kind': kind, 'publisher': publisher, 'path': normalize_path(path)}
        for outpoint, watched in self.watch.items():
            if watched == wanted:
                return parse_outpoint(outpoint)
        return None

    def op_chain(self, path, publisher=None):
        key = self._publisher_key(self.chains, path, publisher)
        if key is None:
            raise NotFoundError(f"no chain for {normalize_path(path)}")
        return self.chains[key]

    def listing(self, publisher=None):
        """Live files as (publisher, path, FileRecord), sorted"""
        return sorted(
            (pid, path, record) for (pid, path), record in self.files.items()
            if not record.removed and publisher in (None, pid)
        )

    def snapshot(self):
        """Comparable view of every table"""
        return {
            'publishers': {k: vars(v) for k, v in self.publishers.items()},
            'directories': {f'{k[0]}{k[1]}': vars(v) for k, v in self.directories.items()},
            'files': {f'{k[0]}{k[1]}': (vars(v.latest) if v.latest else None, len(v.versions), v.removed)
                      for k, v in self.files.items()},
            'quarantined': list(self.quarantined),
            'watch': dict(self.watch),
            'scan_height': self.scan_height,
        }

    # Persistence

    def flush(self):
        if self.path is None or not self._unsaved:
            self._unsaved = []
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open('a') as f:
            for event in self._unsaved:
                f.write(json.dumps(event) + '\n')
        self._unsaved = []

    @classmethod
    def load(cls, path):
        """Replay an event log; a missing file gives an empty index bound to path"""
        index = cls(path)
        if not index.path.exists():
            return index
        with index.path.open() as f:
            for number, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    event = json.loads(line)
                    index.apply(event)
                except (json.JSONDecodeError, KeyError, AttributeError) as e:
                    raise UWebError(f"{index.path}:{number} is not a valid index event: {e}") from e
                index.events.append(event)
        logger.debug(f"Loaded index at height {index.scan_height} from {path}")
        return index


def scan_chain(blocks, index=None):
    """Index built from blocks, extending index when one is given"""
    return (index or ContentIndex()).scan(blocks)
