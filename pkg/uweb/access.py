"""
Content reconstruction from the complete local block sequence.

Access never asks the chain for single transactions: it reads every block,
indexes them, then walks the construct from its root transaction through
spenders of the preparing and funding outputs down to the spending
transactions that carry the payload chunks.
"""
import gzip
import hashlib
import logging
import re
import zlib
from dataclasses import dataclass

from maxrate.builder import extract_payload, read_marker
from maxrate.exceptions import ChunkError
from txcodec.transaction import OutPoint

from .exceptions import IncompleteContentError, IntegrityError
from .index import scan_chain

logger = logging.getLogger('uweb.access')

TXID_RE = re.compile(r'^[0-9a-fA-F]{64}$')


@dataclass(frozen=True)
class AccessResult:
    data: bytes
    root_txid: str
    path: str = None
    publisher: str = None
    sha256: str = None
    spending_txs: int = 0
    construct_txs: int = 0
    removed: bool = False


def _spender_map(blocks):
    txmap, spenders = {}, {}
    for block in blocks:
        for tx in block.txs:
            txmap[tx.txid_hex] = tx
            for txin in tx.inputs:
                spenders[txin.outpoint] = tx
    return txmap, spenders


def collect_construct(blocks, root_txid):
    """
    (inner transactions, spending transactions) of the construct rooted at
    root_txid. Every output but the last (change) must have a confirmed
    spender until a transaction carrying a DATA marker is reached.
    """
    txmap, spenders = _spender_map(blocks)
    root = txmap.get(root_txid)
    if root is None:
        raise IncompleteContentError(f"root transaction {root_txid} is not on the chain")
    inner, spending, seen = [], [], set()
    frontier = [root]
    while frontier:
        tx = frontier.pop(0)
        if tx.txid_hex in seen:
            continue
        seen.add(tx.txid_hex)
        if read_marker(tx) is not None:
            spending.append(tx)
            continue
        inner.append(tx)
        for i in range(len(tx.outputs) - 1):
            spender = spenders.get(OutPoint(tx.txid, i))
            if spender is None:
                raise IncompleteContentError(
                    f"output {i} of {tx.txid_hex[:16]} has no confirmed spender; content is incomplete")
            frontier.append(spender)
    if not spending:
        raise IncompleteContentError(f"construct at {root_txid} has no spending transactions")
    return inner, spending


def rebuild_payload(spending):
    """Compressed payload from spending transactions, checked against their markers"""
    markers = [read_marker(tx) for tx in spending]
    digests = {digest for _, digest in markers}
    if len(digests) != 1:
        raise IntegrityError(f"spending transactions carry {len(digests)} different payload digests")
    ordinals = sorted(ordinal for ordinal, _ in markers)
    if ordinals != list(range(len(ordinals))):
        raise IncompleteContentError(f"spending transaction ordinals are not contiguous: {ordinals[:10]}")
    try:
        payload = extract_payload(spending)
    except ChunkError as e:
        raise IntegrityError(f"chunk extraction failed: {e}") from e
    if hashlib.sha256(payload).digest()[:16] != digests.pop():
        raise IntegrityError("reassembled payload does not match its DATA marker digest")
    return payload


def access(chain, target, index=None, publisher=None):
    """
    Bytes stored at target, a path like /news/day1.gz or a 64-hex root txid.

    The only chain call is read_blocks(); index, when given, is brought up
    to the chain tip incrementally from those blocks.
    """
    blocks = chain.read_blocks()
    index = scan_chain(blocks, index)
    record = version = None
    if TXID_RE.match(target):
        root_txid = target.lower()
        found = index.file_for_root(root_txid)
        if found:
            record, version = found
    else:
        record = index.resolve(target, publisher)
        version = record.latest
        root_txid = version.root_txid
    inner, spending = collect_construct(blocks, root_txid)
    compressed = rebuild_payload(spending)
    try:
        data = gzip.decompress(compressed)
    except (OSError, EOFError, zlib.error) as e:
        raise IntegrityError(f"content at {root_txid[:16]} is not valid gzip: {e}") from e
    digest = hashlib.sha256(data).hexdigest()
    if version is not None and (digest != version.sha256 or len(data) != version.size):
        raise IntegrityError(f"content at {root_txid[:16]} does not match the digest its entry recorded")
    if record is None:
        logger.warning(f"Root {root_txid[:16]} is not indexed; content checked against DATA markers only")
    elif record.removed:
        logger.warning(f"{record.path} was removed by its publisher; content read by root txid")
    logger.info(f"✓ Accessed {len(data)} B from {root_txid[:16]} "
                f"({len(inner)} preparing/funding, {len(spending)} spending txs)")
    return AccessResult(
        data=data, root_txid=root_txid,
        path=record.path if record else None, publisher=record.publisher if record else None,
        sha256=digest, spending_txs=len(spending), construct_txs=len(inner) + len(spending),
        removed=bool(record and record.removed),
    )
