"""
UWeb entries and the transactions that carry them.

Wire format of an entry: tag || directive || CompactSize(len(record)) ||
record. The first carrying transaction holds as much as fits in its 80-byte
OP_RET; continuation transactions carry the next 80-byte slices and spend
output 1 of the transaction before them.

Outputs of every carrying transaction:
    0  OP_RET fragment, zero value
    1  chaining output (P2SH), continues the chain the entry was appended to
    2  head of a new chain, last transaction of MKDIR/FILE entries only
    -1 change back to the publisher
"""
import logging
from dataclasses import dataclass
from enum import IntEnum

from maxrate.builder import opaque_signature, owner_script, p2pkh_spend
from maxrate.exceptions import InsufficientFundsError
from txcodec.exceptions import DecodingError
from txcodec.script import OP_CHECKSIG, Script, op_return_script, p2sh_for
from txcodec.standardness import MAX_OP_RETURN_DATA, dust_threshold
from txcodec.transaction import OutPoint, Transaction, TxInput, TxOutput
from txcodec.varint import decode_varint, encode_varint

from .exceptions import EntryError

logger = logging.getLogger('uweb')

TAG_INIT = b'DIR INIT'
TAG_DIR = b'DIR '
TAG_OP = b'OP  '
TAG_DATA = b'DATA'
CHAIN_VALUE = 1_000
MAX_NAME_LENGTH = 255


class Directive(IntEnum):
    INIT = 0x00
    FILE = 0x01
    UPDATE = 0x02
    REMOVE = 0x03
    MKDIR = 0x04


TAGS = {
    Directive.INIT: TAG_INIT,
    Directive.FILE: TAG_DIR,
    Directive.MKDIR: TAG_DIR,
    Directive.UPDATE: TAG_OP,
    Directive.REMOVE: TAG_OP,
}
KINDS = {TAG_INIT: 'INIT', TAG_DIR: 'DIR', TAG_OP: 'OP', TAG_DATA: 'DATA'}
OPENS_CHAIN = (Directive.MKDIR, Directive.FILE)


def _read_field(data, offset):
    length, offset = decode_varint(data, offset)
    end = offset + length
    if end > len(data):
        raise DecodingError("field runs past the end of the record")
    return data[offset:end], end


@dataclass(frozen=True)
class UWebEntry:
    directive: Directive
    name: str = ''
    target: bytes = b''
    digest: bytes = b''
    size: int = 0
    scheme_id: int = 0
    signature: bytes = b''
    certificate: bytes = b''

    def __post_init__(self):
        object.__setattr__(self, 'directive', Directive(self.directive))
        if len(self.name.encode()) > MAX_NAME_LENGTH or '/' in self.name:
            raise EntryError(f"invalid entry name {self.name!r}")
        if self.target and len(self.target) != 32:
            raise EntryError("target must be a 32-byte txid")

    @property
    def tag(self):
        return TAGS[self.directive]

    @property
    def kind(self):
        return KINDS[self.tag]

    @property
    def opens_chain(self):
        return self.directive in OPENS_CHAIN

    def metadata(self):
        name = self.name.encode()
        return (encode_varint(len(name)) + name
                + encode_varint(len(self.digest)) + self.digest
                + encode_varint(self.size))

    def signed_message(self, chain_input):
        """Bytes covered by the signature: every field before it plus the spent chain output"""
        return (self.tag + bytes([self.directive]) + self.metadata()
                + bytes([len(self.target)]) + self.target + chain_input.to_bytes())

    def with_signature(self, identity, chain_input):
        return UWebEntry(self.directive, self.name, self.target, self.digest, self.size,
                         identity.scheme_id, identity.sign(self.signed_message(chain_input)))

    def record(self):
        if self.directive == Directive.INIT:
            return self.certificate
        return (self.metadata() + bytes([len(self.target)]) + self.target
                + bytes([self.scheme_id]) + encode_varint(len(self.signature)) + self.signature)

    def encode(self):
        record = self.record()
        return self.tag + bytes([self.directive]) + encode_varint(len(record)) + record

    def fragments(self):
        data = self.encode()
        return [data[i:i + MAX_OP_RETURN_DATA] for i in range(0, len(data), MAX_OP_RETURN_DATA)]

    @classmethod
    def from_record(cls, directive, record):
        directive = Directive(directive)
        if directive == Directive.INIT:
            return cls(directive, certificate=bytes(record))
        try:
            name, offset = _read_field(record, 0)
            digest, offset = _read_field(record, offset)
            size, offset = decode_varint(record, offset)
            target_len = record[offset]
            target = record[offset + 1:offset + 1 + target_len]
            offset += 1 + target_len
            scheme_id = record[offset]
            signature, offset = _read_field(record, offset + 1)
            text = name.decode()
        except (DecodingError, IndexError, UnicodeDecodeError) as e:
            raise EntryError(f"malformed entry record: {e}") from e
        if offset != len(record) or len(target) != target_len:
            raise EntryError("entry record length does not match its fields")
        return cls(directive, text, bytes(target), bytes(digest), size, scheme_id, bytes(signature))


@dataclass(frozen=True)
class EntryHeader:
    tag: bytes
    directive: Directive
    length: int
    record_prefix: bytes


def parse_header(fragment):
    """Header of the first fragment of an entry, or None when it is not one"""
    if fragment.startswith(TAG_INIT):
        tag = TAG_INIT
    elif fragment[:4] in (TAG_DIR, TAG_OP):
        tag = fragment[:4]
    else:
        return None
    try:
        directive = Directive(fragment[len(tag)])
        length, offset = decode_varint(fragment, len(tag) + 1)
    except (IndexError, ValueError, DecodingError):
        return None
    if TAGS[directive] != tag:
        return None
    return EntryHeader(tag, directive, length, bytes(fragment[offset:]))


def chain_redeem_script(pubkey):
    return Script.build([pubkey, OP_CHECKSIG])


def chain_script(pubkey):
    return p2sh_for(chain_redeem_script(pubkey))


def chain_spend(outpoint, pubkey):
    redeem = chain_redeem_script(pubkey)
    return TxInput(outpoint, Script.build([opaque_signature(pubkey, outpoint), redeem.to_bytes()]))


def fragment_data(tx):
    """OP_RET data of a carrying transaction, or None"""
    for out in tx.outputs:
        if out.script_pubkey.is_op_return():
            return out.script_pubkey.op_return_data()
    return None


def build_entry_txs(entry, pubkey, funding, chain_input=None, fee_rate=1, dust_relay_rate=3):
    """
    Transactions carrying entry, in submission order.

    Args:
        entry: signed UWebEntry
        pubkey: publisher key owning chaining and change outputs
        funding: maxrate Source paying fees and new chaining outputs
        chain_input: OutPoint of the chain tip the entry is appended to;
            None only for INIT entries
    """
    if chain_input is None and entry.directive != Directive.INIT:
        raise EntryError(f"{entry.directive.name} entry needs a chain tip to spend")
    link = chain_script(pubkey)
    change_script = owner_script(pubkey)
    floor = dust_threshold(change_script, dust_relay_rate)
    fragments = entry.fragments()
    txs = []
    chain_in, chain_value = chain_input, CHAIN_VALUE if chain_input is not None else 0
    fund_in, fund_value = funding.outpoint, funding.value
    for k, fragment in enumerate(fragments):
        inputs = []
        if chain_in is not None:
            inputs.append(chain_spend(chain_in, pubkey))
        inputs.append(p2pkh_spend(fund_in, pubkey))
        outputs = [TxOutput(op_return_script(fragment), 0), TxOutput(link, CHAIN_VALUE)]
        if k == len(fragments) - 1 and entry.opens_chain:
            outputs.append(TxOutput(link, CHAIN_VALUE))
        draft = Transaction(1, inputs, outputs + [TxOutput(change_script, 0)])
        change = fund_value + chain_value - sum(o.value for o in outputs) - draft.size * fee_rate
        if change < floor:
            raise InsufficientFundsError(
                f"{entry.kind} entry fragment {k}: funding {fund_in} short by {floor - change}",
                shortfall=floor - change,
            )
        tx = Transaction(1, inputs, outputs + [TxOutput(change_script, change)])
        txs.append(tx)
        chain_in, chain_value = OutPoint(tx.txid, 1), CHAIN_VALUE
        fund_in, fund_value = OutPoint(tx.txid, len(tx.outputs) - 1), change
    logger.debug(f"[ENTRY] {entry.kind} {entry.directive.name} {entry.name!r}: {len(txs)} txs")
    return txs


def entry_cost(entry, fee_rate=1):
    """Upper bound on what funding an entry consumes, excluding change"""
    # two inputs, a full OP_RET, two chaining outputs and change
    per_tx = 4 + 1 + 2 * 180 + 1 + 92 + 2 * 32 + 34 + 4
    new_outputs = CHAIN_VALUE if entry.opens_chain else 0
    first_link = CHAIN_VALUE if entry.directive == Directive.INIT else 0
    return len(entry.fragments()) * per_tx * fee_rate + new_outputs + first_link
