"""
Satoshi transaction tuple and its canonical byte layout
"""
import struct
from dataclasses import dataclass, field

from .exceptions import DecodingError, EncodingError, TxCodecError
from .hashing import display_hex, from_display_hex, sha256d
from .script import Script
from .varint import decode_varint, encode_varint, varint_size

SEQUENCE_FINAL = 0xffffffff
MAX_MONEY = 2 ** 63 - 1


@dataclass(frozen=True)
class OutPoint:
    """Reference to an output: raw (internal byte order) txid and index"""
    txid: bytes
    index: int

    def __post_init__(self):
        if len(self.txid) != 32:
            raise EncodingError(f"outpoint txid must be 32 bytes, got {len(self.txid)}")
        if not 0 <= self.index <= 0xffffffff:
            raise EncodingError(f"outpoint index out of range: {self.index}")

    def to_bytes(self):
        return self.txid + struct.pack('<I', self.index)

    @classmethod
    def from_display(cls, txid_hex, index):
        return cls(from_display_hex(txid_hex), index)

    def __str__(self):
        return f"{display_hex(self.txid)}:{self.index}"


@dataclass(frozen=True)
class TxInput:
    outpoint: OutPoint
    script_sig: Script = field(default_factory=Script)
    sequence: int = SEQUENCE_FINAL


@dataclass(frozen=True)
class TxOutput:
    script_pubkey: Script
    value: int = 0


@dataclass(frozen=True)
class Transaction:
    """
    Non-witness transaction. witness_flag is carried for completeness and
    must stay False; witness data is not modeled.
    """
    version: int = 1
    inputs: tuple = ()
    outputs: tuple = ()
    locktime: int = 0
    witness_flag: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'inputs', tuple(self.inputs))
        object.__setattr__(self, 'outputs', tuple(self.outputs))

    def serialize(self):
        return serialize_tx(self)

    @property
    def size(self):
        return len(serialize_tx(self))

    @property
    def txid(self):
        return txid(self)

    @property
    def txid_hex(self):
        return display_hex(txid(self))

    def hex(self):
        return serialize_tx(self).hex()

    @classmethod
    def deserialize(cls, raw):
        return deserialize_tx(raw)

    @classmethod
    def from_hex(cls, text):
        try:
            raw = bytes.fromhex(text)
        except ValueError as e:
            raise DecodingError(f"invalid transaction hex: {e}") from e
        return deserialize_tx(raw)

    def outpoint(self, index):
        return OutPoint(self.txid, index)

    def op_return_outputs(self):
        return [o for o in self.outputs if o.script_pubkey.is_op_return()]

    def total_out(self):
        return sum(o.value for o in self.outputs)


def _script_bytes(script, where):
    try:
        raw = script.to_bytes()
    except TxCodecError as e:
        raise EncodingError(f"{where}: {e}") from e
    return encode_varint(len(raw)) + raw


def serialize_tx(tx):
    """
    Canonical layout: version, input count, inputs, output count, outputs,
    locktime. All integers little-endian, counts as CompactSize.
    """
    if tx.witness_flag:
        raise EncodingError("witness serialization is not supported")
    if not 0 <= tx.version <= 0xffffffff:
        raise EncodingError(f"version out of range: {tx.version}")
    if not 0 <= tx.locktime <= 0xffffffff:
        raise EncodingError(f"locktime out of range: {tx.locktime}")
    out = bytearray(struct.pack('<I', tx.version))
    out += encode_varint(len(tx.inputs))
    for i, txin in enumerate(tx.inputs):
        out += txin.outpoint.to_bytes()
        out += _script_bytes(txin.script_sig, f"input {i}")
        out += struct.pack('<I', txin.sequence)
    out += encode_varint(len(tx.outputs))
    for i, txout in enumerate(tx.outputs):
        if not 0 <= txout.value <= MAX_MONEY:
            raise EncodingError(f"output {i}: value out of range {txout.value}")
        out += struct.pack('<q', txout.value)
        out += _script_bytes(txout.script_pubkey, f"output {i}")
    out += struct.pack('<I', tx.locktime)
    return bytes(out)


class _Reader:
    def __init__(self, raw):
        self.raw = raw
        self.pos = 0

    def take(self, n):
        if self.pos + n > len(self.raw):
            raise DecodingError(f"truncated transaction at byte {self.pos}")
        chunk = self.raw[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def varint(self):
        value, self.pos = decode_varint(self.raw, self.pos)
        return value

    def u32(self):
        return struct.unpack('<I', self.take(4))[0]


def deserialize_tx(raw):
    reader = _Reader(bytes(raw))
    version = reader.u32()
    n_in = reader.varint()
    if n_in == 0 and reader.pos < len(reader.raw) and reader.raw[reader.pos] == 1:
        raise DecodingError("segwit marker found; witness transactions are not supported")
    inputs = []
    for _ in range(n_in):
        outpoint = OutPoint(reader.take(32), reader.u32())
        script = Script.from_bytes(reader.take(reader.varint()))
        inputs.append(TxInput(outpoint, script, reader.u32()))
    n_out = reader.varint()
    outputs = []
    for _ in range(n_out):
        value = struct.unpack('<q', reader.take(8))[0]
        outputs.append(TxOutput(Script.from_bytes(reader.take(reader.varint())), value))
    locktime = reader.u32()
    if reader.pos != len(reader.raw):
        raise DecodingError(f"{len(reader.raw) - reader.pos} trailing bytes after transaction")
    return Transaction(version, tuple(inputs), tuple(outputs), locktime)


def txid(tx):
    """Raw double-SHA256 of the serialization (internal byte order)"""
    return sha256d(serialize_tx(tx))


def input_size(script_sig_len):
    """Serialized size of one input carrying a scriptSig of the given length"""
    return 36 + varint_size(script_sig_len) + script_sig_len + 4


def output_size(script_pubkey_len):
    return 8 + varint_size(script_pubkey_len) + script_pubkey_len


def tx_overhead(n_inputs, n_outputs):
    """Version, counts and locktime"""
    return 4 + varint_size(n_inputs) + varint_size(n_outputs) + 4
