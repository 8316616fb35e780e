"""
Hash-locked data scripts.

Each spending input carries three 520-byte pushes and an 8-byte tail inside
the redeem script. The redeem script drops the tail and checks the hash160 of
every pushed part, so only the exact pushed data can unlock the P2SH output.
"""
import logging
from dataclasses import dataclass

from txcodec.exceptions import TxCodecError
from txcodec.hashing import hash160
from txcodec.script import (
    MAX_PUSH_SIZE, OP_DROP, OP_EQUAL, OP_EQUALVERIFY, OP_HASH160, OP_PUSHDATA2,
    Push, Script, cast_to_bool, verify_p2sh_spend,
)
from txcodec.transaction import input_size

from .exceptions import ChunkError

logger = logging.getLogger('maxrate')

PART_SIZE = MAX_PUSH_SIZE
TAIL_SIZE = 8
PAYLOAD_PER_SCRIPT = 3 * PART_SIZE + TAIL_SIZE  # 1,568


@dataclass(frozen=True)
class PayloadChunk:
    index: int
    part_a: bytes
    part_b: bytes
    part_c: bytes
    tail: bytes

    def __post_init__(self):
        for name in ('part_a', 'part_b', 'part_c'):
            if len(getattr(self, name)) > PART_SIZE:
                raise ChunkError(f"chunk {self.index}: {name} exceeds {PART_SIZE} bytes")
        if len(self.tail) > TAIL_SIZE:
            raise ChunkError(f"chunk {self.index}: tail exceeds {TAIL_SIZE} bytes")

    @property
    def payload(self):
        return self.part_a + self.part_b + self.part_c + self.tail

    @property
    def size(self):
        return len(self.part_a) + len(self.part_b) + len(self.part_c) + len(self.tail)


def split_chunk(index, data):
    """
    Split up to 1,568 bytes into parts. A short chunk keeps the tail filled
    first, then a, b and c, so parts shrink in the order c, b, a, tail.
    """
    n = len(data)
    if n > PAYLOAD_PER_SCRIPT:
        raise ChunkError(f"chunk {index} has {n} bytes")
    tail_len = min(TAIL_SIZE, n)
    rest = n - tail_len
    a_len = min(PART_SIZE, rest)
    b_len = min(PART_SIZE, rest - a_len)
    return PayloadChunk(
        index=index,
        part_a=data[:a_len],
        part_b=data[a_len:a_len + b_len],
        part_c=data[a_len + b_len:rest],
        tail=data[rest:],
    )


def chunk_sizes(payload_size):
    full, rem = divmod(payload_size, PAYLOAD_PER_SCRIPT)
    return [PAYLOAD_PER_SCRIPT] * full + ([rem] if rem else [])


def chunk_payload(data):
    """Cut a payload into 1,568-byte chunks; only the last may be shorter"""
    if not data:
        raise ChunkError("cannot chunk an empty payload")
    data = bytes(data)
    return [
        split_chunk(i, data[off:off + PAYLOAD_PER_SCRIPT])
        for i, off in enumerate(range(0, len(data), PAYLOAD_PER_SCRIPT))
    ]


@dataclass(frozen=True)
class DataScript:
    chunk: PayloadChunk
    script_sig: Script
    redeem_script: Script
    p2sh_address_hash: bytes

    @property
    def script_pubkey(self):
        return Script.build([OP_HASH160, self.p2sh_address_hash, OP_EQUAL])

    @property
    def input_size(self):
        return input_size(self.script_sig.size)


def redeem_script_for(chunk):
    return Script.build([
        Push(chunk.tail), OP_DROP,
        OP_HASH160, hash160(chunk.part_c), OP_EQUALVERIFY,
        OP_HASH160, hash160(chunk.part_b), OP_EQUALVERIFY,
        OP_HASH160, hash160(chunk.part_a), OP_EQUAL,
    ])


def build_data_script(chunk):
    redeem = redeem_script_for(chunk)
    redeem_bytes = redeem.to_bytes()
    script_sig = Script.build([
        Push(chunk.part_a, OP_PUSHDATA2),
        Push(chunk.part_b, OP_PUSHDATA2),
        Push(chunk.part_c, OP_PUSHDATA2),
        Push(redeem_bytes),
    ])
    return DataScript(chunk, script_sig, redeem, hash160(redeem_bytes))


def script_sig_size(payload_len):
    """scriptSig bytes for a chunk of payload_len, without building it"""
    tail_len = min(TAIL_SIZE, payload_len)
    redeem_len = 70 + (1 + tail_len if tail_len else 1)
    redeem_push = 1 + redeem_len if redeem_len < 0x4c else 2 + redeem_len
    return 3 * 3 + (payload_len - tail_len) + redeem_push


def data_input_size(payload_len):
    return input_size(script_sig_size(payload_len))


@dataclass(frozen=True)
class SpendCheck:
    ok: bool
    reason: str = ''

    def __bool__(self):
        return self.ok


def verify_spend(funding_output, input_script):
    """
    Check an input script against a P2SH funding output: the redeem block
    must hash to the output and running it must leave exactly one TRUE.
    """
    spk = funding_output.script_pubkey
    if not spk.is_p2sh():
        return SpendCheck(False, 'funding output is not P2SH')
    if not input_script.elements:
        return SpendCheck(False, 'empty scriptSig')
    if input_script.is_malformed():
        return SpendCheck(False, 'malformed scriptSig')
    pushes = input_script.pushes()
    if not pushes or hash160(pushes[-1]) != spk.script_hash():
        return SpendCheck(False, 'redeem script does not match output hash')
    try:
        stack = verify_p2sh_spend(input_script, spk)
    except TxCodecError as e:
        return SpendCheck(False, str(e))
    if len(stack) != 1 or not cast_to_bool(stack[0]):
        return SpendCheck(False, f'script left {len(stack)} stack items')
    return SpendCheck(True)


def extract_chunk(script_sig):
    """Recover the payload bytes carried by one data input"""
    pushes = script_sig.pushes()
    if len(pushes) != 4:
        raise ChunkError(f"expected 4 pushes, found {len(pushes)}")
    redeem = Script.from_bytes(pushes[3])
    if not redeem.elements or not isinstance(redeem.elements[0], Push):
        raise ChunkError("redeem script does not start with the tail push")
    return pushes[0] + pushes[1] + pushes[2] + redeem.elements[0].data
