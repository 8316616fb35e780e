"""
Script model, templates and a small interpreter for the opcode subset
used by data-carrying constructs.

Pushes remember the opcode that encoded them, so a parsed script
serializes back to exactly the bytes it came from.
"""
import hashlib
import struct
from dataclasses import dataclass, field

from .exceptions import EncodingError, ScriptError
from .hashing import hash160

MAX_PUSH_SIZE = 520

OP_0 = 0x00
OP_PUSHDATA1 = 0x4c
OP_PUSHDATA2 = 0x4d
OP_PUSHDATA4 = 0x4e
OP_1NEGATE = 0x4f
OP_1 = 0x51
OP_16 = 0x60
OP_NOP = 0x61
OP_VERIFY = 0x69
OP_RETURN = 0x6a
OP_2DROP = 0x6d
OP_DROP = 0x75
OP_DUP = 0x76
OP_EQUAL = 0x87
OP_EQUALVERIFY = 0x88
OP_SHA256 = 0xa8
OP_HASH160 = 0xa9
OP_CHECKSIG = 0xac
OP_CHECKSIGVERIFY = 0xad
OP_CHECKMULTISIG = 0xae
OP_CHECKMULTISIGVERIFY = 0xaf

OPCODE_NAMES = {
    OP_0: 'OP_0',
    OP_PUSHDATA1: 'OP_PUSHDATA1',
    OP_PUSHDATA2: 'OP_PUSHDATA2',
    OP_PUSHDATA4: 'OP_PUSHDATA4',
    OP_1NEGATE: 'OP_1NEGATE',
    OP_NOP: 'OP_NOP',
    OP_VERIFY: 'OP_VERIFY',
    OP_RETURN: 'OP_RETURN',
    OP_2DROP: 'OP_2DROP',
    OP_DROP: 'OP_DROP',
    OP_DUP: 'OP_DUP',
    OP_EQUAL: 'OP_EQUAL',
    OP_EQUALVERIFY: 'OP_EQUALVERIFY',
    OP_SHA256: 'OP_SHA256',
    OP_HASH160: 'OP_HASH160',
    OP_CHECKSIG: 'OP_CHECKSIG',
    OP_CHECKSIGVERIFY: 'OP_CHECKSIGVERIFY',
    OP_CHECKMULTISIG: 'OP_CHECKMULTISIG',
    OP_CHECKMULTISIGVERIFY: 'OP_CHECKMULTISIGVERIFY',
}
OPCODE_NAMES.update({OP_1 + i: f'OP_{i + 1}' for i in range(16)})

SIGNATURE_OPS = (OP_CHECKSIG, OP_CHECKSIGVERIFY, OP_CHECKMULTISIG, OP_CHECKMULTISIGVERIFY)


def minimal_push_opcode(length):
    if length == 0:
        return OP_0
    if length < OP_PUSHDATA1:
        return length
    if length <= 0xff:
        return OP_PUSHDATA1
    if length <= 0xffff:
        return OP_PUSHDATA2
    return OP_PUSHDATA4


@dataclass(frozen=True)
class Push:
    """A data push together with the opcode that encodes it"""
    data: bytes
    opcode: int = None

    def __post_init__(self):
        if self.opcode is None:
            object.__setattr__(self, 'opcode', minimal_push_opcode(len(self.data)))
        length = len(self.data)
        op = self.opcode
        if op == OP_0:
            ok = length == 0
        elif 0 < op < OP_PUSHDATA1:
            ok = length == op
        elif op == OP_PUSHDATA1:
            ok = length <= 0xff
        elif op == OP_PUSHDATA2:
            ok = length <= 0xffff
        elif op == OP_PUSHDATA4:
            ok = length <= 0xffffffff
        else:
            ok = False
        if not ok:
            raise EncodingError(f"push opcode 0x{op:02x} cannot encode {length} bytes")

    def to_bytes(self):
        op = self.opcode
        if op == OP_0:
            return b'\x00'
        if op < OP_PUSHDATA1:
            return bytes([op]) + self.data
        if op == OP_PUSHDATA1:
            return bytes([op]) + struct.pack('<B', len(self.data)) + self.data
        if op == OP_PUSHDATA2:
            return bytes([op]) + struct.pack('<H', len(self.data)) + self.data
        return bytes([op]) + struct.pack('<I', len(self.data)) + self.data


@dataclass(frozen=True)
class Opaque:
    """Trailing bytes that do not parse as a complete element"""
    raw: bytes


@dataclass(frozen=True)
class Script:
    """
    Ordered script elements: int opcodes, Push data or an Opaque tail.
    """
    elements: tuple = field(default_factory=tuple)

    @classmethod
    def build(cls, items):
        """Bytes become minimal pushes, ints stay opcodes, Push kept as given"""
        elements = []
        for item in items:
            if isinstance(item, (bytes, bytearray)):
                elements.append(Push(bytes(item)))
            elif isinstance(item, (Push, Opaque)):
                elements.append(item)
            elif isinstance(item, int) and 0 <= item <= 0xff:
                elements.append(item)
            else:
                raise EncodingError(f"invalid script item: {item!r}")
        return cls(tuple(elements))

    @classmethod
    def from_bytes(cls, raw):
        """Parse raw script bytes; never raises, truncation becomes Opaque"""
        elements = []
        i = 0
        n = len(raw)
        while i < n:
            op = raw[i]
            start = i
            i += 1
            if op == OP_0:
                elements.append(Push(b'', OP_0))
                continue
            if op <= OP_PUSHDATA4:
                if op < OP_PUSHDATA1:
                    length = op
                else:
                    width = {OP_PUSHDATA1: 1, OP_PUSHDATA2: 2, OP_PUSHDATA4: 4}[op]
                    if i + width > n:
                        elements.append(Opaque(bytes(raw[start:])))
                        break
                    length = int.from_bytes(raw[i:i + width], 'little')
                    i += width
                if i + length > n:
                    elements.append(Opaque(bytes(raw[start:])))
                    break
                elements.append(Push(bytes(raw[i:i + length]), op))
                i += length
                continue
            elements.append(op)
        return cls(tuple(elements))

    def to_bytes(self):
        out = bytearray()
        for element in self.elements:
            if isinstance(element, int):
                out.append(element)
            elif isinstance(element, Push):
                out += element.to_bytes()
            else:
                out += element.raw
        return bytes(out)

    @property
    def size(self):
        return len(self.to_bytes())

    def __len__(self):
        return len(self.elements)

    def pushes(self):
        return [e.data for e in self.elements if isinstance(e, Push)]

    def is_push_only(self):
        for e in self.elements:
            if isinstance(e, Push):
                continue
            if isinstance(e, int) and (e == OP_1NEGATE or OP_1 <= e <= OP_16):
                continue
            return False
        return True

    def is_malformed(self):
        return any(isinstance(e, Opaque) for e in self.elements)

    def has_signature_check(self):
        return any(isinstance(e, int) and e in SIGNATURE_OPS for e in self.elements)

    def max_push_size(self):
        return max((len(e.data) for e in self.elements if isinstance(e, Push)), default=0)

    # Template recognition

    def is_p2sh(self):
        e = self.elements
        return (len(e) == 3 and e[0] == OP_HASH160 and isinstance(e[1], Push)
                and len(e[1].data) == 20 and e[2] == OP_EQUAL)

    def is_p2pkh(self):
        e = self.elements
        return (len(e) == 5 and e[0] == OP_DUP and e[1] == OP_HASH160
                and isinstance(e[2], Push) and len(e[2].data) == 20
                and e[3] == OP_EQUALVERIFY and e[4] == OP_CHECKSIG)

    def is_op_return(self):
        return bool(self.elements) and self.elements[0] == OP_RETURN

    def is_bare_multisig(self):
        return bool(self.elements) and self.elements[-1] in (OP_CHECKMULTISIG, OP_CHECKMULTISIGVERIFY)

    def script_hash(self):
        return self.elements[1].data if self.is_p2sh() else None

    def pubkey_hash(self):
        return self.elements[2].data if self.is_p2pkh() else None

    def op_return_data(self):
        """Concatenated push data after OP_RETURN"""
        if not self.is_op_return():
            return None
        return b''.join(e.data if isinstance(e, Push) else b'' for e in self.elements[1:])

    def is_standard_output(self):
        if self.is_p2sh() or self.is_p2pkh():
            return True
        if self.is_op_return():
            return all(isinstance(e, Push) for e in self.elements[1:])
        return False

    def to_asm(self):
        parts = []
        for e in self.elements:
            if isinstance(e, Push):
                parts.append(e.data.hex() if e.data else 'OP_0')
            elif isinstance(e, Opaque):
                parts.append(f'[opaque {e.raw.hex()}]')
            else:
                parts.append(OPCODE_NAMES.get(e, f'0x{e:02x}'))
        return ' '.join(parts)


def p2sh_script(script_hash):
    if len(script_hash) != 20:
        raise EncodingError("P2SH hash must be 20 bytes")
    return Script.build([OP_HASH160, script_hash, OP_EQUAL])


def p2sh_for(redeem_script):
    return p2sh_script(hash160(redeem_script.to_bytes()))


def p2pkh_script(pubkey_hash):
    if len(pubkey_hash) != 20:
        raise EncodingError("P2PKH hash must be 20 bytes")
    return Script.build([OP_DUP, OP_HASH160, pubkey_hash, OP_EQUALVERIFY, OP_CHECKSIG])


def op_return_script(data):
    return Script.build([OP_RETURN, data]) if data else Script.build([OP_RETURN])


def cast_to_bool(value):
    for i, byte in enumerate(value):
        if byte:
            # negative zero
            return not (i == len(value) - 1 and byte == 0x80)
    return False


def _opaque_checksig(signature, pubkey):
    return bool(signature) and bool(pubkey)


def execute(script, stack=None, checksig=None):
    """
    Run script over stack and return the resulting stack.

    Signatures are opaque blobs: the default checker accepts any non-empty
    signature/pubkey pair. Raises ScriptError on failure.
    """
    checksig = checksig or _opaque_checksig
    stack = list(stack or [])

    def pop():
        if not stack:
            raise ScriptError("stack underflow")
        return stack.pop()

    for element in script.elements:
        if isinstance(element, Opaque):
            raise ScriptError("malformed push")
        if isinstance(element, Push):
            if len(element.data) > MAX_PUSH_SIZE:
                raise ScriptError(f"push of {len(element.data)} bytes exceeds {MAX_PUSH_SIZE}")
            stack.append(element.data)
            continue
        op = element
        if OP_1 <= op <= OP_16:
            stack.append(bytes([op - OP_1 + 1]))
        elif op == OP_1NEGATE:
            stack.append(b'\x81')
        elif op == OP_NOP:
            pass
        elif op == OP_VERIFY:
            if not cast_to_bool(pop()):
                raise ScriptError("OP_VERIFY failed")
        elif op == OP_RETURN:
            raise ScriptError("OP_RETURN executed")
        elif op == OP_DROP:
            pop()
        elif op == OP_2DROP:
            pop()
            pop()
        elif op == OP_DUP:
            top = pop()
            stack.extend([top, top])
        elif op in (OP_EQUAL, OP_EQUALVERIFY):
            equal = pop() == pop()
            if op == OP_EQUALVERIFY:
                if not equal:
                    raise ScriptError("OP_EQUALVERIFY failed")
            else:
                stack.append(b'\x01' if equal else b'')
        elif op == OP_SHA256:
            stack.append(hashlib.sha256(pop()).digest())
        elif op == OP_HASH160:
            stack.append(hash160(pop()))
        elif op in (OP_CHECKSIG, OP_CHECKSIGVERIFY):
            pubkey = pop()
            signature = pop()
            ok = checksig(signature, pubkey)
            if op == OP_CHECKSIGVERIFY:
                if not ok:
                    raise ScriptError("OP_CHECKSIGVERIFY failed")
            else:
                stack.append(b'\x01' if ok else b'')
        else:
            raise ScriptError(f"unsupported opcode {OPCODE_NAMES.get(op, hex(op))}")
    return stack


def verify_p2sh_spend(script_sig, script_pubkey, checksig=None):
    """
    Evaluate a P2SH spend.

    Returns:
        list: final stack after running the redeem script
    """
    if not script_pubkey.is_p2sh():
        raise ScriptError("output is not P2SH")
    if not script_sig.is_push_only():
        raise ScriptError("scriptSig is not push-only")
    stack = execute(script_sig, checksig=checksig)
    if not stack:
        raise ScriptError("empty scriptSig")
    redeem_bytes = stack[-1]
    check = execute(script_pubkey, list(stack), checksig=checksig)
    if not check or not cast_to_bool(check[-1]):
        raise ScriptError("redeem script hash mismatch")
    redeem = Script.from_bytes(redeem_bytes)
    final = execute(redeem, stack[:-1], checksig=checksig)
    if not final or not cast_to_bool(final[-1]):
        raise ScriptError("redeem script left false")
    return final
