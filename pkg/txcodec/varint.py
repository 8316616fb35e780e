"""
CompactSize variable length integers
"""
import struct

from .exceptions import DecodingError, EncodingError

MAX_VARINT = 2 ** 64 - 1


def encode_varint(n):
    """
    Encode a non-negative integer as a CompactSize.

    Args:
        n: value in [0, 2**64)

    Returns:
        bytes: 1, 3, 5 or 9 byte encoding
    """
    if n < 0 or n > MAX_VARINT:
        raise EncodingError(f"varint out of range: {n}")
    if n < 0xfd:
        return struct.pack('<B', n)
    if n <= 0xffff:
        return b'\xfd' + struct.pack('<H', n)
    if n <= 0xffffffff:
        return b'\xfe' + struct.pack('<I', n)
    return b'\xff' + struct.pack('<Q', n)


def decode_varint(data, offset=0):
    """
    Decode a CompactSize starting at offset.

    Returns:
        tuple: (value, new_offset)
    """
    if offset >= len(data):
        raise DecodingError("truncated varint")
    prefix = data[offset]
    if prefix < 0xfd:
        return prefix, offset + 1
    width, fmt = {0xfd: (2, '<H'), 0xfe: (4, '<I'), 0xff: (8, '<Q')}[prefix]
    end = offset + 1 + width
    if end > len(data):
        raise DecodingError("truncated varint")
    return struct.unpack(fmt, data[offset + 1:end])[0], end


def varint_size(n):
    if n < 0xfd:
        return 1
    if n <= 0xffff:
        return 3
    if n <= 0xffffffff:
        return 5
    return 9
