"""
Hash primitives used by transactions and scripts
"""
import hashlib


def _ripemd160(data):
    try:
        return hashlib.new('ripemd160', data).digest()
    except ValueError:
        # OpenSSL 3 builds may ship without the legacy provider
        from Crypto.Hash import RIPEMD160
        return RIPEMD160.new(data).digest()


def sha256(data):
    return hashlib.sha256(data).digest()


def sha256d(data):
    """Double SHA256, the transaction id digest"""
    return hashlib.sha256(hashlib.sha256(data).digest()).digest()


def hash160(data):
    """RIPEMD160(SHA256(data)), always 20 bytes"""
    return _ripemd160(hashlib.sha256(data).digest())


def display_hex(digest):
    """Byte-reversed hex, the way txids are printed"""
    return digest[::-1].hex()


def from_display_hex(text):
    raw = bytes.fromhex(text)
    if len(raw) != 32:
        raise ValueError(f"expected 32-byte hash, got {len(raw)} bytes")
    return raw[::-1]
