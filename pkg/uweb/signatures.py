"""
Detached signature schemes and publisher certificates.

keyed-hash is a deterministic stand-in for desk runs: the signature is an
HMAC keyed with the public key, so it proves nothing against an adversary
holding that key. ecdsa-secp256k1 signs for real through `cryptography`.
"""
import hashlib
import hmac
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from txcodec.exceptions import DecodingError
from txcodec.hashing import hash160
from txcodec.varint import decode_varint, encode_varint

from .exceptions import SignatureError

logger = logging.getLogger('uweb')

CERT_MAGIC = b'UWC'
CERT_VERSION = 1
SECP256K1_ORDER = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141


class SignatureScheme:
    scheme_id = 0
    name = ''

    def generate(self, seed):
        """(private_key, public_key) bytes derived from seed"""
        raise NotImplementedError

    def sign(self, private_key, message):
        raise NotImplementedError

    def verify(self, public_key, message, signature):
        raise NotImplementedError


class KeyedHashScheme(SignatureScheme):
    scheme_id = 0x01
    name = 'keyed-hash'

    def generate(self, seed):
        private = hashlib.sha256(b'uweb-keyed-hash' + seed).digest()
        return private, self._public(private)

    @staticmethod
    def _public(private):
        return b'\x02' + hashlib.sha256(private).digest()

    def sign(self, private_key, message):
        return hmac.new(self._public(private_key), message, hashlib.sha256).digest()

    def verify(self, public_key, message, signature):
        expected = hmac.new(public_key, message, hashlib.sha256).digest()
        return hmac.compare_digest(expected, signature)


class EcdsaScheme(SignatureScheme):
    scheme_id = 0x02
    name = 'ecdsa-secp256k1'

    def generate(self, seed):
        scalar = int.from_bytes(hashlib.sha256(b'uweb-ecdsa' + seed).digest(), 'big') % (SECP256K1_ORDER - 1) + 1
        key = ec.derive_private_key(scalar, ec.SECP256K1())
        return scalar.to_bytes(32, 'big'), self._public(key)

    @staticmethod
    def _public(key):
        return key.public_key().public_bytes(Encoding.X962, PublicFormat.CompressedPoint)

    def sign(self, private_key, message):
        key = ec.derive_private_key(int.from_bytes(private_key, 'big'), ec.SECP256K1())
        return key.sign(message, ec.ECDSA(hashes.SHA256()))

    def verify(self, public_key, message, signature):
        try:
            key = ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256K1(), public_key)
            key.verify(signature, message, ec.ECDSA(hashes.SHA256()))
            return True
        except (InvalidSignature, ValueError):
            return False


SCHEMES = {scheme.name: scheme for scheme in (KeyedHashScheme(), EcdsaScheme())}
SCHEMES_BY_ID = {scheme.scheme_id: scheme for scheme in SCHEMES.values()}


def get_scheme(key):
    """Scheme by name or numeric id"""
    scheme = SCHEMES_BY_ID.get(key) if isinstance(key, int) else SCHEMES.get(key)
    if scheme is None:
        raise SignatureError(f"unknown signature scheme {key!r}; choose from {', '.join(SCHEMES)}")
    return scheme


def _field(data, offset):
    length, offset = decode_varint(data, offset)
    end = offset + length
    if end > len(data):
        raise DecodingError("certificate field runs past the end")
    return data[offset:end], end


@dataclass(frozen=True)
class Certificate:
    """Self-signed publisher certificate carried by the INIT entry"""
    scheme_id: int
    public_key: bytes
    name: str
    attributes: bytes
    signature: bytes

    @staticmethod
    def body(scheme_id, public_key, name, attributes):
        return (CERT_MAGIC + bytes([CERT_VERSION, scheme_id])
                + encode_varint(len(public_key)) + public_key
                + encode_varint(len(name.encode())) + name.encode()
                + encode_varint(len(attributes)) + attributes)

    def to_bytes(self):
        body = self.body(self.scheme_id, self.public_key, self.name, self.attributes)
        return body + encode_varint(len(self.signature)) + self.signature

    @classmethod
    def from_bytes(cls, blob):
        if not blob.startswith(CERT_MAGIC) or len(blob) < 5:
            raise SignatureError("not a publisher certificate")
        if blob[3] != CERT_VERSION:
            raise SignatureError(f"unsupported certificate version {blob[3]}")
        try:
            public_key, offset = _field(blob, 5)
            name, offset = _field(blob, offset)
            attributes, offset = _field(blob, offset)
            signature, offset = _field(blob, offset)
            text = name.decode()
        except (DecodingError, UnicodeDecodeError) as e:
            raise SignatureError(f"malformed certificate: {e}") from e
        if offset != len(blob):
            raise SignatureError("trailing bytes after certificate")
        return cls(blob[4], public_key, text, attributes, signature)

    @property
    def publisher_id(self):
        return hash160(self.public_key).hex()

    def verify(self):
        """True when the self-signature checks out under the carried public key"""
        try:
            scheme = get_scheme(self.scheme_id)
        except SignatureError:
            return False
        body = self.body(self.scheme_id, self.public_key, self.name, self.attributes)
        return scheme.verify(self.public_key, body, self.signature)


@dataclass(frozen=True)
class PublisherIdentity:
    scheme: str
    name: str
    public_key: bytes
    private_key: bytes
    certificate: bytes

    @classmethod
    def generate(cls, name='publisher', scheme='keyed-hash', seed=b'', attributes=b''):
        impl = get_scheme(scheme)
        private, public = impl.generate(seed or name.encode())
        body = Certificate.body(impl.scheme_id, public, name, attributes)
        cert = Certificate(impl.scheme_id, public, name, attributes, impl.sign(private, body))
        logger.info(f"✓ Generated {scheme} identity {cert.publisher_id} for {name}")
        return cls(scheme, name, public, private, cert.to_bytes())

    @property
    def scheme_id(self):
        return get_scheme(self.scheme).scheme_id

    @property
    def publisher_id(self):
        return hash160(self.public_key).hex()

    def sign(self, message):
        return get_scheme(self.scheme).sign(self.private_key, message)

    def to_dict(self):
        return {
            'scheme': self.scheme,
            'name': self.name,
            'public_key': self.public_key.hex(),
            'private_key': self.private_key.hex(),
            'certificate': self.certificate.hex(),
        }

    @classmethod
    def from_dict(cls, data):
        try:
            identity = cls(
                scheme=data['scheme'],
                name=data['name'],
                public_key=bytes.fromhex(data['public_key']),
                private_key=bytes.fromhex(data['private_key']),
                certificate=bytes.fromhex(data['certificate']),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise SignatureError(f"malformed identity: {e}") from e
        if not Certificate.from_bytes(identity.certificate).verify():
            raise SignatureError("identity certificate does not verify")
        return identity

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2))
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise SignatureError(f"no identity at {path}")
        try:
            return cls.from_dict(json.loads(path.read_text()))
        except json.JSONDecodeError as e:
            raise SignatureError(f"identity file is not valid JSON: {e}") from e
