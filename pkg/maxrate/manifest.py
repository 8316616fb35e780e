"""
JSON manifests for built constructs: ordered transactions with their hex,
role and epoch, plus the funding source and the payload digest.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from txcodec.exceptions import TxCodecError
from txcodec.script import Script
from txcodec.transaction import OutPoint, Transaction

from .builder import extract_payload
from .exceptions import ManifestError

logger = logging.getLogger('maxrate')

MANIFEST_VERSION = 1
ROLES = ('preparing', 'funding', 'spending')


def construct_manifest(construct, source_script=None, label=''):
    """Describe a Construct as a JSON-serializable dict"""
    roles = {id(tx): 'preparing' for level in construct.preparing for tx in level}
    roles.update({id(tx): 'funding' for tx in construct.funding})
    roles.update({id(tx): 'spending' for tx in construct.spending})
    transactions = []
    for epoch, stage in enumerate(construct.stages()):
        for tx in stage:
            role = roles[id(tx)]
            transactions.append({'txid': tx.txid_hex, 'role': role, 'epoch': epoch, 'hex': tx.hex()})
    source = None
    if construct.source is not None:
        source = {
            'outpoint': str(construct.source.outpoint),
            'value': construct.source.value,
            'script': source_script.to_bytes().hex() if source_script is not None else None,
        }
    return {
        'version': MANIFEST_VERSION,
        'label': label,
        'payload_size': len(construct.payload),
        'payload_sha256': construct.payload_digest.hex(),
        'epochs': len(construct.stages()),
        'total_size': construct.total_size,
        'total_fee': construct.plan.total_fee,
        'source': source,
        'transactions': transactions,
    }


def write_manifest(manifest, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2))
    logger.info(f"✓ Manifest written to {path} ({len(manifest['transactions'])} txs)")
    return path


@dataclass
class Manifest:
    payload_size: int
    payload_sha256: str
    epochs: int
    entries: list = field(default_factory=list)
    source_outpoint: OutPoint = None
    source_value: int = 0
    source_script: Script = None
    label: str = ''

    def by_role(self, role):
        return [tx for r, _, tx in self.entries if r == role]

    def stages(self):
        stages = [[] for _ in range(self.epochs)]
        for _, epoch, tx in self.entries:
            stages[epoch].append(tx)
        return stages

    @property
    def transactions(self):
        return [tx for _, _, tx in self.entries]

    @property
    def root(self):
        first = self.by_role('preparing') or self.by_role('funding')
        return first[0] if first else None


def parse_manifest(data):
    """Build a Manifest from an already-decoded dict"""
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a JSON object")
    if data.get('version') != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest version: {data.get('version')!r}")
    try:
        epochs = int(data['epochs'])
        entries = []
        for item in data['transactions']:
            role = item['role']
            if role not in ROLES:
                raise ManifestError(f"unknown transaction role {role!r}")
            epoch = int(item['epoch'])
            if not 0 <= epoch < epochs:
                raise ManifestError(f"transaction {item['txid']} has epoch {epoch} outside 0..{epochs - 1}")
            tx = Transaction.from_hex(item['hex'])
            if tx.txid_hex != item['txid']:
                raise ManifestError(f"txid {item['txid']} does not match its hex")
            entries.append((role, epoch, tx))
        manifest = Manifest(
            payload_size=int(data['payload_size']),
            payload_sha256=data['payload_sha256'],
            epochs=epochs,
            entries=entries,
            label=data.get('label', ''),
        )
        source = data.get('source')
        if source:
            txid_hex, index = source['outpoint'].rsplit(':', 1)
            manifest.source_outpoint = OutPoint.from_display(txid_hex, int(index))
            manifest.source_value = int(source['value'])
            if source.get('script'):
                manifest.source_script = Script.from_bytes(bytes.fromhex(source['script']))
    except (KeyError, TypeError, ValueError) as e:
        raise ManifestError(f"malformed manifest: {e}") from e
    except TxCodecError as e:
        raise ManifestError(f"manifest transaction does not decode: {e}") from e
    return manifest


def load_manifest(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ManifestError(f"manifest not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest is not valid JSON: {e}") from e
    return parse_manifest(data)


def verify_manifest(manifest):
    """
    Reassemble the payload from the manifest's spending transactions and
    check it against the recorded size and digest.

    Returns:
        bytes: the payload
    """
    payload = extract_payload(manifest.by_role('spending'))
    if len(payload) != manifest.payload_size:
        raise ManifestError(f"payload is {len(payload)} bytes, manifest says {manifest.payload_size}")
    if hashlib.sha256(payload).hexdigest() != manifest.payload_sha256:
        raise ManifestError("payload digest does not match manifest")
    return payload
