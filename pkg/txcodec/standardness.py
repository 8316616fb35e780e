"""
Relay-policy (standardness) checks for non-witness transactions.

Failures are collected into a StandardnessReport; nothing here raises on
a bad transaction.
"""
import logging
from dataclasses import dataclass, field

from .exceptions import TxCodecError
from .script import MAX_PUSH_SIZE, Push, Script
from .transaction import output_size, serialize_tx

logger = logging.getLogger('txcodec')

MAX_STANDARD_TX_SIZE = 100_000
MAX_SCRIPTSIG_SIZE = 1_650
MAX_OP_RETURN_DATA = 80
MIN_RELAY_FEE_RATE = 1
DUST_RELAY_FEE_RATE = 3
SPEND_INPUT_SIZE = 148
STANDARD_VERSIONS = (1, 2)

RULES = {
    'version': 'transaction version is not standard',
    'empty': 'transaction has no inputs or no outputs',
    'size': f'serialized size exceeds {MAX_STANDARD_TX_SIZE} bytes',
    'scriptsig-size': f'scriptSig exceeds {MAX_SCRIPTSIG_SIZE} bytes',
    'scriptsig-push-only': 'scriptSig contains non-push operations',
    'push-size': f'data push exceeds {MAX_PUSH_SIZE} bytes',
    'scriptpubkey': 'output script is not a standard template',
    'bare-multisig': 'bare multisig output',
    'op-ret-count': 'more than one OP_RET output',
    'op-ret-size': f'OP_RET data exceeds {MAX_OP_RETURN_DATA} bytes',
    'min-fee': 'fee rate below relay minimum',
    'dust': 'output value below dust threshold',
}
FEE_RULES = ('min-fee',)


@dataclass(frozen=True)
class Violation:
    rule_id: str
    reason: str


@dataclass(frozen=True)
class StandardnessReport:
    passed: bool
    violations: tuple = ()
    unevaluated: tuple = ()
    size: int = 0
    fee: int = None

    @property
    def rule_ids(self):
        return [v.rule_id for v in self.violations]

    @property
    def fee_rate(self):
        if self.fee is None or not self.size:
            return None
        return self.fee / self.size

    def first_rule(self):
        return self.violations[0].rule_id if self.violations else None

    def as_dict(self):
        return {
            'passed': self.passed,
            'violations': [{'rule': v.rule_id, 'reason': v.reason} for v in self.violations],
            'unevaluated': list(self.unevaluated),
            'size': self.size,
            'fee': self.fee,
        }


@dataclass(frozen=True)
class ChainContext:
    """
    What check_standard needs to evaluate fee rules.

    spent_outputs maps OutPoint -> TxOutput for every input of the checked
    transaction that the caller can resolve.
    """
    spent_outputs: dict = field(default_factory=dict)
    min_fee_rate: int = MIN_RELAY_FEE_RATE
    dust_relay_rate: int = DUST_RELAY_FEE_RATE

    def input_value(self, outpoint):
        out = self.spent_outputs.get(outpoint)
        return None if out is None else out.value


def dust_threshold(script_pubkey, dust_relay_rate=DUST_RELAY_FEE_RATE):
    """Smallest non-dust value for an output with this script"""
    if script_pubkey.is_op_return():
        return 0
    return (output_size(script_pubkey.size) + SPEND_INPUT_SIZE) * dust_relay_rate


def _redeem_pushes(script_sig):
    pushes = script_sig.pushes()
    if not pushes:
        return []
    redeem = Script.from_bytes(pushes[-1])
    return [len(e.data) for e in redeem.elements if isinstance(e, Push)]


def check_standard(tx, ctx=None):
    """
    Evaluate relay policy in order: version, shape, size, inputs, outputs,
    fee, then dust. Fee rules stay unevaluated without a context that
    resolves every input.
    """
    violations = []

    def flag(rule_id, detail):
        violations.append(Violation(rule_id, f"{RULES[rule_id]}: {detail}"))

    try:
        size = len(serialize_tx(tx))
    except TxCodecError as e:
        return StandardnessReport(False, (Violation('size', f"unserializable: {e}"),), ())

    if tx.version not in STANDARD_VERSIONS:
        flag('version', f"version {tx.version}")
    if not tx.inputs or not tx.outputs:
        flag('empty', f"{len(tx.inputs)} inputs, {len(tx.outputs)} outputs")
    if size > MAX_STANDARD_TX_SIZE:
        flag('size', f"{size} bytes")

    for i, txin in enumerate(tx.inputs):
        sig_size = txin.script_sig.size
        if sig_size > MAX_SCRIPTSIG_SIZE:
            flag('scriptsig-size', f"input {i} has {sig_size} bytes")
        if not txin.script_sig.is_push_only():
            flag('scriptsig-push-only', f"input {i}")
        sizes = [len(p) for p in txin.script_sig.pushes()] + _redeem_pushes(txin.script_sig)
        if sizes and max(sizes) > MAX_PUSH_SIZE:
            flag('push-size', f"input {i} pushes {max(sizes)} bytes")

    op_returns = 0
    dust_rate = ctx.dust_relay_rate if ctx else DUST_RELAY_FEE_RATE
    below_dust = []
    for i, txout in enumerate(tx.outputs):
        spk = txout.script_pubkey
        if spk.is_bare_multisig():
            flag('bare-multisig', f"output {i}")
            continue
        if not spk.is_standard_output():
            flag('scriptpubkey', f"output {i}: {spk.to_asm()[:60]}")
            continue
        if spk.is_op_return():
            op_returns += 1
            data = spk.op_return_data()
            if len(data) > MAX_OP_RETURN_DATA:
                flag('op-ret-size', f"output {i} carries {len(data)} bytes")
            continue
        threshold = dust_threshold(spk, dust_rate)
        if txout.value < threshold:
            below_dust.append(f"output {i} value {txout.value} < {threshold}")
    if op_returns > 1:
        flag('op-ret-count', f"{op_returns} OP_RET outputs")

    fee = None
    unevaluated = ()
    values = [ctx.input_value(txin.outpoint) for txin in tx.inputs] if ctx else [None]
    if ctx is None or any(v is None for v in values):
        unevaluated = FEE_RULES
    else:
        fee = sum(values) - tx.total_out()
        if fee < ctx.min_fee_rate * size:
            flag('min-fee', f"fee {fee} for {size} bytes (minimum {ctx.min_fee_rate * size})")
    for detail in below_dust:
        flag('dust', detail)

    report = StandardnessReport(not violations, tuple(violations), unevaluated, size, fee)
    if violations:
        logger.debug(f"✗ {tx.txid_hex[:16]} nonstandard: {', '.join(report.rule_ids)}")
    return report
