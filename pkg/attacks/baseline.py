"""
Unprotected staged writer used as the vulnerable witness.

A funding transaction locks one P2SH output per chunk to a redeem script
that drops whatever was pushed and leaves TRUE; spending transactions push
the raw chunk data and pay a P2PKH change output back to the writer. No
hash lock ties the pushes to the output and nothing in the spend is signed.
"""
import logging
import math
from dataclasses import dataclass, field

from maxrate.builder import DEFAULT_PUBKEY, owner_script, p2pkh_spend
from maxrate.exceptions import InsufficientFundsError, PlanError
from maxrate.planner import MAX_DATA_OUTPUTS_PER_TX
from maxrate.scripts import chunk_payload
from txcodec.script import OP_1, OP_2DROP, OP_DROP, OP_PUSHDATA2, Push, Script, p2sh_for, p2sh_script
from txcodec.standardness import dust_threshold
from txcodec.transaction import OutPoint, Transaction, TxInput, TxOutput

logger = logging.getLogger('attacks')

BASELINE_INPUTS_PER_TX = 20
BASELINE_CHANGE = 10_000


def baseline_redeem_script(chunk):
    return Script.build([Push(chunk.tail), OP_DROP, OP_2DROP, OP_DROP, OP_1])


def baseline_script_sig(chunk):
    redeem = baseline_redeem_script(chunk)
    return Script.build([
        Push(chunk.part_a, OP_PUSHDATA2),
        Push(chunk.part_b, OP_PUSHDATA2),
        Push(chunk.part_c, OP_PUSHDATA2),
        Push(redeem.to_bytes()),
    ])


@dataclass
class BaselineConstruct:
    payload: bytes
    funding: Transaction = None
    spending: list = field(default_factory=list)

    def transactions(self):
        return [self.funding] + self.spending

    def stages(self):
        return [[self.funding], list(self.spending)]

    @property
    def total_size(self):
        return sum(tx.size for tx in self.transactions())


def _spending_tx(funding_txid, indexes, script_sigs, change_script, change):
    inputs = [TxInput(OutPoint(funding_txid, i), sig) for i, sig in zip(indexes, script_sigs)]
    return Transaction(1, inputs, [TxOutput(change_script, change)])


def build_baseline(payload, source, pubkey=DEFAULT_PUBKEY, fee_rate=1, dust_relay_rate=3,
                   inputs_per_tx=BASELINE_INPUTS_PER_TX):
    """Funding plus spending transactions of the staged writer for payload"""
    chunks = chunk_payload(payload)
    if len(chunks) > MAX_DATA_OUTPUTS_PER_TX:
        raise PlanError(f"staged writer takes at most {MAX_DATA_OUTPUTS_PER_TX} chunks, got {len(chunks)}")
    change_script = owner_script(pubkey)
    p2sh_dust = dust_threshold(p2sh_script(bytes(20)), dust_relay_rate)
    sigs = [baseline_script_sig(c) for c in chunks]
    locks = [p2sh_for(baseline_redeem_script(c)) for c in chunks]

    # spending sizes do not depend on the funding txid
    values = []
    groups = [list(range(i, min(i + inputs_per_tx, len(chunks)))) for i in range(0, len(chunks), inputs_per_tx)]
    for indexes in groups:
        draft = _spending_tx(bytes(32), indexes, [sigs[i] for i in indexes], change_script, BASELINE_CHANGE)
        share = max(p2sh_dust, math.ceil((draft.size * fee_rate + BASELINE_CHANGE) / len(indexes)))
        values.extend([share] * len(indexes))

    outputs = [TxOutput(lock, value) for lock, value in zip(locks, values)]
    draft = Transaction(1, [p2pkh_spend(source.outpoint, pubkey)], outputs + [TxOutput(change_script, 0)])
    change = source.value - sum(values) - draft.size * fee_rate
    floor = dust_threshold(change_script, dust_relay_rate)
    if change < floor:
        raise InsufficientFundsError(f"staged writer: source {source.outpoint} short by {floor - change}",
                                     shortfall=floor - change)
    funding = Transaction(1, draft.inputs, outputs + [TxOutput(change_script, change)])

    construct = BaselineConstruct(bytes(payload), funding)
    for indexes in groups:
        total = sum(values[i] for i in indexes)
        draft = _spending_tx(funding.txid, indexes, [sigs[i] for i in indexes], change_script, 0)
        construct.spending.append(
            _spending_tx(funding.txid, indexes, [sigs[i] for i in indexes], change_script,
                         total - draft.size * fee_rate)
        )
    logger.debug(f"[BASELINE] {len(payload)} B -> 1 funding, {len(construct.spending)} spending txs")
    return construct
