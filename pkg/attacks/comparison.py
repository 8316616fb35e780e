"""
Side-by-side metrics of data insertion techniques, measured on really
built transactions: fake P2PKH addresses, one OP_RET per transaction, the
unprotected staged writer and max-rate constructs.
"""
import logging
from dataclasses import asdict, dataclass

import numpy as np

from maxrate.builder import Source, build_construct, owner_script, p2pkh_spend
from maxrate.planner import MAX_STANDARD_TX_SIZE, CostModel
from txcodec.script import op_return_script, p2pkh_script
from txcodec.standardness import MAX_OP_RETURN_DATA, dust_threshold
from txcodec.transaction import OutPoint, Transaction, TxOutput

from .baseline import build_baseline
from .harness import DEFAULT_OWNER, forge_input_modification, forge_output_modification, sample_edits

logger = logging.getLogger('attacks')

TECHNIQUES = ('p2pkh-address', 'op-return', 'staged-baseline', 'max-rate')
ADDRESS_BYTES = 20
SOURCE_OUTPOINT = OutPoint(b'\x11' * 32, 0)


@dataclass(frozen=True)
class TechniqueMetrics:
    name: str
    payload_size: int
    payload_per_tx: int
    transactions: int
    total_bytes: int
    goodput: float
    cost: int
    cost_per_byte: float
    output_mod_safe: bool
    input_mod_safe: bool

    def as_dict(self):
        return asdict(self)


def _chained(payload, source, model, carry, outputs_for):
    """
    Transactions each spending the previous change: outputs_for(piece)
    gives the data outputs, carry bytes of payload per transaction.
    """
    change_script = owner_script(DEFAULT_OWNER)
    txs = []
    outpoint, value = source.outpoint, source.value
    for offset in range(0, len(payload), carry):
        data_outputs = outputs_for(payload[offset:offset + carry])
        inputs = [p2pkh_spend(outpoint, DEFAULT_OWNER)]
        draft = Transaction(1, inputs, data_outputs + [TxOutput(change_script, 0)])
        value -= sum(o.value for o in data_outputs) + draft.size * model.fee_rate
        tx = Transaction(1, inputs, data_outputs + [TxOutput(change_script, value)])
        txs.append(tx)
        outpoint = OutPoint(tx.txid, len(tx.outputs) - 1)
    return txs


def build_address_writer(payload, source, model):
    """20 payload bytes per fake P2PKH output, each burning a dust value"""
    dust = dust_threshold(p2pkh_script(bytes(20)), model.dust_relay_rate)
    per_tx = (MAX_STANDARD_TX_SIZE - 200) // 34

    def outputs(piece):
        return [TxOutput(p2pkh_script(piece[i:i + ADDRESS_BYTES].ljust(ADDRESS_BYTES, b'\x00')), dust)
                for i in range(0, len(piece), ADDRESS_BYTES)]
    return _chained(payload, source, model, per_tx * ADDRESS_BYTES, outputs), per_tx * ADDRESS_BYTES


def build_op_return_writer(payload, source, model):
    def outputs(piece):
        return [TxOutput(op_return_script(piece), 0)]
    return _chained(payload, source, model, MAX_OP_RETURN_DATA, outputs), MAX_OP_RETURN_DATA


def technique_transactions(name, payload, source, model):
    """(transactions, payload_per_tx, sample data transaction)"""
    if name == 'p2pkh-address':
        txs, per_tx = build_address_writer(payload, source, model)
        return txs, per_tx, txs[0]
    if name == 'op-return':
        txs, per_tx = build_op_return_writer(payload, source, model)
        return txs, per_tx, txs[0]
    if name == 'staged-baseline':
        construct = build_baseline(payload, source, DEFAULT_OWNER, model.fee_rate, model.dust_relay_rate)
        per_tx = max(len(tx.inputs) for tx in construct.spending) * model.payload_per_script
        return construct.transactions(), per_tx, construct.spending[0]
    if name == 'max-rate':
        construct = build_construct(payload, source, model, DEFAULT_OWNER)
        per_tx = max(construct.plan.inputs_per_spending_tx) * model.payload_per_script
        return construct.transactions(), per_tx, construct.spending[0]
    raise ValueError(f"unknown technique {name!r}; choose from {', '.join(TECHNIQUES)}")


def _outputs_by_outpoint(txs, source, source_output):
    known = {source.outpoint: source_output}
    for tx in txs:
        for i, out in enumerate(tx.outputs):
            known[OutPoint(tx.txid, i)] = out
    return known


def measure(name, payload, model=None, mutations=64, seed=0):
    model = model or CostModel()
    source_output = TxOutput(owner_script(DEFAULT_OWNER), 100 * len(payload) + 100_000_000)
    source = Source(SOURCE_OUTPOINT, source_output.value)
    txs, per_tx, sample = technique_transactions(name, payload, source, model)

    known = _outputs_by_outpoint(txs, source, source_output)
    spent_all = {txin.outpoint for tx in txs for txin in tx.inputs}
    owner = owner_script(DEFAULT_OWNER)
    returned = sum(out.value for op, out in known.items()
                   if op not in spent_all and op != source.outpoint and out.script_pubkey == owner)
    cost = source.value - returned
    total_bytes = sum(tx.size for tx in txs)

    spent = {txin.outpoint: known[txin.outpoint] for txin in sample.inputs}
    rebind = forge_output_modification(sample, spent, min_fee_rate=model.fee_rate,
                                       dust_relay_rate=model.dust_relay_rate)
    edits = sample_edits(sample, mutations, seed)
    forgeries = [forge_input_modification(sample, spent, e, model.fee_rate, model.dust_relay_rate) for e in edits]

    metrics = TechniqueMetrics(
        name=name,
        payload_size=len(payload),
        payload_per_tx=per_tx,
        transactions=len(txs),
        total_bytes=total_bytes,
        goodput=len(payload) / total_bytes,
        cost=cost,
        cost_per_byte=cost / len(payload),
        output_mod_safe=not rebind.standard,
        input_mod_safe=not any(f.standard for f in forgeries),
    )
    logger.debug(f"[COMPARE] {name}: {len(txs)} txs, goodput {metrics.goodput:.3f}, cost {cost}")
    return metrics


def compare_techniques(payload_size, model=None, seed=0, mutations=64):
    """TechniqueMetrics for every technique writing the same random payload"""
    payload = np.random.default_rng([seed, 13]).bytes(payload_size)
    results = [measure(name, payload, model, mutations, seed) for name in TECHNIQUES]
    best = max(results, key=lambda m: m.goodput)
    logger.info(f"✓ Compared {len(results)} techniques on {payload_size} B; best goodput {best.name} "
                f"({best.goodput:.3f})")
    return results
