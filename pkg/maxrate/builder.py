"""
Builders turning a ConstructPlan into transactions: preparing tree,
funding transactions and spending transactions, plus payload extraction.
"""
import hashlib
import logging
import struct
from dataclasses import dataclass, field

from txcodec.hashing import hash160
from txcodec.script import Script, op_return_script, p2pkh_script
from txcodec.transaction import OutPoint, Transaction, TxInput, TxOutput

from .exceptions import ChunkError, InsufficientFundsError, PlanError
from .planner import MAX_DATA_OUTPUTS_PER_TX, MAX_INPUTS_PER_SPENDING_TX, group, plan_construct
from .scripts import build_data_script, chunk_payload, extract_chunk

logger = logging.getLogger('maxrate')

DATA_TAG = b'DATA'
DEFAULT_PUBKEY = b'\x02' + hashlib.sha256(b'maxrate-default-owner').digest()


@dataclass(frozen=True)
class Source:
    """A spendable output that funds a construct"""
    outpoint: OutPoint
    value: int


def opaque_signature(pubkey, outpoint):
    """Stand-in 72-byte signature; signatures are not verified by the simulator"""
    digest = hashlib.sha256(pubkey + outpoint.to_bytes()).digest()
    return b'\x30' + (digest * 3)[:71]


def p2pkh_spend(outpoint, pubkey):
    return TxInput(outpoint, Script.build([opaque_signature(pubkey, outpoint), pubkey]))


def owner_script(pubkey):
    return p2pkh_script(hash160(pubkey))


def data_marker(ordinal, payload_digest):
    """23-byte OP_RET tag identifying a spending transaction of a construct"""
    return DATA_TAG + struct.pack('<I', ordinal)[:3] + payload_digest[:16]


def read_marker(tx):
    """(ordinal, digest prefix) of a spending transaction, or None"""
    for out in tx.outputs:
        data = out.script_pubkey.op_return_data()
        if data and len(data) == 23 and data.startswith(DATA_TAG):
            return int.from_bytes(data[4:7], 'little'), data[7:]
    return None


def _pay(source, outputs, fee, change_script, change_floor, what):
    need = sum(o.value for o in outputs) + fee + change_floor
    if source.value < need:
        shortfall = need - source.value
        raise InsufficientFundsError(
            f"{what}: source {source.outpoint} holds {source.value}, needs {need} (short {shortfall})",
            shortfall=shortfall,
        )
    return list(outputs) + [TxOutput(change_script, source.value - sum(o.value for o in outputs) - fee)]


def build_funding_tx(plan, source, scripts, offset=0, pubkey=DEFAULT_PUBKEY):
    """
    One P2SH output per data script, each paying what its future spending
    input owes, then a change output back to the owner.

    Args:
        plan: ConstructPlan the scripts belong to
        source: Source that funds this transaction
        scripts: DataScript list, at most 2,936
        offset: index of scripts[0] among all chunks of the plan
        pubkey: owner key for the source input and change output
    """
    if not scripts or len(scripts) > MAX_DATA_OUTPUTS_PER_TX:
        raise PlanError(f"funding tx takes 1..{MAX_DATA_OUTPUTS_PER_TX} scripts, got {len(scripts)}")
    if offset + len(scripts) > plan.chunk_count:
        raise PlanError("scripts exceed the plan's chunk count")
    index, position = plan.funding_slot(offset)
    if position or len(scripts) != plan.funding_outputs[index] - 1:
        raise PlanError(f"scripts {offset}..{offset + len(scripts) - 1} do not match a planned funding tx")
    values = plan.input_values[offset:offset + len(scripts)]
    outputs = [TxOutput(ds.script_pubkey, value) for ds, value in zip(scripts, values)]
    fee = plan.funding_sizes[index] * plan.model.fee_rate
    outputs = _pay(source, outputs, fee, owner_script(pubkey), plan.model.p2pkh_dust(), 'funding tx')
    tx = Transaction(1, [p2pkh_spend(source.outpoint, pubkey)], outputs)
    if tx.size != plan.funding_sizes[index]:
        raise PlanError(f"funding tx is {tx.size} bytes, plan expected {plan.funding_sizes[index]}")
    return tx


def build_spending_txs(plan, funding_txids, scripts, payload_digest=None):
    """
    Spend the funding outputs 59 at a time. Each transaction has a single
    zero-value OP_RET output carrying the construct's DATA marker.

    Args:
        funding_txids: raw txid, or list of raw txids in funding order
    """
    if isinstance(funding_txids, (bytes, bytearray)):
        funding_txids = [bytes(funding_txids)]
    if len(scripts) != plan.chunk_count:
        raise PlanError(f"plan has {plan.chunk_count} chunks, got {len(scripts)} scripts")
    if len(funding_txids) != plan.funding_tx_count:
        raise PlanError(f"plan has {plan.funding_tx_count} funding txs, got {len(funding_txids)} txids")
    if payload_digest is None:
        payload_digest = hashlib.sha256(b''.join(ds.chunk.payload for ds in scripts)).digest()
    txs = []
    for ordinal, batch in enumerate(group(list(enumerate(scripts)), MAX_INPUTS_PER_SPENDING_TX)):
        inputs = []
        for i, ds in batch:
            if ds.chunk.index != i:
                raise PlanError(f"script {i} carries chunk {ds.chunk.index}")
            funding, vout = plan.funding_slot(i)
            inputs.append(TxInput(OutPoint(funding_txids[funding], vout), ds.script_sig))
        marker = op_return_script(data_marker(ordinal, payload_digest))
        txs.append(Transaction(1, inputs, [TxOutput(marker, 0)]))
    return txs


def build_preparing_tree(plan, root_source, pubkey=DEFAULT_PUBKEY):
    """
    Levels of preparing transactions, root level first. Every node pays its
    children's requirements as P2PKH outputs to the owner, change last.

    Returns:
        tuple: (levels, leaf_sources) where leaf_sources fund the plan's
        lane roots in order
    """
    if plan.preparing_tree_depth < 1:
        raise PlanError("plan has no preparing tree")
    change = owner_script(pubkey)
    floor = plan.model.p2pkh_dust()
    levels = []
    sources = [root_source]
    depth = plan.preparing_tree_depth
    lane_roots = plan.funding_requirements[:plan.funding_lanes]
    for level in range(depth):
        child_reqs = plan.preparing_requirements[level + 1] if level + 1 < depth else lane_roots
        txs = []
        next_sources = []
        for node, (source, reqs) in enumerate(zip(sources, group(list(child_reqs), MAX_DATA_OUTPUTS_PER_TX))):
            fee = plan.preparing_sizes[level][node] * plan.model.fee_rate
            outputs = _pay(source, [TxOutput(change, r) for r in reqs], fee, change, floor,
                           f'preparing tx level {level} node {node}')
            tx = Transaction(1, [p2pkh_spend(source.outpoint, pubkey)], outputs)
            txs.append(tx)
            next_sources.extend(Source(OutPoint(tx.txid, j), r) for j, r in enumerate(reqs))
        levels.append(txs)
        sources = next_sources
    logger.debug(f"[TREE] built {depth} preparing levels, {len(sources)} leaf sources")
    return levels, sources


@dataclass
class Construct:
    """All transactions of one max-rate write, grouped by role"""
    plan: object
    payload: bytes
    scripts: list
    preparing: list = field(default_factory=list)
    funding: list = field(default_factory=list)
    spending: list = field(default_factory=list)
    source: Source = None
    pubkey: bytes = DEFAULT_PUBKEY

    @property
    def root(self):
        return self.preparing[0][0] if self.preparing else self.funding[0]

    @property
    def payload_digest(self):
        return hashlib.sha256(self.payload).digest()

    def transactions(self):
        txs = [tx for level in self.preparing for tx in level]
        return txs + self.funding + self.spending

    def stages(self):
        """Transaction groups separated by one confirmation each"""
        stages = [list(level) for level in self.preparing]
        stages.extend(group(self.funding, self.plan.funding_lanes))
        stages.append(list(self.spending))
        return stages

    @property
    def total_size(self):
        return sum(tx.size for tx in self.transactions())

    @property
    def goodput(self):
        return len(self.payload) / self.total_size


def build_construct(payload, source, model=None, pubkey=DEFAULT_PUBKEY):
    """
    Plan and build every transaction needed to store payload.

    source is one Source or a list of them. With fewer sources than funding
    lanes the first one is split by a preparing tree.
    """
    sources = [source] if isinstance(source, Source) else list(source)
    if not sources:
        raise PlanError("a construct needs at least one source")
    plan = plan_construct(len(payload), model, sources=len(sources))
    scripts = [build_data_script(chunk) for chunk in chunk_payload(payload)]
    construct = Construct(plan, bytes(payload), scripts, source=sources[0], pubkey=pubkey)
    if plan.preparing_tree_depth:
        construct.preparing, lane_sources = build_preparing_tree(plan, sources[0], pubkey)
    else:
        lane_sources = sources[:plan.funding_lanes]
    ends = plan.funding_offsets[1:] + (plan.chunk_count,)
    for index, (start, end) in enumerate(zip(plan.funding_offsets, ends)):
        previous = plan.lane_predecessor(index)
        if previous is None:
            lane = lane_sources[index]
        else:
            carrier = construct.funding[previous]
            change = len(carrier.outputs) - 1
            lane = Source(OutPoint(carrier.txid, change), carrier.outputs[change].value)
        construct.funding.append(build_funding_tx(plan, lane, scripts[start:end], offset=start, pubkey=pubkey))
    construct.spending = build_spending_txs(
        plan, [tx.txid for tx in construct.funding], scripts, construct.payload_digest
    )
    logger.info(
        f"✓ Built construct for {len(payload)} B: {len(construct.transactions())} txs, "
        f"{construct.total_size} B, goodput {construct.goodput:.3f}"
    )
    return construct


def extract_payload(spending_txs):
    """Reassemble a payload from spending transactions, ordered by marker"""
    ordered = []
    for tx in spending_txs:
        marker = read_marker(tx)
        if marker is None:
            raise ChunkError(f"transaction {tx.txid_hex} has no DATA marker")
        ordered.append((marker[0], tx))
    ordered.sort(key=lambda item: item[0])
    return b''.join(extract_chunk(txin.script_sig) for _, tx in ordered for txin in tx.inputs)
