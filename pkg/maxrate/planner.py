"""
Construct arithmetic: chunk, transaction and epoch counts, per-output values,
sizes and fees of a max-rate write, plus the throughput, goodput and cost
estimators.
"""
import bisect
import logging
import math
from dataclasses import dataclass, field

from txcodec.script import p2pkh_script, p2sh_script
from txcodec.standardness import dust_threshold
from txcodec.transaction import input_size, output_size
from txcodec.varint import varint_size

from .exceptions import PlanError
from .scripts import PAYLOAD_PER_SCRIPT, chunk_sizes, data_input_size

logger = logging.getLogger('maxrate')

MAX_INPUTS_PER_SPENDING_TX = 59
MAX_DATA_OUTPUTS_PER_TX = 2_936
MAX_STANDARD_TX_SIZE = 100_000

# P2PKH input with an opaque 72-byte signature and a 33-byte pubkey
SOURCE_INPUT_SIZE = input_size(1 + 72 + 1 + 33)
P2SH_OUTPUT_SIZE = output_size(23)
P2PKH_OUTPUT_SIZE = output_size(25)
MARKER_OUTPUT_SIZE = output_size(25)


@dataclass(frozen=True)
class CostModel:
    fee_rate: int = 1
    epoch_seconds: float = 150
    upload_bandwidth: float = 125_000_000
    max_funding_outputs_per_block: int = 29_370
    payload_per_script: int = PAYLOAD_PER_SCRIPT
    funding_outputs_per_tx: int = 2_937
    inputs_per_tx: float = 59.5  # 102,400 / 1,720
    max_tx_size: int = 100_000
    dust_relay_rate: int = 3

    def __post_init__(self):
        if self.fee_rate < 1:
            raise PlanError(f"fee rate must be at least 1 base unit per byte, got {self.fee_rate}")
        if self.epoch_seconds <= 0 or self.upload_bandwidth <= 0:
            raise PlanError("epoch length and bandwidth must be positive")
        if self.max_funding_outputs_per_block < 1:
            raise PlanError("a block must hold at least one funding output")

    def p2sh_dust(self):
        return dust_threshold(p2sh_script(bytes(20)), self.dust_relay_rate)

    def p2pkh_dust(self):
        return dust_threshold(p2pkh_script(bytes(20)), self.dust_relay_rate)


def spending_tx_size(input_sizes):
    n = len(input_sizes)
    return 4 + varint_size(n) + sum(input_sizes) + varint_size(1) + MARKER_OUTPUT_SIZE + 4


def funding_tx_size(n_data_outputs):
    n_out = n_data_outputs + 1
    return 4 + varint_size(1) + SOURCE_INPUT_SIZE + varint_size(n_out) + \
        n_data_outputs * P2SH_OUTPUT_SIZE + P2PKH_OUTPUT_SIZE + 4


def preparing_tx_size(n_children):
    n_out = n_children + 1
    return 4 + varint_size(1) + SOURCE_INPUT_SIZE + varint_size(n_out) + n_out * P2PKH_OUTPUT_SIZE + 4


def group(items, size):
    return [items[i:i + size] for i in range(0, len(items), size)]


def spending_input_values(input_sizes, model):
    """
    Value each funding output must carry so its spending transaction pays
    exactly the minimum fee: the input's own bytes plus a share of the
    transaction overhead, the remainder going to the first inputs. Values
    below the P2SH dust threshold are raised to it.
    """
    overhead = spending_tx_size(input_sizes) - sum(input_sizes)
    share, remainder = divmod(overhead * model.fee_rate, len(input_sizes))
    floor = model.p2sh_dust()
    values = []
    for i, size in enumerate(input_sizes):
        value = size * model.fee_rate + share + (1 if i < remainder else 0)
        values.append(max(value, floor))
    return values


@dataclass(frozen=True)
class ConstructPlan:
    payload_size: int
    chunk_count: int
    spending_tx_count: int
    inputs_per_spending_tx: tuple
    funding_tx_count: int
    funding_outputs: tuple
    preparing_tree_depth: int
    preparing_levels: tuple
    epochs: int
    total_fee: int
    construct_total_size: int
    model: CostModel = field(default_factory=CostModel)
    chunk_payload_sizes: tuple = ()
    input_values: tuple = ()
    spending_sizes: tuple = ()
    funding_sizes: tuple = ()
    funding_requirements: tuple = ()
    preparing_sizes: tuple = ()
    preparing_requirements: tuple = ()
    dust_surcharge: int = 0
    funding_lanes: int = 1
    funding_offsets: tuple = (0,)

    @property
    def source_requirements(self):
        """Values the writer's source coins must hold, one per root"""
        if self.preparing_requirements:
            return self.preparing_requirements[0]
        return self.funding_requirements[:self.funding_lanes]

    @property
    def required_source_value(self):
        """What the first source output must hold at minimum"""
        return self.source_requirements[0]

    @property
    def funding_epoch_count(self):
        return math.ceil(self.funding_tx_count / self.funding_lanes)

    @property
    def total_tx_count(self):
        return sum(self.preparing_levels) + self.funding_tx_count + self.spending_tx_count

    @property
    def goodput(self):
        return self.payload_size / self.construct_total_size

    def funding_epoch(self, index):
        return self.preparing_tree_depth + index // self.funding_lanes

    def lane_predecessor(self, index):
        """Funding tx whose change funds funding tx index, or None for a lane root"""
        return index - self.funding_lanes if index >= self.funding_lanes else None

    def funding_slot(self, chunk_index):
        """(funding tx index, output index) paying for a chunk"""
        index = bisect.bisect_right(self.funding_offsets, chunk_index) - 1
        return index, chunk_index - self.funding_offsets[index]

    @property
    def spending_epoch(self):
        return self.epochs - 1

    def as_dict(self):
        return {
            'payload_size': self.payload_size,
            'chunk_count': self.chunk_count,
            'spending_tx_count': self.spending_tx_count,
            'inputs_per_spending_tx': list(self.inputs_per_spending_tx),
            'funding_tx_count': self.funding_tx_count,
            'funding_outputs': list(self.funding_outputs),
            'preparing_tree_depth': self.preparing_tree_depth,
            'preparing_levels': list(self.preparing_levels),
            'funding_lanes': self.funding_lanes,
            'funding_epochs': self.funding_epoch_count,
            'epochs': self.epochs,
            'total_fee': self.total_fee,
            'dust_surcharge': self.dust_surcharge,
            'construct_total_size': self.construct_total_size,
            'required_source_value': self.required_source_value,
            'source_requirements': list(self.source_requirements),
            'goodput': self.goodput,
        }


def _tree_levels(leaf_count):
    """Node counts per preparing level, root level first"""
    levels = []
    n = leaf_count
    while n > 1:
        n = math.ceil(n / MAX_DATA_OUTPUTS_PER_TX)
        levels.append(n)
    return tuple(reversed(levels))


def _funding_groups(values, per_epoch):
    """
    Split per-chunk output values into funding transactions: per_epoch
    outputs per epoch, at most 2,936 per transaction. Returns the groups,
    epoch-major, and the number of transactions in the first epoch.
    """
    groups = []
    lanes = 0
    for epoch, batch in enumerate(group(values, per_epoch)):
        txs = group(batch, MAX_DATA_OUTPUTS_PER_TX)
        if epoch == 0:
            lanes = len(txs)
        groups.extend(txs)
    return groups, lanes


def plan_construct(payload_size, model=None, sources=None):
    """
    Lay out a max-rate write of payload_size bytes.

    Spending transactions take 59 inputs each. Each epoch funds up to
    max_funding_outputs_per_block chunks through several funding
    transactions of at most 2,936 data outputs plus change. The funding
    transactions of the first epoch are lane roots; in later epochs each
    one spends the change of the transaction in the same lane one epoch
    earlier.

    Args:
        sources: source coins the writer holds, None for one per lane.
            With fewer coins than lanes, preparing levels of fan-out 2,936
            split the first coin into lane roots, one epoch per level.
    """
    model = model or CostModel()
    if payload_size <= 0:
        raise PlanError(f"payload size must be positive, got {payload_size}")
    if sources is not None and sources < 1:
        raise PlanError(f"a construct needs at least one source coin, got {sources}")

    sizes = chunk_sizes(payload_size)
    chunk_count = len(sizes)
    in_sizes = [data_input_size(s) for s in sizes]

    spending_groups = group(in_sizes, MAX_INPUTS_PER_SPENDING_TX)
    spending_sizes = [spending_tx_size(g) for g in spending_groups]
    input_values = []
    for g in spending_groups:
        input_values.extend(spending_input_values(g, model))
    spending_fee = sum(input_values)
    dust_surcharge = spending_fee - sum(spending_sizes) * model.fee_rate

    funding_groups, lanes = _funding_groups(input_values, model.max_funding_outputs_per_block)
    funding_sizes = [funding_tx_size(len(g)) for g in funding_groups]
    offsets = [0]
    for g in funding_groups[:-1]:
        offsets.append(offsets[-1] + len(g))
    change_floor = model.p2pkh_dust()
    # last lane members first: each change output carries its successor's requirement
    funding_requirements = [0] * len(funding_groups)
    for i in reversed(range(len(funding_groups))):
        successor = i + lanes
        carried = funding_requirements[successor] if successor < len(funding_groups) else change_floor
        funding_requirements[i] = sum(funding_groups[i]) + funding_sizes[i] * model.fee_rate + carried

    levels = _tree_levels(lanes) if sources is not None and sources < lanes else ()
    preparing_sizes = []
    preparing_requirements = []
    child_requirements = funding_requirements[:lanes]
    for _ in levels:
        nodes = group(child_requirements, MAX_DATA_OUTPUTS_PER_TX)
        level_sizes = [preparing_tx_size(len(children)) for children in nodes]
        level_reqs = [sum(children) + size * model.fee_rate + change_floor
                      for children, size in zip(nodes, level_sizes)]
        preparing_sizes.insert(0, tuple(level_sizes))
        preparing_requirements.insert(0, tuple(level_reqs))
        child_requirements = level_reqs

    total_size = sum(spending_sizes) + sum(funding_sizes) + sum(sum(s) for s in preparing_sizes)
    depth = len(levels)
    epochs = depth + math.ceil(len(funding_groups) / lanes) + 1

    plan = ConstructPlan(
        payload_size=payload_size,
        chunk_count=chunk_count,
        spending_tx_count=len(spending_groups),
        inputs_per_spending_tx=tuple(len(g) for g in spending_groups),
        funding_tx_count=len(funding_groups),
        funding_outputs=tuple(len(g) + 1 for g in funding_groups),
        preparing_tree_depth=depth,
        preparing_levels=levels,
        epochs=epochs,
        total_fee=total_size * model.fee_rate + dust_surcharge,
        construct_total_size=total_size,
        model=model,
        chunk_payload_sizes=tuple(sizes),
        input_values=tuple(input_values),
        spending_sizes=tuple(spending_sizes),
        funding_sizes=tuple(funding_sizes),
        funding_requirements=tuple(funding_requirements),
        preparing_sizes=tuple(preparing_sizes),
        preparing_requirements=tuple(preparing_requirements),
        dust_surcharge=dust_surcharge,
        funding_lanes=lanes,
        funding_offsets=tuple(offsets),
    )
    logger.debug(
        f"[PLAN] {payload_size} B -> {chunk_count} chunks, {plan.funding_tx_count} funding "
        f"in {lanes} lanes, {plan.spending_tx_count} spending, depth {depth}, {epochs} epochs"
    )
    return plan


def estimate_throughput(payload_size, model=None):
    """R(N) = N / (w * E + N / B) with E = 1 + N / (p * F), in bytes/sec"""
    model = model or CostModel()
    epochs = 1 + payload_size / (model.payload_per_script * model.max_funding_outputs_per_block)
    return payload_size / (model.epoch_seconds * epochs + payload_size / model.upload_bandwidth)


def throughput_limit(model=None):
    """Value estimate_throughput approaches as the payload grows"""
    model = model or CostModel()
    per_epoch = model.payload_per_script * model.max_funding_outputs_per_block
    return 1 / (model.epoch_seconds / per_epoch + 1 / model.upload_bandwidth)


def estimate_construct_size(payload_size, model=None):
    """S(N) = ts * (N / (p * f) + N / (p * m))"""
    model = model or CostModel()
    p = model.payload_per_script
    return model.max_tx_size * (
        payload_size / (p * model.funding_outputs_per_tx) + payload_size / (p * model.inputs_per_tx)
    )


def estimate_goodput(payload_size, model=None):
    return payload_size / estimate_construct_size(payload_size, model)


def estimate_cost(payload_size, model=None):
    """Fee in base units of the planned construct"""
    return plan_construct(payload_size, model).total_fee
