"""
Discrete-event replay of a workload against the mempool and a fee-rate
greedy miner.

Transactions are synthetic size/fee records: writer constructs are laid out
by the max-rate planner (or read from a manifest), financial traffic comes
from the workload's trace. One block is mined per epoch; everything that
arrives at or before the block time is eligible for that block.
"""
import heapq
import logging
import time
from dataclasses import dataclass

from maxrate.manifest import load_manifest
from maxrate.planner import CostModel, plan_construct
from txcodec.transaction import OutPoint
from txcodec.varint import varint_size

from .chain import BLOCK_HEADER_SIZE
from .exceptions import WorkloadError
from .mempool import Mempool, MempoolEntry
from .stats import FINANCIAL, MAX_RATE, BlockStat, MempoolSample, SimStats, TxRecord
from .workload import BLOCK_STREAM

logger = logging.getLogger('chainsim')


@dataclass(frozen=True)
class StagedTx:
    role: str
    size: int
    fee: int


def plan_stages(workload):
    """Stages of one planner-built writer construct, each a list of StagedTx"""
    model = CostModel(fee_rate=workload.fee_rate, epoch_seconds=workload.epoch_seconds)
    plan = plan_construct(workload.writer_payload, model)
    rate = workload.fee_rate
    spending = []
    offset = 0
    for size, count in zip(plan.spending_sizes, plan.inputs_per_spending_tx):
        spending.append(StagedTx('spending', size, sum(plan.input_values[offset:offset + count])))
        offset += count
    if workload.prefunded:
        return [spending]
    stages = [[StagedTx('preparing', s, s * rate) for s in level] for level in plan.preparing_sizes]
    funding = [StagedTx('funding', s, s * rate) for s in plan.funding_sizes]
    lanes = plan.funding_lanes
    stages.extend(funding[i:i + lanes] for i in range(0, len(funding), lanes))
    stages.append(spending)
    return stages


def manifest_stages(path):
    """Stages of a built construct read from its manifest; fees from the spent values"""
    manifest = load_manifest(path)
    values = {}
    if manifest.source_outpoint is not None:
        values[manifest.source_outpoint] = manifest.source_value
    for tx in manifest.transactions:
        for i, out in enumerate(tx.outputs):
            values[OutPoint(tx.txid, i)] = out.value
    stages = []
    for (role, epoch, tx) in manifest.entries:
        while len(stages) <= epoch:
            stages.append([])
        try:
            spent = sum(values[txin.outpoint] for txin in tx.inputs)
        except KeyError as e:
            raise WorkloadError(f"manifest {path} spends an output it does not describe: {e}") from e
        stages[epoch].append(StagedTx(role, tx.size, spent - tx.total_out()))
    return [s for s in stages if s]


class _Writer:
    def __init__(self, index, stages, start):
        self.index = index
        self.stages = stages
        self.start = start
        self.stage = 0
        self.outstanding = 0


class Simulator:
    def __init__(self, workload, progress=None):
        self.workload = workload
        self.progress = progress
        self.mempool = Mempool()
        self.stats = SimStats(
            workload=workload.name,
            seed=workload.seed,
            epoch_seconds=workload.epoch_seconds,
            max_block_size=workload.max_block_size,
            writers=workload.writers + len(workload.manifests),
        )
        self.time = 0.0
        self.height = 0
        self._arrivals = []
        self._seq = 0
        self._writers = {}
        self._block_rng = workload.rng(BLOCK_STREAM)

    def _push(self, t, entry):
        self._seq += 1
        entry.seq = self._seq
        heapq.heappush(self._arrivals, (t, self._seq, entry))

    def _schedule_stage(self, writer, t):
        stage = writer.stages[writer.stage]
        writer.outstanding = len(stage)
        for k, staged in enumerate(stage):
            txid = f'w{writer.index}-{writer.stage}-{k}'
            self.stats.add_record(TxRecord(txid, MAX_RATE, staged.size, staged.fee, t,
                                           role=staged.role, writer=writer.index))
            self._push(t, MempoolEntry(txid, staged.size, staged.fee, t, klass=MAX_RATE))

    def _load(self):
        workload = self.workload
        for i, ftx in enumerate(workload.financial_trace()):
            txid = f'f{i}'
            self.stats.add_record(TxRecord(txid, FINANCIAL, ftx.size, ftx.fee, ftx.time))
            self._push(ftx.time, MempoolEntry(txid, ftx.size, ftx.fee, ftx.time, klass=FINANCIAL))
        if workload.writers:
            stages = plan_stages(workload)
            for i, start in enumerate(workload.writer_starts()):
                self._writers[i] = _Writer(i, stages, float(start))
        for j, item in enumerate(workload.manifests):
            index = workload.writers + j
            self._writers[index] = _Writer(index, manifest_stages(item.path), float(item.start))
        for writer in self._writers.values():
            self._schedule_stage(writer, writer.start)
        logger.info(f"[SIM] {workload.name}: {len(self.stats.records)} txs scheduled, "
                    f"{len(self._writers)} writers")

    def _next_block_time(self):
        if self.workload.exponential_blocks:
            return self.time + float(self._block_rng.exponential(self.workload.epoch_seconds))
        return self.time + self.workload.epoch_seconds

    def _done(self, epochs):
        if self.height >= self.workload.max_epochs:
            if epochs is None and (self._arrivals or len(self.mempool)):
                logger.warning(f"✗ Stopped at the {self.workload.max_epochs} epoch cap with "
                               f"{len(self.mempool) + len(self._arrivals)} txs outstanding")
            return True
        if epochs is not None:
            return self.height >= epochs
        return not self._arrivals and not len(self.mempool)

    def step(self):
        """Mine one block and return its BlockStat"""
        t = self._next_block_time()
        while self._arrivals and self._arrivals[0][0] <= t:
            _, _, entry = heapq.heappop(self._arrivals)
            self.mempool.add(entry)
        self.stats.samples.append(MempoolSample(
            time=t,
            count=len(self.mempool),
            size=self.mempool.total_size,
            payload_count=sum(1 for e in self.mempool.entries.values() if e.klass == MAX_RATE),
            payload_size=sum(e.size for e in self.mempool.entries.values() if e.klass == MAX_RATE),
        ))
        room = self.workload.max_block_size - BLOCK_HEADER_SIZE - 3
        selected = self.mempool.block_template(room)
        self.mempool.remove([e.txid for e in selected])

        finished = []
        for entry in selected:
            record = self.stats.records[entry.txid]
            record.confirm_time = t
            record.height = self.height
            if record.writer is not None:
                writer = self._writers[record.writer]
                writer.outstanding -= 1
                if not writer.outstanding:
                    finished.append(writer)
        for writer in finished:
            writer.stage += 1
            if writer.stage < len(writer.stages):
                self._schedule_stage(writer, t)

        payload = [e for e in selected if e.klass == MAX_RATE]
        block = BlockStat(
            height=self.height,
            timestamp=t,
            size=BLOCK_HEADER_SIZE + varint_size(len(selected)) + sum(e.size for e in selected),
            tx_count=len(selected),
            payload_size=sum(e.size for e in payload),
            payload_txs=len(payload),
            financial_size=sum(e.size for e in selected if e.klass == FINANCIAL),
        )
        self.stats.blocks.append(block)
        self.time = t
        self.height += 1
        return block

    def run(self, epochs=None):
        started = time.monotonic()
        self._load()
        while not self._done(epochs):
            self.step()
            if self.progress:
                self.progress(self.height, epochs)
        space, txn = self.stats.utilization()
        logger.info(
            f"✓ [SIM] {self.workload.name}: {self.height} blocks, {len(self.mempool)} left in mempool, "
            f"space {space:.3f}, txn {txn:.3f} in {time.monotonic() - started:.1f}s"
        )
        return self.stats


def run(workload, epochs=None, progress=None):
    """
    Replay workload and return SimStats. epochs defaults to the workload's
    own count; without either the run lasts until the trace is drained.
    """
    epochs = workload.epochs if epochs is None else epochs
    return Simulator(workload, progress).run(epochs)
