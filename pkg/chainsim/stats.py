"""
Per-transaction and per-block statistics of simulator runs, utilization
metrics and the per-writer throughput ceiling.
"""
import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger('chainsim')

FINANCIAL = 'financial'
MAX_RATE = 'max-rate'
GiB = 2 ** 30


@dataclass
class TxRecord:
    txid: str
    klass: str
    size: int
    fee: int
    submit_time: float
    role: str = ''
    writer: int = None
    confirm_time: float = None
    height: int = None

    @property
    def fee_rate(self):
        return self.fee / self.size

    @property
    def delay(self):
        if self.confirm_time is None:
            return None
        return self.confirm_time - self.submit_time


@dataclass
class BlockStat:
    height: int
    timestamp: float
    size: int
    tx_count: int
    payload_size: int = 0
    payload_txs: int = 0
    financial_size: int = 0

    @property
    def space_utilization(self):
        return self.payload_size / self.size if self.size else 0.0

    @property
    def txn_utilization(self):
        return self.payload_txs / self.tx_count if self.tx_count else 0.0


@dataclass
class MempoolSample:
    time: float
    count: int
    size: int
    payload_count: int
    payload_size: int


@dataclass
class Utilization:
    space: list
    txn: list
    aggregate_space: float
    aggregate_txn: float


def compute_utilization(blocks, payload_txids):
    """
    Space utilization: bytes of payload-carrying transactions over block
    size. Transaction utilization: payload-carrying transactions over all
    transactions in the block.
    """
    payload_txids = set(payload_txids)
    space, txn = [], []
    payload_bytes = total_bytes = payload_count = total_count = 0
    for block in blocks:
        carried = [e for e in block.entries if e.txid in payload_txids]
        p_bytes = sum(e.size for e in carried)
        space.append(p_bytes / block.total_size if block.entries else 0.0)
        txn.append(len(carried) / len(block.entries) if block.entries else 0.0)
        payload_bytes += p_bytes
        total_bytes += block.total_size
        payload_count += len(carried)
        total_count += len(block.entries)
    return Utilization(
        space=space,
        txn=txn,
        aggregate_space=payload_bytes / total_bytes if total_bytes else 0.0,
        aggregate_txn=payload_count / total_count if total_count else 0.0,
    )


def ks_distance(a, b):
    """Two-sample Kolmogorov-Smirnov statistic"""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if not len(a) or not len(b):
        return 0.0 if len(a) == len(b) else 1.0
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side='right') / len(a)
    cdf_b = np.searchsorted(b, grid, side='right') / len(b)
    return float(np.max(np.abs(cdf_a - cdf_b)))


def writer_throughput_bound(block_stats, writers, epoch_seconds=150, max_block_size=1_000_000):
    """
    A / (w * n): A is the mean block space left after financial
    transactions over the given blocks.
    """
    if not writers or not block_stats:
        return 0.0
    available = np.mean([max_block_size - b.financial_size for b in block_stats])
    return float(available / (epoch_seconds * writers))


def block_size_histogram(block_stats, bins=10, max_block_size=1_000_000):
    """numpy (counts, edges) of block sizes over [0, max_block_size]"""
    sizes = [b.size for b in block_stats]
    return np.histogram(sizes, bins=bins, range=(0, max_block_size))


@dataclass
class SimStats:
    workload: str = ''
    seed: int = 0
    epoch_seconds: float = 150
    max_block_size: int = 1_000_000
    writers: int = 0
    records: dict = field(default_factory=dict)
    blocks: list = field(default_factory=list)
    samples: list = field(default_factory=list)

    def add_record(self, record):
        self.records[record.txid] = record

    def of_class(self, klass):
        return [r for r in self.records.values() if r.klass == klass]

    def delays(self, klass):
        return np.array([r.delay for r in self.of_class(klass) if r.delay is not None], dtype=float)

    def unconfirmed(self, klass):
        return sum(1 for r in self.of_class(klass) if r.confirm_time is None)

    def percentiles(self, klass, q=(50, 90, 99)):
        delays = self.delays(klass)
        if not len(delays):
            return {p: None for p in q}
        return {p: float(v) for p, v in zip(q, np.percentile(delays, q))}

    def peak_mempool(self):
        if not self.samples:
            return MempoolSample(0, 0, 0, 0, 0)
        return max(self.samples, key=lambda s: (s.size, -s.time))

    @property
    def last_confirmation(self):
        times = [r.confirm_time for r in self.of_class(MAX_RATE) if r.confirm_time is not None]
        return max(times) if times else None

    def utilization(self):
        payload = sum(b.payload_size for b in self.blocks)
        size = sum(b.size for b in self.blocks)
        payload_txs = sum(b.payload_txs for b in self.blocks)
        txs = sum(b.tx_count for b in self.blocks)
        return (payload / size if size else 0.0, payload_txs / txs if txs else 0.0)

    def writer_throughput(self):
        """
        (measured, bound) per-writer throughput in bytes/sec, both over the
        blocks from the epoch of the first writer submission to the block
        confirming the last writer transaction.
        """
        writer_records = self.of_class(MAX_RATE)
        if not self.writers or not writer_records or self.last_confirmation is None:
            return 0.0, 0.0
        start = math.floor(min(r.submit_time for r in writer_records) / self.epoch_seconds) * self.epoch_seconds
        end = self.last_confirmation
        window = [b for b in self.blocks if start < b.timestamp <= end]
        written = sum(r.size for r in writer_records if r.confirm_time is not None)
        measured = written / self.writers / (end - start)
        return measured, writer_throughput_bound(window, self.writers, self.epoch_seconds, self.max_block_size)

    def summary(self):
        space, txn = self.utilization()
        peak = self.peak_mempool()
        data = {
            'workload': self.workload,
            'seed': self.seed,
            'writers': self.writers,
            'blocks': len(self.blocks),
            'space_utilization': space,
            'txn_utilization': txn,
            'peak_mempool_bytes': peak.size,
            'peak_mempool_gib': peak.size / GiB,
            'peak_mempool_payload_txs': peak.payload_count,
            'last_confirmation_hours': (self.last_confirmation or 0) / 3600,
        }
        for klass in (FINANCIAL, MAX_RATE):
            delays = self.delays(klass)
            data[klass] = {
                'count': len(self.of_class(klass)),
                'confirmed': int(len(delays)),
                'unconfirmed': self.unconfirmed(klass),
                'mean_delay': float(delays.mean()) if len(delays) else None,
                'std_delay': float(delays.std()) if len(delays) else None,
                'max_delay': float(delays.max()) if len(delays) else None,
                'percentiles': {str(k): v for k, v in self.percentiles(klass).items()},
            }
        return data

    def to_csv(self, tx_file, block_file=None):
        """Write per-transaction rows, and per-block rows when block_file is given"""
        writer = csv.writer(tx_file)
        writer.writerow(['txid', 'class', 'role', 'size', 'fee_rate', 'submit_time', 'confirm_time', 'height'])
        for r in sorted(self.records.values(), key=lambda r: (r.submit_time, r.txid)):
            writer.writerow([
                r.txid, r.klass, r.role, r.size, f'{r.fee_rate:.6f}', f'{r.submit_time:.3f}',
                '' if r.confirm_time is None else f'{r.confirm_time:.3f}',
                '' if r.height is None else r.height,
            ])
        if block_file is not None:
            writer = csv.writer(block_file)
            writer.writerow(['height', 'timestamp', 'size', 'tx_count', 'payload_size', 'payload_txs',
                             'space_utilization', 'txn_utilization'])
            for b in self.blocks:
                writer.writerow([b.height, f'{b.timestamp:.3f}', b.size, b.tx_count, b.payload_size,
                                 b.payload_txs, f'{b.space_utilization:.6f}', f'{b.txn_utilization:.6f}'])
