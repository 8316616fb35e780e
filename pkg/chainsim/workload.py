"""
Workload descriptions for simulator runs: max-rate writers plus a synthetic
financial transaction trace. Every random draw comes from a numpy Generator
seeded from (seed, stream) so the financial trace does not depend on the
number of writers.
"""
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .exceptions import WorkloadError

logger = logging.getLogger('chainsim')

FINANCIAL_STREAM = 1
WRITER_STREAM = 2
BLOCK_STREAM = 3
MIN_FINANCIAL_SIZE = 110
MAX_FINANCIAL_SIZE = 100_000
HOUR = 3600
MiB = 2 ** 20


@dataclass(frozen=True)
class FinancialTx:
    time: float
    size: int
    fee_rate: int

    @property
    def fee(self):
        return self.size * self.fee_rate


@dataclass(frozen=True)
class FinancialTraceSpec:
    """
    Synthetic financial traffic. Sizes are lognormal around median_size;
    fee rates are drawn from fee_rates, except min_fee_count transactions
    paying the 1 base unit/byte minimum.
    """
    rate_per_epoch: float = 100
    median_size: float = 350
    size_sigma: float = 0.5
    fee_rates: tuple = (2, 5, 10, 20, 50, 100, 200)
    min_fee_count: int = 0
    arrival: str = 'poisson'
    duration: float = 4 * HOUR

    def __post_init__(self):
        object.__setattr__(self, 'fee_rates', tuple(self.fee_rates))
        if self.rate_per_epoch < 0 or self.duration < 0:
            raise WorkloadError("financial rate and duration must not be negative")
        if self.arrival not in ('poisson', 'uniform'):
            raise WorkloadError(f"unknown arrival process {self.arrival!r}")
        if not self.fee_rates or min(self.fee_rates) < 1:
            raise WorkloadError("financial fee rates must be at least 1")
        if self.median_size <= 0 or self.size_sigma < 0:
            raise WorkloadError("financial size distribution is invalid")

    def arrival_times(self, rng, epoch_seconds, horizon):
        if not self.rate_per_epoch:
            return np.empty(0)
        gap = epoch_seconds / self.rate_per_epoch
        if self.arrival == 'uniform':
            count = max(0, math.ceil(horizon / gap - 0.5))
            return (np.arange(count) + 0.5) * gap
        times = []
        t = 0.0
        while True:
            # draw in batches so the stream does not depend on the horizon
            draws = np.cumsum(rng.exponential(gap, 1024)) + t
            inside = draws[draws < horizon]
            times.append(inside)
            if len(inside) < len(draws):
                break
            t = draws[-1]
        return np.concatenate(times)

    def generate(self, rng, epoch_seconds=150, horizon=None, multiplier=1):
        """
        Returns:
            list: FinancialTx sorted by arrival time
        """
        horizon = self.duration if horizon is None else min(horizon, self.duration)
        times = self.arrival_times(rng, epoch_seconds, horizon)
        n = len(times)
        sizes = np.clip(
            np.rint(rng.lognormal(math.log(self.median_size), self.size_sigma, n)),
            MIN_FINANCIAL_SIZE, MAX_FINANCIAL_SIZE,
        ).astype(int)
        rates = rng.choice(np.array(self.fee_rates), n)
        if self.min_fee_count and n:
            rates[rng.choice(n, min(self.min_fee_count, n), replace=False)] = 1
        if multiplier > 1 and n:
            copies = rng.uniform(0, horizon, (multiplier - 1) * n)
            times = np.concatenate([times, copies])
            sizes = np.concatenate([sizes] + [sizes] * (multiplier - 1))
            rates = np.concatenate([rates] + [rates] * (multiplier - 1))
        order = np.argsort(times, kind='stable')
        return [FinancialTx(float(times[i]), int(sizes[i]), int(rates[i])) for i in order]


@dataclass(frozen=True)
class ManifestWriter:
    path: str
    start: float = 0.0


@dataclass(frozen=True)
class WorkloadSpec:
    name: str = 'custom'
    writers: int = 0
    writer_payload: int = 380_005
    write_window: float = 4 * HOUR
    prefunded: bool = True
    financial: FinancialTraceSpec = field(default_factory=FinancialTraceSpec)
    financial_multiplier: int = 1
    epochs: int = None
    epoch_seconds: float = 150
    seed: int = 0
    max_block_size: int = 1_000_000
    exponential_blocks: bool = False
    fee_rate: int = 1
    manifests: tuple = ()
    max_epochs: int = 10_000

    def __post_init__(self):
        object.__setattr__(self, 'manifests', tuple(
            m if isinstance(m, ManifestWriter) else ManifestWriter(**m) for m in self.manifests
        ))
        if self.writers < 0:
            raise WorkloadError(f"writer count must not be negative, got {self.writers}")
        if self.writer_payload <= 0:
            raise WorkloadError("writer payload must be positive")
        if self.write_window < 0 or self.epoch_seconds <= 0:
            raise WorkloadError("write window and epoch length must be positive")
        if not 1 <= self.financial_multiplier <= 10:
            raise WorkloadError(f"financial multiplier must be in 1..10, got {self.financial_multiplier}")
        if self.epochs is not None and self.epochs < 0:
            raise WorkloadError("epoch count must not be negative")
        if self.max_block_size < 1_000 or self.fee_rate < 1:
            raise WorkloadError("block size or fee rate is too small")

    @property
    def horizon(self):
        if self.epochs is not None:
            return self.epochs * self.epoch_seconds
        return self.max_epochs * self.epoch_seconds

    def rng(self, stream):
        return np.random.default_rng([self.seed, stream])

    def financial_trace(self):
        return self.financial.generate(self.rng(FINANCIAL_STREAM), self.epoch_seconds,
                                       self.horizon, self.financial_multiplier)

    def writer_starts(self):
        if not self.write_window:
            return np.zeros(self.writers)
        return np.sort(self.rng(WRITER_STREAM).uniform(0, self.write_window, self.writers))

    def with_overrides(self, **changes):
        financial = changes.pop('financial', None)
        spec = replace(self, **changes)
        if financial is not None:
            if isinstance(financial, dict):
                financial = replace(self.financial, **financial)
            spec = replace(spec, financial=financial)
        return spec

    def to_dict(self):
        data = asdict(self)
        data['financial']['fee_rates'] = list(self.financial.fee_rates)
        data['manifests'] = [asdict(m) for m in self.manifests]
        return data

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise WorkloadError("workload must be a JSON object")
        changes = dict(data)
        preset_name = changes.pop('preset', None)
        try:
            base = preset(preset_name) if preset_name else cls()
            return base.with_overrides(**changes)
        except TypeError as e:
            raise WorkloadError(f"unknown workload field: {e}") from e


def load_workload(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise WorkloadError(f"workload file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise WorkloadError(f"workload is not valid JSON: {e}") from e
    spec = WorkloadSpec.from_dict(data)
    logger.debug(f"Loaded workload {spec.name} from {path}: {spec.writers} writers")
    return spec


PRESETS = {
    # writers x 400KB in a four hour window over a 60 hour financial trace
    'scaling': dict(
        writers=359, writer_payload=380_005, write_window=4 * HOUR, prefunded=True,
        financial=FinancialTraceSpec(duration=60 * HOUR), max_block_size=MiB,
    ),
    # the 359-writer run under 3x..10x financial load over 36 hours
    'multiplier': dict(
        writers=359, writer_payload=380_005, write_window=2_500, prefunded=True,
        financial=FinancialTraceSpec(duration=36 * HOUR), financial_multiplier=3,
        epochs=320, max_block_size=MiB,
    ),
    # writing-heavy blocks: nine full spending txs next to 21 financial txs
    'utilization': dict(
        writers=60, writer_payload=370_048, write_window=150, prefunded=True,
        financial=FinancialTraceSpec(rate_per_epoch=21, median_size=5_620, size_sigma=0.25,
                                     arrival='uniform', duration=20 * 150),
        epochs=20, max_block_size=MiB,
    ),
}


def preset(name, **overrides):
    if name not in PRESETS:
        raise WorkloadError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return WorkloadSpec(name=name, **PRESETS[name]).with_overrides(**overrides)
