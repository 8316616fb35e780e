"""
Operator configuration: settings defaults, then an optional env-style file
given with --config, then command-line flags.
"""
import logging
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from django.conf import settings
from dotenv import dotenv_values

from maxrate.planner import CostModel
from uweb.exceptions import SignatureError
from uweb.signatures import get_scheme

from .exceptions import ConfigError

logger = logging.getLogger('cli')

CHAIN_DIR = 'chain'
INDEX_FILE = 'index.jsonl'
IDENTITY_FILE = 'identity.json'
LOCK_FILE = '.lock'

# config file key -> field
FILE_KEYS = {
    'UWEB_DATA_DIR': 'data_dir',
    'UWEB_FEE_RATE': 'fee_rate',
    'UWEB_DUST_RELAY_RATE': 'dust_relay_rate',
    'UWEB_EPOCH_SECONDS': 'epoch_seconds',
    'UWEB_BANDWIDTH': 'bandwidth',
    'UWEB_SEED': 'seed',
    'UWEB_SIGNATURE_SCHEME': 'scheme',
    'UWEB_MLTC_RATIO': 'mltc_ratio',
    'UWEB_GENESIS_VALUE': 'genesis_value',
    'UWEB_MAX_BLOCK_SIZE': 'max_block_size',
}


@dataclass(frozen=True)
class Config:
    data_dir: Path
    fee_rate: int = 1
    dust_relay_rate: int = 3
    epoch_seconds: float = 150
    bandwidth: float = 125_000_000
    seed: int = 0
    scheme: str = 'keyed-hash'
    mltc_ratio: int = 100_000
    genesis_value: int = 1_000_000_000
    max_block_size: int = 1_000_000

    @classmethod
    def from_settings(cls):
        return cls(
            data_dir=Path(settings.UWEB_DATA_DIR),
            fee_rate=settings.UWEB_FEE_RATE,
            dust_relay_rate=settings.UWEB_DUST_RELAY_RATE,
            epoch_seconds=settings.UWEB_EPOCH_SECONDS,
            bandwidth=settings.UWEB_BANDWIDTH,
            seed=settings.UWEB_SEED,
            scheme=settings.UWEB_SIGNATURE_SCHEME,
            mltc_ratio=settings.UWEB_MLTC_RATIO,
            genesis_value=settings.UWEB_GENESIS_VALUE,
            max_block_size=settings.UWEB_MAX_BLOCK_SIZE,
        )

    @classmethod
    def resolve(cls, config_file=None, **overrides):
        """Settings, then config_file, then every override that is not None"""
        config = cls.from_settings()
        if config_file:
            config = config.merged(read_config_file(config_file))
        config = config.merged({k: v for k, v in overrides.items() if v is not None})
        config.validate()
        return config

    def merged(self, values):
        known = {f.name: f.type for f in fields(self)}
        changes = {}
        for name, value in values.items():
            if name not in known:
                raise ConfigError(f"unknown configuration key {name!r}")
            changes[name] = _coerce(name, value, known[name])
        return replace(self, **changes)

    def validate(self):
        for name in ('fee_rate', 'dust_relay_rate', 'epoch_seconds', 'bandwidth', 'mltc_ratio',
                     'genesis_value', 'max_block_size'):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.seed < 0:
            raise ConfigError(f"seed must not be negative, got {self.seed}")
        try:
            get_scheme(self.scheme)
        except SignatureError as e:
            raise ConfigError(str(e)) from e
        return self

    def cost_model(self):
        return CostModel(
            fee_rate=self.fee_rate,
            epoch_seconds=self.epoch_seconds,
            upload_bandwidth=self.bandwidth,
            dust_relay_rate=self.dust_relay_rate,
        )

    @property
    def chain_dir(self):
        return self.data_dir / CHAIN_DIR

    @property
    def index_path(self):
        return self.data_dir / INDEX_FILE

    @property
    def identity_path(self):
        return self.data_dir / IDENTITY_FILE

    @property
    def lock_path(self):
        return self.data_dir / LOCK_FILE

    def mltc(self, base_units):
        return base_units / self.mltc_ratio

    def as_dict(self):
        data = asdict(self)
        data['data_dir'] = str(self.data_dir)
        return data


def _coerce(name, value, kind):
    if kind in (Path, 'Path'):
        return Path(value)
    try:
        if kind in (int, 'int'):
            return int(value)
        if kind in (float, 'float'):
            return float(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{name} must be a number, got {value!r}") from e
    return str(value)


def read_config_file(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    values = {}
    for key, value in dotenv_values(path).items():
        if key not in FILE_KEYS:
            logger.warning(f"Ignoring unknown key {key} in {path}")
            continue
        if value is None or value == '':
            raise ConfigError(f"{key} in {path} has no value")
        values[FILE_KEYS[key]] = value
    return values
