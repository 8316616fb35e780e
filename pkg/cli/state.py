"""
The local state directory: simulated chain, content index and publisher
identity, held under an exclusive lock for the duration of one command.
"""
import fcntl
import logging

from chainsim.chain import CHAIN_FILE, SimChain
from uweb.exceptions import NotFoundError, SignatureError
from uweb.index import ContentIndex
from uweb.publisher import Publisher
from uweb.signatures import PublisherIdentity

from .exceptions import StateLockedError

logger = logging.getLogger('cli')


class NodeState:
    """
    Context manager over a data directory.

    The chain is created on first use with the configured block size, epoch
    length and fee rates; afterwards the parameters stored with the chain win.
    save=False leaves the chain files untouched; index progress is always kept.
    """

    def __init__(self, config, save=True):
        self.config = config
        self.save_on_exit = save
        self.chain = None
        self.index = None
        self._lock = None

    def __enter__(self):
        self.config.data_dir.mkdir(parents=True, exist_ok=True)
        self._acquire()
        try:
            self.chain = self._load_chain()
            self.index = ContentIndex.load(self.config.index_path)
        except Exception:
            self._release()
            raise
        return self

    def __exit__(self, exc_type, exc, tb):
        try:
            if self.index is not None:
                self.index.flush()
            if self.save_on_exit and self.chain is not None:
                # effects of a partly failed command are kept
                self.chain.save(self.config.chain_dir)
        finally:
            self._release()
        return False

    def _acquire(self):
        handle = open(self.config.lock_path, 'w')
        try:
            fcntl.flock(handle, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError as e:
            handle.close()
            raise StateLockedError(f"{self.config.data_dir} is in use by another command") from e
        self._lock = handle

    def _release(self):
        if self._lock is not None:
            fcntl.flock(self._lock, fcntl.LOCK_UN)
            self._lock.close()
            self._lock = None

    def _load_chain(self):
        if (self.config.chain_dir / CHAIN_FILE).exists():
            chain = SimChain.load(self.config.chain_dir)
            logger.debug(f"Loaded chain at height {chain.height} from {self.config.chain_dir}")
            return chain
        logger.info(f"Creating simulated chain in {self.config.chain_dir}")
        return SimChain(
            max_block_size=self.config.max_block_size,
            epoch_seconds=self.config.epoch_seconds,
            min_fee_rate=self.config.fee_rate,
            dust_relay_rate=self.config.dust_relay_rate,
            seed=self.config.seed,
        )

    @property
    def has_identity(self):
        return self.config.identity_path.exists()

    def identity(self):
        if not self.has_identity:
            raise NotFoundError(f"no publisher identity in {self.config.data_dir}; run init_publisher first")
        return PublisherIdentity.load(self.config.identity_path)

    def save_identity(self, identity):
        if self.has_identity:
            raise SignatureError(f"{self.config.identity_path} already exists")
        return identity.save(self.config.identity_path)

    def publisher(self):
        return Publisher(self.chain, self.identity(), self.index, self.config.cost_model())
