"""
Publisher funds on the simulated chain: confirmed outputs paying the
publisher plus change from its own still-unconfirmed transactions.
"""
import logging

from maxrate.builder import Source, owner_script
from maxrate.exceptions import InsufficientFundsError
from txcodec.transaction import OutPoint

logger = logging.getLogger('uweb')


class Wallet:
    def __init__(self, chain, pubkey):
        self.chain = chain
        self.pubkey = pubkey
        self.script = owner_script(pubkey)
        self._pending = {}

    def coins(self):
        """Spendable Sources, largest first"""
        found = {op: Source(op, out.value) for op, out in self.chain.spendable(self.script)}
        for outpoint, source in list(self._pending.items()):
            if outpoint in self.chain.utxos:
                del self._pending[outpoint]
            elif self.chain.lookup_output(outpoint) is None:
                del self._pending[outpoint]
            elif not self.chain.mempool.conflicts([outpoint]):
                found[outpoint] = source
        return sorted(found.values(), key=lambda s: (-s.value, str(s.outpoint)))

    @property
    def balance(self):
        return sum(s.value for s in self.coins())

    def select(self, amount, what='payment'):
        """Single coin covering amount; single-source funding only"""
        coins = self.coins()
        if coins and coins[0].value >= amount:
            return coins[0]
        best = coins[0].value if coins else 0
        raise InsufficientFundsError(
            f"{what} needs a single output of {amount}, largest available is {best}",
            shortfall=amount - best,
        )

    def track(self, tx, change_only=False):
        """Remember outputs paid back to us by a submitted transaction"""
        indexes = [len(tx.outputs) - 1] if change_only else range(len(tx.outputs))
        for i in indexes:
            out = tx.outputs[i]
            if out.script_pubkey == self.script:
                self._pending[OutPoint(tx.txid, i)] = Source(OutPoint(tx.txid, i), out.value)
