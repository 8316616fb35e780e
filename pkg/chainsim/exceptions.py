class ChainSimError(Exception):
    """Base error for the simulated chain and simulator runs"""


class RejectedTransaction(ChainSimError):
    """A transaction was refused by mempool admission"""

    def __init__(self, message, rule_id=None, txid=None):
        super().__init__(message)
        self.rule_id = rule_id
        self.txid = txid


class WorkloadError(ChainSimError):
    """A workload description is invalid or unreadable"""
