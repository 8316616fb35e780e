class MaxRateError(Exception):
    """Base error for max-rate construct building"""


class ChunkError(MaxRateError):
    """Payload cannot be chunked or a chunk is malformed"""


class PlanError(MaxRateError):
    """Plan arithmetic or builder inputs are inconsistent"""


class InsufficientFundsError(MaxRateError):
    """A source output cannot cover the values and fees it must pay"""

    def __init__(self, message, shortfall=0):
        super().__init__(message)
        self.shortfall = shortfall


class ManifestError(MaxRateError):
    """A construct manifest is unreadable or does not verify"""
