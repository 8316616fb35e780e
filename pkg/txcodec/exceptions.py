class TxCodecError(Exception):
    """Base error for transaction encoding and scripts"""


class EncodingError(TxCodecError):
    """A transaction or script element cannot be serialized"""


class DecodingError(TxCodecError):
    """Bytes do not parse as a transaction or script"""


class ScriptError(TxCodecError):
    """Script construction or execution failed"""
