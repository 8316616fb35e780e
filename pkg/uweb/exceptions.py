class UWebError(Exception):
    """Base error for UWeb directory operations"""


class NotFoundError(UWebError):
    """A path, publisher or root transaction is not in the index"""


class ChainTipError(UWebError):
    """A directory or file chain has no usable un-spent tip"""


class IncompleteContentError(UWebError):
    """A transaction needed to rebuild content is missing from the chain"""


class IntegrityError(UWebError):
    """Rebuilt content does not match its recorded digest"""


class SignatureError(UWebError):
    """Unknown signature scheme, bad key material or a certificate that does not verify"""


class EntryError(UWebError):
    """An entry cannot be encoded or its bytes do not decode"""
