class ConfigError(Exception):
    """Configuration values are missing, malformed or out of range"""


class StateLockedError(Exception):
    """Another command holds the data directory lock"""
