class AttackError(Exception):
    """An attack scenario cannot be set up; failed forgeries are outcomes, not errors"""
