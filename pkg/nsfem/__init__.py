"""
nsfem package exports.
"""
__version__ = "1.0.0"
