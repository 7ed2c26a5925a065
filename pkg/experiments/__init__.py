"""
romschwarz Experiments Module

Parameter studies built on the offline and online stages.
"""

__version__ = "0.1.0"
