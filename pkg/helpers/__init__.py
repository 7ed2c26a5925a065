"""
romschwarz Helpers Module

Run configuration loading and CSV report writing.
"""

__version__ = "0.1.0"
