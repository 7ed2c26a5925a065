"""
romschwarz Tests Module

Test suite for the reduced Schwarz toolkit.
"""

__version__ = "0.1.0"
