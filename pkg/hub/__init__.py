"""
romschwarz Hub Module

Command-line front end, experiment orchestration, run scheduling, logging and
error types.
"""

__version__ = "0.1.0"
__author__ = "romschwarz Team"
