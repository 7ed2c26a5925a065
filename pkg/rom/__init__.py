"""
romschwarz ROM Module

Offline reduction of the middle-subdomain trace map: POD bases, the latent
network and the trace ROM artifact.
"""

__version__ = "0.1.0"
