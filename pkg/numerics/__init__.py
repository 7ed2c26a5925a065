"""
romschwarz Numerics Module

Pipe geometry and meshes, the P1 finite element core, full and reduced
Schwarz iterations, and the closed-form 1D laboratory.
"""

__version__ = "0.1.0"
