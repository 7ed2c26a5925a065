"""
romschwarz error types

Every failure the toolkit can report is a subclass of RomSchwarzError so the
CLI can map it onto an exit code. Non-convergence of an iteration is not an
error: reports carry a `converged` flag instead.
"""

from typing import List, Optional, Sequence


class RomSchwarzError(Exception):
    """Base class for all toolkit errors"""


class ConfigurationError(RomSchwarzError, ValueError):
    """Invalid geometry, mesh, run or CLI configuration"""


class GeometryError(RomSchwarzError):
    """Geometric query that does not conform to the mesh lattice"""


class CoefficientError(RomSchwarzError, ValueError):
    """Coefficient sign or ellipticity condition violated"""


class ConstraintConflictError(RomSchwarzError):
    """Two Dirichlet prescriptions disagree on the same node"""

    def __init__(self, message: str, nodes: Optional[Sequence[int]] = None):
        super().__init__(message)
        self.nodes = list(nodes or [])


class DimensionError(RomSchwarzError, ValueError):
    """Vector, mesh or basis sizes do not match"""


class SolverError(RomSchwarzError):
    """Linear solver breakdown or non-convergence"""

    def __init__(self, message: str, residual_history: Optional[List[float]] = None):
        super().__init__(message)
        self.residual_history = list(residual_history or [])


class EstimationError(RomSchwarzError):
    """Not enough valid data to estimate a contraction factor"""


class DegenerateBasisError(RomSchwarzError):
    """POD requested on snapshots carrying no energy"""


class TrainingError(RomSchwarzError):
    """Latent map training produced a non-finite loss"""


class CompatibilityError(RomSchwarzError):
    """ROM artifact does not match the online meshes or problem"""


class ArtifactParseError(RomSchwarzError):
    """ROM artifact file is unreadable or structurally invalid"""


class UnsupportedVersionError(ArtifactParseError):
    """ROM artifact written by an unsupported format version"""


class UndefinedErrorNorm(RomSchwarzError):
    """Relative error requested against a reference of zero norm"""
