"""
POD of interface traces by the method of snapshots

The Gram matrix of the snapshots under the discrete L2 or H1 interface
inner product is diagonalized; modes are combinations of snapshots scaled
by 1/sqrt(lambda) and truncated by the energy criterion.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from hub.errors import ConfigurationError, DegenerateBasisError, DimensionError
from hub.logger import get_logger
from numerics.fem_core import InnerProductKind, TraceVector, trace_weight_matrix
from numerics.geometry_mesh import InterfaceId


logger = get_logger("pod")

# eigenvalues below this fraction of the largest are numerically zero
RANK_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class PodBasis:
    """Orthonormal interface modes (rows of `modes`) and the Gram spectrum"""
    interface: Optional[InterfaceId]
    kind: InnerProductKind
    sigma: float
    spacing: float
    modes: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.modes.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.modes.shape[1]

    @property
    def energy(self) -> float:
        """Retained fraction of the eigenvalue mass"""
        total = float(np.sum(self.eigenvalues))
        return float(np.sum(self.eigenvalues[: self.n_modes])) / total if total > 0 else 1.0

    @cached_property
    def weights(self) -> np.ndarray:
        return trace_weight_matrix(self.n_nodes, self.spacing, self.kind)

    def project(self, values: np.ndarray) -> np.ndarray:
        """Coefficients ((t, phi_j)) for a trace (n,) or stacked traces (k, n)"""
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.n_nodes:
            raise DimensionError(
                f"trace of {values.shape[-1]} nodes projected on a basis of {self.n_nodes} nodes"
            )
        return values @ self.weights @ self.modes.T

    def reconstruct(self, coefficients: np.ndarray) -> np.ndarray:
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape[-1] != self.n_modes:
            raise DimensionError(
                f"{coefficients.shape[-1]} coefficients for a basis of {self.n_modes} modes"
            )
        return coefficients @ self.modes


def _stack(snapshots: Union[np.ndarray, Sequence[TraceVector]]) -> np.ndarray:
    if isinstance(snapshots, np.ndarray):
        return np.atleast_2d(np.asarray(snapshots, dtype=float))
    rows = [s.values if isinstance(s, TraceVector) else np.asarray(s, dtype=float) for s in snapshots]
    if not rows:
        raise DegenerateBasisError("no snapshots to compress")
    lengths = {r.shape[0] for r in rows}
    if len(lengths) != 1:
        raise DimensionError(f"snapshots of different lengths {sorted(lengths)}")
    return np.vstack(rows)


def _orthonormalize(modes: np.ndarray, W: np.ndarray) -> np.ndarray:
    # two passes of modified Gram-Schmidt under W
    modes = modes.copy()
    for _ in range(2):
        for j in range(modes.shape[0]):
            for i in range(j):
                modes[j] -= (modes[j] @ W @ modes[i]) * modes[i]
            modes[j] /= np.sqrt(modes[j] @ W @ modes[j])
    return modes


def compute_pod_basis(snapshots: Union[np.ndarray, Sequence[TraceVector]],
                      kind: InnerProductKind = InnerProductKind.H1D,
                      sigma: float = 1e-5,
                      spacing: Optional[float] = None,
                      interface: Optional[InterfaceId] = None) -> PodBasis:
    """
    Smallest basis keeping a fraction >= 1 - sigma of the snapshot energy.

    Each mode's largest-magnitude component is made positive.
    """
    if not 0.0 < sigma < 1.0:
        raise ConfigurationError(f"sigma must lie in (0, 1), got {sigma}")
    kind = InnerProductKind(kind)
    S = _stack(snapshots)
    if S.shape[0] == 0:
        raise DegenerateBasisError("no snapshots to compress")
    if spacing is None:
        first = snapshots[0] if not isinstance(snapshots, np.ndarray) else None
        if not isinstance(first, TraceVector):
            raise DimensionError("spacing is required for raw snapshot arrays")
        spacing = first.spacing
        interface = interface or first.interface
    if not np.any(S):
        raise DegenerateBasisError(f"all snapshots on {interface} are zero")

    W = trace_weight_matrix(S.shape[1], spacing, kind)
    gram = S @ W @ S.T
    gram = 0.5 * (gram + gram.T)
    eigenvalues, vectors = np.linalg.eigh(gram)
    eigenvalues = np.clip(np.flip(eigenvalues), 0.0, None)
    vectors = np.flip(vectors, axis=1)
    if eigenvalues[0] <= 0.0:
        raise DegenerateBasisError(f"snapshots on {interface} carry no energy")

    fraction = np.cumsum(eigenvalues) / np.sum(eigenvalues)
    n_modes = int(np.argmax(fraction >= 1.0 - sigma)) + 1
    rank = int(np.sum(eigenvalues > RANK_TOL * eigenvalues[0]))
    n_modes = max(1, min(n_modes, rank))

    modes = (vectors[:, :n_modes] / np.sqrt(eigenvalues[:n_modes])).T @ S
    modes = _orthonormalize(modes, W)
    pivots = np.argmax(np.abs(modes), axis=1)
    signs = np.sign(modes[np.arange(n_modes), pivots])
    modes = modes * signs[:, None]

    basis = PodBasis(interface=interface, kind=kind, sigma=float(sigma), spacing=float(spacing),
                     modes=modes, eigenvalues=eigenvalues)
    logger.info("pod basis", interface=getattr(interface, 'value', interface), kind=kind.value,
                snapshots=S.shape[0], modes=n_modes, energy=basis.energy)
    return basis


def project_trace(trace: Union[TraceVector, np.ndarray], basis: PodBasis) -> np.ndarray:
    """Latent coefficients alpha_j = ((trace, phi_j))"""
    if isinstance(trace, TraceVector):
        if trace.interface is not None and basis.interface is not None and trace.interface != basis.interface:
            raise DimensionError(f"trace on {trace.interface} projected on basis of {basis.interface}")
        trace = trace.values
    return basis.project(trace)


def reconstruct_trace(alpha: np.ndarray, basis: PodBasis) -> TraceVector:
    """Trace sum_j alpha_j phi_j"""
    alpha = np.asarray(alpha, dtype=float)
    if alpha.ndim != 1:
        raise DimensionError(f"expected one coefficient vector, got shape {alpha.shape}")
    return TraceVector(basis.reconstruct(alpha), basis.spacing, basis.interface)
