"""
P1 finite elements for advection-reaction-diffusion

Assembles the Galerkin form
    A(u, v) = (a grad u, grad v) + (beta . grad u, v) + (c u, v) + <gamma u, v>_Robin
with load (f, v) + <g_N, v>_Neumann/Robin on structured triangle meshes,
imposes Dirichlet data by row replacement and solves with sparse LU or
ILU-preconditioned BiCGStab. Also provides field norms and the discrete
interface inner products used by the trace reduction.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from hub.errors import (
    CoefficientError,
    ConstraintConflictError,
    DimensionError,
    SolverError,
)
from hub.logger import get_logger
from numerics.geometry_mesh import BoundaryTag, InterfaceId, Mesh


logger = get_logger("fem_core")

ScalarData = Union[float, Callable[[np.ndarray, np.ndarray], np.ndarray]]

# tolerance for two Dirichlet prescriptions to count as the same value
CONSTRAINT_TOL = 1e-12


class NormKind(str, Enum):
    """Field norms on a subdomain mesh"""
    L2 = "L2"
    H1 = "H1"


class InnerProductKind(str, Enum):
    """Discrete inner products on an interface"""
    L2D = "L2d"
    H1D = "H1d"


class SolverMethod(str, Enum):
    DIRECT = "direct"
    BICGSTAB = "bicgstab"


@dataclass(frozen=True)
class ProblemCoefficients:
    """
    Coefficients of -div(a grad u) + beta . grad u + c u = f

    `robin` is gamma on Robin segments, `neumann_datum` is g_N on Neumann and
    Robin segments, `inlet` is the Dirichlet profile g(y) on the inlet.
    """
    diffusion: float = 1.0
    velocity: Tuple[float, float] = (0.0, 0.0)
    reaction: float = 0.0
    robin: float = 0.0
    source: ScalarData = 0.0
    neumann_datum: ScalarData = 0.0
    inlet: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        object.__setattr__(self, 'velocity', (float(self.velocity[0]), float(self.velocity[1])))
        if not self.diffusion > 0:
            raise CoefficientError(f"diffusion must be positive, got {self.diffusion}")
        if self.reaction < 0:
            raise CoefficientError(f"reaction must be non-negative, got {self.reaction}")
        if self.robin < 0:
            raise CoefficientError(f"Robin coefficient must be non-negative, got {self.robin}")

    @property
    def speed(self) -> float:
        return float(np.hypot(*self.velocity))

    def peclet(self, width: float) -> float:
        """Pe = |beta| H / a"""
        return self.speed * width / self.diffusion

    def cell_peclet(self, hx: float) -> float:
        return self.speed * hx / (2.0 * self.diffusion)


@dataclass(frozen=True, eq=False)
class FieldVector:
    """Nodal values of a P1 field on one mesh"""
    values: np.ndarray
    mesh_id: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise DimensionError(f"field values must be one-dimensional, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise SolverError(f"non-finite values in field on mesh {self.mesh_id}")
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class TraceVector:
    """Values of a field on the nodes of one interface"""
    values: np.ndarray
    spacing: float
    interface: Optional[InterfaceId] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.shape[0] < 2:
            raise DimensionError(f"a trace needs at least two nodes, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DimensionError(f"non-finite trace values on interface {self.interface}")
        object.__setattr__(self, 'values', values)

    def __len__(self) -> int:
        return self.values.shape[0]


def _evaluate(data: ScalarData, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if callable(data):
        return np.asarray(data(x, y), dtype=float) * np.ones_like(x)
    return np.full(x.shape, float(data))


def _barycentric_gradients(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = mesh.nodes[mesh.triangles]
    x, y = p[:, :, 0], p[:, :, 1]
    area = mesh.triangle_areas()
    two_a = 2.0 * area
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / two_a[:, None]
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / two_a[:, None]
    return area, gx, gy


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    rows = np.broadcast_to(mesh.triangles[:, :, None], local.shape)
    cols = np.broadcast_to(mesh.triangles[:, None, :], local.shape)
    n = mesh.n_nodes
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


_LOCAL_MASS = (np.ones((3, 3)) + np.eye(3)) / 12.0
_EDGE_MASS = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0


def _operator(mesh: Mesh, name: str, build: Callable[[Mesh], sp.csr_matrix]) -> sp.csr_matrix:
    matrix = mesh.operators.get(name)
    if matrix is None:
        matrix = mesh.operators[name] = build(mesh)
    return matrix


def _assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    area = mesh.triangle_areas()
    return _scatter(mesh, area[:, None, None] * _LOCAL_MASS[None, :, :])


def _assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    area, gx, gy = _barycentric_gradients(mesh)
    local = area[:, None, None] * (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :])
    return _scatter(mesh, local)


def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix (exact integration), assembled once per mesh"""
    return _operator(mesh, "mass", _assemble_mass)


def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    """P1 Laplace stiffness matrix, assembled once per mesh"""
    return _operator(mesh, "stiffness", _assemble_stiffness)


def _edge_mass(mesh: Mesh, tags: Sequence[BoundaryTag]) -> sp.csr_matrix:
    n = mesh.n_nodes
    edges = [mesh.boundary_edges(tag) for tag in tags]
    edges = np.vstack(edges) if edges else np.zeros((0, 2), dtype=int)
    if edges.shape[0] == 0:
        return sp.csr_matrix((n, n))
    length = np.linalg.norm(mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1)
    local = length[:, None, None] * _EDGE_MASS[None, :, :]
    rows = np.broadcast_to(edges[:, :, None], local.shape)
    cols = np.broadcast_to(edges[:, None, :], local.shape)
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


@dataclass(frozen=True, eq=False)
class SparseSystem:
    """
    Unconstrained Galerkin matrix and load plus the Dirichlet prescriptions.

    The constrained matrix replaces each prescribed row by an identity row;
    the unconstrained form stays available in `matrix`.
    """
    matrix: sp.csr_matrix
    load: np.ndarray
    mesh_id: str = ""
    dirichlet_nodes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    dirichlet_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    warnings: Tuple[str, ...] = ()

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def _free_mask(self) -> np.ndarray:
        mask = np.ones(self.size)
        mask[self.dirichlet_nodes] = 0.0
        return mask

    def constrained_matrix(self) -> sp.csr_matrix:
        free = self._free_mask
        constrained = sp.diags(free) @ self.matrix + sp.diags(1.0 - free)
        constrained = constrained.tocsr()
        constrained.eliminate_zeros()
        return constrained

    def rhs(self, values: Optional[np.ndarray] = None) -> np.ndarray:
        """Load with prescribed rows set to the Dirichlet values (or `values` on the same nodes)"""
        b = self.load.copy()
        b[self.dirichlet_nodes] = self.dirichlet_values if values is None else values
        return b

    def with_values(self, values: np.ndarray) -> "SparseSystem":
        values = np.broadcast_to(np.asarray(values, dtype=float), self.dirichlet_nodes.shape).copy()
        return SparseSystem(matrix=self.matrix, load=self.load, mesh_id=self.mesh_id,
                            dirichlet_nodes=self.dirichlet_nodes, dirichlet_values=values,
                            warnings=self.warnings)


def assemble_ard_system(mesh: Mesh, coeffs: ProblemCoefficients,
                        neumann_segments: Sequence[BoundaryTag] = (),
                        robin_segments: Sequence[BoundaryTag] = ()) -> SparseSystem:
    """
    Assemble the advection-reaction-diffusion system on `mesh`.

    Segments not listed as Neumann, Robin or later constrained by Dirichlet
    data carry the natural condition a du/dn = 0.
    """
    area, gx, gy = _barycentric_gradients(mesh)
    bx, by = coeffs.velocity
    a = coeffs.diffusion

    # rows are test functions, columns trial functions
    diffusion = a * area[:, None, None] * (gx[:, :, None] * gx[:, None, :] + gy[:, :, None] * gy[:, None, :])
    advection = (area / 3.0)[:, None, None] * (bx * gx + by * gy)[:, None, :]
    local = diffusion + np.broadcast_to(advection, diffusion.shape)
    if coeffs.reaction:
        local = local + coeffs.reaction * area[:, None, None] * _LOCAL_MASS[None, :, :]
    matrix = _scatter(mesh, local)

    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    load = mass_matrix(mesh) @ _evaluate(coeffs.source, x, y)

    natural = list(neumann_segments) + list(robin_segments)
    if natural:
        load = load + _edge_mass(mesh, natural) @ _evaluate(coeffs.neumann_datum, x, y)
    if robin_segments and coeffs.robin:
        matrix = (matrix + coeffs.robin * _edge_mass(mesh, robin_segments)).tocsr()

    warnings: List[str] = []
    cell_pe = coeffs.cell_peclet(mesh.hx)
    if cell_pe > 1.0:
        message = f"cell Peclet number {cell_pe:.3g} exceeds 1 on mesh {mesh.mesh_id}"
        warnings.append(message)
        logger.warning("cell peclet guard", mesh=mesh.mesh_id, cell_peclet=cell_pe)

    return SparseSystem(matrix=matrix, load=np.asarray(load, dtype=float),
                        mesh_id=mesh.mesh_id, warnings=tuple(warnings))


def apply_dirichlet(system: SparseSystem, nodes: np.ndarray,
                    values: Union[float, np.ndarray]) -> SparseSystem:
    """Add Dirichlet prescriptions; a node prescribed twice must get the same value"""
    nodes = np.asarray(nodes, dtype=int).ravel()
    values = np.broadcast_to(np.asarray(values, dtype=float), nodes.shape).astype(float)
    if nodes.size and (nodes.min() < 0 or nodes.max() >= system.size):
        raise DimensionError(f"Dirichlet nodes outside 0..{system.size - 1}")

    prescribed: Dict[int, float] = dict(zip(system.dirichlet_nodes.tolist(),
                                            system.dirichlet_values.tolist()))
    conflicts = []
    for node, value in zip(nodes.tolist(), values.tolist()):
        current = prescribed.get(node)
        if current is not None and abs(current - value) > CONSTRAINT_TOL:
            conflicts.append(node)
            continue
        prescribed[node] = value
    if conflicts:
        raise ConstraintConflictError(
            f"conflicting Dirichlet values on {len(conflicts)} node(s) of mesh {system.mesh_id}",
            nodes=conflicts,
        )

    ordered = np.array(sorted(prescribed), dtype=int)
    return SparseSystem(matrix=system.matrix, load=system.load, mesh_id=system.mesh_id,
                        dirichlet_nodes=ordered,
                        dirichlet_values=np.array([prescribed[n] for n in ordered.tolist()], dtype=float),
                        warnings=system.warnings)


def _finalize(system: SparseSystem, x: np.ndarray, values: Optional[np.ndarray] = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    x[system.dirichlet_nodes] = system.dirichlet_values if values is None else values
    return x


def solve_linear(system: SparseSystem, method: SolverMethod = SolverMethod.DIRECT,
                 tol: float = 1e-10, max_iter: Optional[int] = None) -> FieldVector:
    """Solve the constrained system; Dirichlet values are reproduced exactly"""
    method = SolverMethod(method)
    A = system.constrained_matrix()
    b = system.rhs()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return FieldVector(np.zeros(system.size), system.mesh_id)

    if method is SolverMethod.DIRECT:
        try:
            x = spla.splu(A.tocsc()).solve(b)
        except RuntimeError as e:
            raise SolverError(f"sparse LU failed on mesh {system.mesh_id}: {e}") from e
        if not np.all(np.isfinite(x)):
            raise SolverError(f"sparse LU produced non-finite values on mesh {system.mesh_id}")
        return FieldVector(_finalize(system, x), system.mesh_id)

    history: List[float] = []

    def record(xk):
        history.append(float(np.linalg.norm(b - A @ xk)) / b_norm)

    try:
        ilu = spla.spilu(A.tocsc(), drop_tol=1e-6, fill_factor=20)
        M = spla.LinearOperator(A.shape, ilu.solve)
    except RuntimeError:
        logger.warning("ilu preconditioner failed, running unpreconditioned", mesh=system.mesh_id)
        M = None

    maxiter = max_iter or 10 * system.size
    x = None
    for _ in range(2):
        x, info = spla.bicgstab(A, b, x0=x, rtol=tol, atol=0.0, maxiter=maxiter, M=M, callback=record)
        if info < 0:
            raise SolverError(f"BiCGStab breakdown ({info}) on mesh {system.mesh_id}", history)
        residual = float(np.linalg.norm(b - A @ x))
        if info == 0 and residual <= tol * b_norm:
            break
    else:
        raise SolverError(
            f"BiCGStab did not reach tol={tol:g} on mesh {system.mesh_id} "
            f"(relative residual {residual / b_norm:.3e})",
            history,
        )

    logger.debug("bicgstab converged", mesh=system.mesh_id, iterations=len(history))
    return FieldVector(_finalize(system, x), system.mesh_id)


class Factorization:
    """
    LU factorization of a constrained system, reused for new Dirichlet values
    on the same nodes (single or stacked right-hand sides).
    """

    def __init__(self, system: SparseSystem):
        self.system = system
        try:
            self._lu = spla.splu(system.constrained_matrix().tocsc())
        except RuntimeError as e:
            raise SolverError(f"sparse LU failed on mesh {system.mesh_id}: {e}") from e

    @property
    def dirichlet_nodes(self) -> np.ndarray:
        return self.system.dirichlet_nodes

    def solve(self, values: Optional[np.ndarray] = None) -> np.ndarray:
        values = self.system.dirichlet_values if values is None else np.asarray(values, dtype=float)
        x = self._lu.solve(self.system.rhs(values))
        if not np.all(np.isfinite(x)):
            raise SolverError(f"non-finite solution on mesh {self.system.mesh_id}")
        return _finalize(self.system, x, values)

    def solve_many(self, values: np.ndarray) -> np.ndarray:
        """Solve for each column of `values` (n_dirichlet, k); returns (n_nodes, k)"""
        values = np.asarray(values, dtype=float)
        B = np.repeat(self.system.load[:, None], values.shape[1], axis=1)
        B[self.system.dirichlet_nodes, :] = values
        X = self._lu.solve(B)
        if not np.all(np.isfinite(X)):
            raise SolverError(f"non-finite solution on mesh {self.system.mesh_id}")
        X[self.system.dirichlet_nodes, :] = values
        return X


def _values_of(field_: Union[FieldVector, np.ndarray], mesh: Mesh) -> np.ndarray:
    if isinstance(field_, FieldVector):
        if field_.mesh_id and mesh.mesh_id and field_.mesh_id != mesh.mesh_id:
            raise DimensionError(f"field on {field_.mesh_id} evaluated on mesh {mesh.mesh_id}")
        values = field_.values
    else:
        values = np.asarray(field_, dtype=float)
    if values.shape != (mesh.n_nodes,):
        raise DimensionError(f"field of length {values.shape} on mesh with {mesh.n_nodes} nodes")
    return values


def field_norm(field_: Union[FieldVector, np.ndarray], mesh: Mesh,
               kind: NormKind = NormKind.H1) -> float:
    """L2 norm via the mass matrix; H1 adds the stiffness seminorm"""
    u = _values_of(field_, mesh)
    value = u @ (mass_matrix(mesh) @ u)
    if NormKind(kind) is NormKind.H1:
        value += u @ (stiffness_matrix(mesh) @ u)
    return float(np.sqrt(max(value, 0.0)))


def trace_weight_matrix(n: int, spacing: float, kind: InnerProductKind) -> np.ndarray:
    """Gram weights W with ((v, w)) = v^T W w on an interface of n nodes"""
    W = spacing * np.eye(n)
    if InnerProductKind(kind) is InnerProductKind.H1D:
        D = np.diff(np.eye(n), axis=0)
        W = W + (D.T @ D) / spacing
    return W


def trace_inner_product(u: TraceVector, v: TraceVector,
                        kind: InnerProductKind = InnerProductKind.H1D) -> float:
    """Discrete L2 or H1 inner product on one interface"""
    if len(u) != len(v):
        raise DimensionError(f"trace lengths differ: {len(u)} vs {len(v)}")
    if u.interface is not None and v.interface is not None and u.interface != v.interface:
        raise DimensionError(f"traces on different interfaces: {u.interface} vs {v.interface}")
    h = u.spacing
    value = h * float(u.values @ v.values)
    if InnerProductKind(kind) is InnerProductKind.H1D:
        value += float(np.diff(u.values) @ np.diff(v.values)) / h
    return value


def export_field_csv(field_: Union[FieldVector, np.ndarray], mesh: Mesh,
                     path: Union[str, Path]) -> Path:
    """Write node x, y and field value as CSV"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({
        'x': mesh.nodes[:, 0],
        'y': mesh.nodes[:, 1],
        'value': _values_of(field_, mesh),
    })
    frame.to_csv(path, index=False, float_format="%.17g")
    return path
