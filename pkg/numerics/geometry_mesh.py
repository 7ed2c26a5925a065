"""
Pipe geometry, three-subdomain decomposition and structured P1 meshes

The pipe is the rectangle (0, L) x (0, H) with the flow along x. It is split
into Omega1 = (0, L2), Omega2 = (L1, L4), Omega3 = (L3, L) (times (0, H)).
Meshes are structured lattices split along the lower-left to upper-right
diagonal; node coordinates are snapped so that meshes of overlapping
subdomains share bit-identical nodes on the overlap.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from hub.errors import ConfigurationError, GeometryError
from hub.logger import get_logger


logger = get_logger("geometry_mesh")

# decimals kept when snapping lattice coordinates
COORDINATE_DECIMALS = 12


class BoundaryTag(str, Enum):
    """Boundary segment tags"""
    INLET = "inlet"
    OUTLET = "outlet"
    SIDE = "side"
    INTERFACE_LEFT = "interface-left"
    INTERFACE_RIGHT = "interface-right"


class InterfaceId(str, Enum):
    """The four vertical interfaces of the decomposition"""
    GAMMA_2IN = "2in"
    GAMMA_1OUT = "1out"
    GAMMA_3IN = "3in"
    GAMMA_2OUT = "2out"


@dataclass(frozen=True)
class PipeGeometry:
    """Pipe of cross-flow width H and axial length L with cuts L1 < L2 < L3 < L4"""
    width: float
    length: float
    cuts: Tuple[float, float, float, float]

    def __post_init__(self):
        object.__setattr__(self, 'cuts', tuple(float(c) for c in self.cuts))
        if len(self.cuts) != 4:
            raise ConfigurationError(f"expected four cut abscissas, got {len(self.cuts)}")
        if self.width <= 0:
            raise ConfigurationError(f"width H must be positive, got {self.width}")
        l1, l2, l3, l4 = self.cuts
        checks = [
            (0 < l1, "0 < L1"),
            (l1 < l2, "L1 < L2"),
            (l2 < l3, "L2 < L3"),
            (l3 < l4, "L3 < L4"),
            (l4 < self.length, "L4 < L"),
        ]
        for ok, inequality in checks:
            if not ok:
                raise ConfigurationError(
                    f"pipe cuts {self.cuts} with L={self.length} violate {inequality}"
                )

    @property
    def overlap_12(self) -> float:
        return self.cuts[1] - self.cuts[0]

    @property
    def overlap_23(self) -> float:
        return self.cuts[3] - self.cuts[2]


@dataclass(frozen=True)
class Rectangle:
    """Axis-aligned rectangle (x0, x1) x (y0, y1)"""
    x0: float
    x1: float
    y0: float
    y1: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def length(self) -> float:
        return self.x1 - self.x0

    @property
    def width(self) -> float:
        return self.y1 - self.y0


@dataclass(frozen=True)
class Decomposition:
    """Three overlapping subdomains and the abscissas of the four interfaces"""
    geometry: PipeGeometry
    omega1: Rectangle
    omega2: Rectangle
    omega3: Rectangle
    interfaces: Dict[InterfaceId, float]

    @property
    def domain(self) -> Rectangle:
        return Rectangle(0.0, self.geometry.length, 0.0, self.geometry.width)


def build_pipe_decomposition(geometry: PipeGeometry) -> Decomposition:
    """Split the pipe into Omega1=(0,L2), Omega2=(L1,L4), Omega3=(L3,L)"""
    l1, l2, l3, l4 = geometry.cuts
    h = geometry.width
    return Decomposition(
        geometry=geometry,
        omega1=Rectangle(0.0, l2, 0.0, h),
        omega2=Rectangle(l1, l4, 0.0, h),
        omega3=Rectangle(l3, geometry.length, 0.0, h),
        interfaces={
            InterfaceId.GAMMA_2IN: l1,
            InterfaceId.GAMMA_1OUT: l2,
            InterfaceId.GAMMA_3IN: l3,
            InterfaceId.GAMMA_2OUT: l4,
        },
    )


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Structured P1 triangulation of a rectangle

    Nodes are numbered row-major: node (i, j) has index j*(nx+1) + i.
    `boundary` maps a tag to the ordered node chains carrying it.
    """
    rect: Rectangle
    nx: int
    ny: int
    nodes: np.ndarray
    triangles: np.ndarray
    boundary: Dict[BoundaryTag, Tuple[np.ndarray, ...]]
    mesh_id: str = ""
    # assembled operators keyed by name, released with the mesh
    operators: Dict[str, Any] = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def hx(self) -> float:
        return self.rect.length / self.nx

    @property
    def hy(self) -> float:
        return self.rect.width / self.ny

    def column_x(self) -> np.ndarray:
        return self.nodes[: self.nx + 1, 0]

    def boundary_nodes(self, tag: BoundaryTag) -> np.ndarray:
        chains = self.boundary.get(tag, ())
        if not chains:
            return np.zeros(0, dtype=int)
        return np.unique(np.concatenate(chains))

    def boundary_edges(self, tag: BoundaryTag) -> np.ndarray:
        """Edges (k, 2) of the chains carrying `tag`"""
        edges = [np.column_stack([chain[:-1], chain[1:]]) for chain in self.boundary.get(tag, ())]
        if not edges:
            return np.zeros((0, 2), dtype=int)
        return np.vstack(edges)

    def triangle_areas(self) -> np.ndarray:
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))


def build_structured_mesh(rect: Rectangle, nx: int, ny: int,
                          left_tag: BoundaryTag = BoundaryTag.INLET,
                          right_tag: BoundaryTag = BoundaryTag.OUTLET) -> Mesh:
    """Build an (nx+1) x (ny+1) lattice split into 2*nx*ny triangles"""
    if int(nx) < 1 or int(ny) < 1:
        raise ConfigurationError(f"subdivision counts must be >= 1, got nx={nx}, ny={ny}")
    if rect.length <= 0 or rect.width <= 0:
        raise ConfigurationError(f"degenerate rectangle {rect}")
    nx, ny = int(nx), int(ny)

    xs = np.round(rect.x0 + rect.length * np.arange(nx + 1) / nx, COORDINATE_DECIMALS)
    ys = np.round(rect.y0 + rect.width * np.arange(ny + 1) / ny, COORDINATE_DECIMALS)
    xx, yy = np.meshgrid(xs, ys)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    n00 = (j * (nx + 1) + i).ravel()
    n10 = n00 + 1
    n01 = n00 + nx + 1
    n11 = n01 + 1
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    triangles = np.empty((2 * nx * ny, 3), dtype=int)
    triangles[0::2] = lower
    triangles[1::2] = upper

    stride = nx + 1
    bottom = np.arange(nx + 1)
    top = ny * stride + np.arange(nx + 1)
    left = np.arange(ny + 1) * stride
    right = left + nx
    boundary: Dict[BoundaryTag, Tuple[np.ndarray, ...]] = {BoundaryTag.SIDE: (bottom, top)}
    boundary[left_tag] = boundary.get(left_tag, ()) + (left,)
    boundary[right_tag] = boundary.get(right_tag, ()) + (right,)

    mesh_id = f"[{rect.x0:g},{rect.x1:g}]x[{rect.y0:g},{rect.y1:g}]:{nx}x{ny}"
    return Mesh(rect=rect, nx=nx, ny=ny, nodes=nodes, triangles=triangles,
                boundary=boundary, mesh_id=mesh_id)


@dataclass(frozen=True, eq=False)
class TraceIndex:
    """Ordered nodes of a mesh column lying on one interface"""
    interface: Optional[InterfaceId]
    x: float
    nodes: np.ndarray
    y: np.ndarray
    spacing: float

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    @property
    def interior(self) -> np.ndarray:
        """Interface nodes strictly between the side walls"""
        return self.nodes[1:-1]


def _column_of(mesh: Mesh, x: float) -> int:
    xs = mesh.column_x()
    tol = 1e-9 * max(1.0, abs(mesh.rect.x1))
    hits = np.nonzero(np.abs(xs - x) <= tol)[0]
    if hits.size == 0:
        raise GeometryError(
            f"abscissa x={x} is not a node column of mesh {mesh.mesh_id} (hx={mesh.hx:g})"
        )
    return int(hits[0])


def extract_interface_nodes(mesh: Mesh, x: float,
                            interface: Optional[InterfaceId] = None) -> TraceIndex:
    """Nodes on the vertical line x, sorted by y; x must be a lattice column"""
    column = _column_of(mesh, x)
    nodes = np.arange(mesh.ny + 1) * (mesh.nx + 1) + column
    y = mesh.nodes[nodes, 1]
    return TraceIndex(interface=interface, x=float(mesh.nodes[column, 0]), nodes=nodes,
                      y=y.copy(), spacing=mesh.rect.width / mesh.ny)


def restriction_indices(source: Mesh, target: Mesh) -> np.ndarray:
    """
    Indices into `source` of every node of `target`.

    Both meshes must belong to the same lattice (equal spacings, target
    columns and rows on source columns and rows).
    """
    col0 = _column_of(source, target.rect.x0)
    col1 = _column_of(source, target.rect.x1)
    if col1 - col0 != target.nx or source.ny != target.ny:
        raise GeometryError(
            f"mesh {target.mesh_id} is not a sub-lattice of {source.mesh_id}"
        )
    i, j = np.meshgrid(np.arange(target.nx + 1), np.arange(target.ny + 1))
    idx = (j * (source.nx + 1) + col0 + i).ravel()
    if not np.array_equal(source.nodes[idx], target.nodes):
        raise GeometryError(
            f"node coordinates of {target.mesh_id} do not coincide with {source.mesh_id}"
        )
    return idx


@dataclass(frozen=True)
class MeshResolution:
    """Lattice dimensions: axial cell counts per subdomain and cross-flow count"""
    nx1: int
    nx2: int
    nx3: int
    ny: int


@dataclass(frozen=True, eq=False)
class DecomposedMeshes:
    """Conforming meshes of the three subdomains and of the whole pipe"""
    decomposition: Decomposition
    resolution: MeshResolution
    omega1: Mesh
    omega2: Mesh
    omega3: Mesh
    monolithic: Mesh
    traces: Dict[Tuple[int, InterfaceId], TraceIndex] = field(default_factory=dict)
    restrictions: Dict[int, np.ndarray] = field(default_factory=dict)

    def subdomain(self, index: int) -> Mesh:
        return {1: self.omega1, 2: self.omega2, 3: self.omega3}[index]

    def trace(self, subdomain: int, interface: InterfaceId) -> TraceIndex:
        return self.traces[(subdomain, interface)]

    def restrict(self, values: np.ndarray, subdomain: int) -> np.ndarray:
        """Restrict nodal values on the monolithic mesh to a subdomain mesh"""
        return np.asarray(values)[self.restrictions[subdomain]]

    def geometry_fingerprint(self) -> Dict[str, object]:
        geometry = self.decomposition.geometry
        return {
            'width': geometry.width,
            'length': geometry.length,
            'cuts': list(geometry.cuts),
            'interface_nodes': {
                interface.value: self.trace(2, interface).size for interface in InterfaceId
            },
        }


def build_decomposed_meshes(decomposition: Decomposition,
                            resolution: MeshResolution) -> DecomposedMeshes:
    """Mesh the three subdomains and the full pipe on one shared lattice"""
    geometry = decomposition.geometry
    hx = decomposition.omega1.length / resolution.nx1
    for name, rect, nx in (("Omega2", decomposition.omega2, resolution.nx2),
                           ("Omega3", decomposition.omega3, resolution.nx3)):
        if not np.isclose(rect.length / nx, hx, rtol=1e-12, atol=0.0):
            raise ConfigurationError(
                f"{name} axial spacing {rect.length / nx:g} differs from Omega1 spacing {hx:g}; "
                "overlap meshes would not coincide"
            )
    for name, x in (("L1", geometry.cuts[0]), ("L3", geometry.cuts[2])):
        steps = x / hx
        if abs(steps - round(steps)) > 1e-9:
            raise ConfigurationError(f"cut {name}={x} does not fall on the axial lattice (hx={hx:g})")
    nx_total = int(round(geometry.length / hx))

    omega1 = build_structured_mesh(decomposition.omega1, resolution.nx1, resolution.ny,
                                   BoundaryTag.INLET, BoundaryTag.INTERFACE_RIGHT)
    omega2 = build_structured_mesh(decomposition.omega2, resolution.nx2, resolution.ny,
                                   BoundaryTag.INTERFACE_LEFT, BoundaryTag.INTERFACE_RIGHT)
    omega3 = build_structured_mesh(decomposition.omega3, resolution.nx3, resolution.ny,
                                   BoundaryTag.INTERFACE_LEFT, BoundaryTag.OUTLET)
    monolithic = build_structured_mesh(decomposition.domain, nx_total, resolution.ny)

    x = decomposition.interfaces
    traces = {
        (1, InterfaceId.GAMMA_2IN): extract_interface_nodes(omega1, x[InterfaceId.GAMMA_2IN], InterfaceId.GAMMA_2IN),
        (1, InterfaceId.GAMMA_1OUT): extract_interface_nodes(omega1, x[InterfaceId.GAMMA_1OUT], InterfaceId.GAMMA_1OUT),
        (3, InterfaceId.GAMMA_3IN): extract_interface_nodes(omega3, x[InterfaceId.GAMMA_3IN], InterfaceId.GAMMA_3IN),
        (3, InterfaceId.GAMMA_2OUT): extract_interface_nodes(omega3, x[InterfaceId.GAMMA_2OUT], InterfaceId.GAMMA_2OUT),
    }
    for interface in InterfaceId:
        traces[(2, interface)] = extract_interface_nodes(omega2, x[interface], interface)

    restrictions = {
        1: restriction_indices(monolithic, omega1),
        2: restriction_indices(monolithic, omega2),
        3: restriction_indices(monolithic, omega3),
    }

    logger.debug("decomposed meshes built",
                 nodes=[omega1.n_nodes, omega2.n_nodes, omega3.n_nodes, monolithic.n_nodes],
                 hx=hx, hy=omega1.hy)

    return DecomposedMeshes(decomposition=decomposition, resolution=resolution,
                            omega1=omega1, omega2=omega2, omega3=omega3,
                            monolithic=monolithic, traces=traces, restrictions=restrictions)


def export_mesh_text(mesh: Mesh, path: Union[str, Path]) -> Path:
    """Write plain-text node and element lists for debugging"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w') as f:
        f.write(f"# mesh {mesh.mesh_id}\n")
        f.write(f"nodes {mesh.n_nodes}\n")
        for k, (x, y) in enumerate(mesh.nodes):
            f.write(f"{k} {x!r} {y!r}\n")
        f.write(f"triangles {mesh.triangles.shape[0]}\n")
        for k, (a, b, c) in enumerate(mesh.triangles):
            f.write(f"{k} {a} {b} {c}\n")
        for tag, chains in mesh.boundary.items():
            for chain in chains:
                f.write(f"boundary {tag.value} " + " ".join(str(n) for n in chain) + "\n")
    return path
