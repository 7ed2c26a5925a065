"""
Full-order alternating Schwarz on the three-subdomain pipe

Each sweep solves Omega1 and Omega3 with the current Omega2 traces on
Gamma_1out / Gamma_3in, then Omega2 with the new Omega1 / Omega3 traces on
Gamma_2in / Gamma_2out. The monolithic solve provides the reference field,
and a perturbed variant multiplies every transmitted trace by (1 + mu r).
"""

import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from hub.errors import ConfigurationError, DimensionError, EstimationError, UndefinedErrorNorm
from hub.logger import get_logger
from numerics.fem_core import (
    Factorization,
    FieldVector,
    NormKind,
    ProblemCoefficients,
    SolverMethod,
    apply_dirichlet,
    assemble_ard_system,
    field_norm,
    solve_linear,
)
from numerics.geometry_mesh import BoundaryTag, DecomposedMeshes, InterfaceId, Mesh


logger = get_logger("schwarz")

SUBDOMAINS = (1, 2, 3)

# called after every sweep with the sweep number and the new fields
SweepHook = Callable[[int, Dict[int, np.ndarray]], None]


@dataclass(frozen=True)
class InletProfile:
    """Inlet Dirichlet profile g(y); the parabola peaks at `peak` mid-pipe"""
    kind: str = "parabolic"
    peak: float = 1.0
    width: float = 5.0

    def __post_init__(self):
        if self.kind not in ("parabolic", "constant"):
            raise ConfigurationError(f"unknown inlet profile kind '{self.kind}'")

    def __call__(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.kind == "constant":
            return np.full(y.shape, self.peak)
        return self.peak * 4.0 * y * (self.width - y) / self.width ** 2

    @property
    def profile_id(self) -> str:
        return f"{self.kind}:peak={self.peak!r}:width={self.width!r}"


@dataclass(frozen=True, eq=False)
class PipeProblem:
    """
    Pipe flow data on a decomposed mesh

    `pe` is the axial velocity P in beta = (P, beta_y) with diffusion eps.
    """
    meshes: DecomposedMeshes
    pe: float
    diffusion: float = 1.0
    beta_y: float = 0.2
    source: float = 0.0
    inlet: Optional[InletProfile] = None
    method: SolverMethod = SolverMethod.DIRECT
    solver_tol: float = 1e-10

    def __post_init__(self):
        object.__setattr__(self, 'method', SolverMethod(self.method))
        if self.inlet is None:
            object.__setattr__(self, 'inlet',
                               InletProfile(width=self.meshes.decomposition.geometry.width))

    def coefficients(self) -> ProblemCoefficients:
        return ProblemCoefficients(diffusion=self.diffusion, velocity=(self.pe, self.beta_y),
                                   source=self.source, inlet=self.inlet)

    def with_pe(self, pe: float) -> "PipeProblem":
        return replace(self, pe=float(pe))

    @property
    def peclet(self) -> float:
        """True Peclet number |beta| H / eps"""
        return self.coefficients().peclet(self.meshes.decomposition.geometry.width)

    def fingerprint(self) -> Dict[str, object]:
        return {
            'diffusion': self.diffusion,
            'beta_y': self.beta_y,
            'source': self.source,
            'inlet': self.inlet.profile_id,
        }


class SolveLedger:
    """Thread-safe count of linear solves per subdomain"""

    def __init__(self):
        self._lock = threading.Lock()
        self._counts: Dict[int, int] = {i: 0 for i in SUBDOMAINS}

    def record(self, subdomain: int, count: int = 1):
        with self._lock:
            self._counts[subdomain] = self._counts.get(subdomain, 0) + count

    def count(self, subdomain: int) -> int:
        with self._lock:
            return self._counts.get(subdomain, 0)

    @property
    def omega2_solves(self) -> int:
        return self.count(2)

    def snapshot(self) -> Dict[int, int]:
        with self._lock:
            return dict(self._counts)


class SubdomainSolver:
    """
    Dirichlet solver for one subdomain with data on its incoming interfaces.

    Side walls (and the inlet on Omega1) are fixed; interface data is imposed
    on the interior interface nodes. With the direct method the constrained
    matrix is factorized once and reused for every new set of traces.
    """

    INTERFACES = {
        1: (InterfaceId.GAMMA_1OUT,),
        2: (InterfaceId.GAMMA_2IN, InterfaceId.GAMMA_2OUT),
        3: (InterfaceId.GAMMA_3IN,),
    }

    def __init__(self, problem: PipeProblem, subdomain: int, ledger: Optional[SolveLedger] = None):
        if subdomain not in SUBDOMAINS:
            raise ConfigurationError(f"subdomain must be 1, 2 or 3, got {subdomain}")
        self.problem = problem
        self.subdomain = subdomain
        self.ledger = ledger
        self.mesh: Mesh = problem.meshes.subdomain(subdomain)

        coeffs = problem.coefficients()
        system = assemble_ard_system(self.mesh, coeffs)
        system = apply_dirichlet(system, self.mesh.boundary_nodes(BoundaryTag.SIDE), 0.0)
        if subdomain == 1:
            inlet = self.mesh.boundary_nodes(BoundaryTag.INLET)
            system = apply_dirichlet(system, inlet, coeffs.inlet(self.mesh.nodes[inlet, 1]))
        for interface in self.INTERFACES[subdomain]:
            system = apply_dirichlet(system, problem.meshes.trace(subdomain, interface).interior, 0.0)

        self.system = system
        self._positions = {
            interface: np.searchsorted(system.dirichlet_nodes,
                                       problem.meshes.trace(subdomain, interface).interior)
            for interface in self.INTERFACES[subdomain]
        }
        self._factorization = Factorization(system) if problem.method is SolverMethod.DIRECT else None

    def _dirichlet_values(self, traces: Mapping[InterfaceId, np.ndarray]) -> np.ndarray:
        checked = {}
        columns = 1
        for interface, trace in traces.items():
            if interface not in self._positions:
                raise DimensionError(f"subdomain {self.subdomain} has no incoming interface {interface.value}")
            trace = np.asarray(trace, dtype=float)
            if trace.ndim == 1:
                trace = trace[:, None]
            expected = self.problem.meshes.trace(self.subdomain, interface).size
            if trace.shape[0] != expected:
                raise DimensionError(
                    f"trace on {interface.value} has {trace.shape[0]} values, expected {expected}"
                )
            checked[interface] = trace
            columns = trace.shape[1]

        values = np.repeat(self.system.dirichlet_values[:, None], columns, axis=1)
        for interface, trace in checked.items():
            values[self._positions[interface], :] = trace[1:-1, :]
        return values

    def solve(self, traces: Mapping[InterfaceId, np.ndarray]) -> np.ndarray:
        """Solve with full interface traces (corner values are ignored)"""
        values = self._dirichlet_values(traces)[:, 0]
        if self._factorization is not None:
            u = self._factorization.solve(values)
        else:
            u = solve_linear(self.system.with_values(values), self.problem.method,
                             tol=self.problem.solver_tol).values
        if self.ledger is not None:
            self.ledger.record(self.subdomain)
        return u

    def solve_many(self, traces: Mapping[InterfaceId, np.ndarray]) -> np.ndarray:
        """Stacked solve: each trace is (m+1, k); returns (n_nodes, k)"""
        values = self._dirichlet_values(traces)
        if self._factorization is not None:
            u = self._factorization.solve_many(values)
        else:
            u = np.column_stack([
                solve_linear(self.system.with_values(values[:, j]), self.problem.method,
                             tol=self.problem.solver_tol).values
                for j in range(values.shape[1])
            ])
        if self.ledger is not None:
            self.ledger.record(self.subdomain, values.shape[1])
        return u


def solve_monolithic(problem: PipeProblem) -> FieldVector:
    """Single-domain solve on the whole pipe (inlet g, sides 0, natural outlet)"""
    mesh = problem.meshes.monolithic
    if mesh.ny < 1:
        raise ConfigurationError("monolithic solve needs a two-dimensional mesh (ny >= 1)")
    coeffs = problem.coefficients()
    system = assemble_ard_system(mesh, coeffs)
    system = apply_dirichlet(system, mesh.boundary_nodes(BoundaryTag.SIDE), 0.0)
    inlet = mesh.boundary_nodes(BoundaryTag.INLET)
    system = apply_dirichlet(system, inlet, coeffs.inlet(mesh.nodes[inlet, 1]))
    u = solve_linear(system, problem.method, tol=problem.solver_tol)
    logger.debug("monolithic solve", pe=problem.pe, nodes=mesh.n_nodes)
    return u


class InitKind(str, Enum):
    ZERO = "zero"
    CONSTANT = "constant"
    SCALED_REFERENCE = "scaled-reference"


@dataclass(frozen=True)
class InitRule:
    """Initial fields on the three subdomains"""
    kind: InitKind = InitKind.SCALED_REFERENCE
    value: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, 'kind', InitKind(self.kind))

    def initial_fields(self, problem: PipeProblem,
                       reference: Optional[np.ndarray] = None) -> Dict[int, np.ndarray]:
        meshes = problem.meshes
        kind = InitKind(self.kind)
        if kind is InitKind.SCALED_REFERENCE:
            if reference is None:
                reference = solve_monolithic(problem).values
            return {i: self.value * meshes.restrict(reference, i) for i in SUBDOMAINS}
        fill = 0.0 if kind is InitKind.ZERO else self.value
        return {i: np.full(meshes.subdomain(i).n_nodes, fill) for i in SUBDOMAINS}


def relative_l2_error(values: np.ndarray, reference: np.ndarray, mesh: Mesh) -> float:
    denominator = field_norm(reference, mesh, NormKind.L2)
    if denominator == 0.0:
        raise UndefinedErrorNorm(f"reference field has zero L2 norm on mesh {mesh.mesh_id}")
    return field_norm(np.asarray(values) - np.asarray(reference), mesh, NormKind.L2) / denominator


@dataclass
class SchwarzReport:
    """Per-sweep record of a (full, perturbed or reduced) Schwarz run"""
    pe: float = float('nan')
    norm_kind: NormKind = NormKind.H1
    errors_l2: List[float] = field(default_factory=list)
    errors_h1: List[float] = field(default_factory=list)
    relerrs: List[Tuple[float, float, float]] = field(default_factory=list)
    fields: Dict[int, np.ndarray] = field(default_factory=dict)
    converged: bool = False
    mu: float = 0.0
    plateau: Optional[float] = None
    ratio_cutoff: float = 0.0
    solve_counts: Dict[int, int] = field(default_factory=dict)
    omega2_solves: int = 0
    extrapolated: bool = False
    warnings: List[str] = field(default_factory=list)

    @property
    def errors(self) -> List[float]:
        return self.errors_h1 if NormKind(self.norm_kind) is NormKind.H1 else self.errors_l2

    @property
    def sweeps(self) -> int:
        return len(self.errors)

    @property
    def ratios(self) -> List[float]:
        """rho_k = e_k / e_{k+1}, reported while e_{k+1} stays above the cutoff"""
        errors = self.errors
        ratios = []
        for k in range(len(errors) - 1):
            if errors[k + 1] <= self.ratio_cutoff or errors[k + 1] == 0.0:
                break
            ratios.append(errors[k] / errors[k + 1])
        return ratios

    @property
    def final_relerrs(self) -> Tuple[float, float, float]:
        return self.relerrs[-1] if self.relerrs else (float('nan'),) * 3

    def iteration_rows(self) -> List[Dict[str, float]]:
        ratios = self.ratios
        rows = []
        for k in range(self.sweeps):
            rel = self.relerrs[k] if k < len(self.relerrs) else (float('nan'),) * 3
            rows.append({
                'sweep': k + 1,
                'e_L2': self.errors_l2[k],
                'e_H1': self.errors_h1[k],
                'ratio': ratios[k] if k < len(ratios) else float('nan'),
                'relerr_omega1': rel[0],
                'relerr_omega2': rel[1],
                'relerr_omega3': rel[2],
                'mu': self.mu,
            })
        return rows


def plateau_level(errors: Sequence[float]) -> Optional[float]:
    """Median of the last third of the sweeps (at least three)"""
    if len(errors) < 3:
        return None
    tail = max(3, len(errors) // 3)
    return float(np.median(np.asarray(errors[-tail:])))


def _relative_triplet(fields: Mapping[int, np.ndarray], reference: Optional[np.ndarray],
                      meshes: DecomposedMeshes) -> Tuple[float, float, float]:
    out = []
    for i in SUBDOMAINS:
        if reference is None or i not in fields:
            out.append(float('nan'))
            continue
        try:
            out.append(relative_l2_error(fields[i], meshes.restrict(reference, i), meshes.subdomain(i)))
        except UndefinedErrorNorm:
            out.append(float('nan'))
    return tuple(out)


def _iterate(problem: PipeProblem, init: InitRule, tol: float, max_sweeps: int,
             norm_kind: NormKind, reference: Optional[np.ndarray], mu: float,
             seed: Optional[int], parallel: bool, ledger: Optional[SolveLedger],
             initial_fields: Optional[Mapping[int, np.ndarray]] = None,
             on_sweep: Optional[SweepHook] = None) -> SchwarzReport:
    if tol <= 0:
        raise ConfigurationError(f"tolerance must be positive, got {tol}")
    if mu < 0:
        raise ConfigurationError(f"perturbation magnitude must be non-negative, got {mu}")
    meshes = problem.meshes
    ledger = ledger or SolveLedger()
    solvers = {i: SubdomainSolver(problem, i, ledger) for i in SUBDOMAINS}
    if init.kind is InitKind.SCALED_REFERENCE and reference is None and initial_fields is None:
        reference = solve_monolithic(problem).values
    if initial_fields is not None:
        u = {i: np.asarray(initial_fields[i], dtype=float).copy() for i in SUBDOMAINS}
    else:
        u = init.initial_fields(problem, reference)

    rng = np.random.default_rng(seed)

    def transmit(trace: np.ndarray) -> np.ndarray:
        if mu == 0.0:
            return trace
        return trace * (1.0 + mu * rng.uniform(-1.0, 1.0, size=trace.shape))

    G = InterfaceId
    report = SchwarzReport(pe=problem.pe, norm_kind=NormKind(norm_kind), mu=mu)
    executor = ThreadPoolExecutor(max_workers=2) if parallel else None
    run_logger = logger.bind(pe=problem.pe, mu=mu)
    try:
        for sweep in range(1, max_sweeps + 1):
            t1 = transmit(u[2][meshes.trace(2, G.GAMMA_1OUT).nodes])
            t3 = transmit(u[2][meshes.trace(2, G.GAMMA_3IN).nodes])
            if executor is not None:
                f1 = executor.submit(solvers[1].solve, {G.GAMMA_1OUT: t1})
                f3 = executor.submit(solvers[3].solve, {G.GAMMA_3IN: t3})
                new1, new3 = f1.result(), f3.result()
            else:
                new1 = solvers[1].solve({G.GAMMA_1OUT: t1})
                new3 = solvers[3].solve({G.GAMMA_3IN: t3})
            new2 = solvers[2].solve({
                G.GAMMA_2IN: transmit(new1[meshes.trace(1, G.GAMMA_2IN).nodes]),
                G.GAMMA_2OUT: transmit(new3[meshes.trace(3, G.GAMMA_2OUT).nodes]),
            })
            new = {1: new1, 2: new2, 3: new3}
            if on_sweep is not None:
                on_sweep(sweep, new)

            report.errors_l2.append(sum(field_norm(new[i] - u[i], meshes.subdomain(i), NormKind.L2)
                                        for i in SUBDOMAINS))
            report.errors_h1.append(sum(field_norm(new[i] - u[i], meshes.subdomain(i), NormKind.H1)
                                        for i in SUBDOMAINS))
            u = new
            if reference is not None:
                report.relerrs.append(_relative_triplet(u, reference, meshes))
            run_logger.debug("schwarz sweep", sweep=sweep, error=report.errors[-1])
            if report.errors[-1] < tol:
                report.converged = True
                break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    scale = sum(field_norm(u[i], meshes.subdomain(i), report.norm_kind) for i in SUBDOMAINS)
    report.ratio_cutoff = 10.0 * np.finfo(float).eps * scale
    report.fields = u
    report.solve_counts = ledger.snapshot()
    report.omega2_solves = ledger.omega2_solves
    report.plateau = plateau_level(report.errors)
    if not report.converged:
        report.warnings.append(f"no convergence to tol={tol:g} within {max_sweeps} sweeps")
        run_logger.warning("schwarz not converged", sweeps=max_sweeps, tol=tol, error=report.errors[-1])
    else:
        run_logger.info("schwarz converged", sweeps=report.sweeps, error=report.errors[-1])
    return report


def run_full_schwarz(problem: PipeProblem, init: Optional[InitRule] = None, tol: float = 1e-6,
                     max_sweeps: int = 200, norm_kind: NormKind = NormKind.H1,
                     reference: Optional[np.ndarray] = None, parallel: bool = False,
                     ledger: Optional[SolveLedger] = None,
                     initial_fields: Optional[Mapping[int, np.ndarray]] = None,
                     on_sweep: Optional[SweepHook] = None) -> SchwarzReport:
    """
    Alternating Schwarz until the summed consecutive-iterate norm drops below tol.

    Non-convergence within max_sweeps is reported through `converged`.
    """
    return _iterate(problem, init or InitRule(), tol, max_sweeps, norm_kind, reference,
                    0.0, None, parallel, ledger, initial_fields, on_sweep)


def run_perturbed_schwarz(problem: PipeProblem, init: Optional[InitRule] = None, tol: float = 1e-12,
                          max_sweeps: int = 60, mu: float = 1e-4, seed: int = 0,
                          norm_kind: NormKind = NormKind.H1,
                          reference: Optional[np.ndarray] = None,
                          parallel: bool = False) -> SchwarzReport:
    """Schwarz with each transmitted trace scaled nodewise by (1 + mu r), r ~ U[-1, 1]"""
    return _iterate(problem, init or InitRule(), tol, max_sweeps, norm_kind, reference,
                    float(mu), seed, parallel, None)


@dataclass(frozen=True)
class ContractionEstimate:
    """Fitted per-sweep contraction factor"""
    rho_fit: float
    step_factors: Tuple[float, ...]

    @property
    def n_steps(self) -> int:
        return len(self.step_factors)


def estimate_contraction(report: Union[SchwarzReport, Sequence[float]],
                         skip: int = 0) -> ContractionEstimate:
    """Geometric mean of e_{k+1}/e_k over the errors above the ratio cutoff"""
    if isinstance(report, SchwarzReport):
        errors, cutoff = list(report.errors), report.ratio_cutoff
    else:
        errors, cutoff = [float(e) for e in report], 0.0
    errors = errors[skip:]

    valid = []
    for e in errors:
        if not np.isfinite(e) or e <= cutoff or e <= 0.0:
            break
        valid.append(e)
    if len(valid) < 3:
        raise EstimationError(
            f"need at least 3 errors above the cutoff {cutoff:.3g}, got {len(valid)}"
        )
    factors = np.asarray(valid[1:]) / np.asarray(valid[:-1])
    rho = float(np.exp(np.mean(np.log(factors))))
    return ContractionEstimate(rho_fit=rho, step_factors=tuple(float(f) for f in factors))
