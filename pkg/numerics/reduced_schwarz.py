"""
Online reduced Schwarz

Alternates between Omega1 and Omega3 only. The traces of u1 on Gamma_2in and
u3 on Gamma_2out go through a trace map (the trained reduced map, or the
exact Omega2 solve when checking against the oracle) whose outputs become
the Dirichlet data on Gamma_1out and Gamma_3in.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Protocol, Tuple, Union, runtime_checkable

import numpy as np

from hub.errors import ConfigurationError
from hub.logger import get_logger
from numerics.fem_core import NormKind, field_norm
from numerics.geometry_mesh import DecomposedMeshes, InterfaceId
from numerics.schwarz import (
    InitKind,
    InitRule,
    PipeProblem,
    SchwarzReport,
    SolveLedger,
    SubdomainSolver,
    SweepHook,
    plateau_level,
    relative_l2_error,
    solve_monolithic,
)
from rom.trace_rom import RomArtifact, RomTraceMap


logger = get_logger("reduced_schwarz")

OUTER = (1, 3)


@runtime_checkable
class TraceMap(Protocol):
    """(t_2in, t_2out) -> (t_1out, t_3in) on full interface traces"""

    solves_omega2: bool

    def __call__(self, t_2in: np.ndarray, t_2out: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ...


class ExactTauOracle:
    """Exact trace map: one Omega2 Dirichlet solve per evaluation"""

    solves_omega2 = True
    extrapolated = False

    def __init__(self, problem: PipeProblem, ledger: Optional[SolveLedger] = None):
        self.problem = problem
        self.ledger = ledger or SolveLedger()
        self._solver = SubdomainSolver(problem, 2, self.ledger)
        meshes = problem.meshes
        self._out = (meshes.trace(2, InterfaceId.GAMMA_1OUT).nodes,
                     meshes.trace(2, InterfaceId.GAMMA_3IN).nodes)

    @property
    def omega2_solves(self) -> int:
        return self.ledger.omega2_solves

    def __call__(self, t_2in: np.ndarray, t_2out: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        u2 = self._solver.solve({InterfaceId.GAMMA_2IN: t_2in, InterfaceId.GAMMA_2OUT: t_2out})
        return u2[self._out[0]], u2[self._out[1]]


def exact_tau_oracle(problem: PipeProblem, ledger: Optional[SolveLedger] = None) -> ExactTauOracle:
    return ExactTauOracle(problem, ledger)


@dataclass
class ReducedState:
    """Omega1/Omega3 iterates and the traces last transmitted to them"""
    u1: np.ndarray
    u3: np.ndarray
    t_1out: Optional[np.ndarray] = None
    t_3in: Optional[np.ndarray] = None
    sweep: int = 0
    norms: List[float] = field(default_factory=list)


def relative_errors(fields: Mapping[int, np.ndarray], reference: np.ndarray,
                    meshes: DecomposedMeshes) -> Tuple[float, float]:
    """Relative L2 errors on Omega1 and Omega3 against the monolithic reference"""
    return tuple(
        relative_l2_error(fields[i], meshes.restrict(reference, i), meshes.subdomain(i)) for i in OUTER
    )


def _resolve_trace_map(problem: PipeProblem, rom) -> TraceMap:
    if isinstance(rom, RomArtifact):
        return RomTraceMap(rom, problem.pe, problem.meshes, problem)
    if not callable(rom):
        raise ConfigurationError(f"expected a ROM artifact or a trace map, got {type(rom).__name__}")
    return rom


def run_reduced_schwarz(problem: PipeProblem, rom, init: Optional[InitRule] = None,
                        eps_stop: float = 1e-9, max_sweeps: int = 200,
                        norm_kind: NormKind = NormKind.H1,
                        reference: Optional[np.ndarray] = None,
                        initial_fields: Optional[Mapping[int, np.ndarray]] = None,
                        parallel: bool = False,
                        on_sweep: Optional[SweepHook] = None) -> SchwarzReport:
    """
    Reduced iteration with `rom` (a RomArtifact or any TraceMap).

    Stops when the summed Omega1/Omega3 consecutive-iterate norm drops below
    eps_stop. The returned report counts Omega2 interior solves; it is zero
    whenever the trace map does not solve Omega2.
    """
    if eps_stop <= 0:
        raise ConfigurationError(f"eps_stop must be positive, got {eps_stop}")
    init = init or InitRule()
    meshes = problem.meshes
    trace_map = _resolve_trace_map(problem, rom)

    ledger = SolveLedger()
    solvers = {i: SubdomainSolver(problem, i, ledger) for i in OUTER}
    if reference is None and init.kind is InitKind.SCALED_REFERENCE and initial_fields is None:
        reference = solve_monolithic(problem).values
    if initial_fields is not None:
        start = {i: np.asarray(initial_fields[i], dtype=float).copy() for i in OUTER}
    else:
        start = init.initial_fields(problem, reference)
    state = ReducedState(u1=start[1], u3=start[3])

    idx_2in = meshes.trace(1, InterfaceId.GAMMA_2IN).nodes
    idx_2out = meshes.trace(3, InterfaceId.GAMMA_2OUT).nodes
    report = SchwarzReport(pe=problem.pe, norm_kind=NormKind(norm_kind),
                           extrapolated=bool(getattr(trace_map, 'extrapolated', False)))
    if report.extrapolated:
        report.warnings.append(f"Pe={problem.pe!r} lies outside the training range")
    executor = ThreadPoolExecutor(max_workers=2) if parallel else None
    run_logger = logger.bind(pe=problem.pe)
    try:
        for sweep in range(1, max_sweeps + 1):
            t_1out, t_3in = trace_map(state.u1[idx_2in], state.u3[idx_2out])
            if executor is not None:
                f1 = executor.submit(solvers[1].solve, {InterfaceId.GAMMA_1OUT: t_1out})
                f3 = executor.submit(solvers[3].solve, {InterfaceId.GAMMA_3IN: t_3in})
                new1, new3 = f1.result(), f3.result()
            else:
                new1 = solvers[1].solve({InterfaceId.GAMMA_1OUT: t_1out})
                new3 = solvers[3].solve({InterfaceId.GAMMA_3IN: t_3in})
            if on_sweep is not None:
                on_sweep(sweep, {1: new1, 3: new3})

            diffs = {1: new1 - state.u1, 3: new3 - state.u3}
            report.errors_l2.append(sum(field_norm(diffs[i], meshes.subdomain(i), NormKind.L2) for i in OUTER))
            report.errors_h1.append(sum(field_norm(diffs[i], meshes.subdomain(i), NormKind.H1) for i in OUTER))
            state = ReducedState(u1=new1, u3=new3, t_1out=np.asarray(t_1out), t_3in=np.asarray(t_3in),
                                 sweep=sweep, norms=state.norms + [report.errors_h1[-1]])
            if reference is not None:
                rel1, rel3 = relative_errors({1: new1, 3: new3}, reference, meshes)
                report.relerrs.append((rel1, float('nan'), rel3))
            run_logger.debug("reduced sweep", sweep=sweep, error=report.errors[-1])
            if report.errors[-1] < eps_stop:
                report.converged = True
                break
    finally:
        if executor is not None:
            executor.shutdown(wait=True)

    fields: Dict[int, np.ndarray] = {1: state.u1, 3: state.u3}
    scale = sum(field_norm(fields[i], meshes.subdomain(i), report.norm_kind) for i in OUTER)
    report.ratio_cutoff = 10.0 * np.finfo(float).eps * scale
    report.fields = fields
    report.solve_counts = ledger.snapshot()
    report.omega2_solves = ledger.omega2_solves + int(getattr(trace_map, 'omega2_solves', 0))
    report.plateau = plateau_level(report.errors)
    if not report.converged:
        report.warnings.append(f"no convergence to eps_stop={eps_stop:g} within {max_sweeps} sweeps")
        run_logger.warning("reduced schwarz not converged", sweeps=max_sweeps, error=report.errors[-1])
    else:
        run_logger.info("reduced schwarz converged", sweeps=report.sweeps, error=report.errors[-1],
                        omega2_solves=report.omega2_solves)
    return report


def summary_row(report: SchwarzReport) -> Dict[str, Union[float, int, bool]]:
    """Pe, sweeps, relL2 on Omega1/Omega3 and the extrapolation flag"""
    rel1, _, rel3 = report.final_relerrs
    return {
        'Pe': report.pe,
        'sweeps': report.sweeps,
        'relL2_omega1': rel1,
        'relL2_omega3': rel3,
        'extrapolated': report.extrapolated,
        'converged': report.converged,
        'omega2_solves': report.omega2_solves,
    }
