"""
Tests for the full-order Schwarz driver
"""

import numpy as np
import pytest

from hub.errors import ConfigurationError, DimensionError, EstimationError, UndefinedErrorNorm
from numerics.fem_core import NormKind, SolverMethod
from numerics.geometry_mesh import BoundaryTag, InterfaceId
from numerics.schwarz import (
    InitKind,
    InitRule,
    InletProfile,
    PipeProblem,
    SchwarzReport,
    SolveLedger,
    SubdomainSolver,
    estimate_contraction,
    plateau_level,
    relative_l2_error,
    run_full_schwarz,
    run_perturbed_schwarz,
    solve_monolithic,
)


@pytest.fixture
def reference(small_problem):
    return solve_monolithic(small_problem).values


class TestMonolithic:
    """Reference solve on the whole pipe"""

    def test_zero_data_gives_zero(self, small_meshes):
        problem = PipeProblem(meshes=small_meshes, pe=2.0,
                              inlet=InletProfile(kind="constant", peak=0.0, width=1.0))
        assert np.all(solve_monolithic(problem).values == 0.0)

    def test_inlet_and_sides(self, small_problem, reference):
        mesh = small_problem.meshes.monolithic
        inlet = mesh.boundary_nodes(BoundaryTag.INLET)
        assert np.allclose(reference[inlet], small_problem.inlet(mesh.nodes[inlet, 1]))
        assert np.all(reference[mesh.boundary_nodes(BoundaryTag.SIDE)] == 0.0)
        assert np.all(np.isfinite(reference))

    def test_peclet_of_axial_velocity(self, small_problem):
        assert small_problem.peclet == pytest.approx(np.hypot(2.0, 0.2))
        assert small_problem.with_pe(5.0).pe == 5.0

    def test_unknown_inlet_kind(self):
        with pytest.raises(ConfigurationError):
            InletProfile(kind="plug")


class TestSubdomainSolver:
    """Dirichlet solves with interface data"""

    def test_trace_length_checked(self, small_problem):
        solver = SubdomainSolver(small_problem, 1)
        with pytest.raises(DimensionError):
            solver.solve({InterfaceId.GAMMA_1OUT: np.zeros(3)})

    def test_unknown_interface(self, small_problem):
        solver = SubdomainSolver(small_problem, 3)
        with pytest.raises(DimensionError):
            solver.solve({InterfaceId.GAMMA_2IN: np.zeros(5)})

    def test_bad_subdomain(self, small_problem):
        with pytest.raises(ConfigurationError):
            SubdomainSolver(small_problem, 4)

    def test_solve_many_matches_single(self, small_problem, rng):
        ledger = SolveLedger()
        solver = SubdomainSolver(small_problem, 2, ledger)
        t_in, t_out = rng.normal(size=(5, 3)), rng.normal(size=(5, 3))
        stacked = solver.solve_many({InterfaceId.GAMMA_2IN: t_in, InterfaceId.GAMMA_2OUT: t_out})
        for k in range(3):
            single = solver.solve({InterfaceId.GAMMA_2IN: t_in[:, k], InterfaceId.GAMMA_2OUT: t_out[:, k]})
            assert np.allclose(stacked[:, k], single, atol=1e-12)
        assert ledger.omega2_solves == 6

    def test_interior_interface_data_imposed(self, small_problem):
        solver = SubdomainSolver(small_problem, 3)
        trace = np.array([9.0, 1.0, 2.0, 3.0, 9.0])
        u = solver.solve({InterfaceId.GAMMA_3IN: trace})
        nodes = small_problem.meshes.trace(3, InterfaceId.GAMMA_3IN).nodes
        # corners stay on the side walls
        assert np.array_equal(u[nodes], [0.0, 1.0, 2.0, 3.0, 0.0])

    def test_iterative_method(self, small_meshes):
        direct = PipeProblem(meshes=small_meshes, pe=2.0, inlet=InletProfile(width=1.0))
        iterative = PipeProblem(meshes=small_meshes, pe=2.0, inlet=InletProfile(width=1.0),
                                method=SolverMethod.BICGSTAB, solver_tol=1e-12)
        trace = {InterfaceId.GAMMA_1OUT: np.linspace(0, 1, 5)}
        assert np.allclose(SubdomainSolver(direct, 1).solve(trace),
                           SubdomainSolver(iterative, 1).solve(trace), atol=1e-8)


class TestFullSchwarz:
    """Alternating iteration on three subdomains"""

    def test_fixed_point(self, small_problem, reference):
        report = run_full_schwarz(small_problem, InitRule(InitKind.SCALED_REFERENCE, 1.0),
                                  tol=1e-8, reference=reference)
        assert report.converged
        assert report.sweeps == 1
        assert report.errors[0] < 1e-8

    def test_converges_to_monolithic(self, small_problem, reference):
        report = run_full_schwarz(small_problem, InitRule(), tol=1e-10, reference=reference)
        assert report.converged
        assert max(report.final_relerrs) < 1e-7
        assert report.errors[-1] < report.errors[0]

    def test_interface_consistency(self, small_problem, reference):
        report = run_full_schwarz(small_problem, InitRule(InitKind.ZERO), tol=1e-6, reference=reference)
        meshes = small_problem.meshes
        u1, u2, u3 = report.fields[1], report.fields[2], report.fields[3]
        assert np.array_equal(u2[meshes.trace(2, InterfaceId.GAMMA_2IN).nodes],
                              u1[meshes.trace(1, InterfaceId.GAMMA_2IN).nodes])
        assert np.array_equal(u2[meshes.trace(2, InterfaceId.GAMMA_2OUT).nodes],
                              u3[meshes.trace(3, InterfaceId.GAMMA_2OUT).nodes])
        inlet = meshes.omega1.boundary_nodes(BoundaryTag.INLET)
        assert np.allclose(u1[inlet], small_problem.inlet(meshes.omega1.nodes[inlet, 1]))

    def test_contraction_below_one(self, small_problem, reference):
        report = run_full_schwarz(small_problem, InitRule(InitKind.ZERO), tol=1e-12, reference=reference)
        estimate = estimate_contraction(report)
        assert 0.0 < estimate.rho_fit < 1.0
        assert estimate.n_steps >= 2

    def test_parallel_matches_serial(self, small_problem, reference):
        serial = run_full_schwarz(small_problem, tol=1e-8, reference=reference)
        parallel = run_full_schwarz(small_problem, tol=1e-8, reference=reference, parallel=True)
        assert serial.errors == parallel.errors
        for i in (1, 2, 3):
            assert np.array_equal(serial.fields[i], parallel.fields[i])

    def test_solve_counts(self, small_problem, reference):
        report = run_full_schwarz(small_problem, tol=1e-8, reference=reference)
        assert report.solve_counts == {1: report.sweeps, 2: report.sweeps, 3: report.sweeps}
        assert report.omega2_solves == report.sweeps

    def test_not_converged_is_flagged(self, small_problem, reference):
        report = run_full_schwarz(small_problem, InitRule(InitKind.ZERO), tol=1e-30,
                                  max_sweeps=2, reference=reference)
        assert not report.converged
        assert report.sweeps == 2
        assert report.warnings

    def test_non_positive_tol(self, small_problem):
        with pytest.raises(ConfigurationError):
            run_full_schwarz(small_problem, tol=0.0)

    def test_on_sweep_hook(self, small_problem, reference):
        seen = []
        report = run_full_schwarz(small_problem, tol=1e-8, reference=reference,
                                  on_sweep=lambda k, fields: seen.append((k, sorted(fields))))
        assert [k for k, _ in seen] == list(range(1, report.sweeps + 1))
        assert seen[0][1] == [1, 2, 3]

    def test_iteration_rows(self, small_problem, reference):
        report = run_full_schwarz(small_problem, InitRule(InitKind.ZERO), tol=1e-8,
                                  norm_kind=NormKind.L2, reference=reference)
        rows = report.iteration_rows()
        assert len(rows) == report.sweeps
        assert rows[0]['sweep'] == 1 and rows[0]['mu'] == 0.0
        assert report.errors == report.errors_l2


class TestPerturbedSchwarz:
    """Multiplicative noise on the transmitted traces"""

    def test_zero_mu_matches_full(self, small_problem, reference):
        full = run_full_schwarz(small_problem, tol=1e-12, max_sweeps=30, reference=reference)
        perturbed = run_perturbed_schwarz(small_problem, tol=1e-12, max_sweeps=30, mu=0.0,
                                          reference=reference)
        assert full.errors == perturbed.errors

    def test_negative_mu(self, small_problem):
        with pytest.raises(ConfigurationError):
            run_perturbed_schwarz(small_problem, mu=-1.0)

    def test_seeded(self, small_problem, reference):
        a = run_perturbed_schwarz(small_problem, mu=1e-3, seed=7, max_sweeps=10, reference=reference)
        b = run_perturbed_schwarz(small_problem, mu=1e-3, seed=7, max_sweeps=10, reference=reference)
        assert a.errors == b.errors

    def test_plateau_scales_with_mu(self, small_problem, reference):
        small = run_perturbed_schwarz(small_problem, tol=1e-16, max_sweeps=40, mu=1e-6,
                                      reference=reference)
        large = run_perturbed_schwarz(small_problem, tol=1e-16, max_sweeps=40, mu=1e-4,
                                      reference=reference)
        assert small.plateau is not None and large.plateau is not None
        assert 10.0 <= large.plateau / small.plateau <= 1000.0
        assert small.mu == 1e-6


class TestContraction:
    """Fitted contraction from error sequences"""

    def test_decade_decay(self):
        assert estimate_contraction([1.0, 0.1, 0.01, 0.001]).rho_fit == pytest.approx(0.1)

    def test_halving(self):
        estimate = estimate_contraction([1.0, 0.5, 0.26, 0.125])
        assert estimate.rho_fit == pytest.approx(0.5, rel=1e-12)
        assert estimate.step_factors[1] == pytest.approx(0.52)

    def test_too_few_values(self):
        with pytest.raises(EstimationError):
            estimate_contraction([1.0, 0.1])

    def test_stops_at_cutoff(self):
        report = SchwarzReport(errors_h1=[1.0, 0.1, 0.01, 1e-20, 1e-21], ratio_cutoff=1e-15)
        assert estimate_contraction(report).n_steps == 2
        assert report.ratios == pytest.approx([10.0, 10.0])

    def test_skip(self):
        estimate = estimate_contraction([5.0, 1.0, 0.1, 0.01, 0.001], skip=1)
        assert estimate.rho_fit == pytest.approx(0.1)


class TestHelpers:
    """Plateau, init rules and relative errors"""

    def test_plateau_level(self):
        assert plateau_level([1.0, 2.0]) is None
        assert plateau_level([9.0, 8.0, 7.0, 1.0, 2.0, 3.0]) == pytest.approx(2.0)

    def test_zero_init(self, small_problem):
        fields = InitRule(InitKind.ZERO).initial_fields(small_problem)
        assert all(np.all(v == 0.0) for v in fields.values())

    def test_scaled_reference_init(self, small_problem, reference):
        fields = InitRule(InitKind.SCALED_REFERENCE, 0.5).initial_fields(small_problem, reference)
        assert np.allclose(fields[2], 0.5 * small_problem.meshes.restrict(reference, 2))

    def test_relative_error_of_zero_reference(self, small_meshes):
        mesh = small_meshes.omega1
        with pytest.raises(UndefinedErrorNorm):
            relative_l2_error(np.ones(mesh.n_nodes), np.zeros(mesh.n_nodes), mesh)
