"""
Tests for the reduced Schwarz iteration
"""

import math

import numpy as np
import pytest

from hub.errors import CompatibilityError, ConfigurationError
from numerics.geometry_mesh import InterfaceId, MeshResolution, build_decomposed_meshes
from numerics.reduced_schwarz import (
    ExactTauOracle,
    TraceMap,
    exact_tau_oracle,
    relative_errors,
    run_reduced_schwarz,
    summary_row,
)
from numerics.schwarz import (
    InletProfile,
    PipeProblem,
    SolveLedger,
    SubdomainSolver,
    run_full_schwarz,
    solve_monolithic,
)
from rom.trace_rom import OfflineSettings, RomTraceMap, run_offline


@pytest.fixture
def reference(small_problem):
    return solve_monolithic(small_problem).values


class TestOracleIteration:
    """Reduced iteration with the exact trace map"""

    def test_matches_full_schwarz_sweep_by_sweep(self, small_problem, reference):
        meshes = small_problem.meshes
        u1 = 0.5 * meshes.restrict(reference, 1)
        u3 = 0.5 * meshes.restrict(reference, 3)
        u2 = SubdomainSolver(small_problem, 2).solve({
            InterfaceId.GAMMA_2IN: u1[meshes.trace(1, InterfaceId.GAMMA_2IN).nodes],
            InterfaceId.GAMMA_2OUT: u3[meshes.trace(3, InterfaceId.GAMMA_2OUT).nodes],
        })
        full = run_full_schwarz(small_problem, tol=1e-300, max_sweeps=4,
                                initial_fields={1: u1, 2: u2, 3: u3})
        reduced = run_reduced_schwarz(small_problem, exact_tau_oracle(small_problem), eps_stop=1e-300,
                                      max_sweeps=4, initial_fields={1: u1, 3: u3})
        assert reduced.sweeps == full.sweeps == 4
        for i in (1, 3):
            assert np.allclose(reduced.fields[i], full.fields[i], rtol=0.0, atol=1e-12)

    def test_converges_to_monolithic(self, small_problem, reference):
        report = run_reduced_schwarz(small_problem, exact_tau_oracle(small_problem), eps_stop=1e-10,
                                     reference=reference)
        assert report.converged
        rel1, rel2, rel3 = report.final_relerrs
        assert rel1 < 1e-6 and rel3 < 1e-6
        assert math.isnan(rel2)

    def test_counts_oracle_solves(self, small_problem):
        report = run_reduced_schwarz(small_problem, exact_tau_oracle(small_problem), eps_stop=1e-8)
        assert report.omega2_solves == report.sweeps
        assert report.solve_counts[1] == report.sweeps
        assert report.solve_counts[3] == report.sweeps

    def test_parallel_matches_serial(self, small_problem):
        serial = run_reduced_schwarz(small_problem, exact_tau_oracle(small_problem), max_sweeps=5)
        parallel = run_reduced_schwarz(small_problem, exact_tau_oracle(small_problem), max_sweeps=5,
                                       parallel=True)
        assert serial.errors == parallel.errors
        for i in (1, 3):
            assert np.array_equal(serial.fields[i], parallel.fields[i])

    def test_sweep_hook_sees_outer_fields(self, small_problem):
        seen = []
        run_reduced_schwarz(small_problem, exact_tau_oracle(small_problem), max_sweeps=3,
                            eps_stop=1e-300, on_sweep=lambda k, fields: seen.append((k, sorted(fields))))
        assert seen == [(1, [1, 3]), (2, [1, 3]), (3, [1, 3])]

    def test_non_convergence_is_reported(self, small_problem):
        report = run_reduced_schwarz(small_problem, exact_tau_oracle(small_problem), eps_stop=1e-300,
                                     max_sweeps=2)
        assert not report.converged
        assert any("no convergence" in w for w in report.warnings)


class TestRomIteration:
    """Reduced iteration with a trained artifact"""

    def test_no_omega2_solves(self, small_offline, small_meshes, reference):
        problem = PipeProblem(meshes=small_meshes, pe=2.0, inlet=InletProfile(width=1.0))
        report = run_reduced_schwarz(problem, small_offline.rom, max_sweeps=30, reference=reference)
        assert report.omega2_solves == 0
        assert report.solve_counts[2] == 0
        assert not report.extrapolated
        rel1, _, rel3 = report.final_relerrs
        assert np.isfinite(rel1) and np.isfinite(rel3)

    def test_trace_map_evaluated_once_per_sweep(self, small_offline, small_meshes):
        problem = PipeProblem(meshes=small_meshes, pe=2.0, inlet=InletProfile(width=1.0))
        trace_map = RomTraceMap(small_offline.rom, 2.0, small_meshes, problem)
        report = run_reduced_schwarz(problem, trace_map, max_sweeps=6, eps_stop=1e-300)
        assert trace_map.evaluations == report.sweeps == 6

    @pytest.mark.slow
    def test_cost_independent_of_omega2_lattice(self, small_offline, small_meshes):
        # axial refinement only: interface node counts stay fixed
        fine_meshes = build_decomposed_meshes(small_meshes.decomposition, MeshResolution(24, 32, 24, 4))
        assert fine_meshes.omega2.n_nodes > small_meshes.omega2.n_nodes
        fine = run_offline(PipeProblem(meshes=fine_meshes, pe=1.0, inlet=InletProfile(width=1.0)),
                           OfflineSettings(d_train=[1.0, 2.0, 3.0], d_tilde=[1.5, 2.5],
                                           grid_counts={InterfaceId.GAMMA_2IN: [2, 1],
                                                        InterfaceId.GAMMA_2OUT: [2, 1]},
                                           n_hidden=4, max_iter=50, val_fraction=0.0))

        counts = []
        for offline, meshes in ((small_offline, small_meshes), (fine, fine_meshes)):
            for r in InterfaceId:
                assert offline.rom.bases[r].n_nodes == meshes.trace(2, r).size == 5
            problem = PipeProblem(meshes=meshes, pe=2.0, inlet=InletProfile(width=1.0))
            trace_map = RomTraceMap(offline.rom, 2.0, meshes, problem)
            report = run_reduced_schwarz(problem, trace_map, max_sweeps=6, eps_stop=1e-300)
            counts.append((trace_map.evaluations, report.sweeps, report.omega2_solves))
        assert counts[0] == counts[1] == (6, 6, 0)

    def test_extrapolated_pe_warns(self, small_offline, small_meshes):
        problem = PipeProblem(meshes=small_meshes, pe=4.0, inlet=InletProfile(width=1.0))
        report = run_reduced_schwarz(problem, small_offline.rom, max_sweeps=3)
        assert report.extrapolated
        assert any("outside the training range" in w for w in report.warnings)

    def test_incompatible_problem(self, small_offline, small_meshes):
        problem = PipeProblem(meshes=small_meshes, pe=2.0, diffusion=0.5, inlet=InletProfile(width=1.0))
        with pytest.raises(CompatibilityError):
            run_reduced_schwarz(problem, small_offline.rom, max_sweeps=3)


class TestInputs:
    """Argument checks and helpers"""

    def test_eps_stop_must_be_positive(self, small_problem):
        with pytest.raises(ConfigurationError):
            run_reduced_schwarz(small_problem, exact_tau_oracle(small_problem), eps_stop=0.0)

    def test_rom_must_be_callable(self, small_problem):
        with pytest.raises(ConfigurationError):
            run_reduced_schwarz(small_problem, "rom.json")

    def test_trace_map_protocol(self, small_problem, small_offline):
        assert isinstance(exact_tau_oracle(small_problem), TraceMap)
        assert isinstance(RomTraceMap(small_offline.rom, 2.0), TraceMap)

    def test_oracle_shares_ledger(self, small_problem):
        ledger = SolveLedger()
        oracle = ExactTauOracle(small_problem, ledger)
        n = small_problem.meshes.trace(2, InterfaceId.GAMMA_2IN).size
        t_1out, t_3in = oracle(np.zeros(n), np.zeros(n))
        assert t_1out.shape == t_3in.shape == (n,)
        assert ledger.omega2_solves == 1

    def test_relative_errors_of_reference(self, small_problem, reference):
        meshes = small_problem.meshes
        fields = {i: meshes.restrict(reference, i) for i in (1, 3)}
        assert relative_errors(fields, reference, meshes) == (0.0, 0.0)

    def test_summary_row(self, small_problem, reference):
        report = run_reduced_schwarz(small_problem, exact_tau_oracle(small_problem), reference=reference)
        row = summary_row(report)
        assert set(row) == {'Pe', 'sweeps', 'relL2_omega1', 'relL2_omega3', 'extrapolated',
                            'converged', 'omega2_solves'}
        assert row['Pe'] == 2.0
        assert row['extrapolated'] is False
