"""
Shared fixtures: a small pipe (H=1, L=8, cuts 2/3/5/6) on a 0.25 lattice
"""

import numpy as np
import pytest

from numerics.geometry_mesh import (
    InterfaceId,
    MeshResolution,
    PipeGeometry,
    build_decomposed_meshes,
    build_pipe_decomposition,
)
from numerics.schwarz import InletProfile, PipeProblem
from rom.trace_rom import OfflineSettings, run_offline


SMALL_GEOMETRY = PipeGeometry(width=1.0, length=8.0, cuts=(2.0, 3.0, 5.0, 6.0))
SMALL_RESOLUTION = MeshResolution(nx1=12, nx2=16, nx3=12, ny=4)


@pytest.fixture(scope="session")
def small_geometry():
    return SMALL_GEOMETRY


@pytest.fixture(scope="session")
def small_meshes():
    return build_decomposed_meshes(build_pipe_decomposition(SMALL_GEOMETRY), SMALL_RESOLUTION)


@pytest.fixture
def small_problem(small_meshes):
    """Pipe problem with Pe=2 on the small lattice"""
    return PipeProblem(meshes=small_meshes, pe=2.0, diffusion=1.0, beta_y=0.2,
                       inlet=InletProfile(kind="parabolic", peak=1.0, width=1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config_dict():
    """RunConfig data for the small pipe with tiny offline/online settings"""
    return {
        'seed': 0,
        'workers': 1,
        'geometry': {
            'width': 1.0,
            'length': 8.0,
            'cuts': [2.0, 3.0, 5.0, 6.0],
            'lattice': {'nx1': 12, 'nx2': 16, 'nx3': 12, 'ny': 4},
        },
        'physics': {'diffusion': 1.0, 'beta_y': 0.2, 'source': 0.0,
                    'inlet': {'kind': 'parabolic', 'peak': 1.0}},
        'parameters': {
            'd_range': [1.0, 3.0],
            'd_train_count': 3,
            'd_tilde_count': 2,
            'grid_counts': {'2in': [2, 1], '2out': [2, 1]},
            'sigma': 1e-5,
            'inner_product': 'H1d',
            'offline_tol': 1e-6,
            'max_sweeps': 100,
        },
        'network': {'n_hidden': 4, 'max_iter': 50, 'val_fraction': 0.0},
        'online': {'eps_stop': 1e-9, 'max_sweeps': 100, 'trial_pe': [1.5, 2.5],
                   'budget_omega1': 1.0, 'budget_omega3': 1.0},
        'oned': {'pe_list': [1.0, 2.0], 'delta_list': [1.0]},
        'studies': {'pe_sweep_count': 2, 'extrapolation_range': [0.5, 4.0], 'extrapolation_count': 3,
                    'overlap_cuts': [2.0, 3.5, 4.5, 6.0],
                    'perturbation_mu': [1e-4], 'perturbation_pe': 2.0, 'perturbation_sweeps': 12},
    }


@pytest.fixture(scope="session")
def small_offline(small_meshes):
    """Offline stage on the small pipe: three training Pe, tiny enrichment grid"""

    problem = PipeProblem(meshes=small_meshes, pe=1.0, inlet=InletProfile(width=1.0))
    settings = OfflineSettings(
        d_train=[1.0, 2.0, 3.0],
        d_tilde=[1.5, 2.5],
        grid_counts={InterfaceId.GAMMA_2IN: [2, 1], InterfaceId.GAMMA_2OUT: [2, 1]},
        n_hidden=4,
        max_iter=50,
        val_fraction=0.0,
    )
    return run_offline(problem, settings)
