import numpy as np
import pytest

from sympdrb.errors import StepError
from sympdrb.global_rbm import SnapshotSet, collect_snapshots, global_basis, global_reduced_solve
from sympdrb.integrators import full_order_solve
from sympdrb.models import LinearOscillatorModel, OscillatorConfig, ParameterGrid, SWEConfig, SWEModel
from sympdrb.symplectic import OrthosymplecticBasis, check_orthosymplectic


@pytest.fixture
def swe_small():
    model = SWEModel(SWEConfig(grid_points=32))
    train = ParameterGrid(samples=(2, 2)).points()
    return model, train


def test_snapshot_counts(swe_small):
    model, train = swe_small
    snap = collect_snapshots(model, train, 1e-3, 0.1, stride=10)
    assert snap.matrix.shape == (64, 4 * 11)
    assert snap.n_params == 4 and snap.n_times == 11
    # the first column of each block is the initial condition
    np.testing.assert_array_equal(snap.matrix[:, 11], model.initial(train[1:2])[:, 0])
    sat = collect_snapshots(model, train, 1e-3, 0.01, stride=50)
    assert sat.matrix.shape == (64, 4)


def test_snapshots_deterministic(swe_small):
    model, train = swe_small
    a = collect_snapshots(model, train, 1e-3, 0.02, stride=5).matrix
    b = collect_snapshots(model, train, 1e-3, 0.02, stride=5).matrix
    assert np.array_equal(a, b)


def test_snapshot_validation():
    with pytest.raises(ValueError):
        SnapshotSet(np.zeros((4, 5)), 2, 2, 1, np.zeros((2, 2)))
    with pytest.raises(ValueError):
        SnapshotSet(np.full((4, 2), np.nan), 1, 2, 1, np.zeros((1, 2)))


def test_snapshot_failure_names_parameter():
    model = LinearOscillatorModel(OscillatorConfig(3, (1e4, 1e4, 1e4)))
    with pytest.raises(StepError, match="training parameter 0"):
        collect_snapshots(model, np.zeros((2, 2)), 1.0, 2.0, stride=1)


def test_global_basis_on_manifold(swe_small):
    model, train = swe_small
    snap = collect_snapshots(model, train, 1e-3, 0.05, stride=10)
    U = global_basis(snap, 4)
    assert check_orthosymplectic(U.full).worst <= 1e-10


def test_invariant_subspace_exact():
    m, k = 6, 2
    model = LinearOscillatorModel(OscillatorConfig(m, tuple(np.linspace(1, 3, m))))
    U = OrthosymplecticBasis(np.eye(2 * m)[:, :k])
    params = np.zeros((3, 2))
    rng = np.random.default_rng(0)
    model.directions[:, :] = 0.0
    model.directions[:, [0, 1, m, m + 1]] = rng.standard_normal((3, 4))
    traj = global_reduced_solve(U, model, params, 0.02, 1.0, save_stride=10)
    full = full_order_solve(model, params, 0.02, 1.0, save_stride=10)
    assert traj.initial_projection_defect <= 1e-14
    for i in range(len(traj.times)):
        assert np.linalg.norm(traj.reconstruct(i) - full.states[i]) <= 1e-10


def test_full_basis_matches_full_model():
    m = 4
    model = LinearOscillatorModel(OscillatorConfig(m, (1.0, 2.0, 3.0, 4.0)))
    train = ParameterGrid(((0, 1), (0, 1)), (3, 3)).points()
    snap = collect_snapshots(model, train, 0.05, 1.0, stride=2)
    U = global_basis(snap, m)
    params = np.array([[0.3, 0.7]])
    traj = global_reduced_solve(U, model, params, 0.05, 1.0)
    full = full_order_solve(model, params, 0.05, 1.0)
    assert np.linalg.norm(traj.reconstruct() - full.final) <= 1e-10


def test_quadratic_energy_drift_second_order():
    model = LinearOscillatorModel(OscillatorConfig(8, tuple(np.linspace(1, 3, 8))))
    train = ParameterGrid(((0, 1), (0, 1)), (2, 2)).points()
    snap = collect_snapshots(model, train, 0.05, 1.0, stride=2)
    U = global_basis(snap, 3)
    params = ParameterGrid(((0, 1), (0, 1)), (3, 1)).points()
    traj = global_reduced_solve(U, model, params, 0.05, 2.0)
    # midpoint on a linear reduced system conserves the reduced quadratic energy
    H = traj.hamiltonians
    assert np.max(np.abs(H - H[0])) <= 1e-10 * np.max(H)
