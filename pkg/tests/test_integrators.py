import numpy as np
import pytest

from sympdrb import integrators as it
from sympdrb.cayley import cayley_dense
from sympdrb.errors import CoordinateBreakdownError, StepError
from sympdrb.flow import basis_velocity, lie_algebra_field
from sympdrb.models import HamiltonianModel, LinearOscillatorModel, OscillatorConfig, ParameterGrid, SWEConfig, SWEModel
from sympdrb.symplectic import (
    OrthosymplecticBasis,
    ReducedState,
    canonical_J,
    check_orthosymplectic,
    random_orthosymplectic,
)


class ZeroModel(HamiltonianModel):
    def __init__(self, m):
        self.dim = 2 * m

    def _hamiltonian(self, R, params):
        return np.zeros(R.shape[1])

    def _gradient(self, R, params):
        return np.zeros_like(R)


def oscillator_problem(m=8, k=2, p=6, seed=7):
    model = LinearOscillatorModel(OscillatorConfig(m, tuple(np.linspace(1, 4, m)), seed=3))
    params = ParameterGrid(((0, 1), (0, 1)), (2, p // 2)).points()
    rng = np.random.default_rng(seed)
    return model, params, random_orthosymplectic(m, k, rng), rng.standard_normal((p, 2 * k))


def basis_run(method, tableau, dt, T, model, params, U, Z, **kw):
    field = it.frozen_field(Z, model, params)
    tab = it.get_tableau(tableau)
    for _ in range(int(round(T / dt))):
        U = it.basis_step(method, U, field, dt, tab, **kw)
    return U


def test_tableaus():
    for name, tab in it.TABLEAUS.items():
        assert tab.explicit
        assert tab.b.sum() == pytest.approx(1.0)
        # first-order condition on c
        np.testing.assert_allclose(tab.c, tab.a.sum(axis=1))
    np.testing.assert_array_equal(it.get_tableau("rk4").c, [0, 0.5, 0.5, 1])
    with pytest.raises(KeyError):
        it.get_tableau("dopri")
    with pytest.raises(ValueError):
        it.ButcherTableau("bad", [[0.0]], [0.5], 1)


def test_implicit_tableau_rejected():
    model, params, U, Z = oscillator_problem()
    implicit = it.ButcherTableau("midpoint", [[0.5]], [1.0], 2)
    for method in it.BASIS_METHODS:
        with pytest.raises(ValueError):
            it.basis_step(method, U, it.frozen_field(Z, model, params), 0.1, implicit)


@pytest.mark.parametrize("method", it.BASIS_METHODS)
def test_stationary_field(method):
    _, _, U, _ = oscillator_problem()

    def field(Ui, c):
        return np.zeros(Ui.shape)

    U1 = it.basis_step(method, U, field, 0.1, it.get_tableau("rk4"))
    np.testing.assert_allclose(U1.full, U.full, atol=1e-15)


def test_euler_matches_dense_cayley():
    model, params, U, Z = oscillator_problem(m=5)
    dt = 0.05
    F = basis_velocity(U, Z, model, params)
    expected = cayley_dense(dt * lie_algebra_field(U, F).dense()) @ U.full
    got = it.rkmk_cayley_step(U, Z, model, params, dt, it.get_tableau("euler"))
    np.testing.assert_allclose(got.full, expected, atol=1e-12)


def test_euler_equivalence_per_step():
    model, params, U, Z = oscillator_problem()
    euler = it.get_tableau("euler")
    for _ in range(20):
        a = it.rkmk_cayley_step(U, Z, model, params, 0.05, euler)
        b = it.tangent_rk_step(U, Z, model, params, 0.05, euler)
        assert np.linalg.norm(a.full - b.full) <= 1e-13
        U = a


def test_exp_vs_cayley_euler_second_order():
    model, params, U, Z = oscillator_problem()
    euler = it.get_tableau("euler")
    diffs = []
    for dt in (0.1, 0.05, 0.025):
        a = it.rkmk_cayley_step(U, Z, model, params, dt, euler)
        b = it.rkmk_exp_step(U, Z, model, params, dt, euler)
        diffs.append(np.linalg.norm(a.full - b.full))
    # local difference is O(dt^3) per step: exp and cay agree to second order
    assert diffs[-1] > 0
    rates = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    assert np.all(rates > 2.7)


def test_exp_vs_cayley_rk4_converge_together():
    model, params, U, Z = oscillator_problem()
    diffs = []
    for dt in (2**-3, 2**-4, 2**-5):
        a = basis_run("rkmk-cay", "rk4", dt, 0.5, model, params, U, Z)
        b = basis_run("rkmk-exp", "rk4", dt, 0.5, model, params, U, Z, q_bch=8)
        diffs.append(np.linalg.norm(a.full - b.full))
    rates = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
    assert np.all(rates > 3.5)


@pytest.mark.parametrize("method,tableau,order", [
    ("rkmk-cay", "heun", 2), ("rkmk-exp", "heun", 2), ("tangent", "heun", 2),
    ("rkmk-cay", "rk3", 3), ("tangent", "rk3", 3), ("rkmk-exp", "rk3", 3),
])
def test_basis_orders_quick(method, tableau, order):
    model, params, U, Z = oscillator_problem()
    T = 0.5
    dts = [2.0**-j for j in range(3, 7)]
    ref = basis_run(method, tableau, dts[-1] / 8, T, model, params, U, Z).full
    errs = [np.linalg.norm(basis_run(method, tableau, dt, T, model, params, U, Z).full - ref) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope >= order - 0.2


@pytest.mark.parametrize("method", it.BASIS_METHODS)
def test_long_run_defects(method):
    model, params, U, Z = oscillator_problem()
    field = it.frozen_field(Z, model, params)
    tab = it.get_tableau("euler")
    steps = 10_000 if method == "rkmk-cay" else 1000
    for n in range(steps):
        U = it.basis_step(method, U, field, 1e-2, tab)
        if n % 100 == 0:
            d = check_orthosymplectic(U.full)
            assert d.worst <= 1e-9
    assert check_orthosymplectic(U.full).worst <= 1e-7


@pytest.mark.parametrize("step", [it.tangent_rk_step, it.rkmk_cayley_step])
def test_breakdown_on_huge_step(step):
    # the small Woodbury core loses all accuracy long before I - Omega/2 is singular
    model, params, U, Z = oscillator_problem()
    with pytest.raises(CoordinateBreakdownError):
        step(U, Z, model, params, 1e3, it.get_tableau("rk4"))


# -------------------------------------------------------------- implicit midpoint


def test_midpoint_quadratic_is_symplectic():
    k = 3
    model = LinearOscillatorModel.from_matrix(np.eye(16))
    U = random_orthosymplectic(8, k, np.random.default_rng(0))
    Z = np.eye(2 * k)       # rows are unit vectors, so Z1 rows are the rows of M^T
    dt = 0.1
    Z1, _ = it.implicit_midpoint_Z(U, Z, model, np.zeros((2 * k, 2)), dt, tol=1e-15)
    M = Z1.T
    J = canonical_J(k)
    assert np.linalg.norm(M.T @ J @ M - J) <= 1e-13
    np.testing.assert_allclose(M, cayley_dense(dt * J), atol=1e-13)


def test_midpoint_equilibrium():
    model, params, U, _ = oscillator_problem()
    Z = np.zeros((len(params), 4))
    Z1, _ = it.implicit_midpoint_Z(U, Z, model, params, 0.1)
    np.testing.assert_array_equal(Z1, Z)


def test_midpoint_quadratic_invariants():
    model, params, U, Z = oscillator_problem()
    J = canonical_J(2)
    omega = Z @ J @ Z.T
    H0 = model.hamiltonian(U.full @ Z.T, params)
    for _ in range(50):
        Z, _ = it.implicit_midpoint_Z(U, Z, model, params, 0.05, tol=1e-15)
    # frozen U makes the reduced system linear: the symplectic form between
    # coefficient rows and the reduced energy are quadratic invariants
    assert np.linalg.norm(Z @ J @ Z.T - omega) <= 1e-11 * np.linalg.norm(omega) * 50
    assert np.max(np.abs(model.hamiltonian(U.full @ Z.T, params) - H0)) <= 1e-11 * 50 * np.max(H0)


def test_midpoint_non_convergence():
    with pytest.raises(StepError):
        it.midpoint_fixed_point(lambda x: 100 * x, np.ones(3), 1.0, max_iter=5)


# ------------------------------------------------------------- partitioned step


@pytest.mark.parametrize("method", it.BASIS_METHODS)
def test_partitioned_step_stationary(method):
    _, params, U, Z = oscillator_problem()
    state = ReducedState(U, Z, 0.0)
    new, rep = it.partitioned_step(state, ZeroModel(8), params, 0.1, it.SchemeConfig(method=method))
    np.testing.assert_allclose(new.basis.full, U.full, atol=1e-15)
    np.testing.assert_array_equal(new.Z, Z)
    assert rep.accepted and rep.fixed_point_iters >= 1
    assert new.time == pytest.approx(0.1)


def test_partitioned_report_fields():
    model, params, U, Z = oscillator_problem()
    _, rep = it.partitioned_step(ReducedState(U, Z), model, params, 0.01, it.SchemeConfig(), step=5)
    assert rep.step == 5 and rep.dt == 0.01
    assert rep.orth_defect <= 1e-12 and rep.sympl_defect <= 1e-12
    assert 0 < rep.gram_smin <= rep.gram_smax
    assert not rep.retried


def test_scheme_config_validation():
    with pytest.raises(ValueError):
        it.SchemeConfig(method="newton")
    with pytest.raises(KeyError):
        it.SchemeConfig(tableau="nope")


def test_integrate_retries_once(monkeypatch):
    model, params, U, Z = oscillator_problem()
    real = it.partitioned_step
    calls = {"n": 0}

    def flaky(state, model, params, dt, scheme, step=0):
        calls["n"] += 1
        if step == 2 and dt == 0.01:
            raise CoordinateBreakdownError("forced")
        return real(state, model, params, dt, scheme, step)

    monkeypatch.setattr(it, "partitioned_step", flaky)
    traj = it.integrate(ReducedState(U, Z), model, params, 0.01, 0.05, it.SchemeConfig())
    assert [r.retried for r in traj.reports] == [False, True, False, False, False]
    assert traj.final.time == pytest.approx(0.05)


def test_integrate_aborts_with_step_index(monkeypatch):
    model, params, U, Z = oscillator_problem()
    real = it.partitioned_step

    def broken(state, model, params, dt, scheme, step=0):
        if step == 3:
            raise CoordinateBreakdownError("forced")
        return real(state, model, params, dt, scheme, step)

    monkeypatch.setattr(it, "partitioned_step", broken)
    with pytest.raises(StepError) as err:
        it.integrate(ReducedState(U, Z), model, params, 0.01, 0.05, it.SchemeConfig())
    assert err.value.step == 3


def test_integrate_saves():
    model, params, U, Z = oscillator_problem()
    traj = it.integrate(ReducedState(U, Z), model, params, 0.01, 0.1, it.SchemeConfig(), save_stride=3,
                        keep_states=False)
    np.testing.assert_allclose(traj.times, [0, 0.03, 0.06, 0.09, 0.1])
    assert traj.hamiltonians.shape == (5, len(params))
    assert len(traj.states) == 2 and len(traj.reports) == 10
    with pytest.raises(ValueError):
        it.integrate(ReducedState(U, Z), model, params, 0.03, 0.1, it.SchemeConfig())


def test_partitioned_reduces_to_exact_for_invariant_span():
    # u0 in an invariant symplectic subspace: the basis stays put and Z carries the midpoint flow
    m, k = 6, 2
    model = LinearOscillatorModel(OscillatorConfig(m, tuple(np.linspace(1, 2, m))))
    eye = np.eye(2 * m)
    U = OrthosymplecticBasis(eye[:, :k])
    rng = np.random.default_rng(1)
    Z = rng.standard_normal((5, 2 * k))
    params = np.zeros((5, 2))
    traj = it.integrate(ReducedState(U, Z), model, params, 0.01, 0.2, it.SchemeConfig(midpoint_tol=1e-15))
    full = it.full_order_solve(model, params, 0.01, 0.2, R0=U.full @ Z.T, tol=1e-15)
    assert np.linalg.norm(traj.final.reconstruct() - full.final) <= 1e-12


# ------------------------------------------------------------- full-order model


def test_full_order_flat_swe():
    model = SWEModel(SWEConfig(grid_points=32))
    params = np.array([[0.0, 0.5]])
    traj = it.full_order_solve(model, params, 1e-3, 1e-3)
    R = traj.final
    np.testing.assert_allclose(R[:32], 1.0, atol=1e-12)
    np.testing.assert_allclose(R[32:], -1e-3, rtol=1e-9)


def test_full_order_quadratic_energy():
    model = LinearOscillatorModel(OscillatorConfig(6, tuple(np.linspace(1, 3, 6))))
    params = ParameterGrid(((0, 1), (0, 1)), (2, 2)).points()
    traj = it.full_order_solve(model, params, 0.05, 1.0, tol=1e-15)
    H = np.array([model.hamiltonian(R, params) for R in traj.states])
    assert np.max(np.abs(H - H[0])) <= 1e-11 * np.max(H[0])


def test_full_order_zero_state_stationary():
    model = LinearOscillatorModel(OscillatorConfig(3))
    traj = it.full_order_solve(model, np.zeros((2, 2)), 0.1, 1.0, R0=np.zeros((6, 2)))
    assert all(np.all(R == 0) for R in traj.states)


def test_full_order_saves():
    model = LinearOscillatorModel(OscillatorConfig(3))
    params = np.zeros((2, 2))
    traj = it.full_order_solve(model, params, 0.1, 1.0, save_stride=4)
    np.testing.assert_allclose(traj.times, [0, 0.4, 0.8, 1.0])
    traj = it.full_order_solve(model, params, 0.1, 1.0, save_stride=4, save_final=False)
    np.testing.assert_allclose(traj.times, [0, 0.4, 0.8])


def test_full_order_failure_reports_step():
    model = LinearOscillatorModel(OscillatorConfig(3, (1e4, 1e4, 1e4)))
    with pytest.raises(StepError) as err:
        it.full_order_solve(model, np.zeros((1, 2)), 1.0, 2.0, max_iter=5)
    assert err.value.step == 1


def test_reconstruct_matches_product():
    model, params, U, Z = oscillator_problem()
    np.testing.assert_array_equal(ReducedState(U, Z).reconstruct(), U.full @ Z.T)


def test_midpoint_divergence_is_an_error():
    with pytest.raises(StepError, match="diverged"):
        it.midpoint_fixed_point(lambda x: 1e200 * x**3, np.ones(3), 1.0)
