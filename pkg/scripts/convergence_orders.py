#!/usr/bin/env python3
"""Self-convergence orders of the basis integrators and the coupled scheme on the
linear oscillator model."""

import numpy as np

from sympdrb.integrators import (
    SchemeConfig,
    basis_step,
    frozen_field,
    get_tableau,
    integrate,
)
from sympdrb.models import LinearOscillatorModel, OscillatorConfig, ParameterGrid
from sympdrb.symplectic import ReducedState, orthosymplectic_from_complex_svd, random_orthosymplectic

DTS = [2.0**-j for j in range(5, 10)]
T = 1.0


def setup(m=16, k=2, seed=7):
    model = LinearOscillatorModel(OscillatorConfig(m, tuple(np.linspace(1, 4, m)), seed=3))
    params = ParameterGrid(((0, 1), (0, 1)), (2, 3)).points()
    rng = np.random.default_rng(seed)
    U = random_orthosymplectic(m, k, rng)
    Z = rng.standard_normal((len(params), 2 * k))
    return model, params, U, Z


def basis_solution(method, tableau, dt, model, params, U, Z):
    field = frozen_field(Z, model, params)
    tab = get_tableau(tableau)
    for _ in range(int(round(T / dt))):
        U = basis_step(method, U, field, dt, tab)
    return U.full


def fit_order(errs):
    return float(np.polyfit(np.log(DTS), np.log(errs), 1)[0])


def main():
    model, params, U, Z = setup()
    ref_dt = DTS[-1] / 16
    for method, tableau in [("rkmk-cay", "rk4"), ("tangent", "rk4"),
                            ("tangent", "explicit_midpoint"), ("rkmk-cay", "explicit_midpoint")]:
        ref = basis_solution(method, tableau, ref_dt, model, params, U, Z)
        errs = [np.linalg.norm(basis_solution(method, tableau, dt, model, params, U, Z) - ref)
                for dt in DTS]
        print(f"basis {method:>9} {tableau:>18}: order {fit_order(errs):.2f}")

    R0 = model.initial(params)
    U0, Z0 = orthosymplectic_from_complex_svd(R0, 2)
    for method in ("tangent", "rkmk-cay"):
        scheme = SchemeConfig(method=method, midpoint_tol=1e-14)

        def run(dt):
            return integrate(ReducedState(U0, Z0), model, params, dt, T, scheme,
                             keep_states=False).final.reconstruct()

        ref = run(ref_dt)
        errs = [np.linalg.norm(run(dt) - ref) for dt in DTS]
        print(f"coupled {method:>9}: order {fit_order(errs):.2f}")


if __name__ == "__main__":
    main()
