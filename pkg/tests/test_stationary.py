import numpy as np
import pytest

from casimir_sp.casimir import Boltzmann, PowerCutoff
from casimir_sp.spectral import DomainSpec, ModeField, eigendecompose, hamiltonian_matrix, to_grid
from casimir_sp.state import MixedState, density, random_state
from casimir_sp.stationary import (
    ConvergenceError,
    SigmaSolveError,
    SolverConfig,
    assemble_solution,
    duality_check,
    eigen_residuals,
    membership_report,
    phi_eval,
    scf_solve,
    sigma_from_spectrum,
    sigma_solve,
    solution_to_dict,
    trace_bound,
)


def test_phi_at_zero(box, boltz):
    phi = phi_eval(ModeField.zeros(box), 0.0, boltz, 1.0)
    assert phi == pytest.approx(-1 / (np.e - 1), abs=1e-10)
    assert phi == pytest.approx(-np.sum(np.exp(-np.arange(1, 65.0))), abs=1e-15)


def test_phi_large_sigma(box, boltz):
    assert phi_eval(ModeField.zeros(box), 50.0, boltz, 1.0) == pytest.approx(-50.0, abs=1e-20)


def test_phi_rejects_negative_potential(box, boltz):
    with pytest.raises(ValueError):
        phi_eval(ModeField.basis(box, 0) * -1.0, 0.0, boltz, 1.0)


def test_sigma_closed_form(box, boltz):
    s = sigma_solve(ModeField.zeros(box), boltz, 1.0)
    assert s == pytest.approx(-np.log(np.e - 1), abs=1e-10)
    mu = box.kinetic
    assert abs(np.sum(boltz.f(mu + s)) - 1.0) <= 1e-12
    assert sigma_solve(ModeField.zeros(box), boltz, 2.0) < s


def test_sigma_bracket_expansion(box):
    dist = PowerCutoff(2.0, 1.0)
    s = sigma_from_spectrum(box.kinetic, dist, 100.0, bracket=(0.0, 0.5))
    assert np.sum(dist.f(box.kinetic + s)) == pytest.approx(100.0, rel=1e-12)


def test_sigma_unreachable():
    class Flat(Boltzmann):
        def f(self, s):
            return np.zeros_like(np.asarray(s, dtype=float))

    with pytest.raises(SigmaSolveError):
        sigma_from_spectrum(np.arange(1.0, 5.0), Flat(), 1.0, max_expand=10)


@pytest.mark.parametrize("mass", [0.0, 1.0])
def test_scf_converges(mass, boltz):
    dom = DomainSpec.box_1d(mass=mass)
    sol = scf_solve(dom, boltz, SolverConfig())
    assert sol.residual_poisson <= 1e-8
    assert sol.residual_constraint <= 1e-10
    assert np.max(eigen_residuals(sol)) <= 1e-8
    assert to_grid(sol.V0).min() >= -1e-10
    assert np.all(sol.mu0 > 0)
    assert np.allclose(sol.state.occupations, boltz.f(sol.mu0 + sol.sigma0), rtol=1e-14)
    assert duality_check(sol, boltz, 1.0) <= 1e-7


def test_scf_ascent(solution):
    phis = [r["phi"] for r in solution.history if r["accepted"]]
    assert np.all(np.diff(phis) >= -1e-13)


def test_scf_restart_is_fixed_point(solution, boltz):
    again = scf_solve(solution.domain, boltz, SolverConfig(), V_init=solution.V0)
    assert again.iterations == 0


def test_scf_weak_coupling(box, boltz):
    cfg = SolverConfig(Lambda=1e-8)
    sol = scf_solve(box, boltz, cfg)
    assert np.max(np.abs(sol.V0.coeffs)) < 1e-8
    assert sol.sigma0 == pytest.approx(sigma_solve(ModeField.zeros(box), boltz, 1e-8), abs=1e-7)
    assert duality_check(sol, boltz, 1e-8) <= 1e-9


def test_scf_failure_carries_history(box, boltz):
    with pytest.raises(ConvergenceError) as info:
        scf_solve(box, boltz, SolverConfig(max_outer=1))
    assert len(info.value.history) == 1
    assert info.value.history[0]["residual_poisson"] > 1e-3


def test_duality_gap_shrinks(box, boltz, solution_m0):
    one = assemble_solution(ModeField.zeros(box), boltz, SolverConfig())
    assert one.duality_gap > duality_check(solution_m0, boltz, 1.0)
    assert one.duality_gap > 1e-6


def test_uniqueness(solution, boltz, rng):
    dom = solution.domain
    st = random_state(dom, 3, rng, total=4.0)
    V_init = ModeField(dom, density(st).coeffs / dom.mu0)
    other = scf_solve(dom, boltz, SolverConfig(), V_init=V_init)
    dV = other.V0.coeffs - solution.V0.coeffs
    assert np.sqrt(np.sum((1 + dom.mu0) * dV ** 2)) <= 1e-6


def test_optimality(solution, boltz, rng):
    dom, V0, s0 = solution.domain, solution.V0, solution.sigma0
    phi0 = phi_eval(V0, s0, boltz, 1.0)
    for _ in range(20):
        st = random_state(dom, 2, rng)
        Vr = density(st).coeffs / dom.mu0
        t1, t2 = rng.uniform(0, 1e-2, 2)
        V = ModeField(dom, V0.coeffs + t1 * Vr - t2 * V0.coeffs)
        assert phi_eval(V, s0, boltz, 1.0) <= phi0 + 1e-9
    for d in (-1e-2, -1e-4, 1e-4, 1e-2):
        assert phi_eval(V0, s0 + d, boltz, 1.0) <= phi0 + 1e-9


def test_membership(solution):
    rep = membership_report(solution)
    assert rep["bound_holds"] and np.isfinite(rep["kinetic_moment"])


def test_trace_bound_cases(solution, boltz, rng):
    dom, V = solution.domain, solution.V0
    sigma = -0.4
    for _ in range(20):
        st = random_state(dom, 4, rng, total=rng.uniform(0.1, 3))
        lhs, rhs = trace_bound(st, V, sigma, boltz)
        assert lhs >= rhs - 1e-9
    mu, U = eigendecompose(hamiltonian_matrix(dom, V))
    lhs, rhs = trace_bound(MixedState(dom, U.T, boltz.f(mu + sigma)), V, sigma, boltz)
    assert lhs == pytest.approx(rhs, rel=1e-9)
    lhs, rhs = trace_bound(MixedState(dom, U[:, :2].T, [0.0, 0.0]), V, sigma, boltz)
    assert lhs == 0 and rhs < 0


def test_power_cutoff_solution():
    dom = DomainSpec.box_1d(modes=32, mass=1.0)
    dist = PowerCutoff(3.0, 2.0)
    sol = scf_solve(dom, dist, SolverConfig())
    assert sol.residual_poisson <= 1e-10
    assert duality_check(sol, dist, 1.0) <= 1e-7
    # finitely many occupied levels
    assert sol.state.n_orbitals < dom.size


def test_solution_dict(solution):
    d = solution_to_dict(solution)
    assert d["sigma0"] == solution.sigma0
    assert len(d["V0"]) == solution.domain.size


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(damping=0.0)
    with pytest.raises(ValueError):
        SolverConfig(Lambda=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(sigma_bracket=(1.0, -1.0))
