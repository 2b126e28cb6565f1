"""Stationary states as the maximizer of the dual functional.

For a nonnegative potential ``V`` and multiplier ``sigma`` the dual functional
is

    Phi(V, sigma) = -1/2 ||grad V||^2 - Tr F(T_m + V + sigma) - sigma * Lambda,

with the trace taken over the ``M`` retained modes.  Its maximizer is found by
a damped fixed-point iteration on ``V`` (a gradient ascent preconditioned by
``(-Delta)^{-1}``, because ``dPhi/dV = Delta V + n``) with the multiplier
solved exactly at every sweep.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .casimir import CasimirDistribution
from .spectral import (
    DomainSpec,
    ModeField,
    eigendecompose,
    h1_seminorm,
    hamiltonian_matrix,
    poisson_solve,
    to_grid,
)
from .state import (
    MixedState,
    casimir_energy,
    casimir_sum,
    density,
    orbital_expectations,
)

__all__ = [
    "SolverConfig",
    "StationarySolution",
    "ConvergenceError",
    "SigmaSolveError",
    "phi_eval",
    "phi_from_spectrum",
    "sigma_solve",
    "sigma_from_spectrum",
    "assemble_solution",
    "scf_solve",
    "duality_check",
    "trace_bound",
    "eigen_residuals",
    "membership_report",
    "solution_to_dict",
]

log = logging.getLogger(__name__)

V_NEG_TOL = 1e-8


class ConvergenceError(RuntimeError):
    """SCF did not reach the requested residuals; carries the residual history."""

    def __init__(self, message: str, history: list[dict]):
        super().__init__(message)
        self.history = history


class SigmaSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    Lambda: float = 1.0
    damping: float = 0.5
    max_outer: int = 500
    tol_poisson: float = 1e-10
    tol_constraint: float = 1e-12
    sigma_bracket: tuple[float, float] = (-1.0, 1.0)
    # dropped occupation tail allowed when choosing how many orbitals to keep
    tail_tol: float = 1e-14
    min_damping: float = 2.0 ** -20

    def __post_init__(self):
        if not self.Lambda > 0:
            raise ValueError("Lambda must be positive")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if not (self.tol_poisson > 0 and self.tol_constraint > 0):
            raise ValueError("tolerances must be positive")
        if self.tail_tol < 0:
            raise ValueError("tail_tol must be nonnegative")
        lo, hi = self.sigma_bracket
        if not lo < hi:
            raise ValueError("sigma_bracket must be increasing")


@dataclass(eq=False)
class StationarySolution:
    V0: ModeField
    sigma0: float
    mu0: np.ndarray
    state: MixedState
    residual_poisson: float
    residual_constraint: float
    duality_gap: float
    phi: float
    iterations: int = 0
    dropped_tail: float = 0.0
    history: list[dict] = field(default_factory=list, repr=False)

    @property
    def domain(self) -> DomainSpec:
        return self.V0.domain


def _check_nonnegative(V: ModeField, tol: float = V_NEG_TOL) -> None:
    vmin = float(np.min(to_grid(V)))
    if vmin < -tol:
        raise ValueError(f"potential must be nonnegative, min on grid is {vmin:.3e}")


def phi_from_spectrum(V: ModeField, mu: np.ndarray, sigma: float,
                      dist: CasimirDistribution, Lambda: float) -> float:
    trace = float(np.sum(dist.F(mu + sigma)))
    return -0.5 * h1_seminorm(V.domain, V) ** 2 - trace - sigma * Lambda


def phi_eval(V: ModeField, sigma: float, dist: CasimirDistribution,
             Lambda: float) -> float:
    """Dual functional at ``(V, sigma)``; ``V`` must be nonnegative on the grid."""
    _check_nonnegative(V)
    mu, _ = eigendecompose(hamiltonian_matrix(V.domain, V))
    return phi_from_spectrum(V, mu, sigma, dist, Lambda)


def sigma_from_spectrum(mu: np.ndarray, dist: CasimirDistribution, Lambda: float,
                        bracket=(-1.0, 1.0), tol: float = 1e-13,
                        max_expand: int = 200) -> float:
    """Root of ``sum_j f(mu_j + sigma) = Lambda`` (strictly decreasing in sigma)."""
    def g(s):
        return float(np.sum(dist.f(mu + s))) - Lambda

    lo, hi = map(float, bracket)
    width = hi - lo
    for _ in range(max_expand):
        if g(lo) > 0:
            break
        lo -= width
        width *= 2
    else:
        raise SigmaSolveError(f"could not bracket sigma from below (g({lo}) <= 0)")
    width = hi - lo
    for _ in range(max_expand):
        if g(hi) < 0:
            break
        hi += width
        width *= 2
    else:
        raise SigmaSolveError(f"could not bracket sigma from above (g({hi}) >= 0)")

    s = scipy.optimize.brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps,
                              maxiter=500)
    # Newton polish, kept inside the bracket
    for _ in range(5):
        r = g(s)
        if abs(r) <= tol * max(Lambda, 1.0):
            break
        d = float(np.sum(dist.f_prime(mu + s)))
        if d >= 0:
            break
        s_new = s - r / d
        if not lo <= s_new <= hi or abs(g(s_new)) >= abs(r):
            break
        s = s_new
    return s


def sigma_solve(V: ModeField, dist: CasimirDistribution, Lambda: float,
                bracket=(-1.0, 1.0)) -> float:
    _check_nonnegative(V)
    mu, _ = eigendecompose(hamiltonian_matrix(V.domain, V))
    return sigma_from_spectrum(mu, dist, Lambda, bracket)


def _keep_count(lam: np.ndarray, tail_tol: float, Lambda: float) -> int:
    # tails[K] = sum_{k >= K} lam_k
    tails = np.concatenate([np.cumsum(lam[::-1])[::-1], [0.0]])
    ok = np.nonzero(tails <= tail_tol * Lambda)[0]
    return max(int(ok[0]), 1)


def assemble_solution(V: ModeField, dist: CasimirDistribution,
                      config: SolverConfig, iterations: int = 0,
                      history: list[dict] | None = None) -> StationarySolution:
    """Stationary-state candidate generated by a given potential.

    Orbitals and energies come from ``T_m + V``; the multiplier is solved
    exactly, so only the Poisson residual measures distance from a fixed point.
    """
    domain = V.domain
    mu, U = eigendecompose(hamiltonian_matrix(domain, V))
    sigma = sigma_from_spectrum(mu, dist, config.Lambda, config.sigma_bracket)
    lam = np.asarray(dist.f(mu + sigma), dtype=float)
    K = _keep_count(lam, config.tail_tol, config.Lambda)
    state = MixedState(domain, U[:, :K].T, lam[:K])
    n = density(state)
    res_p = float(np.linalg.norm(domain.mu0 * np.real(V.coeffs) - n.coeffs))
    res_c = abs(float(np.sum(lam[:K])) - config.Lambda)
    phi = phi_from_spectrum(V, mu, sigma, dist, config.Lambda)
    hc = casimir_energy(state, dist)
    gap = abs(phi - hc) / (1.0 + abs(phi))
    return StationarySolution(
        V0=V, sigma0=sigma, mu0=mu[:K], state=state,
        residual_poisson=res_p, residual_constraint=res_c,
        duality_gap=gap, phi=phi, iterations=iterations,
        dropped_tail=float(np.sum(lam[K:])), history=history or [],
    )


def scf_solve(domain: DomainSpec, dist: CasimirDistribution,
              config: SolverConfig, V_init: ModeField | None = None,
              callback=None) -> StationarySolution:
    """Maximize the dual functional by damped potential mixing.

    Each sweep diagonalizes ``T_m + V``, solves the multiplier, builds the
    density ``n`` and moves ``V <- (1 - a) V + a (-Delta)^{-1} n``.  A sweep
    that lowers the dual functional is rejected and retried with half the
    damping.  Convergence is declared on the Poisson and constraint residuals.

    Raises
    ------
    ConvergenceError
        If ``max_outer`` sweeps pass without convergence, or the damping
        underflows ``min_damping``.
    """
    V = ModeField.zeros(domain) if V_init is None else V_init
    _check_nonnegative(V)
    alpha = config.damping
    history: list[dict] = []
    accepted = None  # (V, V_out, phi) at the last accepted iterate
    Lambda = config.Lambda

    for it in range(config.max_outer):
        mu, U = eigendecompose(hamiltonian_matrix(domain, V))
        sigma = sigma_from_spectrum(mu, dist, Lambda, config.sigma_bracket)
        lam = np.asarray(dist.f(mu + sigma), dtype=float)
        K = _keep_count(lam, config.tail_tol, Lambda)
        state = MixedState(domain, U[:, :K].T, lam[:K], check=False)
        n = density(state)
        res_p = float(np.linalg.norm(domain.mu0 * V.coeffs - n.coeffs))
        res_c = abs(float(np.sum(lam[:K])) - Lambda)
        phi = phi_from_spectrum(V, mu, sigma, dist, Lambda)
        row = {"iteration": it, "phi": phi, "residual_poisson": res_p,
               "residual_constraint": res_c, "sigma": sigma, "damping": alpha}

        if accepted is not None and phi < accepted[2] - 1e-13 * (1.0 + abs(phi)):
            row["accepted"] = False
            history.append(row)
            alpha *= 0.5
            if alpha < config.min_damping:
                raise ConvergenceError("damping underflow: no ascent step found", history)
            V_prev, V_out_prev, _ = accepted
            V = ModeField(domain, (1 - alpha) * V_prev.coeffs + alpha * V_out_prev.coeffs)
            continue

        row["accepted"] = True
        history.append(row)
        if callback is not None:
            callback(row)
        if res_p <= config.tol_poisson and res_c <= config.tol_constraint:
            sol = assemble_solution(V, dist, config, iterations=it, history=history)
            log.info("SCF converged after %d sweeps (phi=%.15g)", it, phi)
            return sol

        V_out = poisson_solve(domain, n)
        accepted = (V, V_out, phi)
        V = ModeField(domain, (1 - alpha) * V.coeffs + alpha * V_out.coeffs)
        vmin = float(np.min(to_grid(V)))
        if vmin < -1e-10:
            log.warning("potential left the nonnegative cone (min %.3e)", vmin)

    raise ConvergenceError(
        f"SCF did not converge in {config.max_outer} sweeps "
        f"(residual_poisson={history[-1]['residual_poisson']:.3e})", history)


def duality_check(sol: StationarySolution, dist: CasimirDistribution,
                  Lambda: float) -> float:
    """``|Phi(V0, sigma0) - H_C(Psi0, lam0)| / (1 + |Phi|)``."""
    phi = phi_eval(sol.V0, sol.sigma0, dist, Lambda)
    hc = casimir_energy(sol.state, dist)
    return abs(phi - hc) / (1.0 + abs(phi))


def trace_bound(state: MixedState, V: ModeField, sigma: float,
                  dist: CasimirDistribution) -> tuple[float, float]:
    """Both sides of the shifted Fenchel-Young trace inequality.

    ``lhs = sum_k [F*(-lam_k) + lam_k (<psi_k, (T_m + V) psi_k> + sigma)]`` and
    ``rhs = -sum_j F(mu_j(T_m + V) + sigma)`` over all retained modes.
    """
    _check_nonnegative(V)
    lam = state.occupations
    expect = orbital_expectations(state, V)
    lhs = casimir_sum(lam, dist) + float(np.dot(lam, expect + sigma))
    mu, _ = eigendecompose(hamiltonian_matrix(V.domain, V))
    rhs = -float(np.sum(dist.F(mu + sigma)))
    return lhs, rhs


def eigen_residuals(sol: StationarySolution) -> np.ndarray:
    """``||(T_m + V0) psi_k - mu_k psi_k||`` per retained orbital."""
    H = hamiltonian_matrix(sol.domain, sol.V0)
    psi = sol.state.orbitals
    return np.linalg.norm(psi @ H.T - sol.mu0[:, None] * psi, axis=1)


def membership_report(sol: StationarySolution) -> dict:
    """Kinetic moment and the per-orbital bound ``||T_m^{1/2} psi||^2 <= mu``."""
    domain = sol.domain
    psi = sol.state.orbitals
    grad2 = np.abs(psi) ** 2 @ domain.mu0
    tkin = np.abs(psi) ** 2 @ domain.kinetic
    return {
        "kinetic_moment": float(np.dot(sol.state.occupations, grad2)),
        "tm_half_norms": tkin,
        "bound_holds": bool(np.all(tkin <= sol.mu0 + 1e-12 * (1 + np.abs(sol.mu0)))),
    }


def solution_to_dict(sol: StationarySolution) -> dict:
    from .state import state_to_dict

    out = state_to_dict(sol.state)
    out.update({
        "V0": np.real(sol.V0.coeffs).tolist(),
        "sigma0": sol.sigma0,
        "mu0": sol.mu0.tolist(),
        "residual_poisson": sol.residual_poisson,
        "residual_constraint": sol.residual_constraint,
        "duality_gap": sol.duality_gap,
        "phi": sol.phi,
        "iterations": sol.iterations,
        "dropped_tail": sol.dropped_tail,
    })
    return out
