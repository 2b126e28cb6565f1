"""Truncated mixed states and the functionals defined on them.

A :class:`MixedState` holds ``K`` orthonormal orbitals (rows of sine-mode
coefficients) and their fixed occupations.  Its density matrix is
``rho = sum_k lam_k |psi_k><psi_k|``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .casimir import CasimirDistribution
from .spectral import (
    DomainSpec,
    ModeField,
    eigendecompose,
    hamiltonian_matrix,
    h1_seminorm,
    poisson_solve,
    project_product,
    to_grid,
    _check_domain,
)

__all__ = [
    "MixedState",
    "GramSchmidtError",
    "density_matrix",
    "density",
    "density_grid",
    "potential",
    "kinetic_energy",
    "orbital_expectations",
    "energy",
    "energy_forms",
    "casimir_sum",
    "casimir_energy",
    "g_functional",
    "gram_schmidt",
    "perturb",
    "jensen_check",
    "gram_defect",
    "state_to_dict",
    "state_from_dict",
    "random_orbitals",
    "random_state",
]

ORTHO_TOL = 1e-8


class GramSchmidtError(ValueError):
    """Raised when re-orthonormalization loses rank."""


@dataclass(frozen=True, eq=False)
class MixedState:
    """Orthonormal orbitals with nonnegative occupations.

    Parameters
    ----------
    domain : DomainSpec
    orbitals : ndarray, shape (K, M)
        Row ``k`` holds the sine coefficients of ``psi_k``.
    occupations : ndarray, shape (K,)
    """

    domain: DomainSpec
    orbitals: np.ndarray = field(repr=False)
    occupations: np.ndarray = field(repr=False)
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        psi = np.array(self.orbitals, dtype=complex, copy=True)
        lam = np.array(self.occupations, dtype=float, copy=True)
        if psi.ndim != 2 or psi.shape[1] != self.domain.size:
            raise ValueError(f"orbitals must have shape (K, {self.domain.size})")
        if lam.shape != (psi.shape[0],):
            raise ValueError("need one occupation per orbital")
        if np.any(lam < 0) or not np.all(np.isfinite(lam)):
            raise ValueError("occupations must be finite and nonnegative")
        if self.check:
            if not np.all(np.isfinite(psi)):
                raise ValueError("orbitals contain non-finite values")
            defect = _gram_defect(psi)
            if defect > ORTHO_TOL:
                raise ValueError(f"orbitals are not orthonormal (defect {defect:.2e})")
        psi.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "orbitals", psi)
        object.__setattr__(self, "occupations", lam)

    @property
    def n_orbitals(self) -> int:
        return self.orbitals.shape[0]

    @property
    def total_occupation(self) -> float:
        return float(np.sum(self.occupations))

    def with_orbitals(self, orbitals: np.ndarray, check: bool = False) -> "MixedState":
        return MixedState(self.domain, orbitals, self.occupations, check=check)

    def with_occupations(self, occupations) -> "MixedState":
        return MixedState(self.domain, self.orbitals, occupations, check=False)

    @classmethod
    def from_eigenbasis(cls, domain: DomainSpec, V: ModeField, occupations_fn,
                        n_orbitals: int | None = None) -> "MixedState":
        """Eigenvectors of ``T_m + V`` with ``lam_k = occupations_fn(mu_k)``."""
        mu, U = eigendecompose(hamiltonian_matrix(domain, V))
        K = domain.size if n_orbitals is None else n_orbitals
        return cls(domain, U[:, :K].T, occupations_fn(mu[:K]))


def _gram_defect(psi: np.ndarray) -> float:
    G = psi.conj() @ psi.T
    return float(np.max(np.abs(G - np.eye(len(G))), initial=0.0))


def gram_defect(state: MixedState) -> float:
    """``max |G - I|`` for the orbital Gram matrix."""
    return _gram_defect(state.orbitals)


def density_matrix(state: MixedState) -> np.ndarray:
    """``R[a, b] = sum_k lam_k conj(c_ka) c_kb``."""
    psi = state.orbitals
    return psi.conj().T @ (state.occupations[:, None] * psi)


def density(state: MixedState) -> ModeField:
    """``n = sum_k lam_k |psi_k|^2`` projected onto the sine basis."""
    coeffs = project_product(state.domain, density_matrix(state))
    return ModeField(state.domain, coeffs)


def density_grid(state: MixedState) -> np.ndarray:
    """Pointwise ``sum_k lam_k |psi_k(x)|^2`` on the oversampled grid."""
    out = np.zeros(state.domain.grid_shape)
    for lam, c in zip(state.occupations, state.orbitals):
        if lam != 0:
            out += lam * np.abs(to_grid(ModeField(state.domain, c))) ** 2
    return out


def potential(state: MixedState) -> ModeField:
    """Self-consistent potential ``V = (-Delta)^{-1} n``."""
    return poisson_solve(state.domain, density(state))


def kinetic_energy(state: MixedState) -> float:
    """``sum_k lam_k ||T_m^{1/2} psi_k||^2``."""
    per_orbital = np.abs(state.orbitals) ** 2 @ state.domain.kinetic
    return float(np.dot(state.occupations, per_orbital))


def orbital_expectations(state: MixedState, V: ModeField) -> np.ndarray:
    """``<psi_k, (T_m + V) psi_k>`` for every orbital."""
    H = hamiltonian_matrix(state.domain, V)
    psi = state.orbitals
    return np.real(np.einsum("ka,ab,kb->k", psi.conj(), H, psi))


def energy_forms(state: MixedState) -> tuple[float, float]:
    """Energy with the field term as ``1/2 int n V`` and as ``1/2 int |grad V|^2``."""
    n = density(state)
    V = poisson_solve(state.domain, n)
    kin = kinetic_energy(state)
    by_density = kin + 0.5 * float(np.dot(n.coeffs, V.coeffs))
    by_gradient = kin + 0.5 * h1_seminorm(state.domain, V) ** 2
    return by_density, by_gradient


def energy(state: MixedState) -> float:
    """Conserved energy ``sum lam_k <psi_k, T_m psi_k> + 1/2 ||grad V||^2``."""
    return energy_forms(state)[1]


def casimir_sum(occupations, dist: CasimirDistribution) -> float:
    """``sum_k F*(-lam_k)``."""
    lam = np.asarray(occupations, dtype=float)
    if np.any(lam < 0):
        raise ValueError("occupations outside the domain of F*")
    return float(np.sum(dist.F_star(-lam)))


def casimir_energy(state: MixedState, dist: CasimirDistribution) -> float:
    """Energy-Casimir functional ``sum F*(-lam_k) + H``."""
    return casimir_sum(state.occupations, dist) + energy(state)


def g_functional(state: MixedState, V: ModeField, sigma: float,
                 dist: CasimirDistribution, Lambda: float) -> float:
    """Lagrangian with ``V`` decoupled from the state."""
    _check_domain(state.domain, V.domain)
    lam = state.occupations
    expect = orbital_expectations(state, V)
    return (casimir_sum(lam, dist) + float(np.dot(lam, expect))
            - 0.5 * h1_seminorm(state.domain, V) ** 2
            + sigma * (float(np.sum(lam)) - Lambda))


def gram_schmidt(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Modified Gram-Schmidt on rows with one re-orthogonalization pass."""
    Q = np.array(vectors, dtype=complex, copy=True)
    for k in range(Q.shape[0]):
        v = Q[k]
        norm0 = np.linalg.norm(v)
        for _ in range(2):
            for j in range(k):
                v = v - np.vdot(Q[j], v) * Q[j]
        nv = np.linalg.norm(v)
        if norm0 == 0 or nv <= tol * max(norm0, 1.0) or nv < 1e-8 * norm0:
            raise GramSchmidtError(f"rank loss at orbital {k}")
        Q[k] = v / nv
    return Q


def perturb(state: MixedState, magnitude: float, seed: int) -> MixedState:
    """Random orbital perturbation of Frobenius size ``magnitude``.

    Occupations are left untouched; orbitals are re-orthonormalized.
    """
    if magnitude < 0:
        raise ValueError("perturbation magnitude must be nonnegative")
    if magnitude == 0:
        return state.with_orbitals(state.orbitals)
    rng = np.random.default_rng(seed)
    shape = state.orbitals.shape
    R = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    R *= magnitude / np.linalg.norm(R)
    return state.with_orbitals(gram_schmidt(state.orbitals + R), check=True)


def jensen_check(domain: DomainSpec, V: ModeField, dist: CasimirDistribution,
                 psi: np.ndarray, v_tol: float = 1e-8) -> tuple[float, float]:
    """``F(<psi, H psi>)`` and ``<psi, F(H) psi>`` for ``H = T_m + V``."""
    if np.min(to_grid(V)) < -v_tol:
        raise ValueError("potential must be nonnegative")
    psi = np.asarray(psi, dtype=complex)
    if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
        raise ValueError("psi must be normalized")
    H = hamiltonian_matrix(domain, V)
    mu, U = eigendecompose(H)
    weights = np.abs(U.T @ psi) ** 2
    lhs = float(dist.F(np.real(np.vdot(psi, H @ psi))))
    rhs = float(np.dot(weights, dist.F(mu)))
    return lhs, rhs


def _pairs(a: np.ndarray) -> list:
    return np.stack([a.real, a.imag], axis=-1).tolist()


def state_to_dict(state: MixedState) -> dict:
    """JSON-ready snapshot; orbital coefficients as ``[re, im]`` pairs."""
    return {
        "domain": state.domain.to_dict(),
        "occupations": state.occupations.tolist(),
        "orbitals": _pairs(state.orbitals),
    }


def state_from_dict(data: dict, check: bool = True) -> MixedState:
    domain = DomainSpec.from_dict(data["domain"])
    arr = np.asarray(data["orbitals"], dtype=float)
    psi = arr[..., 0] + 1j * arr[..., 1]
    return MixedState(domain, psi, np.asarray(data["occupations"], dtype=float), check=check)


def random_orbitals(domain: DomainSpec, n_orbitals: int, rng: np.random.Generator,
                    decay: float = 1.0) -> np.ndarray:
    """Random orthonormal rows; coefficients damped by ``(1 + mu0)**(-decay)``.

    The damping keeps random states smooth, like physical orbitals.
    """
    M = domain.size
    if n_orbitals > M:
        raise ValueError("cannot have more orthonormal orbitals than modes")
    weight = (1.0 + domain.mu0 / domain.mu0.min()) ** (-decay)
    A = (rng.standard_normal((M, n_orbitals)) + 1j * rng.standard_normal((M, n_orbitals)))
    Q, _ = np.linalg.qr(weight[:, None] * A)
    return Q.T


def random_state(domain: DomainSpec, n_orbitals: int, rng: np.random.Generator,
                 total: float = 1.0, decay: float = 1.0) -> MixedState:
    """Random orthonormal orbitals with positive occupations summing to ``total``."""
    lam = rng.random(n_orbitals) + 1e-3
    lam *= total / lam.sum()
    return MixedState(domain, random_orbitals(domain, n_orbitals, rng, decay), lam)
