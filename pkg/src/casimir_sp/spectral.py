"""Dirichlet sine-basis discretization of a rectangular box.

Every field lives in the orthonormal basis

    e_k(x) = prod_i sqrt(2/L_i) sin(k_i pi x_i / L_i),   k_i = 1..N_i,

in which the Dirichlet Laplacian is diagonal with eigenvalues
``mu0_k = sum_i (pi k_i / L_i)**2``.  The semi-relativistic kinetic operator
``T_m = sqrt(-Delta + m^2) - m`` is therefore diagonal too.

Products of basis functions are handled in Galerkin form: the integrals
``int e_a e_j e_b`` are known in closed form and factorize over axes, so the
potential matrix and the projected density share one exact tensor.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.linalg

__all__ = [
    "DomainSpec",
    "ModeField",
    "DomainMismatchError",
    "laplacian_spectrum",
    "kinetic_symbol",
    "apply_kinetic",
    "poisson_solve",
    "hminus1_norm",
    "h1_seminorm",
    "to_grid",
    "from_grid",
    "grid_coordinates",
    "product_tensor",
    "project_product",
    "potential_matrix",
    "hamiltonian_matrix",
    "eigendecompose",
    "sobolev_hs_norm",
    "sobolev_inhomogeneous_norm",
]


class DomainMismatchError(ValueError):
    """Raised when a field is combined with a different domain."""


@dataclass(frozen=True)
class DomainSpec:
    """Box geometry, particle mass and spectral truncation.

    Parameters
    ----------
    lengths : tuple of float
        Box side per axis (natural units, hbar = c = 1).
    modes : tuple of int
        Number of sine modes ``N_i`` per axis.
    mass : float
        Particle mass ``m >= 0``.
    grid_oversample : int
        Grid points per axis are ``grid_oversample * N_i``.
    """

    lengths: tuple[float, ...]
    modes: tuple[int, ...]
    mass: float = 0.0
    grid_oversample: int = 2

    def __post_init__(self):
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        modes = tuple(int(n) for n in np.atleast_1d(self.modes))
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "mass", float(self.mass))
        if len(lengths) not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(lengths)}")
        if len(modes) != len(lengths):
            raise ValueError("lengths and modes must have the same number of axes")
        if any(not np.isfinite(x) or x <= 0 for x in lengths):
            raise ValueError(f"box lengths must be positive, got {lengths}")
        if any(n < 1 for n in modes):
            raise ValueError(f"mode counts must be >= 1, got {modes}")
        if not np.isfinite(self.mass) or self.mass < 0:
            raise ValueError(f"mass must be nonnegative, got {self.mass}")
        if int(self.grid_oversample) != self.grid_oversample or self.grid_oversample < 2:
            raise ValueError("grid_oversample must be an integer >= 2")
        object.__setattr__(self, "grid_oversample", int(self.grid_oversample))

    @classmethod
    def box_1d(cls, length=np.pi, modes=64, mass=0.0, grid_oversample=2):
        return cls((length,), (modes,), mass, grid_oversample)

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def size(self) -> int:
        """Total mode count ``M``."""
        return int(np.prod(self.modes))

    @property
    def grid_shape(self) -> tuple[int, ...]:
        return tuple(self.grid_oversample * n for n in self.modes)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    @cached_property
    def multi_indices(self) -> np.ndarray:
        """(M, dim) array of mode multi-indices in storage (C) order."""
        ranges = [np.arange(1, n + 1) for n in self.modes]
        mesh = np.meshgrid(*ranges, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def mu0(self) -> np.ndarray:
        """Dirichlet Laplacian eigenvalues in storage order."""
        k = self.multi_indices
        wave = np.pi / np.asarray(self.lengths)
        return np.sum((k * wave) ** 2, axis=1)

    @cached_property
    def kinetic(self) -> np.ndarray:
        """Symbol of ``T_m`` in storage order."""
        return kinetic_symbol(self.mu0, self.mass)

    @cached_property
    def _axis_tensors(self) -> tuple[np.ndarray, ...]:
        return tuple(product_tensor(n, L) for n, L in zip(self.modes, self.lengths))

    def to_dict(self) -> dict:
        return {
            "lengths": list(self.lengths),
            "modes": list(self.modes),
            "mass": self.mass,
            "grid_oversample": self.grid_oversample,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DomainSpec":
        return cls(
            tuple(data["lengths"]),
            tuple(data["modes"]),
            data.get("mass", 0.0),
            data.get("grid_oversample", 2),
        )


@dataclass(frozen=True, eq=False)
class ModeField:
    """Scalar field stored as sine-mode coefficients (storage order)."""

    domain: DomainSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, copy=True)
        if c.shape != (self.domain.size,):
            raise ValueError(
                f"expected {self.domain.size} coefficients, got shape {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, domain: DomainSpec, dtype=float) -> "ModeField":
        return cls(domain, np.zeros(domain.size, dtype=dtype))

    @classmethod
    def basis(cls, domain: DomainSpec, index: int = 0) -> "ModeField":
        """Basis function number ``index`` in storage order."""
        c = np.zeros(domain.size)
        c[index] = 1.0
        return cls(domain, c)

    def norm(self) -> float:
        """L2 norm, equal to the coefficient norm by Parseval."""
        return float(np.linalg.norm(self.coeffs))

    def inner(self, other: "ModeField") -> complex | float:
        _check_domain(self.domain, other.domain)
        return np.vdot(self.coeffs, other.coeffs)

    def __add__(self, other: "ModeField") -> "ModeField":
        _check_domain(self.domain, other.domain)
        return ModeField(self.domain, self.coeffs + other.coeffs)

    def __sub__(self, other: "ModeField") -> "ModeField":
        _check_domain(self.domain, other.domain)
        return ModeField(self.domain, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "ModeField":
        return ModeField(self.domain, self.coeffs * scalar)

    __rmul__ = __mul__


def _check_domain(a: DomainSpec, b: DomainSpec) -> None:
    if a != b:
        raise DomainMismatchError("fields live on different domains")


def laplacian_spectrum(domain: DomainSpec) -> list[tuple[tuple[int, ...], float]]:
    """All Dirichlet eigenvalues sorted ascending.

    Ties are broken by the lexicographic order of the multi-index.
    """
    pairs = [(tuple(int(k) for k in idx), float(mu))
             for idx, mu in zip(domain.multi_indices, domain.mu0)]
    pairs.sort(key=lambda p: (p[1], p[0]))
    return pairs


def kinetic_symbol(mu0, mass: float) -> np.ndarray:
    """``sqrt(mu0 + m^2) - m`` evaluated without cancellation for large m."""
    mu0 = np.asarray(mu0, dtype=float)
    # mu0 / (sqrt(mu0 + m^2) + m) is algebraically identical and stable
    return mu0 / (np.sqrt(mu0 + mass * mass) + mass)


def apply_kinetic(domain: DomainSpec, f: ModeField, power: float = 1.0) -> ModeField:
    """Apply ``T_m**power`` coefficient-wise."""
    _check_domain(domain, f.domain)
    return ModeField(domain, f.coeffs * domain.kinetic ** power)


def poisson_solve(domain: DomainSpec, density: ModeField) -> ModeField:
    """Solve ``-Delta V = n`` with Dirichlet conditions."""
    _check_domain(domain, density.domain)
    if np.iscomplexobj(density.coeffs) and np.any(density.coeffs.imag != 0):
        raise ValueError("density must be real-valued")
    return ModeField(domain, np.real(density.coeffs) / domain.mu0)


def hminus1_norm(domain: DomainSpec, u: ModeField) -> float:
    """``(u, (-Delta)^{-1} u)^{1/2}``."""
    _check_domain(domain, u.domain)
    return float(np.sqrt(np.sum(np.abs(u.coeffs) ** 2 / domain.mu0)))


def h1_seminorm(domain: DomainSpec, v: ModeField) -> float:
    """``||grad v||_{L2}``."""
    _check_domain(domain, v.domain)
    return float(np.sqrt(np.sum(domain.mu0 * np.abs(v.coeffs) ** 2)))


def grid_coordinates(domain: DomainSpec) -> tuple[np.ndarray, ...]:
    """Interior grid nodes ``x_j = j L / (P + 1)``, ``j = 1..P`` per axis."""
    return tuple(
        np.arange(1, P + 1) * L / (P + 1)
        for P, L in zip(domain.grid_shape, domain.lengths)
    )


def to_grid(f: ModeField) -> np.ndarray:
    """Sample a field on the oversampled interior grid (inverse sine transform)."""
    domain = f.domain
    arr = np.zeros(domain.grid_shape, dtype=f.coeffs.dtype)
    arr[tuple(slice(0, n) for n in domain.modes)] = f.coeffs.reshape(domain.modes)
    for axis, L in enumerate(domain.lengths):
        # DST-I computes 2 * sum_k c_k sin(pi k j / (P + 1))
        arr = scipy.fft.dst(arr, type=1, axis=axis) * (0.5 * np.sqrt(2.0 / L))
    return arr


def from_grid(domain: DomainSpec, values: np.ndarray) -> ModeField:
    """Sine coefficients of grid samples, truncated to the domain's modes.

    Exact for band-limited input; otherwise aliasing from modes above the grid
    Nyquist index folds back into the kept coefficients.
    """
    values = np.asarray(values)
    if values.shape != domain.grid_shape:
        raise ValueError(f"grid shape {values.shape} != {domain.grid_shape}")
    arr = values
    for axis, (P, L) in enumerate(zip(domain.grid_shape, domain.lengths)):
        arr = scipy.fft.dst(arr, type=1, axis=axis) / ((P + 1) * np.sqrt(2.0 / L))
    coeffs = arr[tuple(slice(0, n) for n in domain.modes)].ravel()
    return ModeField(domain, coeffs)


def _sine_integral(q: np.ndarray) -> np.ndarray:
    """``int_0^pi sin(q t) dt`` for integer q."""
    q = np.asarray(q)
    out = np.zeros(q.shape)
    odd = (q % 2) != 0
    out[odd] = 2.0 / q[odd]
    return out


def product_tensor(n: int, length: float) -> np.ndarray:
    """``T[a, j, b] = int_0^L e_a e_j e_b dx`` for the 1D sine basis, modes 1..n."""
    k = np.arange(1, n + 1)
    a, j, b = np.meshgrid(k, k, k, indexing="ij")
    s = (_sine_integral(a + j - b) + _sine_integral(j + b - a)
         + _sine_integral(b + a - j) - _sine_integral(a + j + b))
    return (2.0 / length) ** 1.5 * (length / np.pi) * 0.25 * s


def _einsum_axes(d: int) -> tuple[str, str, str, list[str]]:
    letters = iter(string.ascii_letters)
    a = [next(letters) for _ in range(d)]
    j = [next(letters) for _ in range(d)]
    b = [next(letters) for _ in range(d)]
    tensors = [a[i] + j[i] + b[i] for i in range(d)]
    return "".join(a), "".join(j), "".join(b), tensors


def potential_matrix(domain: DomainSpec, V: ModeField) -> np.ndarray:
    """Galerkin matrix ``W[a, b] = int e_a V e_b`` (real symmetric)."""
    _check_domain(domain, V.domain)
    d = domain.dim
    sa, sj, sb, ts = _einsum_axes(d)
    expr = ",".join(ts) + "," + sj + "->" + sa + sb
    W = np.einsum(expr, *domain._axis_tensors,
                  np.real(V.coeffs).reshape(domain.modes), optimize=True)
    return W.reshape(domain.size, domain.size)


def project_product(domain: DomainSpec, R: np.ndarray) -> np.ndarray:
    """Coefficients of ``sum_ab R_ab e_a e_b`` projected onto the sine basis.

    ``R`` is an (M, M) matrix; only its symmetric real part contributes because
    the product tensor is symmetric in ``a, b``.
    """
    d = domain.dim
    sa, sj, sb, ts = _einsum_axes(d)
    expr = ",".join(ts) + "," + sa + sb + "->" + sj
    Rr = np.real(R).reshape(domain.modes + domain.modes)
    return np.einsum(expr, *domain._axis_tensors, Rr, optimize=True).ravel()


def hamiltonian_matrix(domain: DomainSpec, V: ModeField,
                       return_defect: bool = False):
    """Matrix of ``T_m + V`` in the sine basis.

    The potential block is symmetrized after assembly; with
    ``return_defect=True`` the pre-symmetrization defect is returned too.
    """
    W = potential_matrix(domain, V)
    defect = float(np.max(np.abs(W - W.T))) if W.size else 0.0
    H = 0.5 * (W + W.T)
    H[np.diag_indices_from(H)] += domain.kinetic
    if return_defect:
        return H, defect
    return H


def eigendecompose(H: np.ndarray, sym_tol: float = 1e-10):
    """Eigenpairs of a real symmetric (or Hermitian) matrix.

    Returns ascending eigenvalues and an orthonormal eigenvector matrix whose
    columns have their largest-magnitude component real and positive.
    Degenerate clusters are ordered lexicographically on the coefficients.
    """
    H = np.asarray(H)
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    if np.max(np.abs(H - H.conj().T), initial=0.0) > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    w, U = scipy.linalg.eigh(H)
    idx = np.argmax(np.abs(U), axis=0)
    piv = U[idx, np.arange(U.shape[1])]
    U = U * (np.abs(piv) / piv)[None, :]

    tol = 1e-12 * scale
    order = np.arange(len(w))
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[start] <= tol:
            stop += 1
        if stop - start > 1:
            block = list(range(start, stop))
            block.sort(key=lambda c: tuple(np.round(np.real(U[:, c]), 12)))
            order[start:stop] = block
        start = stop
    return w[order], U[:, order]


def sobolev_hs_norm(domain: DomainSpec, orbitals: np.ndarray, occupations,
                    s: float) -> float:
    """Homogeneous norm ``(sum_k lam_k ||(-Delta)^{s/2} phi_k||^2)^{1/2}``."""
    lam = _check_occupations(occupations)
    weights = domain.mu0 ** s
    return float(np.sqrt(np.sum(lam * (np.abs(orbitals) ** 2 @ weights))))


def sobolev_inhomogeneous_norm(domain: DomainSpec, orbitals: np.ndarray,
                               occupations, s: float) -> float:
    """Inhomogeneous norm with ``||phi||_{H^s}^2 = sum_j (1 + mu0_j)^s |phi_j|^2``."""
    lam = _check_occupations(occupations)
    weights = (1.0 + domain.mu0) ** s
    return float(np.sqrt(np.sum(lam * (np.abs(orbitals) ** 2 @ weights))))


def _check_occupations(occupations) -> np.ndarray:
    lam = np.asarray(occupations, dtype=float)
    if np.any(lam < 0):
        raise ValueError("occupations must be nonnegative")
    return lam
