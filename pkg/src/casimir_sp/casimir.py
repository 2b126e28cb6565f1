"""Casimir-class distribution functions.

A member of the class is a continuous ``f`` that is positive below a cutoff
``s0`` (possibly infinite), zero above it, strictly decreasing on
``(-inf, s0]`` with ``f -> inf`` at ``-inf``, and decaying at least like
``(1 + s)**(-5 - eps)`` for ``s >= 0``.  From ``f`` one builds

* ``F(s) = int_s^inf f``, the integrated distribution;
* ``f^{-1}`` on ``(0, inf)``;
* ``F*(s) = sup_lam (lam s - F(lam)) = int_{-s}^0 f^{-1}``, for ``s <= 0``.

Subclass :class:`CasimirDistribution` and implement the four callables to
add a member.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

__all__ = [
    "CasimirDistribution",
    "Boltzmann",
    "PowerCutoff",
    "CasimirReport",
    "distribution_from_dict",
    "f_eval",
    "f_inverse",
    "big_f",
    "f_star",
    "f_star_bruteforce",
    "validate_casimir",
]


class CasimirDistribution:
    """Interface for a Casimir-class distribution."""

    s0: float = np.inf

    def f(self, s):
        raise NotImplementedError

    def f_prime(self, s):
        raise NotImplementedError

    def f_inv(self, y):
        raise NotImplementedError

    def F(self, s):
        raise NotImplementedError

    def F_star(self, s):
        raise NotImplementedError

    def decay_constants(self) -> tuple[float, float]:
        """``(C, eps)`` with ``f(s) <= C (1 + s)**(-5 - eps)`` for ``s >= 0``."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


def _check_star_domain(s):
    s = np.asarray(s, dtype=float)
    if np.any(s > 0):
        raise ValueError("F* is only defined for s <= 0")
    return s


@dataclass(frozen=True)
class Boltzmann(CasimirDistribution):
    """``f(s) = exp(-beta s)``, no cutoff."""

    beta: float = 1.0
    s0: float = field(default=np.inf, init=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    def f(self, s):
        return np.exp(-self.beta * np.asarray(s, dtype=float))

    def f_prime(self, s):
        return -self.beta * self.f(s)

    def f_inv(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0):
            raise ValueError("f^{-1} needs y > 0")
        return -np.log(y) / self.beta

    def F(self, s):
        return self.f(s) / self.beta

    def F_star(self, s):
        lam = -_check_star_domain(s)
        # lam log lam -> 0 as lam -> 0
        safe = np.where(lam > 0, lam, 1.0)
        out = np.where(lam > 0, lam * np.log(safe) - lam, 0.0) / self.beta
        return out if out.ndim else float(out)

    def decay_constants(self):
        eps = 1.0
        s_peak = max(0.0, (5.0 + eps) / self.beta - 1.0)
        return float(np.exp(-self.beta * s_peak) * (1.0 + s_peak) ** (5.0 + eps)), eps

    def to_dict(self):
        return {"kind": "boltzmann", "beta": self.beta}


@dataclass(frozen=True)
class PowerCutoff(CasimirDistribution):
    """``f(s) = ((s0 - s)_+)**p`` with a finite cutoff ``s0``."""

    s0: float = 1.0
    p: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.s0) and self.s0 > 0):
            raise ValueError(f"s0 must be positive and finite, got {self.s0}")
        if not self.p >= 1:
            raise ValueError(f"p must be >= 1, got {self.p}")

    def f(self, s):
        return np.maximum(self.s0 - np.asarray(s, dtype=float), 0.0) ** self.p

    def f_prime(self, s):
        gap = np.maximum(self.s0 - np.asarray(s, dtype=float), 0.0)
        return np.where(gap > 0, -self.p * gap ** (self.p - 1.0), 0.0)

    def f_inv(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0):
            raise ValueError("f^{-1} needs y > 0")
        return self.s0 - y ** (1.0 / self.p)

    def F(self, s):
        gap = np.maximum(self.s0 - np.asarray(s, dtype=float), 0.0)
        return gap ** (self.p + 1.0) / (self.p + 1.0)

    def F_star(self, s):
        lam = -_check_star_domain(s)
        p = self.p
        out = -self.s0 * lam + p / (p + 1.0) * lam ** ((p + 1.0) / p)
        return out if np.ndim(out) else float(out)

    def decay_constants(self):
        eps = 1.0
        res = scipy.optimize.minimize_scalar(
            lambda s: -float(self.f(s)) * (1.0 + s) ** (5.0 + eps),
            bounds=(0.0, self.s0), method="bounded",
            options={"xatol": 1e-12},
        )
        grid = np.linspace(0.0, self.s0, 2001)
        c = max(-res.fun, float(np.max(self.f(grid) * (1.0 + grid) ** (5.0 + eps))))
        return c, eps

    def to_dict(self):
        return {"kind": "power_cutoff", "s0": self.s0, "p": self.p}


def distribution_from_dict(data: dict) -> CasimirDistribution:
    """Build a distribution from ``{"kind": ..., params}``; unknown keys rejected."""
    data = dict(data)
    kind = data.pop("kind", None)
    if kind == "boltzmann":
        allowed = {"beta"}
        cls = Boltzmann
    elif kind == "power_cutoff":
        allowed = {"s0", "p"}
        cls = PowerCutoff
    else:
        raise ValueError(f"unknown distribution kind {kind!r}")
    extra = set(data) - allowed
    if extra:
        raise ValueError(f"unknown keys for {kind}: {sorted(extra)}")
    return cls(**{k: float(v) for k, v in data.items()})


def f_eval(dist: CasimirDistribution, s):
    return dist.f(s)


def f_inverse(dist: CasimirDistribution, y):
    return dist.f_inv(y)


def big_f(dist: CasimirDistribution, s):
    return dist.F(s)


def f_star(dist: CasimirDistribution, s):
    return dist.F_star(s)


def f_star_bruteforce(dist: CasimirDistribution, s: float,
                      lam_grid: np.ndarray | None = None) -> float:
    """``sup_lam (lam s - F(lam))`` by grid search followed by golden refinement.

    Independent of the closed forms; used as a test oracle.
    """
    if s > 0:
        raise ValueError("F* is only defined for s <= 0")
    if lam_grid is None:
        hi = dist.s0 if np.isfinite(dist.s0) else 50.0
        lam_grid = np.linspace(-50.0, hi + 1.0, 200001)
    vals = lam_grid * s - dist.F(lam_grid)
    i = int(np.argmax(vals))
    lo = lam_grid[max(i - 1, 0)]
    hi = lam_grid[min(i + 1, len(lam_grid) - 1)]
    if hi > lo:
        res = scipy.optimize.minimize_scalar(
            lambda x: -(x * s - float(dist.F(x))), bounds=(lo, hi),
            method="bounded", options={"xatol": 1e-13})
        return float(max(vals[i], -res.fun))
    return float(vals[i])


@dataclass
class CasimirReport:
    """Outcome of :func:`validate_casimir`."""

    continuous: bool
    positive_below_cutoff: bool
    zero_above_cutoff: bool
    strictly_decreasing: bool
    decay_bound: bool
    fitted_C: float
    fitted_eps: float
    failures: list[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def validate_casimir(dist, sample_range=(-10.0, 50.0), n_samples=10_000,
                     eps: float = 1.0) -> CasimirReport:
    """Scan ``dist.f`` for the class properties; never raises on a bad ``f``.

    The decay bound is checked with the supplied ``eps`` and the smallest
    constant ``C`` that makes it hold on the sample.  ``fitted_eps`` is the
    log-log tail slope minus five (``inf`` when the sampled tail vanishes).
    """
    failures = []
    s = np.linspace(sample_range[0], sample_range[1], int(n_samples))
    try:
        y = np.asarray(dist.f(s), dtype=float)
    except Exception as exc:  # report, don't propagate
        return CasimirReport(False, False, False, False, False, np.nan, np.nan,
                             [f"evaluation failed: {exc}"])
    s0 = float(getattr(dist, "s0", np.inf))
    below = s < s0
    finite = bool(np.all(np.isfinite(y)))

    jumps = np.abs(np.diff(y))
    scale = max(1.0, float(np.max(np.abs(y)))) if finite else 1.0
    h = s[1] - s[0]
    # continuity: no jump much larger than the local slope allows
    slope = np.abs(np.gradient(y, h))
    continuous = finite and bool(np.all(jumps <= 4 * h * np.maximum(slope[1:], slope[:-1]) + 1e-12 * scale))
    if not continuous:
        failures.append("(i) f is not continuous on the sample")

    positive = bool(np.all(y[below] > 0))
    if not positive:
        failures.append("(i) f is not positive below the cutoff")
    zero_above = bool(np.all(y[~below] == 0))
    if not zero_above:
        failures.append("(i) f is not zero at and above the cutoff")

    decreasing = bool(np.all(np.diff(y[below]) < 0)) if below.sum() > 1 else True
    if not decreasing:
        failures.append("(ii) f is not strictly decreasing below the cutoff")

    tail = s >= 0
    weights = (1.0 + s[tail]) ** (5.0 + eps)
    fitted_C = float(np.max(y[tail] * weights)) if tail.any() else 0.0
    pos = tail & (y > 0)
    if pos.sum() >= 4 and s[pos][-1] > 1.0:
        half = pos & (s >= 0.5 * s[pos][-1])
        slope_fit = np.polyfit(np.log1p(s[half]), np.log(y[half]), 1)[0]
        fitted_eps = float(-slope_fit - 5.0)
    else:
        fitted_eps = np.inf
    decay_ok = finite and np.isfinite(fitted_C) and fitted_eps > 0
    if not decay_ok:
        failures.append("(iii) polynomial decay bound not satisfied")

    return CasimirReport(continuous, positive, zero_above, decreasing,
                         bool(decay_ok), fitted_C, fitted_eps, failures)
