"""Stability campaign and property suites.

:func:`run_stability` solves for the stationary state once, perturbs its
orbitals for every ``(epsilon, seed)`` cell, evolves the perturbed state and
compares the largest density distance seen along the trajectory with the
energy-Casimir gap at ``t = 0``:

    1/2 ||n(t) - n0||^2_{H^-1}  <=  H_C(Psi(0), lam) - H_C(Psi0, lam0).

:func:`run_lemma_suite` runs the structural checks of every numerical module
(conjugate inequalities, trace inequalities, duality, conservation, order of
accuracy) and returns one row per check.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .casimir import CasimirDistribution, validate_casimir
from .evolution import EvolutionConfig, evolve, mild_residual, strang_step
from .spectral import (
    DomainSpec,
    ModeField,
    eigendecompose,
    hamiltonian_matrix,
    h1_seminorm,
    poisson_solve,
    to_grid,
)
from .state import (
    MixedState,
    casimir_energy,
    density,
    density_grid,
    energy_forms,
    g_functional,
    jensen_check,
    perturb,
    random_orbitals,
    random_state,
)
from .stationary import (
    SolverConfig,
    StationarySolution,
    duality_check,
    eigen_residuals,
    trace_bound,
    membership_report,
    phi_eval,
    scf_solve,
)

__all__ = [
    "ExperimentPlan",
    "StabilityRow",
    "StabilityReport",
    "CheckResult",
    "VerificationReport",
    "STABILITY_COLUMNS",
    "SUITES",
    "run_stability",
    "run_lemma_suite",
]

log = logging.getLogger(__name__)

STABILITY_COLUMNS = ("epsilon", "seed", "casimir_gap", "max_lhs", "violation_margin", "pass")
SUITES = ("casimir", "spectral", "state", "stationary", "evolution")
GAP_FLOOR = -1e-9


@dataclass(frozen=True)
class ExperimentPlan:
    """Everything that defines a stability or verification run.

    ``perturbation_sizes`` may contain ``0`` (the unperturbed control cell).
    """

    domain: DomainSpec
    dist: CasimirDistribution
    Lambda: float = 1.0
    perturbation_sizes: tuple[float, ...] = (1e-3, 3e-3, 1e-2)
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    seeds: tuple[int, ...] = (0, 1, 2)
    solver: SolverConfig | None = None
    violation_tol: float = 1e-6
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "perturbation_sizes", tuple(float(e) for e in self.perturbation_sizes))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.perturbation_sizes:
            raise ValueError("perturbation_sizes must not be empty")
        if not self.seeds:
            raise ValueError("seeds must not be empty")
        if any(not (np.isfinite(e) and e >= 0) for e in self.perturbation_sizes):
            raise ValueError("perturbation sizes must be finite and nonnegative")
        if not self.Lambda > 0:
            raise ValueError("Lambda must be positive")
        if not self.violation_tol >= 0:
            raise ValueError("violation_tol must be nonnegative")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.solver is None:
            object.__setattr__(self, "solver", SolverConfig(Lambda=self.Lambda))
        elif self.solver.Lambda != self.Lambda:
            raise ValueError("solver.Lambda and Lambda disagree")


@dataclass
class StabilityRow:
    epsilon: float
    seed: int
    casimir_gap: float
    max_lhs: float
    violation_margin: float
    passed: bool
    status: str = "ok"
    orbital_distance: float = float("nan")

    def csv_values(self) -> tuple:
        return (self.epsilon, self.seed, self.casimir_gap, self.max_lhs,
                self.violation_margin, self.passed)


@dataclass
class StabilityReport:
    rows: list[StabilityRow]
    scaling_exponent: float
    gap_monotone: bool
    stationary: dict

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "scaling_exponent": self.scaling_exponent,
            "gap_monotone_in_epsilon": self.gap_monotone,
            "n_cells": len(self.rows),
            "n_failed": sum(not r.passed for r in self.rows),
            "worst_violation_margin": max(
                (r.violation_margin for r in self.rows if np.isfinite(r.violation_margin)),
                default=float("nan")),
            "stationary": self.stationary,
            "rows": [asdict(r) for r in self.rows],
        }


def _stationary_summary(sol: StationarySolution) -> dict:
    return {
        "sigma0": sol.sigma0,
        "phi": sol.phi,
        "residual_poisson": sol.residual_poisson,
        "residual_constraint": sol.residual_constraint,
        "duality_gap": sol.duality_gap,
        "iterations": sol.iterations,
        "n_orbitals": sol.state.n_orbitals,
    }


def _stability_cell(plan: ExperimentPlan, sol: StationarySolution,
                    eps: float, seed: int) -> StabilityRow:
    try:
        hc0 = casimir_energy(sol.state, plan.dist)
        start = perturb(sol.state, eps, seed)
        gap = casimir_energy(start, plan.dist) - hc0
        _, rec = evolve(start, plan.evolution, reference=sol, dist=plan.dist)
        max_lhs = 0.5 * max(d * d for d in rec.hminus1_dist)
        margin = max_lhs - gap
        status = "ok" if gap >= GAP_FLOOR else "gap_below_minimum"
        orbital = float(np.linalg.norm(start.orbitals - sol.state.orbitals))
        return StabilityRow(eps, seed, gap, max_lhs, margin,
                            bool(margin <= plan.violation_tol), status, orbital)
    except Exception as exc:  # a failed cell is reported, never dropped
        log.warning("stability cell eps=%g seed=%d failed: %s", eps, seed, exc)
        nan = float("nan")
        return StabilityRow(eps, seed, nan, nan, nan, False,
                            f"error: {type(exc).__name__}: {exc}")


def _fit_exponent(rows: list[StabilityRow]) -> float:
    pts = [(r.epsilon, r.casimir_gap) for r in rows
           if r.epsilon > 0 and np.isfinite(r.casimir_gap) and r.casimir_gap > 0]
    if len({e for e, _ in pts}) < 2:
        return float("nan")
    e, g = np.log(np.array(pts)).T
    return float(np.polyfit(e, g, 1)[0])


def _monotone(rows: list[StabilityRow]) -> bool:
    sizes = sorted({r.epsilon for r in rows})
    means = []
    for eps in sizes:
        gaps = [r.casimir_gap for r in rows if r.epsilon == eps]
        means.append(np.mean(gaps))
    return bool(np.all(np.diff(means) >= -1e-12))


def run_stability(plan: ExperimentPlan, solution: StationarySolution | None = None) -> StabilityReport:
    """Evolve perturbations of the stationary state and test the stability bound.

    Cells are independent; with ``plan.threads > 1`` they run in a thread
    pool, and the report keeps the ``(epsilon, seed)`` order of the plan.
    """
    sol = solution if solution is not None else scf_solve(plan.domain, plan.dist, plan.solver)
    cells = [(eps, seed) for eps in plan.perturbation_sizes for seed in plan.seeds]
    if plan.threads > 1:
        with ThreadPoolExecutor(max_workers=plan.threads) as pool:
            rows = list(pool.map(lambda c: _stability_cell(plan, sol, *c), cells))
    else:
        rows = [_stability_cell(plan, sol, *c) for c in cells]
    return StabilityReport(rows, _fit_exponent(rows), _monotone(rows), _stationary_summary(sol))


# --------------------------------------------------------------------------
# property suites


@dataclass
class CheckResult:
    suite: str
    name: str
    passed: bool
    count: int = 1
    failures: int = 0
    worst_margin: float = float("nan")
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_checks": len(self.checks),
            "n_failed": len(self.failed()),
            "checks": [asdict(c) for c in self.checks],
        }


def _margin_check(suite: str, name: str, margins, detail: str = "") -> CheckResult:
    """Pass when every margin is ``>= 0``; ``worst_margin`` is the minimum."""
    m = np.atleast_1d(np.asarray(margins, dtype=float))
    bad = int(np.sum(~(m >= 0)))
    worst = float(np.min(m)) if m.size else float("nan")
    return CheckResult(suite, name, bad == 0, int(m.size), bad, worst, detail)


class _Context:
    """Lazily shared state for the suites (one stationary solve per run)."""

    def __init__(self, plan: ExperimentPlan):
        self.plan = plan
        self.domain = plan.domain
        self.dist = plan.dist
        self.rng = np.random.default_rng(plan.seeds[0])
        self._sol = None

    @property
    def sol(self) -> StationarySolution:
        if self._sol is None:
            self._sol = scf_solve(self.domain, self.dist, self.plan.solver)
        return self._sol

    def random_potential(self) -> ModeField:
        """Nonnegative potential generated by a random smooth density."""
        st = random_state(self.domain, 4, self.rng, total=float(self.rng.uniform(0.2, 2.0)), decay=2.0)
        return poisson_solve(self.domain, density(st))

    def random_psi(self, decay: float = 1.0) -> np.ndarray:
        return random_orbitals(self.domain, 1, self.rng, decay)[0]


def _suite_casimir(ctx: _Context):
    dist, S = ctx.dist, "casimir"
    rep = validate_casimir(dist)
    yield CheckResult(S, "class properties", rep.ok, failures=len(rep.failures),
                      detail="; ".join(rep.failures) or
                      f"fitted C={rep.fitted_C:.4g}, tail eps={rep.fitted_eps:.4g}")

    hi = min(dist.s0, 6.0)
    lam = np.linspace(-4.0, hi + 0.5, 100)
    s = np.linspace(-5.0, 0.0, 100)
    L, Sg = np.meshgrid(lam, s, indexing="ij")
    star = dist.F_star(Sg)
    margin = star - (L * Sg - dist.F(L))
    yield _margin_check(S, "Fenchel-Young inequality", margin + 1e-12 * (1 + np.abs(star)))

    mu = ctx.rng.uniform(-3.0, min(dist.s0, 10.0), 1000)
    mu = mu[mu < dist.s0]
    y = dist.f(mu)
    lhs = dist.F_star(-y)
    rhs = -mu * y - dist.F(mu)
    rel = np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))
    yield _margin_check(S, "conjugate equality at lam = f(mu)", 1e-9 - rel)

    h = 1e-4
    xs = np.linspace(-3.0, min(dist.s0, 8.0) - 0.05, 200)
    dF = (dist.F(xs + h) - dist.F(xs - h)) / (2 * h)
    err = np.abs(dF + dist.f(xs)) / np.maximum(1.0, np.abs(dist.f(xs)))
    yield _margin_check(S, "F' = -f", 1e-6 - err)
    lams = np.linspace(0.05, 5.0, 200)
    dS = (dist.F_star(-lams + h) - dist.F_star(-lams - h)) / (2 * h)
    err = np.abs(dS - dist.f_inv(lams)) / np.maximum(1.0, np.abs(dist.f_inv(lams)))
    yield _margin_check(S, "(F*)'(-lam) = f^-1(lam)", 1e-6 - err)

    grid = np.linspace(-10.0, 0.0, 100_001)
    step = grid[1] - grid[0]
    offsets = []
    for bp in (1.5, 2.0, 4.0):
        g = dist.F(grid) + bp * grid
        s_star = float(dist.f_inv(bp))
        expected = min(s_star, 0.0)
        offsets.append(2 * step - abs(grid[int(np.argmin(g))] - expected))
        if not np.all(np.isfinite(g)):
            offsets[-1] = -1.0
    yield _margin_check(S, "tangent lower bound", offsets,
                        "minimum of F(s) + b s on s <= 0 sits at min(f^-1(b), 0)")

    a = ctx.rng.uniform(-3.0, hi, 1000)
    b = ctx.rng.uniform(-3.0, hi, 1000)
    t = ctx.rng.uniform(0.0, 1.0, 1000)
    mix = dist.F(t * a + (1 - t) * b)
    chord = t * dist.F(a) + (1 - t) * dist.F(b)
    yield _margin_check(S, "convexity of F", chord - mix + 1e-12 * (1 + np.abs(chord)))


def _suite_spectral(ctx: _Context):
    dom, S, rng = ctx.domain, "spectral", ctx.rng
    M = dom.size
    rel = []
    for _ in range(20):
        c = rng.standard_normal(M) * (1 + np.arange(M)) ** -1.0
        f = ModeField(dom, c)
        cell = np.prod([L / (P + 1) for L, P in zip(dom.lengths, dom.grid_shape)])
        quad = float(np.sum(np.abs(to_grid(f)) ** 2) * cell)
        rel.append(abs(quad - f.norm() ** 2) / f.norm() ** 2)
    yield _margin_check(S, "Parseval", 1e-10 - np.array(rel))

    V = ctx.sol.V0
    H = hamiltonian_matrix(dom, V)
    batch = min(M, 50)
    forms_t, forms_h, tmp = [], [], []
    for _ in range(-(-1000 // batch)):
        U = random_orbitals(dom, batch, rng, 0.5)
        for psi in U:
            w = np.abs(psi) ** 2
            forms_t.append(float(w @ dom.kinetic))
            forms_h.append(float(np.real(np.vdot(psi, H @ psi))))
            tmp.append(float(w @ dom.kinetic) - (float(w @ np.sqrt(dom.mu0)) - dom.mass))
    yield _margin_check(S, "form positivity of T_m", np.array(forms_t))
    yield _margin_check(S, "form positivity of T_m + V", np.array(forms_h) + 1e-12)
    yield _margin_check(S, "T_m >= |p| - m", np.array(tmp) + 1e-12)

    n = density(ctx.sol.state)
    back = dom.mu0 * poisson_solve(dom, n).coeffs
    err = np.max(np.abs(back - n.coeffs)) / max(1.0, np.max(np.abs(n.coeffs)))
    yield _margin_check(S, "Poisson inverse", 1e-12 - err)

    m, mu0 = dom.mass, dom.mu0
    T = dom.kinetic
    ident = np.abs(T ** 2 + 2 * m * T - mu0) / np.maximum(1.0, mu0)
    yield _margin_check(S, "T_m^2 + 2m T_m = -Delta per mode", 1e-12 - ident)

    resid = []
    for A in (H, _random_symmetric(rng, 16)):
        w, U = eigendecompose(A)
        norm = np.linalg.norm(A, 2)
        resid.append(np.max(np.linalg.norm(A @ U - U * w, axis=0)) / norm - 1e-9)
        resid.append(np.max(np.abs(U.T @ U - np.eye(len(w)))) - 1e-10)
    yield _margin_check(S, "eigen residuals and orthonormality", -np.array(resid))

    k = np.arange(1, M + 1)
    mu_sorted = np.sort(mu0)
    C = float(np.min(mu_sorted / k ** (2.0 / 3.0)))
    yield CheckResult(S, "semiclassical lower bound mu_k >= C k^(2/3)", C > 0,
                      M, 0 if C > 0 else 1, C, f"fitted C={C:.6g}")


def _random_symmetric(rng, n):
    A = rng.standard_normal((n, n))
    return 0.5 * (A + A.T)


def _suite_state(ctx: _Context):
    dom, dist, S, rng = ctx.domain, ctx.dist, "state", ctx.rng
    sol = ctx.sol
    cell = np.prod([L / (P + 1) for L, P in zip(dom.lengths, dom.grid_shape)])
    ng = density_grid(sol.state)
    mass = float(np.sum(ng) * cell)
    yield _margin_check(S, "density nonnegative on grid", ng.ravel() + 1e-10)
    yield _margin_check(S, "mass bookkeeping", 1e-10 * max(1.0, mass)
                        - abs(mass - sol.state.total_occupation))

    V = sol.V0
    margins = []
    for _ in range(1000):
        lhs, rhs = jensen_check(dom, V, dist, ctx.random_psi())
        margins.append(rhs - lhs + 1e-12 * (1 + abs(rhs)))
    yield _margin_check(S, "Jensen trace inequality", margins)
    H = hamiltonian_matrix(dom, V)
    mu, U = eigendecompose(H)
    eq = []
    for j in range(min(10, dom.size)):
        lhs, rhs = jensen_check(dom, V, dist, U[:, j])
        eq.append(1e-9 - abs(lhs - rhs) / max(1.0, abs(rhs)))
    yield _margin_check(S, "Jensen equality on eigenstates", eq)
    if np.isfinite(dist.s0):
        # eigenstates beyond the cutoff: both sides vanish up to eigenvector round-off
        above = np.nonzero(mu >= dist.s0)[0][:10]
        zeros = [max(abs(v) for v in jensen_check(dom, V, dist, U[:, j])) for j in above]
        yield _margin_check(S, "Jensen equality beyond the cutoff", 1e-14 - np.array(zeros))

    margins = []
    for _ in range(100):
        Vr = ctx.random_potential() * float(rng.uniform(0.0, 3.0))
        st = random_state(dom, int(rng.integers(1, 9)), rng, float(rng.uniform(0.1, 3.0)))
        lhs, rhs = trace_bound(st, Vr, 0.0, dist)
        margins.append(lhs - rhs + 1e-9 * (1 + abs(rhs)))
    yield _margin_check(S, "trace lower bound, random states", margins)

    full = MixedState(dom, U.T, dist.f(mu))
    lhs, rhs = trace_bound(full, V, 0.0, dist)
    yield _margin_check(S, "trace lower bound equality at eigenstates",
                        1e-9 - abs(lhs - rhs) / max(1.0, abs(rhs)))

    defects = []
    for _ in range(20):
        st = random_state(dom, 5, rng, 1.0)
        Vr = ModeField(dom, rng.standard_normal(dom.size) / (1 + np.arange(dom.size)))
        sigma = float(rng.normal())
        Vs = poisson_solve(dom, density(st))
        expect = (casimir_energy(st, dist) + sigma * (st.total_occupation - ctx.plan.Lambda)
                  - 0.5 * h1_seminorm(dom, Vs - Vr) ** 2)
        got = g_functional(st, Vr, sigma, dist, ctx.plan.Lambda)
        defects.append(1e-9 - abs(got - expect) / max(1.0, abs(expect)))
    yield _margin_check(S, "Lagrangian deficit identity", defects)

    forms = [abs(a - b) / max(1.0, abs(a)) for a, b in
             (energy_forms(random_state(dom, 4, rng)) for _ in range(10))]
    yield _margin_check(S, "energy forms agree", 1e-10 - np.array(forms))

    remix = []
    for _ in range(10):
        base = random_state(dom, 6, rng)
        lam = np.repeat(base.occupations[:3], 2)
        st = MixedState(dom, base.orbitals, lam)
        psi = st.orbitals.copy()
        for k in range(0, 6, 2):
            Q, _ = np.linalg.qr(rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2)))
            psi[k:k + 2] = Q @ psi[k:k + 2]
        a, b = casimir_energy(st, dist), casimir_energy(st.with_orbitals(psi, check=True), dist)
        remix.append(1e-12 - abs(a - b) / max(1.0, abs(a)))
    yield _margin_check(S, "unitary remix invariance", remix)


def _suite_stationary(ctx: _Context):
    dom, dist, S, rng = ctx.domain, ctx.dist, "stationary", ctx.rng
    sol, cfg, Lam = ctx.sol, ctx.plan.solver, ctx.plan.Lambda

    yield _margin_check(S, "Poisson and constraint residuals",
                        [cfg.tol_poisson - sol.residual_poisson,
                         cfg.tol_constraint - sol.residual_constraint])
    yield _margin_check(S, "eigen residuals", 1e-8 - eigen_residuals(sol))
    yield _margin_check(S, "V0 nonnegative on grid", to_grid(sol.V0).ravel() + 1e-10)
    yield _margin_check(S, "duality gap", 1e-7 - duality_check(sol, dist, Lam))

    phis = [r["phi"] for r in sol.history if r["accepted"]]
    steps = np.diff(phis) + 1e-13 * (1 + np.abs(phis[1:])) if len(phis) > 1 else [0.0]
    V_next = ModeField(dom, (1 - cfg.damping) * sol.V0.coeffs
                       + cfg.damping * poisson_solve(dom, density(sol.state)).coeffs)
    further = abs(phi_eval(V_next, sol.sigma0, dist, Lam) - sol.phi)
    yield _margin_check(S, "ascent of accepted iterates", steps)
    yield _margin_check(S, "final sweep is stationary", 1e-9 - further)

    phi0 = phi_eval(sol.V0, sol.sigma0, dist, Lam)
    margins = []
    for _ in range(50):
        t1, t2 = rng.uniform(0, 1e-2), rng.uniform(0, 1e-2)
        Vr = ctx.random_potential()
        Vp = ModeField(dom, sol.V0.coeffs + t1 * Vr.coeffs - t2 * sol.V0.coeffs)
        margins.append(phi0 + 1e-9 - phi_eval(Vp, sol.sigma0, dist, Lam))
    for d in np.concatenate([np.geomspace(1e-4, 1e-1, 5), -np.geomspace(1e-4, 1e-1, 5)]):
        margins.append(phi0 + 1e-9 - phi_eval(sol.V0, sol.sigma0 + d, dist, Lam))
    yield _margin_check(S, "maximizer optimality", margins)

    margins = []
    for _ in range(100):
        Va, Vb = ctx.random_potential(), ctx.random_potential()
        sa, sb = rng.uniform(-2, 2, 2)
        pa, pb = phi_eval(Va, sa, dist, Lam), phi_eval(Vb, sb, dist, Lam)
        pm = phi_eval(ModeField(dom, 0.5 * (Va.coeffs + Vb.coeffs)), 0.5 * (sa + sb), dist, Lam)
        margins.append(pm - 0.5 * (pa + pb) + 1e-12 * (1 + abs(pm)))
    yield _margin_check(S, "midpoint concavity of the dual functional", margins)

    V_init = ctx.random_potential() * 5.0
    other = scf_solve(dom, dist, cfg, V_init=V_init)
    dV = other.V0.coeffs - sol.V0.coeffs
    dist_h1 = float(np.sqrt(np.sum((1 + dom.mu0) * np.abs(dV) ** 2)))
    yield _margin_check(S, "uniqueness across initializations", 1e-6 - dist_h1,
                        f"||dV||_H1 = {dist_h1:.3e}")

    rep = membership_report(sol)
    yield CheckResult(S, "state-space membership", rep["bound_holds"], sol.state.n_orbitals,
                      0 if rep["bound_holds"] else 1,
                      detail=f"kinetic moment {rep['kinetic_moment']:.6g}")

    sigma = 0.37
    V = sol.V0
    margins = []
    for _ in range(20):
        st = random_state(dom, 5, rng, float(rng.uniform(0.1, 3.0)))
        lhs, rhs = trace_bound(st, V, sigma, dist)
        margins.append(lhs - rhs + 1e-9 * (1 + abs(rhs)))
    yield _margin_check(S, "shifted trace bound, random states", margins)
    mu, U = eigendecompose(hamiltonian_matrix(dom, V))
    eig_state = MixedState(dom, U.T, dist.f(mu + sigma))
    lhs, rhs = trace_bound(eig_state, V, sigma, dist)
    yield _margin_check(S, "shifted trace bound equality",
                        1e-9 - abs(lhs - rhs) / max(1.0, abs(rhs)))
    zero = MixedState(dom, U[:, :3].T, np.zeros(3))
    lhs, rhs = trace_bound(zero, V, sigma, dist)
    yield _margin_check(S, "shifted trace bound, empty occupations",
                        [lhs - rhs, 1e-15 - abs(lhs)])


def _suite_evolution(ctx: _Context):
    dom, dist, S = ctx.domain, ctx.dist, "evolution"
    sol, cfg = ctx.sol, ctx.plan.evolution
    start = perturb(sol.state, 1e-2, ctx.plan.seeds[0])
    end, rec = evolve(start, cfg, reference=sol, dist=dist)
    E = np.array(rec.energy)
    C = np.array(rec.casimir)
    drift = np.max(np.abs(E - E[0])) / abs(E[0])
    yield _margin_check(S, "energy conservation", 1e-6 - drift, f"relative drift {drift:.3e}")
    split = np.max(np.abs((C - E) - (C[0] - E[0])))
    yield _margin_check(S, "Casimir drift equals energy drift", 1e-12 * (1 + abs(C[0])) - split)
    yield _margin_check(S, "orthonormality", 1e-8 - np.array(rec.ortho_defect))
    yield CheckResult(S, "occupations unchanged",
                      bool(np.array_equal(end.occupations, start.occupations)))

    gap = casimir_energy(start, dist) - casimir_energy(sol.state, dist)
    lhs = 0.5 * np.array(rec.hminus1_dist) ** 2
    yield _margin_check(S, "stability bound along trajectory", gap + 1e-6 - lhs)

    fixed = sol.state
    for _ in range(10):
        fixed = strang_step(fixed, cfg.dt)
    d = float(np.sqrt(np.sum(np.abs(density(fixed).coeffs - density(sol.state).coeffs) ** 2
                             / dom.mu0)))
    yield _margin_check(S, "stationary state is a fixed point", 1e-6 - d)

    finals = []
    for dt in (0.02, 0.01, 0.005):
        finals.append(evolve(start, EvolutionConfig(dt=dt, t_end=1.0, record_every=10 ** 6))[0].orbitals)
    e1 = np.linalg.norm(finals[0] - finals[1])
    e2 = np.linalg.norm(finals[1] - finals[2])
    ratio = e1 / e2
    yield _margin_check(S, "second-order global convergence", 0.3 - abs(ratio - 4.0),
                        f"ratio {ratio:.4f}")

    res = [mild_residual(start, strang_step(start, dt), dt) for dt in (0.1, 0.05, 0.025)]
    ratios = np.array(res[:-1]) / np.array(res[1:])
    yield _margin_check(S, "third-order local mild residual", 1.0 - np.abs(ratios - 8.0),
                        "ratios " + ", ".join(f"{r:.3f}" for r in ratios))


_SUITE_FUNCS = {
    "casimir": _suite_casimir,
    "spectral": _suite_spectral,
    "state": _suite_state,
    "stationary": _suite_stationary,
    "evolution": _suite_evolution,
}


def run_lemma_suite(plan: ExperimentPlan, suites=None) -> VerificationReport:
    """Run the named property suites (all by default).

    An exception inside a suite becomes a failed row; checks that already
    ran are kept.
    """
    names = SUITES if suites is None else tuple(suites)
    unknown = set(names) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites: {sorted(unknown)}")
    ctx = _Context(plan)
    checks: list[CheckResult] = []
    for name in names:
        try:
            for check in _SUITE_FUNCS[name](ctx):
                checks.append(check)
        except Exception as exc:
            log.warning("suite %s aborted: %s", name, exc)
            checks.append(CheckResult(name, "suite aborted", False, 0, 1,
                                      detail=f"{type(exc).__name__}: {exc}"))
    return VerificationReport(checks)
