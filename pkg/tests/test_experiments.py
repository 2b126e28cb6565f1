import numpy as np
import pytest

from casimir_sp.casimir import Boltzmann, PowerCutoff
from casimir_sp.evolution import EvolutionConfig
from casimir_sp.experiments import ExperimentPlan, run_lemma_suite, run_stability
from casimir_sp.spectral import DomainSpec


def plan(**kw):
    base = dict(domain=DomainSpec.box_1d(mass=1.0), dist=Boltzmann(1.0),
                evolution=EvolutionConfig(dt=5e-3, t_end=0.5, record_every=10))
    base.update(kw)
    return ExperimentPlan(**base)


def test_plan_validation():
    with pytest.raises(ValueError):
        plan(perturbation_sizes=())
    with pytest.raises(ValueError):
        plan(seeds=())
    with pytest.raises(ValueError):
        plan(perturbation_sizes=(-1e-3,))


def test_unperturbed_cell(solution):
    rep = run_stability(plan(perturbation_sizes=(0.0,), seeds=(0,)), solution)
    row = rep.rows[0]
    assert row.casimir_gap <= 1e-9 and row.max_lhs <= 1e-9 and row.passed


def test_small_perturbation(solution):
    rep = run_stability(plan(perturbation_sizes=(1e-3,), seeds=(0,)), solution)
    assert rep.passed and rep.rows[0].violation_margin <= 1e-6
    assert rep.rows[0].casimir_gap > 0


def test_scaling_and_order(solution):
    rep = run_stability(plan(perturbation_sizes=(1e-2, 3e-3), seeds=(0, 1, 2)), solution)
    assert [(r.epsilon, r.seed) for r in rep.rows] == [
        (1e-2, 0), (1e-2, 1), (1e-2, 2), (3e-3, 0), (3e-3, 1), (3e-3, 2)]
    assert rep.passed and rep.gap_monotone
    assert rep.scaling_exponent == pytest.approx(2.0, abs=0.2)
    d = rep.to_dict()
    assert d["n_cells"] == 6 and d["n_failed"] == 0


def test_threads_match_serial(solution):
    p1 = plan(perturbation_sizes=(1e-3, 1e-2), seeds=(0, 1), threads=1)
    p4 = plan(perturbation_sizes=(1e-3, 1e-2), seeds=(0, 1), threads=4)
    a, b = run_stability(p1, solution), run_stability(p4, solution)
    assert [r.csv_values() for r in a.rows] == [r.csv_values() for r in b.rows]


def test_failed_cell_is_reported(solution):
    bad = plan(perturbation_sizes=(1e-3,), seeds=(0,),
               evolution=EvolutionConfig(dt=1e307, t_end=1e307))
    with np.errstate(all="ignore"):
        rep = run_stability(bad, solution)
    assert len(rep.rows) == 1 and not rep.passed
    assert rep.rows[0].status.startswith("error")


@pytest.mark.parametrize("dist", [Boltzmann(1.0), PowerCutoff(3.0, 2.0)])
def test_lemma_suite_passes(dist):
    rep = run_lemma_suite(plan(dist=dist))
    assert rep.passed, [c for c in rep.checks if not c.passed]
    names = {c.suite for c in rep.checks}
    assert names == {"casimir", "spectral", "state", "stationary", "evolution"}
    if np.isfinite(dist.s0):
        assert any(c.name == "Jensen equality beyond the cutoff" and c.count > 0 for c in rep.checks)


class NotMonotone(Boltzmann):
    def f(self, s):
        s = np.asarray(s, dtype=float)
        return np.exp(-s) * (1.5 + np.sin(3 * s))


def test_lemma_suite_negative_control():
    rep = run_lemma_suite(plan(dist=NotMonotone(1.0)), suites=["casimir"])
    assert not rep.passed
    first = rep.checks[0]
    assert first.name == "class properties" and "(ii)" in first.detail


def test_lemma_suite_subset():
    rep = run_lemma_suite(plan(), suites=["spectral"])
    assert {c.suite for c in rep.checks} == {"spectral"}
    with pytest.raises(ValueError):
        run_lemma_suite(plan(), suites=["nope"])
