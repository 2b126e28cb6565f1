import numpy as np
import pytest

from casimir_sp.evolution import (
    TRAJECTORY_COLUMNS,
    EvolutionConfig,
    EvolutionError,
    evolve,
    mild_residual,
    strang_step,
)
from casimir_sp.spectral import DomainSpec
from casimir_sp.state import MixedState, perturb, random_state


def free_mode(domain, k=1):
    psi = np.zeros((1, domain.size), dtype=complex)
    psi[0, k - 1] = 1.0
    return MixedState(domain, psi, [0.0])


def test_free_eigenmode_phase(box):
    dt = 0.37
    out = strang_step(free_mode(box), dt)
    assert abs(out.orbitals[0, 0] - np.exp(-1j * dt)) < 1e-15
    assert np.all(out.orbitals[0, 1:] == 0)


def test_stationary_eigenphase_local_error(solution):
    errs = []
    for dt in (0.1, 0.05):
        out = strang_step(solution.state, dt)
        exact = np.exp(-1j * solution.mu0 * dt)[:, None] * solution.state.orbitals
        errs.append(np.linalg.norm(out.orbitals - exact))
    assert errs[0] < 1e-3
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.15)


def test_norm_preservation(box_m1, rng):
    st = random_state(box_m1, 5, rng, total=2.0)
    out = strang_step(st, 1e-2)
    assert np.max(np.abs(np.linalg.norm(out.orbitals, axis=1) - 1.0)) < 1e-12
    assert np.array_equal(out.occupations, st.occupations)


def test_stationary_fixed_point(solution, boltz):
    cfg = EvolutionConfig(dt=1e-3, t_end=1e-2)
    _, rec = evolve(solution.state, cfg, reference=solution, dist=boltz)
    assert len(rec) == 11
    assert max(rec.hminus1_dist) <= 1e-6


@pytest.mark.parametrize("every", [1, 3, 4, 10])
def test_record_count(box, rng, every):
    st = random_state(box, 2, rng)
    cfg = EvolutionConfig(dt=0.01, t_end=0.1, record_every=every)
    _, rec = evolve(st, cfg)
    assert len(rec) == cfg.n_steps // every + 1
    assert np.all(np.isnan(rec.hminus1_dist)) and np.all(np.isnan(rec.casimir))
    assert len(TRAJECTORY_COLUMNS) == len(next(iter(rec.rows())))


def test_zero_steps(solution):
    _, rec = evolve(solution.state, EvolutionConfig(dt=1e-3, t_end=0.0), reference=solution)
    assert len(rec) == 1 and rec.times == [0.0]


def test_short_run_conservation(solution, boltz):
    start = perturb(solution.state, 1e-2, 3)
    end, rec = evolve(start, EvolutionConfig(dt=1e-3, t_end=0.5, record_every=50),
                      reference=solution, dist=boltz)
    E = np.array(rec.energy)
    assert np.max(np.abs(E - E[0])) / abs(E[0]) <= 1e-6
    assert np.max(rec.ortho_defect) <= 1e-8
    assert np.array_equal(end.occupations, start.occupations)
    C = np.array(rec.casimir)
    assert np.allclose(C - E, C[0] - E[0], rtol=0, atol=1e-13)


def test_renormalization(solution):
    start = perturb(solution.state, 1e-2, 3)
    end, rec = evolve(start, EvolutionConfig(dt=1e-2, t_end=0.1, renormalize_every=2))
    assert rec.ortho_defect[-1] < 1e-13


def test_nan_abort(box, rng):
    st = random_state(box, 2, rng)
    with np.errstate(all="ignore"):
        with pytest.raises(EvolutionError) as info:
            evolve(st, EvolutionConfig(dt=1e307, t_end=1e307))
    assert info.value.last_time == 0.0
    assert len(info.value.record) == 1


def test_mild_residual_free_flow(box):
    st = free_mode(box, 2)
    assert mild_residual(st, strang_step(st, 0.1), 0.1) <= 1e-12


def test_mild_residual_third_order(solution):
    start = perturb(solution.state, 1e-2, 1)
    res = [mild_residual(start, strang_step(start, dt), dt) for dt in (0.1, 0.05, 0.025)]
    for a, b in zip(res, res[1:]):
        assert a / b == pytest.approx(8.0, abs=1.0)


def test_mild_residual_stationary_constant(solution):
    consts = [mild_residual(solution.state, strang_step(solution.state, dt), dt) / dt ** 3
              for dt in (0.1, 0.05, 0.025)]
    assert max(consts) / min(consts) < 1.2


def test_mild_residual_mismatch(solution, box):
    other = free_mode(box)
    with pytest.raises(ValueError):
        mild_residual(solution.state, other, 0.1)


def test_config_validation():
    with pytest.raises(ValueError):
        EvolutionConfig(dt=0.0)
    with pytest.raises(ValueError):
        EvolutionConfig(dt=1.0, t_end=0.5)
    with pytest.raises(ValueError):
        EvolutionConfig(record_every=0)
    assert EvolutionConfig(dt=0.1, t_end=1.0).n_steps == 10
