# %% [markdown]
# # Accuracy of the split-step integrator
#
# Global error under dt halving should drop by 4 (second order).  The
# one-step defect in the Duhamel formulation should drop by 8.

# %%
import numpy as np

from casimir_sp import Boltzmann, DomainSpec, EvolutionConfig, SolverConfig, evolve, perturb, scf_solve
from casimir_sp.evolution import mild_residual, strang_step

sol = scf_solve(DomainSpec.box_1d(mass=1.0), Boltzmann(1.0), SolverConfig())
start = perturb(sol.state, 1e-2, seed=1)

dts = [0.04, 0.02, 0.01, 0.005]
finals = [evolve(start, EvolutionConfig(dt=dt, t_end=1.0, record_every=10**6))[0].orbitals for dt in dts]
errs = [np.linalg.norm(a - b) for a, b in zip(finals, finals[1:])]
for dt, e, r in zip(dts, errs, [np.nan] + [a / b for a, b in zip(errs, errs[1:])]):
    print(f"dt={dt:<6} |Psi_dt - Psi_dt/2| = {e:.3e}   ratio {r:.3f}")

# %%
res = [mild_residual(start, strang_step(start, dt), dt) for dt in (0.1, 0.05, 0.025, 0.0125)]
for a, b in zip(res, res[1:]):
    print(f"local ratio {a / b:.3f}")
