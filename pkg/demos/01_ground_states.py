"""Scalar normalized solutions in R^3.

The cubic ground state at mass a^2 is a rescaled copy of the canonical
soliton Q, so we can compare the constrained minimiser on the Pohozaev set
against the exact scaling. Then a two-power nonlinearity, where no scaling
exists, gives a family of radial solutions indexed by their node count.
"""
import numpy as np

from normsol.diagnostics import certify
from normsol.functionals import Nonlinearity
from normsol.scalar import (excited_state_by_nodes, ground_state_by_scaling, minimize_on_M,
                            scaled_grid, soliton_record)

q = soliton_record(3)
print(f"canonical soliton: Q(0) = {q.amplitude:.10f}, |Q|_2^2 = {q.mass:.10f}")

# cubic: minimise on the Pohozaev set from a Gaussian and compare with the scaling
for a, mu in [(1.0, 1.0), (2.0, 1.0), (1.0, 3.0)]:
    grid = scaled_grid(a, mu)
    c = q.mass / (mu * a * a)
    seed = grid.sample(lambda r: np.exp(-(c * r) ** 2 / 4))
    sol = minimize_on_M(a, Nonlinearity.cubic(mu), seed)
    exact = ground_state_by_scaling(a, mu, grid)
    print(f"a={a:g} mu={mu:g}: lambda {sol.lam:.6f} (exact {exact.lam:.6f}), "
          f"energy {sol.energy:.6f} (exact {exact.energy:.6f}), "
          f"{len(sol.history)} descent + Newton steps")

# two powers: nodal solutions with increasing energy
nl = Nonlinearity.power_sum([1.0, 0.5], [3.5, 5.0])
print("\nf(u) = |u|^1.5 u + 0.5 |u|^3 u at mass 1")
for k in range(3):
    sol = excited_state_by_nodes(1.0, nl, k)
    cert = certify(sol, res_tol=1e-6)
    print(f"k={k}: lambda {sol.lam:10.4f}  energy {sol.energy:10.4f}  "
          f"|G|/K {sol.pohozaev_residual:.1e}  certificate {'PASS' if cert.passed else 'FAIL'}")
