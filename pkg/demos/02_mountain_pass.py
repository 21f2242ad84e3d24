"""A mountain-pass solution of the repulsive cubic system.

Two disjoint-support endpoints sit just above the scalar ground-state
levels. The path between them is deformed on the Pohozaev set until its
highest point is a saddle; Newton then polishes that point. The level
must exceed both scalar levels and stay below the energy of the reference
path, which does not depend on the coupling.
"""
from normsol.functionals import CouplingParams
from normsol.scalar import ground_state_level
from normsol.system import build_endpoints, mountain_pass_on_P, path_grid

par = CouplingParams(mu1=1.0, mu2=36.0, beta=-100.0, a1=1.0, a2=1.0)
start, end, path = build_endpoints(par, eps=0.3, grid=path_grid(par, 2001), n_nodes=21)
ell = max(ground_state_level(par.a1, par.mu1), ground_state_level(par.a2, par.mu2))
print(f"max scalar level {ell:.4f}; reference path maximum C = {path.info['C']:.2f}")
print(f"endpoint energies {path.info['J_start']:.4f} and {path.info['J_end']:.4f}")

res = mountain_pass_on_P(path)
sol = res.solution
print(f"{res.iterations} sweeps, discrete max {res.discrete_max:.4f}, polished level {res.c:.4f}")
print(f"margin c - max ell = {res.margin:.4f}")
print(f"lambda = ({sol.lambda1:.3f}, {sol.lambda2:.3f}), overlap {sol.overlap:.3e}")
