"""Effective mass of a homogeneous medium against the exact value, for several sigma.

    python3 scripts/free_effective_mass.py
"""
from effwave.correctors import solve_correctors
from effwave.periodic import sample_periodic

for s in (0.25, 0.5, 1.0, 2.0, 4.0):
    cs = solve_correctors(sample_periodic({0: s}, 16), sample_periodic({0: 0.0}, 16), 0.0, 1)
    print(f"sigma={s:5.2f}  sigma*={cs.sigma_star_formula:.12f}  rel err {abs(cs.sigma_star_formula - s) / s:.1e}")
