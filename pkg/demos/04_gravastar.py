"""
A horizonless compact star with a pressure-triggered vacuum core
================================================================

Above p_jump the equation of state switches to rho = -p + epsilon, a nearly
vacuum-energy core; below it the matter is radiation-like, rho = 3p. The
pressure stays continuous while the density jumps. The star can approach
the Schwarzschild compactness without forming a horizon.
"""

import numpy as np

from tracedyn import EOSSpec, integrate_star, sweep, weyl_invariance_check
from tracedyn.gravastar import JumpUnreachable, einstein_hilbert_control

eos = EOSSpec(p_jump=1.0, epsilon=1e-2, p_surface=1e-8)
star = integrate_star(1.05, eos)
for key, value in star.summary().items():
    print(f"{key:>16}: {value}")
print(f"smallest g00 inside the star: {star.g00().min():.3e}")
print(f"exterior vs Schwarzschild:    {star.exterior_deviation():.1e}")
dp, drho = star.jump_discontinuity()
print(f"at the switch: |dp| = {dp}, d rho = {drho:.3f}")

# Deep cores never reach p_jump: the negative core mass slows the pressure
# fall to a logarithm in r.
try:
    integrate_star(1e3, eos)
except JumpUnreachable as exc:
    print("p_center = 1e3:", str(exc).split(";")[0])

# A modest increase of p_center lets the negative core mass dominate: at
# p_center = 1.2 the total mass is negative and 1 - 2m/r never drops below 1.
for row in sweep([1.01, 1.05, 1.2, 2.0, 1e3], [eos]):
    if row["status"] == "ok":
        print(f"p_c = {row['p_center']:7g}  M = {row['M_total']:+.4e}  "
              f"min(1-2m/r) = {row['min_compactness']:.3e}")
    else:
        print(f"p_c = {row['p_center']:7g}  {row['status'][:60]}")

# The non-derivative action density sqrt(-g) g00^-2 is unchanged by g -> lambda^2 g.
rng = np.random.default_rng(0)
samples = star.metric_samples(10_000, rng)
lam = rng.uniform(0.5, 2.0, 10_000)
print("Weyl deviation:", weyl_invariance_check(samples, lam),
      " control:", einstein_hilbert_control(samples, lam))
