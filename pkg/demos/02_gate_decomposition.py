"""
Two-level decomposition of a unitary
====================================

Any d x d unitary is a product of real plane rotations and single phases.
With one fixed irrational angle the rotations can be approximated by
integer powers.
"""

import math

import numpy as np

from qtmlab import linalg

rng = np.random.default_rng(1)
for d in (2, 4, 8, 16):
    u = linalg.random_unitary(d, rng)
    res = linalg.decompose_simple_form(u)
    print(f"d={d:2d}: {res.factor_count:3d} factors (bound {2 * d * d - d}), residual {res.residual:.1e}")

# Base angle with cos = 3/5, sin = 4/5: an irrational multiple of pi, so
# its multiples are dense on the circle.
theta0 = math.acos(3 / 5)
for target, eps in [(math.pi / 2, 1e-2), (math.pi / 2, 1e-4), (1.0, 1e-5)]:
    n = linalg.approx_angle(target, theta0, eps)
    print(f"target {target:.4f}, eps {eps:.0e}: n = {n}, miss {linalg.circular_distance(n * theta0, target):.2e}")

u = linalg.random_unitary(4, rng)
approx = linalg.approx_unitary(u, 1e-3, theta0)
mults = [f.multiplier for f in approx.factors]
print(f"\n4x4 from one angle: {approx.factor_count} factors, residual {approx.residual:.2e}")
print("   multipliers:", mults)
