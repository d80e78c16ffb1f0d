"""Corner exponents of the two-phase potential.

At a vertex with interior angle alpha, the potential behaves like
r^gamma with the exponents solving |sin g(alpha-pi)| = lam |sin g pi|.
The first nonzero exponent lies in (1/2, 1) for every finite contrast,
so the gradient always blows up at the corner; the insulating and
perfectly conducting limits have the explicit exponents j pi/(2 pi - alpha).
"""

import numpy as np

from polyshape.corner_analysis import Contrast, eigenfunction, gamma_roots

print("exponents for a right-angle corner (alpha = pi/2)")
print(f"{'k':>8} {'gamma1':>10} {'gamma2':>10}")
for k in (0.1, 0.5, 2.0, 5.0, 100.0):
    g = gamma_roots(np.pi / 2, Contrast.finite(k), count=3)
    print(f"{k:8.1f} {g[1]:10.6f} {g[2]:10.6f}")
g_ins = gamma_roots(np.pi / 2, Contrast.insulating())
print(f"{'k = 0':>8} {g_ins[1]:10.6f} {g_ins[2]:10.6f}   (= 2/3, 4/3 exactly)")

print()
print("the k = 2 value has a closed form: gamma1 = (2/pi) arccos(1/6)")
g1 = gamma_roots(np.pi / 2, Contrast.finite(2.0))[1]
print(f"  solver: {g1:.12f}")
print(f"  closed: {2 / np.pi * np.arccos(1 / 6):.12f}")

print()
print("exponents over the interior angle, k = 2 (reflex corners are")
print("as singular as their convex mirror images):")
for alpha in (np.pi / 3, np.pi / 2, 2 * np.pi / 3, 4 * np.pi / 3, 3 * np.pi / 2):
    g = gamma_roots(alpha, Contrast.finite(2.0))
    print(f"  alpha = {alpha / np.pi:4.2f} pi   gamma1 = {g[1]:.6f}")

print()
print("the angular profile is trigonometric on each side of the interface")
ef = eigenfunction(np.pi / 2, Contrast.finite(2.0), j=1)
print(f"  coefficients (A-, B-, A+, B+): {np.round(ef.coeffs, 6)}")
print(f"  weighted norm: {ef.weighted_norm_sq():.12f} (normalized to 1)")
