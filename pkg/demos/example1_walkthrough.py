"""
Example 1 walkthrough: the two-phase model against its closed forms
====================================================================

T = [[-a, a], [b, -b]], c = [1, -1].  Every quantity in the pipeline has
a closed form here, so each stage can be checked by eye.
"""

import math

import numpy as np

from yaglom import critical_point, density_grid, example1, phi, psi_tail, solve_psi, stability

a, b = 3.0, 1.0
m = example1(a, b)
rep = stability(m)
print(f"stationary vector {rep.xi}, mean drift {rep.drift:+.3f}")

# Psi(s) is the root of b Psi^2 - (a + b + 2s) Psi + a = 0 closest to 0
for s in (1.0, 0.0, -0.2):
    sol = solve_psi(m, s)
    disc = (a + b + 2 * s) ** 2 - 4 * a * b
    exact = ((a + b + 2 * s) - math.sqrt(disc)) / (2 * b)
    print(f"s={s:+.1f}  Psi={sol.psi[0, 0]:.12f}  closed form={exact:.12f}  "
          f"Phi={phi(m, sol).phi[0, 0]:+.6f}")

# the fold: Psi stops existing where the discriminant vanishes
cp = critical_point(m)
s_star = (-(a + b) + 2 * math.sqrt(a * b)) / 2
print(f"\ns*    = {cp.s_star:.15f}   closed form {s_star:.15f}")
print(f"Psi*  = {cp.psi_star[0, 0]:.15f}   sqrt(a/b)   {math.sqrt(a / b):.15f}")
print(f"K, D  = {cp.K[0, 0]:+.12f}, {cp.D[0, 0]:+.12f}   (b-a)/2, (a-b)/2")
print(f"B     = {cp.B[0, 0]:.15f}   sqrt(2 sqrt(ab))/b {math.sqrt(2 * math.sqrt(a * b)) / b:.15f}")
print(f"Y     = {cp.Y[0, 0]:+.1e}")
print(f"Richardson fit of B differs by {cp.diagnostics['richardson_fit_error']:.1e}")

# Yaglom density from level 0: y e^-y and (1 + sqrt3 y) e^-y over 2 + sqrt3
g = density_grid(m, cp, x=0.0, y_max=12.0, steps=12)
print("\n   y    mu11/dy      closed     mu12/dy      closed")
for y, row in zip(g.y, g.row(0)):
    c11 = y * math.exp(-y) / (2 + math.sqrt(3))
    c12 = (1 + math.sqrt(3) * y) * math.exp(-y) / (2 + math.sqrt(3))
    print(f"{y:5.1f}  {row[0]:.8f}  {c11:.8f}  {row[1]:.8f}  {c12:.8f}")
print(f"row mass {g.normalization[0]:.12f}")

tail = psi_tail(cp)
print(f"\nbusy period density ~ {tail.coefficient[0, 0]:.6f} t^-1.5 exp({tail.rate:.6f} t)")
