"""Ricci flow of the round four-sphere and its Type I singularity.

Under dg/dt = -2 Ric the squared radius of S^4 shrinks linearly,
r^2(t) = 1 - 6t, so the flow dies at T = 1/6.  The curvature blows up like
1/(T - t), and (T - t) max|Rm| settles at sqrt(6)/3.
"""

import math

from weylflow.flow import integrate_flow, max_rm, product_spheres, round_sphere, singularity_type

traj = integrate_flow(round_sphere(4), [1.0], dt=1e-3, steps=10**6)
print(f"integration stopped ({traj.stop_reason}) at t = {traj.times[-1]:.9f}")
print(f"blow-up time T = {traj.blowup_time:.12f} (exact 1/6 = {1 / 6:.12f})")
print()
print(f"{'T - t':>10} {'max|Rm|':>14} {'(T - t) max|Rm|':>16}")
for gap in (1e-1, 1e-2, 1e-3, 1e-4, 1e-5):
    t = traj.blowup_time - gap
    rm = max_rm(traj.family, traj.state_at(t))
    print(f"{gap:10.0e} {rm:14.6g} {gap * rm:16.9f}")

rep = singularity_type(traj)
print(f"\nclassification: {rep.kind}, limit {rep.limit:.6f}; sqrt(6)/3 = {math.sqrt(6) / 3:.6f}")

# The same diagnostic on S^2 x S^2 gives a different constant, sqrt(2).
rep = singularity_type(integrate_flow(product_spheres(2, 2), [1.0, 1.0], 1e-3, 10**6))
print(f"S^2 x S^2: {rep.kind}, limit {rep.limit:.6f}; sqrt(2) = {math.sqrt(2):.6f}")
