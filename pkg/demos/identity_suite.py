"""Running the identity checks and reading the report.

Every registered check compares two independently computed sides of an
identity at seeded sample points.  Flow checks additionally compare a time
finite difference along a reduced Ricci flow with the evolution equation,
at two step sizes, and report the observed convergence order.
"""

from weylflow.catalog import get_metric
from weylflow.identities import run_suite

entries = [get_metric("product_spheres"), get_metric("perturbed_flat", n=4), get_metric("sphere", n=3)]
reports = run_suite(entries, seed=42, point_count=8, include_plumbing=False)

print(f"{'check':<24} {'metric':<34} {'residual':>10} {'tol':>7}  status")
for r in reports:
    extra = ""
    if r.convergence:
        extra = " (exact FD)" if r.order is None else f" (order {r.order:.2f})"
    print(f"{r.check_id:<24} {r.metric:<34} {r.max_residual:10.2e} {r.tolerance:7.0e}  {r.status}{extra}")

failed = [r for r in reports if r.status != "pass"]
print(f"\n{len(reports)} checks, {len(failed)} not passing")
