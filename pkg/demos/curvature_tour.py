"""A tour of the curvature pipeline on a few model geometries.

Metric components are written in the expression language, differentiated
exactly as truncated Taylor jets, and turned into Riemann, Ricci, scalar and
Weyl curvature.  Run with ``python3 demos/curvature_tour.py``.
"""

import numpy as np

from weylflow.catalog import get_metric
from weylflow.exprdsl import eval_jet
from weylflow.geometry import curvature_pack
from weylflow.soliton import classify_eigenstructure

# A conformal factor and its derivatives, straight from the expression language.
jet = eval_jet("4/(1+x1^2+x2^2+x3^2+x4^2)^2", (0.2, 0.1, 0.0, -0.3), 2)
print("conformal factor of the round sphere at p:", jet.value)
print("its gradient at p:", np.round(jet.gradient(), 6))
print()

# Space forms have vanishing Weyl curvature and a single Ricci eigenvalue.
# Products of spheres do not: S^2 x S^2 carries a genuinely nonzero Weyl tensor.
p = (0.2, 0.1, 0.0, -0.3)
print(f"{'metric':<40} {'R':>9} {'|Ric|^2':>9} {'max|W|':>9}  Ricci eigenstructure")
for name, params in [("sphere", {"n": 4}), ("hyperbolic", {"n": 4}), ("cylinder_RxS", {"n": 4}),
                     ("product_spheres", {}), ("lcf_example", {"n": 4}), ("perturbed_flat", {"n": 4})]:
    entry = get_metric(name, **params)
    pk = curvature_pack(entry.chart, p)
    es = classify_eigenstructure(pk)
    print(f"{entry.label:<40} {pk.scalar:9.4f} {pk.ric_norm2:9.4f} {np.max(np.abs(pk.weyl)):9.2e}  {es.label}")
