"""Residual checks: registry, independent sides, sensitivity, reports.

Tags: [DERIVED] oracle evaluations and independent pipelines, [PAPER]
formulas stated for the examples, [TRIVIAL] edge cases and plumbing.
"""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weylflow import identities as ids
from weylflow.catalog import get_metric, perturbed_flat_chart, sample_points
from weylflow.geometry import curvature_pack
from weylflow.identities import (PAPER_CHECKS, REGISTRY, CheckError, applicable_checks, eigen_quadratic_lhs,
                                 eigen_quadratic_residual, flow_context, lcf_example_ricci_closed,
                                 reports_to_json, run_check, run_suite)

ALGEBRAIC = ("product_AA", "product_BB", "product_AB_BA", "product_WA_AW", "product_WB_BW",
             "ccc_sum", "ricci_term_expansion", "rpq_ApB_traces")


def _pts(entry, k=6, seed=42):
    return sample_points(entry, k, seed)


def test_registry_covers_every_paper_item():
    # [TRIVIAL] one check per listed identity, each carrying a formula reference
    assert len(PAPER_CHECKS) == 22
    for cid in PAPER_CHECKS:
        c = REGISTRY[cid]
        assert not c.plumbing and c.ref and c.tolerance > 0
    assert all(REGISTRY[c].plumbing for c in REGISTRY if c not in PAPER_CHECKS)


@pytest.mark.parametrize("name,params", [("sphere", {"n": 4}), ("cylinder_RxS", {"n": 4}),
                                         ("product_spheres", {}), ("perturbed_flat", {"n": 4}),
                                         ("hyperbolic", {"n": 5})])
@pytest.mark.parametrize("cid", ALGEBRAIC + ("weyl_traces",))
def test_algebraic_identities(name, params, cid):
    # [DERIVED] both sides built from curvature primitives along separate paths
    e = get_metric(name, **params)
    rep = run_check(cid, e, _pts(e))
    assert rep.status == "pass", rep
    assert rep.max_residual <= 1e-8


def test_weyl_dim3_and_void_on_random_three_metrics():
    # [DERIVED] W = 0 and the eigenvalue relation degenerate identically when n = 3
    for variant in range(3):
        e = get_metric("perturbed_flat", n=3, variant=variant)
        for cid in ("weyl_dim3", "dim3_void"):
            rep = run_check(cid, e, _pts(e, 4, seed=variant))
            assert rep.max_residual <= 1e-10


def test_ccc_sum_detects_wrong_coefficient(monkeypatch):
    # [DERIVED] mutation: a 1% error in the expanded side must be visible
    e = get_metric("product_spheres")
    original = ids.ccc_rhs
    monkeypatch.setattr(ids, "ccc_rhs", lambda pk: 1.01 * original(pk))
    rep = run_check("ccc_sum", e, _pts(e, 3))
    assert rep.status == "fail" and rep.max_residual > 1e-3


def test_evolution_detects_wrong_rhs(monkeypatch):
    # [DERIVED] mutation: dropping the reaction term breaks the scalar evolution
    e = get_metric("sphere", n=4)
    ctx = flow_context(e)
    monkeypatch.setattr(ids, "evolution_rhs", lambda geom, which: 0.0 * geom.value(geom.scalar))
    rep = run_check("scalar_evolution", e, [(0.1, 0.2, 0.0, 0.1)], ctx)
    assert rep.status == "fail"


def test_cylinder_eigen_quadratic_by_hand():
    # [DERIVED] R x S^3: eigenvalues {0, 2, 2, 2}, R = 6, |Ric|^2 = 12
    # (0, 0) is excluded: the zero eigenvalue is simple
    for li, lj in ((0.0, 2.0), (2.0, 0.0), (2.0, 2.0)):
        assert eigen_quadratic_lhs(4, li, lj, 6.0, 12.0) == 0.0
    assert eigen_quadratic_lhs(4, 0.0, 0.0, 6.0, 12.0) != 0.0
    e = get_metric("cylinder_RxS", n=4)
    pk = curvature_pack(e.chart, _pts(e, 1)[0])
    assert pk.scalar == pytest.approx(6.0, rel=1e-12)
    assert pk.ric_norm2 == pytest.approx(12.0, rel=1e-12)
    for i, j in ((0, 1), (1, 2), (2, 3), (0, 3), (1, 1)):
        assert abs(eigen_quadratic_residual(pk, i, j)) <= 1e-8


def test_eigen_quadratic_einstein_and_generic():
    # [DERIVED] Einstein: lambda = R/n makes every pair vanish; generic metric does not
    pk = curvature_pack(get_metric("sphere", n=4).chart, (0.1, 0.2, 0.3, 0.0))
    for i in range(4):
        for j in range(4):
            assert abs(eigen_quadratic_residual(pk, i, j)) <= 1e-9
    pk = curvature_pack(perturbed_flat_chart(4), (0.2, -0.1, 0.3, 0.1))
    vals = [abs(eigen_quadratic_residual(pk, i, j)) for i in range(4) for j in range(i + 1, 4)]
    assert max(vals) > 1e-4


def test_eigen_quadratic_same_index_needs_multiplicity():
    pk = curvature_pack(perturbed_flat_chart(4), (0.2, -0.1, 0.3, 0.1))
    with pytest.raises(ValueError):
        eigen_quadratic_residual(pk, 0, 0)


@settings(max_examples=15)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5))
def test_dim3_quadratic_is_identity(a, b, c):
    # [DERIVED] for any three eigenvalues the n = 3 relation is 0 = 0
    R = a + b + c
    N = a * a + b * b + c * c
    assert abs(eigen_quadratic_lhs(3, a, b, R, N)) <= 1e-9 * max(1.0, N)


def test_eigen_quadratic_not_applied_where_weyl_nonzero():
    # [TRIVIAL] only asserted on metrics with vanishing Weyl tensor
    assert "eigen_quadratic" not in applicable_checks(get_metric("product_spheres"))
    assert "eigen_quadratic" not in applicable_checks(get_metric("perturbed_flat", n=4))
    assert "eigen_quadratic" in applicable_checks(get_metric("cylinder_RxS", n=4))


def test_div_weyl_nonvacuous_on_perturbed_flat():
    # [DERIVED] both sides are nonzero yet agree
    e = get_metric("perturbed_flat", n=4)
    rep = run_check("div_weyl_codazzi", e, _pts(e, 5))
    assert rep.max_residual <= 1e-6
    assert rep.detail["max_lhs"] >= 1e-3 and rep.detail["max_rhs"] >= 1e-3


def test_lcf_sigma1_and_ricci_sign():
    # [PAPER] sigma_1 = -2(n-1)(A-2); the Ricci formula holds with the + sign only
    e = get_metric("lcf_example", n=4)
    rep = run_check("lcf_example_sigma1", e, _pts(e, 5))
    assert rep.max_residual <= 1e-8
    p = (0.3, -0.2, 0.4, 0.1)
    ric = curvature_pack(e.chart, p).ric
    assert np.max(np.abs(ric - lcf_example_ricci_closed(4, p))) <= 1e-10
    assert np.max(np.abs(ric - lcf_example_ricci_closed(4, p, sign=-1))) > 0.1


@pytest.mark.parametrize("cid", ["weyl_evolution", "scalar_evolution", "ricci_evolution", "riemann_evolution"])
def test_flow_checks_on_product_spheres(cid):
    # [DERIVED] FD in time vs Laplacian plus reaction terms at t = 0.05
    e = get_metric("product_spheres")
    rep = run_check(cid, e, [(0.1, 0.2, -0.1, 0.3)], flow_context(e))
    assert rep.status == "pass", rep
    assert len(rep.convergence) == 2


def test_scalar_evolution_order_on_round_sphere():
    # [DERIVED] the only non-linear-in-t quantity; second order in h
    e = get_metric("sphere", n=4)
    rep = run_check("scalar_evolution", e, [(0.1, 0.2, 0.0, 0.1)], flow_context(e))
    assert rep.passed and rep.order >= 1.9


def test_errors_and_edge_cases():
    e = get_metric("sphere", n=3)
    with pytest.raises(CheckError):
        run_check("no_such_check", e, [])
    with pytest.raises(CheckError):
        run_check("div_weyl_codazzi", e, [(0.1, 0.1, 0.1)])
    s4 = get_metric("sphere", n=4)
    with pytest.raises(CheckError):
        run_check("weyl_evolution", s4, [(0.1, 0.1, 0.1, 0.1)])
    rep = run_check("weyl_traces", s4, [])
    assert rep.status == "inconclusive" and rep.passed is None and rep.n_points == 0
    with pytest.raises(CheckError):
        run_suite([])


def test_dim3_suite_skips_higher_checks():
    # [TRIVIAL] applicability filter
    reps = run_suite([get_metric("sphere", n=3)], point_count=3, include_plumbing=False)
    ids_run = {r.check_id for r in reps}
    assert {"weyl_dim3", "dim3_void"} <= ids_run
    assert not ids_run & {"div_weyl_codazzi", "eigen_quadratic", "lcf_example_sigma1"}
    assert all(r.status == "pass" for r in reps)


def test_json_is_deterministic_and_well_formed():
    entries = [get_metric("sphere", n=3), get_metric("cylinder_RxS", n=4)]
    a = reports_to_json(run_suite(entries, point_count=3), {"seed": 42})
    b = reports_to_json(run_suite(entries, point_count=3, threads=2), {"seed": 42})
    assert a == b
    doc = json.loads(a)
    assert doc["schema"] == 1
    keys = {"check_id", "paper_ref", "metric", "n_points", "max_residual", "tolerance", "pass", "convergence"}
    recs = doc["records"]
    assert all(keys <= set(r) for r in recs)
    assert recs == sorted(recs, key=lambda r: (r["check_id"], r["metric"]))
