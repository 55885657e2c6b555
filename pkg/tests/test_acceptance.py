"""Acceptance criteria 1 to 11 at their stated tolerances.

Each test prints one ``[ACCEPT n] PASS|FAIL`` line (visible with ``-s`` or in
the summary of ``-rA``) and then asserts the same condition.
"""

import json
import math

import numpy as np
import pytest

from weylflow.catalog import get_metric, sample_points
from weylflow.cli import main
from weylflow.flow import integrate_flow, round_sphere, singularity_type
from weylflow.geometry import LocalGeometry, curvature_pack
from weylflow.identities import coordinate_sectional, eigen_quadratic_lhs, flow_context, run_check
from weylflow.soliton import bryant_summary, cached_bryant, soliton_residual

pytestmark = pytest.mark.acceptance

POINTS = 20


def verdict(capsys, number: int, ok: bool, detail: str):
    with capsys.disabled():
        print(f"\n[ACCEPT {number:2d}] {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def full_runs(tmp_path_factory):
    """Two identical ``check --all`` runs: (exit codes, payload texts)."""
    d = tmp_path_factory.mktemp("accept")
    codes, texts = [], []
    for k in range(2):
        out = d / f"run{k}.json"
        codes.append(main(["check", "--all", "-o", str(out)]))
        texts.append(out.read_text())
    return codes, texts


def _records(full_runs):
    return json.loads(full_runs[1][0])["records"]


def test_1_curvature_oracles(capsys):
    s4 = get_metric("sphere", n=4)
    h4 = get_metric("hyperbolic", n=4)
    r4 = get_metric("euclidean", n=4)
    scal = max(abs(curvature_pack(s4.chart, p).scalar - 12) / 12 for p in sample_points(s4, POINTS))
    sec = max(abs(coordinate_sectional(LocalGeometry(h4.chart, p, 2)) + 1) for p in sample_points(h4, POINTS))
    flat = max(float(np.max(np.abs(curvature_pack(r4.chart, p).riem))) for p in sample_points(r4, POINTS))
    ok = scal <= 1e-9 and sec <= 1e-9 and flat <= 1e-12
    verdict(capsys, 1, ok, f"S4 R rel err {scal:.2e}, H4 K err {sec:.2e}, flat |Riem| {flat:.2e}")


def test_2_weyl_structure(capsys, full_runs):
    recs = _records(full_runs)
    traces = [r["max_residual"] for r in recs if r["check_id"] == "weyl_traces"]
    zero_names = ("euclidean", "sphere", "hyperbolic", "cylinder_RxS", "lcf_example")
    worst_zero = 0.0
    for name, params in [(m, {}) for m in zero_names] + [("sphere", {"n": 3}), ("perturbed_flat", {"n": 3})]:
        e = get_metric(name, **params)
        for p in sample_points(e, POINTS):
            pk = curvature_pack(e.chart, p)
            scale = max(float(np.max(np.abs(pk.riem))), 1e-12)
            worst_zero = max(worst_zero, float(np.max(np.abs(pk.weyl))) / scale)
    s2s2 = get_metric("product_spheres")
    wmin = min(float(np.max(np.abs(curvature_pack(s2s2.chart, p).weyl))) for p in sample_points(s2s2, POINTS))
    ok = max(traces) <= 1e-10 and worst_zero <= 1e-10 and wmin > 0.1
    verdict(capsys, 2, ok, f"traces {max(traces):.2e} over {len(traces)} entries, "
                           f"W on W=0 metrics {worst_zero:.2e}, min |W| on S2xS2 {wmin:.3f}")


def test_3_product_identities(capsys):
    cids = ("product_AA", "product_BB", "product_AB_BA", "product_WA_AW", "product_WB_BW", "ccc_sum",
            "ricci_term_expansion")
    worst = 0.0
    for name in ("sphere", "cylinder_RxS", "product_spheres", "perturbed_flat"):
        e = get_metric(name)
        pts = sample_points(e, POINTS)
        worst = max(worst, *(run_check(c, e, pts).max_residual for c in cids))
    verdict(capsys, 3, worst <= 1e-8, f"worst relative residual {worst:.2e}")


def test_4_evolution_equations(capsys):
    lines, ok = [], True
    for name in ("product_spheres", "sphere"):
        e = get_metric(name, n=4) if name == "sphere" else get_metric(name)
        ctx = flow_context(e)
        pts = sample_points(e, 3)
        for cid in ("weyl_evolution", "scalar_evolution", "ricci_evolution", "riemann_evolution"):
            rep = run_check(cid, e, pts, ctx)
            exact = rep.detail["finite_difference"] == "exact"
            good = rep.max_residual <= 1e-3 and (exact or rep.order >= 1.9)
            ok &= good
            order = "exact FD" if exact else f"order {rep.order:.2f}"
            lines.append(f"{name}/{cid} {rep.max_residual:.1e} ({order})")
    verdict(capsys, 4, ok, "; ".join(lines))


def test_5_eigen_quadratic(capsys):
    pairs = ((0.0, 2.0), (2.0, 0.0), (2.0, 2.0))
    hand = max(abs(eigen_quadratic_lhs(4, a, b, 6.0, 12.0)) for a, b in pairs)
    e = get_metric("cylinder_RxS", n=4)
    pipe = run_check("eigen_quadratic", e, sample_points(e, POINTS)).max_residual
    void = 0.0
    for variant in range(5):
        e3 = get_metric("perturbed_flat", n=3, variant=variant)
        void = max(void, run_check("dim3_void", e3, sample_points(e3, POINTS, seed=variant)).max_residual)
    ok = hand <= 1e-8 and pipe <= 1e-8 and void <= 1e-10
    verdict(capsys, 5, ok, f"hand {hand:.1e}, cylinder pipeline {pipe:.1e}, n=3 void {void:.1e}")


def test_6_divergence_codazzi(capsys):
    e = get_metric("perturbed_flat", n=4)
    rep = run_check("div_weyl_codazzi", e, sample_points(e, POINTS))
    lhs, rhs = rep.detail["max_lhs"], rep.detail["max_rhs"]
    ok = rep.max_residual <= 1e-6 and lhs >= 1e-3 and rhs >= 1e-3
    verdict(capsys, 6, ok, f"residual {rep.max_residual:.1e}, max|lhs| {lhs:.3f}, max|rhs| {rhs:.3f}")


def test_7_lcf_sigma1(capsys):
    e = get_metric("lcf_example", n=4)
    rep = run_check("lcf_example_sigma1", e, sample_points(e, POINTS))
    verdict(capsys, 7, rep.max_residual <= 1e-8, f"sigma_1 residual {rep.max_residual:.1e} at {rep.n_points} points")


def test_8_warped_ricci(capsys):
    worst, combos = 0.0, 0
    for h in ("1", "sin", "t", "cosh"):
        for K in (1.0, 0.0, -1.0):
            e = get_metric("warped_interval", n=4, K=K, h=h)
            worst = max(worst, run_check("warped_ricci", e, sample_points(e, POINTS)).max_residual)
            combos += 1
    verdict(capsys, 8, worst <= 1e-8, f"worst residual {worst:.1e} over {combos} (h, K) combinations")


def test_9_solitons(capsys):
    gauss = 0.0
    for alpha in (-1.0, 0.0, 1.0):
        e = get_metric("gaussian_soliton", n=4, alpha=alpha)
        for p in sample_points(e, POINTS):
            gauss = max(gauss, float(np.max(np.abs(soliton_residual(e.soliton, p).data))))
    b = bryant_summary(cached_bryant(4, 8.0))
    ok = (gauss <= 1e-10 and b["soliton_residual"] <= 1e-6 and b["weyl_residual"] <= 1e-6
          and b["eigenstructure"] == ["Split(3,1)"] and b["div_res"] <= 1e-5 and b["radial_res"] <= 1e-5)
    verdict(capsys, 9, ok, f"gaussian {gauss:.1e}; bryant soliton {b['soliton_residual']:.1e}, "
                           f"weyl {b['weyl_residual']:.1e}, {b['eigenstructure']}, "
                           f"gradient {max(b['div_res'], b['radial_res']):.1e}")


def test_10_type_one(capsys):
    rep = singularity_type(integrate_flow(round_sphere(4), [1.0], 1e-3, 10**6))
    target = math.sqrt(6) / 3
    ok = rep.kind == "TypeI" and abs(rep.limit - target) <= 1e-3
    verdict(capsys, 10, ok, f"{rep.kind}, limit {rep.limit:.6f} vs {target:.6f}")


def test_11_determinism(capsys, full_runs):
    codes, texts = full_runs
    ok = texts[0] == texts[1] and codes == [0, 0]
    verdict(capsys, 11, ok, f"byte-identical {texts[0] == texts[1]} ({len(texts[0])} bytes), exit codes {codes}")
