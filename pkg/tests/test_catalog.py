"""Metric catalog.  Tags: [DERIVED] curvature oracles, [PAPER] closed forms of the examples, [TRIVIAL] plumbing."""

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from weylflow.catalog import (FAMILIES, CatalogError, default_catalog, get_metric, load_catalog_file,
                              load_document, parse_selector, sample_points, to_document)
from weylflow.geometry import curvature_pack


def test_sphere_entry():
    # [DERIVED] R = n(n-1)/r^2
    e = get_metric("sphere", n=4, r=1)
    assert e.known_facts["scalar"] == 12.0
    assert curvature_pack(e.chart, (0, 0, 0, 0)).metric[0, 0] == pytest.approx(4.0)
    assert get_metric("sphere", n=4, r=2).known_facts["scalar"] == pytest.approx(3.0)


def test_lcf_example_entry():
    # [PAPER] g = delta / A^2, A = 1 + x1^2 + ... + x_{n-1}^2
    e = get_metric("lcf_example", n=4)
    p = (0.3, -0.2, 0.1, 0.7)
    A = 1 + 0.09 + 0.04 + 0.01
    assert np.allclose(e.chart.metric(p), np.eye(4) / A**2, rtol=1e-14)


def test_cylinder_entry():
    # [DERIVED] Ric(R x S^3(1)) eigenvalues (0; 2, 2, 2)
    e = get_metric("cylinder_RxS", n=4, K=1)
    pack = curvature_pack(e.chart, sample_points(e, 1)[0])
    assert np.sort(pack.ricci_eigenvalues()) == pytest.approx([0, 2, 2, 2], abs=1e-12)
    assert e.known_facts["ricci_eigenvalues"] == [0.0, 2.0, 2.0, 2.0]


@pytest.mark.parametrize("name,params", [
    ("nope", {}), ("sphere", {"r": -1}), ("sphere", {"n": 1}), ("perturbed_flat", {"eps": 0.5}),
    ("warped_interval", {"h": "tan"}), ("warped_interval", {"h": "sin", "L": 4.0}),
    ("product_spheres", {"p": 1}), ("bryant_profile", {"n": 3}), ("sphere", {"radius": 1}),
])
def test_invalid(name, params):
    with pytest.raises(CatalogError):
        get_metric(name, **params)


def test_selector():
    e = parse_selector("product_spheres:p=2,q=2,a=1,b=2")
    assert e.params == {"p": 2, "q": 2, "a": 1.0, "b": 2.0}
    assert e.label == "product_spheres:a=1,b=2,p=2,q=2"
    assert parse_selector(e.label).label == e.label
    with pytest.raises(CatalogError):
        parse_selector("sphere:n4")


def test_default_catalog_covers_families():
    names = {e.name for e in default_catalog()}
    assert names == set(FAMILIES)


def test_sample_points_deterministic():
    # [TRIVIAL]
    e = get_metric("sphere", n=4)
    a, b = sample_points(e, 3, seed=7), sample_points(e, 3, seed=7)
    assert a == b and len(a) == 3
    assert sample_points(e, 3, seed=8) != a
    with pytest.raises(ValueError):
        sample_points(e, 0)


@given(st.integers(1, 40), st.integers(0, 10_000))
def test_ball_rule(count, seed):
    # [TRIVIAL] |x| <= 0.8 of the radius
    pts = sample_points(get_metric("hyperbolic", n=4), count, seed)
    assert len(pts) == count
    assert max(np.linalg.norm(p) for p in pts) <= 0.8


@given(st.integers(0, 10_000))
def test_interval_rule(seed):
    # [TRIVIAL] t stays 0.1 L away from both ends
    e = get_metric("warped_interval", n=4, K=1, h="sin")
    L = e.params["L"]
    for p in sample_points(e, 10, seed):
        assert 0.1 * L - 1e-12 <= p[0] <= 0.9 * L + 1e-12
        assert np.linalg.norm(p[1:]) <= 0.8


def test_every_entry_positive_on_samples():
    for e in default_catalog():
        for p in sample_points(e, 10):
            np.linalg.cholesky(e.chart.metric(p))


def test_document_round_trip(tmp_path):
    e = get_metric("perturbed_flat", n=4, eps=0.15)
    doc = to_document(e)
    assert "eps" in doc["components"]["1,1"] and doc["chart_parameters"] == {"eps": 0.15}
    chart = load_document(json.loads(json.dumps(doc)))
    p = (0.1, 0.2, -0.3, 0.1)
    assert np.array_equal(chart.metric(p), e.chart.metric(p))
    path = tmp_path / "cat.json"
    path.write_text(json.dumps([doc, to_document(get_metric("sphere", n=3))]))
    charts = load_catalog_file(path)
    assert [c.n for c in charts] == [4, 3]
    with pytest.raises(CatalogError):
        load_document({"components": {}})


def test_gaussian_alpha_zero_allowed():
    assert get_metric("gaussian_soliton", n=4, alpha=0).soliton.alpha == 0.0
