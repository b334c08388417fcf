import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import sdof2k_plane
from critdamp.roots import (
    classify_spectrum,
    find_initial_points,
    find_singular_points,
    poly_roots,
    real_negative,
)
from reference_data import CHAIN_NU006, CHAIN_VERTICES, SDOF1K_CUSP, SDOF1K_ZETA1, SDOF2K_ROWS


def same_multiset(a, b, rtol):
    """Every point of ``a`` has a partner in ``b`` (and vice versa) within rtol * (1 + |z|)."""
    if len(a) != len(b):
        return False
    if len(a) == 0:
        return True
    d = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    tol = rtol * (1 + np.abs(np.asarray(a)))
    return bool(np.all(d.min(axis=1) <= tol) and np.all(d.min(axis=0) <= tol.max()))


def test_poly_roots_small_examples():
    assert np.allclose(np.sort(poly_roots([2.0, -3.0, 1.0]).real), [1.0, 2.0])
    r = poly_roots([1.0, 2.0, 1.0])
    assert np.allclose(r, [-1.0, -1.0], atol=1e-7)
    assert len(poly_roots([3.0])) == 0
    with pytest.raises(ValueError):
        poly_roots([0.0, 0.0])


def test_poly_roots_trims_leading_zeros():
    assert len(poly_roots([1.0, 1.0, 0.0, 0.0])) == 1


def test_double_root_at_second_point(sdof1k):
    nu = find_initial_points(sdof1k, {"zeta": 1.0})[1].p
    r = poly_roots(sdof1k.coeffs(nu, 1.0))
    assert np.sum(np.abs(r + 3.38298) < 1e-3) == 2
    # six printed digits of nu already split the pair by about 1.5e-2
    r = poly_roots(sdof1k.coeffs(0.134884, 1.0))
    assert np.sum(np.abs(r + 3.38298) < 2e-2) == 2


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=12))
def test_reconstruction(roots_in):
    c = np.polynomial.polynomial.polyfromroots(roots_in)
    rebuilt = np.polynomial.polynomial.polyfromroots(poly_roots(c)).real
    scale = np.abs(c).max()
    assert np.allclose(rebuilt, c, rtol=0, atol=1e-7 * scale)


def test_real_negative_filter():
    r = np.array([-1.0 + 1e-12j, -2.0 + 0.5j, 0.5, -3.0])
    assert np.array_equal(real_negative(r), [-3.0, -1.0])


def test_linearized_spectrum_matches_polynomial_roots(chain):
    for p, q in [(0.7, 0.06), (2.0, 0.2)]:
        a = classify_spectrum(chain, p, q).roots
        assert same_multiset(a, poly_roots(chain.coeffs(p, q)), 1e-7)


def test_classify_examples(sdof1k, chain):
    light = classify_spectrum(sdof1k, 0.1, 0.2)
    assert (light.complex_pairs, light.real_roots) == (1, 1)
    over = classify_spectrum(sdof1k, 0.1, 1.0)
    assert (over.complex_pairs, over.real_roots) == (0, 3)
    assert over.label == "overdamped"
    c = classify_spectrum(chain, 0.001, 0.001)
    assert (c.complex_pairs, c.real_roots) == (4, 2)
    assert c.label == "underdamped"
    assert classify_spectrum(chain, 1.3, 0.01).degree == 10


def test_mixed_label(chain):
    labels = {classify_spectrum(chain, z, 0.06).label for z in np.linspace(0.05, 3, 40)}
    assert "mixed" in labels


@pytest.mark.parametrize("preset", ["sdof1k", "sdof2k", "chain"])
def test_count_identity(preset, request):
    cf = request.getfixturevalue(preset)
    r = np.random.default_rng(11)
    for _ in range(100):
        p = r.uniform(*cf.plane.p_range)
        q = r.uniform(*cf.plane.q_range)
        sc = classify_spectrum(cf, p, q)
        assert sc.degree == cf.degree_check(p, q)
        nonreal = sc.roots[sc.roots.imag != 0]
        assert same_multiset(nonreal, nonreal.conj(), 1e-8)


def test_sdof1k_initial_points(sdof1k):
    pts = find_initial_points(sdof1k, {"zeta": 1.0})
    assert len(pts) == 2
    for pt, (nu, x) in zip(pts, SDOF1K_ZETA1):
        assert pt.p == pytest.approx(nu, abs=1e-4)
        assert pt.lam == pytest.approx(x, abs=1e-4)
        assert max(pt.residuals) <= 1e-10


def test_generic_keys_and_errors(sdof1k):
    assert len(find_initial_points(sdof1k, {"q": 1.0})) == 2
    with pytest.raises(ValueError):
        find_initial_points(sdof1k, {"omega": 1.0})
    with pytest.raises(ValueError):
        find_initial_points(sdof1k, {"nu": 0.1, "zeta": 1.0})


def test_no_points_is_empty(sdof1k):
    # zeta = 0.5 lies below the lower curve for every nu in range
    assert find_initial_points(sdof1k, {"zeta": 0.5}) == []


@pytest.mark.parametrize("key", sorted(SDOF2K_ROWS, key=str))
def test_sdof2k_rows(key):
    fixed_name, fixed_value, pres_name, pres_value = key
    cf = sdof2k_plane(fixed_name, fixed_value)
    pts = find_initial_points(cf, {pres_name: pres_value})
    for nu2, x in SDOF2K_ROWS[key]:
        assert any(abs(pt.q - nu2) <= 1e-4 and abs(pt.lam - x) <= 1e-4 for pt in pts), (nu2, x, pts)


def test_chain_initial_points(chain_starts):
    assert len(chain_starts) == 4
    for pt, (z, x) in zip(chain_starts, CHAIN_NU006):
        assert pt.p == pytest.approx(z, abs=1e-4)
        assert pt.lam == pytest.approx(x, abs=1e-4)


def test_initial_points_are_double_roots(chain, chain_starts):
    for pt in chain_starts:
        assert max(pt.residuals) <= 1e-10
        r = poly_roots(chain.coeffs(pt.p, pt.q))
        assert np.sum(np.abs(r - pt.lam) < 1e-4) >= 2


def test_crossing_property(chain, chain_starts):
    for pt in chain_starts:
        d = 1e-3 * (1 + abs(pt.p))
        a = classify_spectrum(chain, pt.p - d, pt.q)
        b = classify_spectrum(chain, pt.p + d, pt.q)
        assert abs(a.complex_pairs - b.complex_pairs) == 1
        assert abs(a.real_roots - b.real_roots) == 2


def test_chain_s2_vertices(chain_s2):
    assert len(chain_s2) == 2
    for sp, (x, z, nu) in zip(sorted(chain_s2, key=lambda s: s.p), CHAIN_VERTICES):
        assert sp.kind == "S2"
        assert (sp.x, sp.p, sp.q) == pytest.approx((x, z, nu), abs=1e-4)
        assert max(sp.residuals) <= 1e-9


def test_chain_s1_empty(chain):
    assert find_singular_points(chain, "S1") == []


def test_sdof1k_s2_is_the_cusp(sdof1k):
    pts = find_singular_points(sdof1k, "S2")
    assert len(pts) == 1
    sp = pts[0]
    assert (sp.x, sp.p, sp.q) == pytest.approx(
        (SDOF1K_CUSP["x"], SDOF1K_CUSP["nu"], SDOF1K_CUSP["zeta"]), abs=1e-6)


def test_singular_kind_validated(sdof1k):
    with pytest.raises(ValueError):
        find_singular_points(sdof1k, "S3")
