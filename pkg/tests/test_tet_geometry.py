import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ballpack.tet_geometry import (
    ALPHA_BAR, DegenerateTetrahedronError, GeometryError, REAL, TetStatus,
    VirtualTetrahedronError, classify, critical_radius, dihedral_angles, edge_lengths,
    embed_tetrahedron, extended_solid_angles, point_volume, q_gradient, q_value,
    solid_angle_jacobian, solid_angles, tet_geometry, vertex_solid_angles, volume,
)
from ballpack.triangulation import EDGE_PAIRS

TWO_PI = 2 * math.pi
CRIT = 2 / math.sqrt(3) - 1

radius = st.floats(min_value=1e-2, max_value=1e2)
radii4 = st.tuples(radius, radius, radius, radius).map(np.array)


def real_radii(r):
    return q_value(r) > 1e-6 * (1.0 / np.asarray(r)).sum() ** 2


# --- Q -----------------------------------------------------------------------------

def test_q_examples():
    assert q_value([1, 1, 1, 1]) == 8.0
    assert abs(q_value([CRIT, 1, 1, 1])) <= 1e-12
    assert q_value([0.1, 1, 1, 1]) == pytest.approx(-37.0, rel=1e-12)


def test_q_gradient_examples():
    g = q_gradient([1, 1, 1, 1])
    assert np.allclose(g, -4.0)
    assert g @ np.ones(4) == pytest.approx(-16.0)


@settings(max_examples=200, deadline=None)
@given(radii4)
def test_q_gradient_euler_identity(r):
    # Q is homogeneous of degree -2
    q = (1 / r).sum() ** 2 - 2 * (1 / r ** 2).sum()
    assert q_gradient(r) @ r == pytest.approx(-2 * q, rel=1e-9, abs=1e-9 * (1 / r ** 2).sum())


def test_q_gradient_matches_finite_differences(rng):
    for _ in range(20):
        r = np.exp(rng.uniform(-1, 1, 4))
        fd = np.empty(4)
        for p in range(4):
            h = 1e-6 * max(1.0, r[p])
            e = np.zeros(4)
            e[p] = h
            fd[p] = (q_value(r + e) - q_value(r - e)) / (2 * h)
        assert np.allclose(q_gradient(r), fd, rtol=1e-6, atol=1e-6)


def test_bad_radii_rejected():
    for bad in ([1, 1, 1], [1, 1, 1, 0], [1, 1, 1, -2], [1, 1, 1, np.nan]):
        with pytest.raises(GeometryError):
            q_value(bad)


# --- critical radius and classification ------------------------------------------------

def test_critical_radius_examples():
    assert critical_radius(1, 1, 1) == pytest.approx(CRIT, rel=1e-15)
    assert critical_radius(3, 3, 3) == pytest.approx(3 * CRIT, rel=1e-14)
    v = critical_radius(1, 2, 3)
    assert abs(q_value([v, 1, 2, 3])) <= 1e-12 * (1 / v) ** 2


@settings(max_examples=200, deadline=None)
@given(radius, radius, radius)
def test_critical_radius_is_root_of_q(a, b, c):
    f = critical_radius(a, b, c)
    assert f < min(a, b, c)
    scale = (1 / f + 1 / a + 1 / b + 1 / c) ** 2
    assert abs(q_value([f, a, b, c])) <= 1e-12 * scale


def test_classify_examples():
    assert classify([1, 1, 1, 1]) == REAL
    assert classify([0.1, 1, 1, 1]) == TetStatus(0)
    assert classify([CRIT, 1, 1, 1]) == TetStatus(0)
    assert classify([1, 1, 0.1, 1]) == TetStatus(2)
    assert str(TetStatus(2)) == "virtual(apex=2)" and str(REAL) == "real"


@settings(max_examples=300, deadline=None)
@given(radii4)
def test_status_matches_sign_of_q(r):
    geo = tet_geometry(r)
    assert geo.status.is_real == (geo.q > 0)
    if not geo.status.is_real:
        i = geo.status.apex
        assert all(r[i] < r[j] for j in range(4) if j != i)
        expected = np.zeros(4)
        expected[i] = TWO_PI
        assert np.array_equal(geo.solid_angles, expected)
        assert geo.volume is None and geo.dihedral_angles is None
    else:
        assert np.all((geo.solid_angles > 0) & (geo.solid_angles < TWO_PI))
        for i in range(4):
            beta = sum(geo.dihedral_angles[e] for e, pair in enumerate(EDGE_PAIRS) if i in pair)
            assert geo.solid_angles[i] == pytest.approx(beta - math.pi, abs=1e-12)


def test_tie_with_nonpositive_q_is_an_error(monkeypatch):
    # cannot happen with exact Q; simulate a rounding mishap
    import ballpack.tet_geometry as tg
    monkeypatch.setattr(tg, "q_value", lambda r: -1.0)
    with pytest.raises(GeometryError, match="strictly minimal"):
        tg.classify([0.5, 0.5, 1, 1])


# --- embedding oracle ---------------------------------------------------------------------

def test_embed_regular():
    p = embed_tetrahedron(edge_lengths([1, 1, 1, 1]))
    d = np.linalg.norm(p[:, None] - p[None, :], axis=-1)
    assert np.allclose(d[np.triu_indices(4, 1)], 2.0, rtol=1e-12)


def test_embed_rejects_bad_lengths():
    with pytest.raises(GeometryError, match="triangle"):
        embed_tetrahedron([1, 1, 5, 1, 1, 1])
    with pytest.raises(GeometryError):
        embed_tetrahedron(edge_lengths([0.1, 1, 1, 1]))


def test_embed_round_trip():
    lengths = edge_lengths([1, 2, 3, 4])
    p = embed_tetrahedron(lengths)
    got = [np.linalg.norm(p[a] - p[b]) for a, b in EDGE_PAIRS]
    assert np.allclose(got, lengths, rtol=1e-10)


def test_regular_angles():
    a = solid_angles([1, 1, 1, 1])
    assert np.all(np.abs(a - ALPHA_BAR) <= 1e-12)
    assert ALPHA_BAR == pytest.approx(0.5512856, abs=1e-7)
    assert np.allclose(solid_angles([7.5] * 4), a, rtol=0, atol=1e-14)
    assert np.allclose(dihedral_angles([1, 1, 1, 1]), math.acos(1 / 3), atol=1e-14)


@pytest.mark.parametrize("r", [[1, 2, 2, 2], [1, 2, 3, 4], [0.3, 1, 1.5, 0.8], [5, 0.9, 1.1, 2]])
def test_angles_and_volume_match_embedding(r):
    pts = embed_tetrahedron(edge_lengths(r))
    assert np.allclose(solid_angles(r), vertex_solid_angles(pts), rtol=1e-10, atol=1e-12)
    assert volume(r) == pytest.approx(point_volume(pts), rel=1e-10)


@settings(max_examples=150, deadline=None)
@given(radii4)
def test_embedding_oracle_random(r):
    assume(real_radii(r))
    pts = embed_tetrahedron(edge_lengths(r))
    assert np.allclose(solid_angles(r), vertex_solid_angles(pts), rtol=1e-8, atol=1e-9)


# --- volume ----------------------------------------------------------------------------------

def test_volume_examples():
    assert volume([1, 1, 1, 1]) == pytest.approx(2 * math.sqrt(2) / 3, rel=1e-14)
    assert volume([2.5] * 4) == pytest.approx(2.5 ** 3 * 2 * math.sqrt(2) / 3, rel=1e-14)
    assert volume([CRIT, 1, 1, 1], extended=True) <= 1e-8
    with pytest.raises(VirtualTetrahedronError):
        volume([0.1, 1, 1, 1])
    assert volume([0.1, 1, 1, 1], extended=True) == 0.0


def exact_cayley_menger_volume_sq(r):
    # 288 V^2 = det(CM) in exact rational arithmetic
    r = [Fraction(float(x)) for x in r]
    m = [[Fraction(0)] + [Fraction(1)] * 4]
    for p in range(4):
        m.append([Fraction(1)] + [(r[p] + r[q]) ** 2 if p != q else Fraction(0) for q in range(4)])
    det = Fraction(1)
    for c in range(5):
        piv = next(i for i in range(c, 5) if m[i][c] != 0)
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        for i in range(c + 1, 5):
            f = m[i][c] / m[c][c]
            m[i] = [a - f * b for a, b in zip(m[i], m[c])]
    return det / 288


@settings(max_examples=60, deadline=None)
@given(radii4)
def test_volume_matches_exact_cayley_menger(r):
    assume(real_radii(r))
    exact = math.sqrt(exact_cayley_menger_volume_sq(r))
    assert volume(r) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("r", [[12.54, 0.0625, 0.25, 0.25], [95, 0.0117, 0.0117, 0.0117], [1e7, 1, 1, 1]])
def test_volume_extreme_ratios(r):
    exact = math.sqrt(exact_cayley_menger_volume_sq(r))
    assert volume(r) == pytest.approx(exact, rel=1e-12)


# --- extended angles ----------------------------------------------------------------------------

def test_extended_examples():
    assert np.array_equal(extended_solid_angles([0.1, 1, 1, 1]), [TWO_PI, 0, 0, 0])
    assert np.allclose(extended_solid_angles([1, 1, 1, 1]), ALPHA_BAR, atol=1e-14)
    with pytest.raises(VirtualTetrahedronError):
        solid_angles([0.1, 1, 1, 1])


def boundary_limits(base, apex, eps_ladder):
    """Real-side angles along r_apex = f (1 + eps), and their extrapolated limit.

    Near the boundary the angles are smooth in sqrt(eps), so a cubic in
    sqrt(eps) extrapolates to eps = 0.
    """
    f = critical_radius(*[base[j] for j in range(4) if j != apex])
    rows = []
    for eps in eps_ladder:
        r = np.array(base, dtype=float)
        r[apex] = f * (1 + eps)
        rows.append(extended_solid_angles(r))
    rows = np.array(rows)
    x = np.sqrt(eps_ladder)
    design = np.vstack([np.ones_like(x), x, x * x, x ** 3]).T
    coef, *_ = np.linalg.lstsq(design, rows, rcond=None)
    return rows, coef[0], f


@pytest.mark.parametrize("base, apex", [([1, 1, 1, 1], 0), ([1, 2, 3, 1], 3), ([0.5, 4, 1, 2], 0)])
def test_extension_is_continuous(base, apex):
    eps = np.array([1e-2, 1e-3, 1e-4, 1e-5, 1e-6])
    rows, limit, f = boundary_limits(base, apex, eps)
    target = np.zeros(4)
    target[apex] = TWO_PI
    # monotone approach, then a one-sided limit that matches the virtual side
    gap = np.abs(rows - target).max(axis=1)
    assert np.all(np.diff(gap) < 0)
    assert np.abs(limit - target).max() < 1e-6
    r = np.array(base, dtype=float)
    r[apex] = f * (1 - 1e-9)
    assert np.array_equal(extended_solid_angles(r), target)


# --- comparison principles (hypothesis) ----------------------------------------------------------

@settings(max_examples=500, deadline=None)
@given(radii4)
def test_max_radius_angle_at_most_regular(r):
    a = extended_solid_angles(r)
    assert a[np.argmax(r)] <= ALPHA_BAR + 1e-9


@settings(max_examples=500, deadline=None)
@given(radii4)
def test_min_radius_angle_at_least_regular(r):
    a = extended_solid_angles(r)
    assert a[np.argmin(r)] >= ALPHA_BAR - 1e-9


@settings(max_examples=300, deadline=None)
@given(radii4)
def test_angle_order_reverses_radius_order(r):
    assume(real_radii(r))
    a = solid_angles(r)
    for i in range(4):
        for j in range(4):
            if r[i] < r[j] * (1 - 1e-9):
                assert a[i] >= a[j] - 1e-12


@settings(max_examples=100, deadline=None)
@given(radii4, st.floats(min_value=1e-3, max_value=1e3))
def test_scale_invariance(r, c):
    assume(real_radii(r))
    assert np.allclose(solid_angles(c * r), solid_angles(r), atol=1e-11)


# --- Jacobian -------------------------------------------------------------------------------------

def fd_jacobian(r, fn=extended_solid_angles):
    jac = np.empty((4, 4))
    for p in range(4):
        h = 1e-6 * max(1.0, abs(r[p]))
        e = np.zeros(4)
        e[p] = h
        jac[:, p] = (fn(r + e) - fn(r - e)) / (2 * h)
    return jac


def test_jacobian_regular():
    jac = solid_angle_jacobian([1, 1, 1, 1])
    off = jac[~np.eye(4, dtype=bool)]
    assert np.allclose(off, off[0], rtol=1e-14)
    v = 2 * math.sqrt(2) / 3
    assert off[0] == pytest.approx(4 * 6 / (3 * 36 * v), rel=1e-13)
    assert np.allclose(jac, fd_jacobian(np.ones(4)), rtol=1e-5)


@pytest.mark.parametrize("r", [[1, 2, 3, 4], [0.3, 1, 1.5, 0.8], [1, 1, 1, 0.2], [5, 0.9, 1.1, 2]])
def test_jacobian_matches_finite_differences(r):
    r = np.array(r, dtype=float)
    jac = solid_angle_jacobian(r)
    assert np.allclose(jac, fd_jacobian(r), rtol=1e-5, atol=1e-7 * np.abs(jac).max())
    assert np.allclose(jac @ r, 0, atol=1e-9 * np.abs(jac).max())


@settings(max_examples=100, deadline=None)
@given(radii4)
def test_jacobian_rows_annihilate_r(r):
    assume(real_radii(r))
    jac = solid_angle_jacobian(r)
    assert np.allclose(jac @ r, 0, atol=1e-9 * np.abs(jac).max() * r.max())


def test_jacobian_blows_up_near_boundary():
    f = critical_radius(1, 1, 1)
    r = np.array([f * (1 + 3e-14), 1, 1, 1])
    assert volume(r) < 1e-7
    assert solid_angle_jacobian(r)[0, 1] > 1e6


def test_jacobian_degenerate_and_virtual_rejected():
    with pytest.raises(VirtualTetrahedronError):
        solid_angle_jacobian([0.1, 1, 1, 1])
    # a real needle: volume / (mean edge)^3 is about 5e-14
    r = np.array([1e7, 1, 1, 1])
    assert classify(r) == REAL
    with pytest.raises(DegenerateTetrahedronError):
        solid_angle_jacobian(r)


def test_extended_per_tet_schlaefli(rng):
    # d/dr_p sum_i a_i r_i = a_p, on both sides of the boundary
    def s(r):
        return extended_solid_angles(r) @ r

    points = [np.exp(rng.uniform(-0.5, 0.5, 4)) for _ in range(10)] + [np.array([0.1, 1, 1, 1]), np.array([1, 0.02, 3, 2])]
    for r in points:
        grad = np.empty(4)
        for p in range(4):
            h = 1e-6 * max(1.0, r[p])
            e = np.zeros(4)
            e[p] = h
            grad[p] = (s(r + e) - s(r - e)) / (2 * h)
        assert np.allclose(grad, extended_solid_angles(r), rtol=1e-6, atol=1e-8)
