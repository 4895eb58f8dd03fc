import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from twohessian.directions import generate_directions
from twohessian.grid import ScalarField, build_grid
from twohessian.monotone import (
    MonotoneOperator,
    directional_second_diff,
    in_gamma,
    jacobian_monotone,
    s2_monotone,
    sigma2,
    sigma_bar,
)
from twohessian.problems import quadratic, smooth_convex_radial

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_sigma2_values():
    assert sigma2(1, 1, 1) == 3
    assert sigma2(2, -1, 4) == 2
    assert sigma2(1, 2, 3) == 11


def test_sigma_bar_values():
    assert sigma_bar(2, -1, 4) == 2
    assert sigma_bar(-1, 0, 2) == -1
    assert sigma_bar(4, 2, -1) == 2


def test_in_gamma_values():
    assert in_gamma(2, -1, 4)
    assert not in_gamma(-1, 0, 2)
    assert in_gamma(1, 1, 1)


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite)
def test_sigma_bar_extends_sigma2_on_closed_cone(a, b, c):
    x, y, _ = sorted((a, b, c))
    if x + y >= 0:
        assert sigma_bar(a, b, c) == pytest.approx(sigma2(a, b, c), rel=1e-12, abs=1e-9)
    else:
        assert sigma_bar(a, b, c) == pytest.approx(-x * x, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(finite, finite, finite, st.floats(0, 1e3), st.integers(0, 2))
def test_sigma_bar_non_decreasing(a, b, c, d, k):
    base = [a, b, c]
    up = list(base)
    up[k] += d
    lo, hi = sigma_bar(*base), sigma_bar(*up)
    assert hi >= lo - 1e-12 * max(1.0, abs(lo))


def test_sigma_bar_symmetric_and_vectorized():
    rng = np.random.default_rng(0)
    a, b, c = rng.normal(size=(3, 100))
    np.testing.assert_array_equal(sigma_bar(a, b, c), sigma_bar(c, a, b))
    assert sigma_bar(a, b, c).shape == (100,)


def test_directional_second_diff_quadratic():
    g = build_grid(9)
    u = g.sample(quadratic().u_exact)
    assert directional_second_diff(u, (4, 4, 4), (1, 1, 0)) == pytest.approx(0.5)
    assert directional_second_diff(u, (4, 4, 4), (1, 0, 1)) == pytest.approx(3.0)
    lin = g.sample(lambda x: x @ np.array([1.0, -3.0, 2.0]))
    assert directional_second_diff(lin, (4, 4, 4), (2, -1, 1)) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(IndexError):
        directional_second_diff(u, (1, 4, 4), (2, 0, 0))


def test_s2_monotone_ex1_unit_triplets():
    g = build_grid(9)
    u = g.sample(quadratic().u_exact)
    d = generate_directions(1)
    vals, active = s2_monotone(u, d)
    np.testing.assert_allclose(vals.values[g.interior], 2.0, atol=1e-11)
    # exact directional derivatives of diag(2,-1,4) on each triplet
    D = np.diag([2.0, -1.0, 4.0])
    T = d.triplet_vectors().astype(float)
    per = np.einsum("tki,ij,tkj->tk", T, D, T) / np.einsum("tki,tki->tk", T, T)
    tv = sigma_bar(per[:, 0], per[:, 1], per[:, 2])
    np.testing.assert_allclose(sorted(tv), sorted([4.25, 3.0, 8.25, 2.0]))
    axis = int(np.argmin(tv))
    assert np.all(np.abs(d.triplet_vectors()[axis]).sum(axis=1) == 1)
    assert np.all(active.triplet == axis)


def test_s2_monotone_identity_hessian_all_triplets():
    # h = 1/8 keeps every difference exact, so all triplets tie at 3
    g = build_grid(9, band_width=2)
    u = g.sample(lambda x: 0.5 * np.sum(x**2, axis=-1))
    op = MonotoneOperator(g, generate_directions(2))
    vals, active = op.evaluate(u)
    assert np.all(vals == 3.0)
    assert np.all(active.triplet == 0)  # tie goes to the lowest index, the axis frame


def test_min_property_and_active_consistency():
    g = build_grid(10, band_width=2)
    rng = np.random.default_rng(1)
    u = ScalarField(g, rng.normal(size=g.shape))
    d = generate_directions(2)
    op = MonotoneOperator(g, d)
    vals, active = op.evaluate(u)
    nodes = np.argwhere(g.interior)
    for p in range(0, len(nodes), 7):
        node = nodes[p]
        per = [sigma_bar(*[directional_second_diff(u, node, d.directions[i]) for i in tri]) for tri in d.triplets]
        assert vals[p] <= min(per) + 1e-9 * max(1, abs(min(per)))
        assert vals[p] == pytest.approx(min(per), rel=1e-12)
        recomputed = sorted(directional_second_diff(u, node, op.vectors[k]) for k in active.sdir[p])
        np.testing.assert_allclose(active.sd[p], recomputed, rtol=1e-12)
    assert np.array_equal(active.branch, active.sd[:, 0] + active.sd[:, 1] < 0)


def test_band_must_cover_stencil():
    g = build_grid(10, band_width=1)
    with pytest.raises(ValueError):
        MonotoneOperator(g, generate_directions(2))
    op = MonotoneOperator(g, generate_directions(2), shrink=True)
    # nodes next to the band scan only unit-width triplets
    assert op.ntrip_allowed.min() == 4 and op.ntrip_allowed.max() == 26


def _stencil_row(op, p, k):
    """Dense row of D_{nu nu} (nu = op.vectors[k]) at unknown p over the unknowns."""
    g = op.grid
    m = op.nodes.size
    row = np.zeros(m)
    uidx = g.unknown_index
    row[p] -= 2 * op.inv_scale[k]
    for s in (1, -1):
        c = uidx[op.nodes[p] + s * op.offsets[k]]
        if c >= 0:
            row[c] += op.inv_scale[k]
    return row


def test_jacobian_identity_hessian_axis_rows():
    g = build_grid(9)
    u = g.sample(lambda x: 0.5 * np.sum(x**2, axis=-1))
    op = MonotoneOperator(g, generate_directions(1))
    _, active = op.evaluate(u)
    J = op.jacobian(active).toarray()
    axes = [int(np.flatnonzero((np.abs(op.vectors).sum(axis=1) == 1) & (op.vectors[:, a] != 0))[0]) for a in range(3)]
    for p in (0, 17, 100):
        want = 2 * sum(_stencil_row(op, p, k) for k in axes)
        np.testing.assert_allclose(J[p], want, rtol=1e-10, atol=1e-8)


def test_jacobian_branch_row():
    # build a field whose active triplet at the center node has sorted diffs (-3, 1, 5)
    g = build_grid(7)
    op = MonotoneOperator(g, generate_directions(1))
    from twohessian.monotone import ActiveTripletField

    m = op.nodes.size
    sdir = np.tile([0, 1, 2], (m, 1))
    sd = np.tile([-3.0, 1.0, 5.0], (m, 1))
    J = op.jacobian(ActiveTripletField(np.zeros(m, int), sdir, sd)).toarray()
    for p in (0, 62, 124):
        np.testing.assert_allclose(J[p], 6.0 * _stencil_row(op, p, 0))


def test_jacobian_sigma2_branch_coefficients():
    g = build_grid(7)
    op = MonotoneOperator(g, generate_directions(1))
    from twohessian.monotone import ActiveTripletField

    m = op.nodes.size
    sdir = np.tile([3, 1, 2], (m, 1))
    sd = np.tile([-1.0, 2.0, 5.0], (m, 1))
    J = op.jacobian(ActiveTripletField(np.zeros(m, int), sdir, sd)).toarray()
    want = 7.0 * _stencil_row(op, 5, 3) + 4.0 * _stencil_row(op, 5, 1) + 1.0 * _stencil_row(op, 5, 2)
    np.testing.assert_allclose(J[5], want)


@pytest.mark.parametrize("nt", [1, 2])
def test_jacobian_monotone_directional_derivative(nt):
    g = build_grid(9, band_width=nt)
    d = generate_directions(nt)
    rng = np.random.default_rng(10 + nt)
    eps = 1e-6
    for _ in range(5):
        u = ScalarField(g, rng.normal(size=g.shape))
        v = rng.normal(size=g.interior_flat.size)
        s0, a0 = s2_monotone(u, d)
        sp_, ap = s2_monotone(u.with_interior(u.interior_values + eps * v), d)
        sm, am = s2_monotone(u.with_interior(u.interior_values - eps * v), d)
        J = jacobian_monotone(u, a0, d)
        same = (a0.triplet == ap.triplet) & (a0.triplet == am.triplet)
        same &= np.all(a0.sdir == ap.sdir, axis=1) & np.all(a0.sdir == am.sdir, axis=1)
        same &= (a0.branch == ap.branch) & (a0.branch == am.branch)
        assert same.mean() > 0.5
        fd = (sp_.values - sm.values)[g.interior] / (2 * eps)
        jv = J @ v
        err = np.abs(fd - jv)[same]
        assert err.max() <= 1e-5 * np.abs(jv[same]).max()


def test_jacobian_monotone_is_m_matrix_like():
    # off-diagonal entries are >= 0 for the active triplet when it lies in the closed cone
    g = build_grid(9)
    u = g.sample(smooth_convex_radial().u_exact)
    vals, active = s2_monotone(u, 1)
    J = sp.csr_matrix(jacobian_monotone(u, active, 1))
    off = J - sp.diags(J.diagonal())
    assert off.min() >= 0
    assert np.all(J.diagonal() < 0)
    np.testing.assert_allclose(np.asarray(J.sum(axis=1)).ravel()[:1], J.sum(axis=1).A.ravel()[:1])


def test_degenerate_ellipticity_small_sample():
    g = build_grid(8, band_width=2)
    rng = np.random.default_rng(3)
    d = generate_directions(2)
    op = MonotoneOperator(g, d)
    for _ in range(50):
        u = ScalarField(g, rng.normal(size=g.shape))
        base, _ = op.evaluate(u)
        q = tuple(rng.integers(0, g.n, size=3))
        v = u.values.copy()
        v[q] += rng.uniform(0.01, 1.0)
        new, _ = op.evaluate(ScalarField(g, v))
        qflat = np.ravel_multi_index(q, g.shape)
        center = op.nodes == qflat
        tol = 1e-12 * np.maximum(1.0, np.abs(base))
        assert np.all(new[~center] >= base[~center] - tol[~center])
        assert np.all(new[center] <= base[center] + tol[center])


def test_consistency_trend_with_h():
    """|S_M[phi] - S_2[phi]| -> 0 at second order for a grid-aligned convex Hessian."""

    def phi(x):
        return np.exp(x[..., 0]) + 0.5 * np.exp(x[..., 1]) + np.cosh(x[..., 2])

    def s2(x):
        a, b, c = np.exp(x[..., 0]), 0.5 * np.exp(x[..., 1]), np.cosh(x[..., 2])
        return a * b + a * c + b * c

    errs = []
    for n in (9, 17, 33):
        g = build_grid(n)
        s, _ = s2_monotone(g.sample(phi), 1)
        errs.append(np.abs(s.values - g.sample(s2).values)[g.interior].max())
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.2)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.2)


def _frame_quadratic(Q, lam):
    R = Q @ np.diag(lam) @ Q.T
    return R, 0.5 * (np.trace(R) ** 2 - np.trace(R @ R))


def test_consistency_trend_with_n_theta():
    """Wider direction sets can only lower S_M, which never drops below S_2 for quadratics."""
    g = build_grid(13, band_width=3)
    # eigenframe spanned by lattice directions of width 2
    Q = np.array([[1, 2, 2], [2, 1, -2], [2, -2, 1]], dtype=float).T / 3.0
    R, want = _frame_quadratic(Q, [1.0, 2.0, 3.0])
    u = g.sample(lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, R, x))
    errs = [np.abs(s2_monotone(u, nt)[0].values[g.interior] - want).max() for nt in (1, 2, 3)]
    assert errs[0] > 0.1
    assert errs[1] < 1e-10 and errs[2] < 1e-10
    rng = np.random.default_rng(8)
    for _ in range(5):
        Q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        R, want = _frame_quadratic(Q, rng.uniform(0.2, 3.0, size=3))
        u = g.sample(lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, R, x))
        vals = [s2_monotone(u, nt)[0].values[g.interior] for nt in (1, 2, 3)]
        assert np.all(vals[0] >= vals[1] - 1e-9) and np.all(vals[1] >= vals[2] - 1e-9)
        assert np.all(vals[2] >= want - 1e-9)
