import numpy as np
import pytest

from twohessian.grid import (
    BAND,
    EXTERIOR,
    INTERIOR,
    BallsDomain,
    ScalarField,
    apply_boundary,
    build_grid,
    export_field_binary,
    export_field_csv,
    load_field_binary,
    max_norm_error,
)
from twohessian.problems import quadratic, two_balls


@pytest.mark.parametrize("n,band,expected", [(15, 1, 13**3), (15, 2, 11**3), (7, 3 - 1, 3**3)])
def test_box_interior_counts(n, band, expected):
    assert build_grid(n, band_width=band).counts()["interior"] == expected


def test_box_band_rule():
    n, w = 12, 2
    g = build_grid(n, band_width=w)
    i, j, k = np.indices(g.shape)
    lo = np.minimum(np.minimum(i, j), k)
    hi = np.maximum(np.maximum(i, j), k)
    expect_band = (lo < w) | (hi > n - 1 - w)
    np.testing.assert_array_equal(g.labels == BAND, expect_band)
    assert not np.any(g.labels == EXTERIOR)


def test_coordinates_and_spacing():
    g = build_grid(11)
    assert g.h == pytest.approx(0.1)
    x = g.coords()
    np.testing.assert_allclose(x[3, 7, 10], [0.3, 0.7, 1.0])


def test_two_balls_match_point_in_ball_oracle():
    n = 30
    dom = two_balls().domain
    g = build_grid(n, dom, band_width=1)
    h = 1.0 / (n - 1)
    count = 0
    for i in range(1, n - 1):
        for j in range(1, n - 1):
            for k in range(1, n - 1):
                x = (i * h, j * h, k * h)
                inside = any(
                    (x[0] - c[0]) ** 2 + (x[1] - c[1]) ** 2 + (x[2] - c[2]) ** 2 < r * r for c, r in dom.balls
                )
                count += inside
    assert g.counts()["interior"] == count


def test_partition_and_determinism():
    dom = two_balls().domain
    a = build_grid(21, dom, band_width=2)
    b = build_grid(21, dom, band_width=2)
    assert sum(a.counts().values()) == 21**3
    np.testing.assert_array_equal(a.labels, b.labels)
    # every band node is within Chebyshev distance 2 of an interior node
    idx = np.argwhere(a.labels == INTERIOR)
    for p in np.argwhere(a.labels == BAND)[::37]:
        assert np.min(np.max(np.abs(idx - p), axis=1)) <= 2


@pytest.mark.parametrize("kw", [dict(n=2), dict(n=9, band_width=0), dict(n=8, band_width=4)])
def test_build_grid_rejects(kw):
    with pytest.raises(ValueError):
        build_grid(**kw)


def test_ball_outside_cube_rejected():
    with pytest.raises(ValueError):
        BallsDomain((((0.1, 0.5, 0.5), 0.3),))


def test_apply_boundary_zero_and_exact():
    g = build_grid(9, band_width=2)
    u = ScalarField(g, np.random.default_rng(0).normal(size=g.shape))
    z = apply_boundary(u, 0.0)
    assert np.all(z.values[~g.interior] == 0)
    np.testing.assert_array_equal(z.values[g.interior], u.values[g.interior])
    p = quadratic()
    ex = g.sample(p.u_exact)
    b = apply_boundary(u, ex)
    x = g.coords()[~g.interior]
    np.testing.assert_allclose(b.values[~g.interior], x[:, 0] ** 2 - 0.5 * x[:, 1] ** 2 + 2 * x[:, 2] ** 2)


def test_apply_boundary_two_balls():
    p = two_balls()
    g = build_grid(20, p.domain)
    u = ScalarField(g, np.ones(g.shape))
    b = apply_boundary(u, g.sample(p.boundary))
    assert np.all(b.values[g.labels != INTERIOR] == 0.0)
    assert np.all(b.values[g.interior] == 1.0)


def test_max_norm_error():
    g = build_grid(8)
    rng = np.random.default_rng(3)
    a = ScalarField(g, rng.normal(size=g.shape))
    b = ScalarField(g, rng.normal(size=g.shape))
    assert max_norm_error(a, a) == 0.0
    shifted = ScalarField(g, np.where(g.interior, a.values + 0.25, 99.0))
    assert max_norm_error(shifted, a) == pytest.approx(0.25)
    worst = 0.0
    for i in range(g.n):
        for j in range(g.n):
            for k in range(g.n):
                if g.labels[i, j, k] == INTERIOR:
                    worst = max(worst, abs(a.values[i, j, k] - b.values[i, j, k]))
    assert max_norm_error(a, b) == worst


def test_field_export_roundtrip(tmp_path):
    g = build_grid(5)
    u = ScalarField(g, np.arange(125, dtype=float).reshape(g.shape) / 7)
    export_field_binary(u, tmp_path / "u.f8")
    np.testing.assert_array_equal(load_field_binary(g, tmp_path / "u.f8").values, u.values)
    export_field_csv(u, tmp_path / "u.csv")
    rows = (tmp_path / "u.csv").read_text().splitlines()
    assert rows[0] == "i,j,k,value"
    i, j, k, v = rows[1 + 2 * 25 + 3 * 5 + 4].split(",")
    assert (int(i), int(j), int(k)) == (2, 3, 4)
    assert float(v) == u.values[2, 3, 4]


def test_with_interior_keeps_boundary():
    g = build_grid(6)
    u = ScalarField(g, np.full(g.shape, 5.0))
    v = u.with_interior(np.zeros(g.interior_flat.size))
    assert np.all(v.values[g.interior] == 0) and np.all(v.values[~g.interior] == 5.0)
    assert np.all(u.values == 5.0)
