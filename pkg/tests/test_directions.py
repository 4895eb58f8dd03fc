import itertools
import math

import numpy as np
import pytest

from twohessian.directions import estimate_dtheta, export_directions_csv, generate_directions


def mobius(n: int) -> int:
    sympy = pytest.importorskip("sympy")
    f = sympy.factorint(n)
    if any(e > 1 for e in f.values()):
        return 0
    return -1 if len(f) % 2 else 1


def primitive_count(n_theta: int) -> int:
    """Moebius inversion over the gcd of the components."""
    return sum(mobius(d) * ((2 * (n_theta // d) + 1) ** 3 - 1) for d in range(1, n_theta + 1))


def canonical_frame(vectors):
    """Order- and sign-free key for a triplet."""
    out = []
    for v in vectors:
        v = tuple(int(c) for c in v)
        if next(c for c in v if c) < 0:
            v = tuple(-c for c in v)
        out.append(v)
    return tuple(sorted(out))


@pytest.mark.parametrize("nt,count", [(1, 26), (2, 98), (3, 290)])
def test_direction_counts_table(nt, count):
    assert len(generate_directions(nt).directions) == count


@pytest.mark.parametrize("nt", [1, 2, 3, 4, 5, 6])
def test_direction_counts_match_mobius_oracle(nt):
    assert len(generate_directions(nt).directions) == primitive_count(nt)


def test_wide_counts_differ_from_published_by_one():
    published = {4: 579, 5: 1155, 6: 1731}
    for nt, p in published.items():
        assert len(generate_directions(nt).directions) == p - 1


def test_direction_invariants():
    d = generate_directions(3)
    v = d.directions
    assert np.all(np.abs(v).max(axis=1) <= 3)
    assert not np.any(np.all(v == 0, axis=1))
    assert all(math.gcd(math.gcd(abs(a), abs(b)), abs(c)) == 1 for a, b, c in v)
    assert len({tuple(x) for x in v}) == len(v)


def test_unit_width_triplets():
    d = generate_directions(1)
    got = {canonical_frame(t) for t in d.triplet_vectors()}
    want = {
        canonical_frame([(1, 1, 0), (1, -1, 0), (0, 0, 1)]),
        canonical_frame([(1, 0, 1), (1, 0, -1), (0, 1, 0)]),
        canonical_frame([(1, 0, 0), (0, 1, 1), (0, 1, -1)]),
        canonical_frame([(1, 0, 0), (0, 1, 0), (0, 0, 1)]),
    }
    assert got == want and len(d.triplets) == 4


@pytest.mark.parametrize("nt", [1, 2, 3])
def test_triplets_orthogonal_and_deduplicated(nt):
    d = generate_directions(nt)
    T = d.triplet_vectors()
    for a, b in itertools.combinations(range(3), 2):
        assert np.all(np.einsum("ti,ti->t", T[:, a], T[:, b]) == 0)
    keys = [canonical_frame(t) for t in T]
    assert len(set(keys)) == len(keys)


@pytest.mark.parametrize("nt", [1, 2])
def test_triplets_complete_by_brute_force(nt):
    d = generate_directions(nt)
    V = [tuple(v) for v in d.directions]
    frames = set()
    for a, b, c in itertools.combinations(V, 3):
        if np.dot(a, b) == 0 and np.dot(a, c) == 0 and np.dot(b, c) == 0:
            frames.add(canonical_frame([a, b, c]))
    assert frames == {canonical_frame(t) for t in d.triplet_vectors()}


def test_triplets_sorted_by_width():
    w = generate_directions(3).widths
    assert np.all(np.diff(w) >= 0) and w[0] == 1 and w[-1] == 3


@pytest.mark.parametrize("nt", [0, 7])
def test_generate_directions_range(nt):
    with pytest.raises(ValueError):
        generate_directions(nt)


def test_export_csv(tmp_path):
    d = generate_directions(1)
    export_directions_csv(d, tmp_path / "d.csv")
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "kind,index,a,b,c"
    assert sum(x.startswith("direction,") for x in lines) == 26
    assert sum(x.startswith("triplet,") for x in lines) == 4


def test_dtheta_estimate_shrinks_with_width():
    e1 = estimate_dtheta(generate_directions(1), samples=300, seed=1)
    e3 = estimate_dtheta(generate_directions(3), samples=300, seed=1)
    assert 0 < e3 < e1 < math.pi / 2
