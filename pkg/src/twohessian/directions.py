"""Lattice direction sets for the wide-stencil monotone scheme."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAX_WIDTH = 6


@dataclass(frozen=True, eq=False)
class DirectionSet:
    """Primitive lattice directions of max-norm <= n_theta and their orthogonal triplets.

    ``directions`` holds every primitive vector (both signs). ``triplets``
    indexes into ``directions``; each unordered frame appears once, using the
    representative of each direction whose first nonzero component is
    positive. Triplets are sorted by stencil width, so the first ``k``
    triplets are exactly those whose directions fit within width
    ``widths[k-1]``.
    """

    n_theta: int
    directions: np.ndarray
    triplets: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        """Max-norm reach of each triplet."""
        return np.abs(self.directions[self.triplets]).max(axis=(1, 2))

    def triplet_vectors(self) -> np.ndarray:
        """(ntrip, 3, 3) integer array of the direction vectors of each triplet."""
        return self.directions[self.triplets]


def _is_canonical(v) -> bool:
    for c in v:
        if c:
            return c > 0
    return False


def generate_directions(n_theta: int) -> DirectionSet:
    if not 1 <= n_theta <= MAX_WIDTH:
        raise ValueError(f"n_theta must lie in [1, {MAX_WIDTH}], got {n_theta}")
    rng = range(-n_theta, n_theta + 1)
    dirs = [
        v for v in itertools.product(rng, repeat=3)
        if any(v) and math.gcd(math.gcd(abs(v[0]), abs(v[1])), abs(v[2])) == 1
    ]
    directions = np.array(dirs, dtype=np.int64)
    canon = np.array([i for i, v in enumerate(dirs) if _is_canonical(v)])
    V = directions[canon]
    ortho = (V @ V.T) == 0
    trips = []
    for a in range(len(canon)):
        for b in np.flatnonzero(ortho[a, a + 1:]) + a + 1:
            cs = np.flatnonzero(ortho[a, b + 1:] & ortho[b, b + 1:]) + b + 1
            trips.extend((canon[a], canon[b], canon[c]) for c in cs)
    triplets = np.array(trips, dtype=np.int64).reshape(-1, 3)
    width = np.abs(directions[triplets]).max(axis=(1, 2))
    # stable sort keeps lexicographic order within a width
    triplets = triplets[np.argsort(width, kind="stable")]
    return DirectionSet(n_theta=n_theta, directions=directions, triplets=triplets)


def export_directions_csv(dirs: DirectionSet, path: str | Path) -> None:
    """Two CSV sections in one file: ``direction`` rows then ``triplet`` rows."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "index", "a", "b", "c"])
        for i, v in enumerate(dirs.directions):
            w.writerow(["direction", i, *map(int, v)])
        for t, tri in enumerate(dirs.triplets):
            w.writerow(["triplet", t, *map(int, tri)])


def estimate_dtheta(dirs: DirectionSet, samples: int = 2000, seed: int = 0) -> float:
    """Monte Carlo lower estimate of the directional resolution (radians).

    For random orthonormal frames, finds the grid triplet (any order, any sign)
    whose worst axis angle to the frame is smallest, and returns the largest
    such angle seen.
    """
    rng = np.random.default_rng(seed)
    T = dirs.triplet_vectors().astype(float)
    T /= np.linalg.norm(T, axis=2, keepdims=True)
    perms = list(itertools.permutations(range(3)))
    worst = 0.0
    for _ in range(samples):
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        # cosines between frame axis j and triplet direction i: (ntrip, 3, 3)
        cos = np.abs(np.einsum("tid,jd->tij", T, q.T))
        best = np.inf
        for p in perms:
            c = np.min(cos[:, list(p), [0, 1, 2]], axis=1)
            best = min(best, float(np.arccos(np.clip(c.max(), -1.0, 1.0))))
        worst = max(worst, best)
    return worst
