"""Uniform lattice over the unit cube, node classification and nodal fields."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

EXTERIOR = 0
BAND = 1
INTERIOR = 2


@dataclass(frozen=True)
class BoxDomain:
    """The full cube [0, 1]^3."""

    kind: str = "box"

    def contains(self, x: np.ndarray) -> np.ndarray:
        return np.all((x >= 0.0) & (x <= 1.0), axis=-1)


@dataclass(frozen=True)
class BallsDomain:
    """Union of open balls, each given as ``(center, radius)``."""

    balls: tuple[tuple[tuple[float, float, float], float], ...]
    kind: str = "balls"

    def __post_init__(self):
        for center, radius in self.balls:
            c = np.asarray(center, dtype=float)
            if radius <= 0 or np.any(c - radius < 0) or np.any(c + radius > 1):
                raise ValueError(f"ball {center}, r={radius} does not lie inside the unit cube")

    def contains(self, x: np.ndarray) -> np.ndarray:
        inside = np.zeros(x.shape[:-1], dtype=bool)
        for center, radius in self.balls:
            d2 = np.sum((x - np.asarray(center)) ** 2, axis=-1)
            inside |= d2 < radius**2
        return inside


Domain = BoxDomain | BallsDomain


@dataclass(frozen=True, eq=False)
class Grid3:
    """N^3 lattice on [0, 1]^3 with spacing h = 1/(N-1).

    ``labels`` holds one of EXTERIOR, BAND, INTERIOR per node. Interior nodes
    have every node within Chebyshev distance ``band_width`` present in the
    lattice and inside the domain; band nodes are the remaining nodes reached
    by such stencils.
    """

    n: int
    domain: Domain
    band_width: int
    labels: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n, self.n, self.n)

    @property
    def strides(self) -> tuple[int, int, int]:
        return (self.n * self.n, self.n, 1)

    @property
    def interior(self) -> np.ndarray:
        return self.labels == INTERIOR

    @property
    def interior_flat(self) -> np.ndarray:
        """Flat (C-order) indices of interior nodes; unknown k is node interior_flat[k]."""
        return np.flatnonzero(self.labels.ravel() == INTERIOR)

    @property
    def unknown_index(self) -> np.ndarray:
        """Map flat node index -> unknown index, -1 for non-interior nodes."""
        idx = np.full(self.n**3, -1, dtype=np.int64)
        flat = self.interior_flat
        idx[flat] = np.arange(flat.size)
        return idx

    def coords(self) -> np.ndarray:
        """Node coordinates, shape (n, n, n, 3)."""
        t = np.linspace(0.0, 1.0, self.n)
        return np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1)

    def counts(self) -> dict[str, int]:
        return {
            "interior": int(np.sum(self.labels == INTERIOR)),
            "band": int(np.sum(self.labels == BAND)),
            "exterior": int(np.sum(self.labels == EXTERIOR)),
        }

    def offset(self, nu: Sequence[int]) -> int:
        """Flat-index offset of the lattice vector ``nu``."""
        s = self.strides
        return int(nu[0]) * s[0] + int(nu[1]) * s[1] + int(nu[2]) * s[2]

    def sample(self, func: Callable[[np.ndarray], np.ndarray]) -> "ScalarField":
        """Evaluate ``func`` (taking an (..., 3) array) at every node."""
        return ScalarField(self, np.asarray(func(self.coords()), dtype=float))


def build_grid(n: int, domain: Domain | None = None, band_width: int = 1) -> Grid3:
    if n < 3:
        raise ValueError(f"need at least 3 nodes per axis, got n={n}")
    if band_width < 1:
        raise ValueError(f"band_width must be >= 1, got {band_width}")
    if 2 * band_width >= n:
        raise ValueError(f"band_width={band_width} leaves no interior nodes for n={n}")
    domain = domain if domain is not None else BoxDomain()

    w = band_width
    labels = np.zeros((n, n, n), dtype=np.int8)
    core = (slice(w, n - w),) * 3
    t = np.linspace(0.0, 1.0, n)
    x = np.stack(np.meshgrid(t, t, t, indexing="ij"), axis=-1)

    if isinstance(domain, BoxDomain):
        labels[:] = BAND
        labels[core] = INTERIOR
    else:
        interior = np.zeros((n, n, n), dtype=bool)
        interior[core] = domain.contains(x[core])
        # band = non-interior nodes within Chebyshev distance w of an interior node
        reach = np.zeros((n + 2 * w,) * 3, dtype=bool)
        for di in range(-w, w + 1):
            for dj in range(-w, w + 1):
                for dk in range(-w, w + 1):
                    reach[w + di:w + di + n, w + dj:w + dj + n, w + dk:w + dk + n] |= interior
        reach = reach[w:w + n, w:w + n, w:w + n]
        labels[reach] = BAND
        labels[interior] = INTERIOR
    labels.setflags(write=False)
    return Grid3(n=n, domain=domain, band_width=band_width, labels=labels)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values on a Grid3. Treated as immutable; updates build new fields."""

    grid: Grid3
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values shape {self.values.shape} != grid shape {self.grid.shape}")

    @property
    def interior_values(self) -> np.ndarray:
        return self.values.ravel()[self.grid.interior_flat]

    def with_interior(self, vals: np.ndarray) -> "ScalarField":
        out = self.values.copy().ravel()
        out[self.grid.interior_flat] = vals
        return ScalarField(self.grid, out.reshape(self.grid.shape))


def apply_boundary(u: ScalarField, g: ScalarField | np.ndarray | float) -> ScalarField:
    """Copy boundary data into every non-interior node of ``u``."""
    gv = g.values if isinstance(g, ScalarField) else np.broadcast_to(np.asarray(g, dtype=float), u.grid.shape)
    out = np.where(u.grid.interior, u.values, gv)
    return ScalarField(u.grid, out)


def max_norm_error(a: ScalarField, b: ScalarField) -> float:
    if a.grid is not b.grid and a.grid.shape != b.grid.shape:
        raise ValueError("fields live on different grids")
    mask = a.grid.interior
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(a.values[mask] - b.values[mask])))


def export_field_csv(u: ScalarField, path: str | Path) -> None:
    """Write ``i,j,k,value`` rows for every node."""
    n = u.grid.n
    i, j, k = np.indices((n, n, n))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "k", "value"])
        for row in zip(i.ravel(), j.ravel(), k.ravel(), u.values.ravel()):
            w.writerow([int(row[0]), int(row[1]), int(row[2]), repr(float(row[3]))])


def export_field_binary(u: ScalarField, path: str | Path) -> None:
    """Raw little-endian float64 values in C order (i slowest)."""
    np.ascontiguousarray(u.values, dtype="<f8").tofile(path)


def load_field_binary(grid: Grid3, path: str | Path) -> ScalarField:
    vals = np.fromfile(path, dtype="<f8").reshape(grid.shape)
    return ScalarField(grid, vals)
