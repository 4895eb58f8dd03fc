"""Monotone wide-stencil discretization of the 2-Hessian operator.

At each interior node the operator is the minimum, over orthogonal lattice
triplets, of the non-decreasing extension ``sigma_bar`` applied to the three
directional second differences. The Jacobian follows the active triplet.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy import ndimage

from . import kernels
from .directions import DirectionSet, generate_directions
from .grid import EXTERIOR, Grid3, ScalarField


def sigma2(l1, l2, l3):
    return l1 * l2 + l1 * l3 + l2 * l3


def sigma_bar(l1, l2, l3):
    """Extension of sigma_2 that is non-decreasing in each argument.

    Sorts ascending to (x, y, z); equals sigma_2 when x + y >= 0 and -x**2 otherwise.
    Accepts scalars or broadcastable arrays.
    """
    s = np.sort(np.stack(np.broadcast_arrays(l1, l2, l3)).astype(float), axis=0)
    x, y, z = s[0], s[1], s[2]
    ax = np.abs(x)
    my = np.maximum(y, ax)
    mz = np.maximum(z, ax)
    out = x * my + x * mz + my * mz
    return out[()] if out.ndim == 0 else out


def in_gamma(l1, l2, l3):
    """True where every pairwise sum of the three values is positive."""
    return (np.asarray(l1) + l2 > 0) & (np.asarray(l1) + l3 > 0) & (np.asarray(l2) + l3 > 0)


def directional_second_diff(u: ScalarField, node, nu) -> float:
    grid = u.grid
    node = np.asarray(node, dtype=int)
    nu = np.asarray(nu, dtype=int)
    for p in (node + nu, node - nu):
        if np.any(p < 0) or np.any(p >= grid.n):
            raise IndexError(f"stencil {tuple(nu)} at node {tuple(node)} leaves the lattice")
    v = u.values
    num = v[tuple(node + nu)] + v[tuple(node - nu)] - 2.0 * v[tuple(node)]
    return float(num / (np.dot(nu, nu) * grid.h**2))


@dataclass(frozen=True, eq=False)
class ActiveTripletField:
    """Per-unknown data of the minimizing triplet.

    ``sdir`` holds indices into ``MonotoneOperator.used`` (directions sorted by
    their difference values), ``sd`` the ascending differences.
    """

    triplet: np.ndarray
    sdir: np.ndarray
    sd: np.ndarray

    @property
    def branch(self) -> np.ndarray:
        """True where the two smallest differences sum below zero (the -x**2 branch)."""
        return self.sd[:, 0] + self.sd[:, 1] < 0


def _reach(grid: Grid3, limit: int) -> np.ndarray:
    """Largest r <= limit with the Chebyshev r-ball around each node inside the lattice and domain."""
    n = grid.n
    bad = np.ones((n + 2 * limit,) * 3, dtype=bool)
    core = (slice(limit, limit + n),) * 3
    bad[core] = grid.labels == EXTERIOR
    cube = np.ones((3, 3, 3), dtype=bool)
    reach = np.zeros((n, n, n), dtype=np.int64)
    for r in range(1, limit + 1):
        bad = ndimage.binary_dilation(bad, structure=cube)
        reach[~bad[core]] = r
    return reach


class MonotoneOperator:
    """Precomputed stencil plan for one (grid, direction set) pair.

    With ``shrink=True`` nodes closer to the data band than ``n_theta`` only
    scan triplets that fit; otherwise the grid band must be at least
    ``n_theta`` wide.
    """

    def __init__(self, grid: Grid3, dirs: DirectionSet, shrink: bool = False, backend=None):
        if not shrink and grid.band_width < dirs.n_theta:
            raise ValueError(
                f"band_width={grid.band_width} < n_theta={dirs.n_theta}: stencil exits the data band"
            )
        self.grid = grid
        self.dirs = dirs
        self.nodes = grid.interior_flat
        used, inv = np.unique(dirs.triplets, return_inverse=True)
        self.used = used
        self.triplets = np.ascontiguousarray(inv.reshape(dirs.triplets.shape), dtype=np.int64)
        vecs = dirs.directions[used]
        self.vectors = vecs
        self.offsets = np.array([grid.offset(v) for v in vecs], dtype=np.int64)
        self.inv_scale = 1.0 / (np.sum(vecs**2, axis=1) * grid.h**2)
        widths = dirs.widths
        if shrink:
            reach = _reach(grid, dirs.n_theta).ravel()[self.nodes]
            allowed = np.searchsorted(widths, reach, side="right")
        else:
            allowed = np.full(self.nodes.size, widths.size)
        self.ntrip_allowed = np.ascontiguousarray(allowed, dtype=np.int64)
        if backend is None:
            self._eval = kernels.monotone_eval
        elif isinstance(backend, str):
            self._eval = kernels.get_backend(backend).monotone_eval
        else:
            self._eval = backend

    def evaluate(self, u: ScalarField) -> tuple[np.ndarray, ActiveTripletField]:
        """Operator values at the unknowns (interior order) and the active data."""
        uflat = np.ascontiguousarray(u.values, dtype=np.float64).ravel()
        vals, argmin, sdir, sd = self._eval(
            uflat, self.nodes, self.offsets, self.inv_scale, self.triplets, self.ntrip_allowed
        )
        return vals, ActiveTripletField(argmin, sdir, sd)

    def jacobian(self, active: ActiveTripletField) -> sp.csr_matrix:
        coef = np.empty_like(active.sd)
        d0, d1, d2 = active.sd[:, 0], active.sd[:, 1], active.sd[:, 2]
        br = active.branch
        coef[:, 0] = np.where(br, -2.0 * d0, d1 + d2)
        coef[:, 1] = np.where(br, 0.0, d0 + d2)
        coef[:, 2] = np.where(br, 0.0, d0 + d1)
        return self._assemble(active.sdir, coef)

    def _assemble(self, sdir: np.ndarray, coef: np.ndarray) -> sp.csr_matrix:
        grid = self.grid
        m = self.nodes.size
        uidx = grid.unknown_index
        rows, cols, vals = [np.arange(m)], [np.arange(m)], [np.zeros(m)]
        for j in range(3):
            w = coef[:, j] * self.inv_scale[sdir[:, j]]
            off = self.offsets[sdir[:, j]]
            rows.append(np.arange(m))
            cols.append(np.arange(m))
            vals.append(-2.0 * w)
            for s in (1, -1):
                col = uidx[self.nodes + s * off]
                keep = col >= 0
                rows.append(np.flatnonzero(keep))
                cols.append(col[keep])
                vals.append(w[keep])
        rows, cols, vals = map(np.concatenate, (rows, cols, vals))
        return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


@lru_cache(maxsize=16)
def _cached_dirs(n_theta: int) -> DirectionSet:
    return generate_directions(n_theta)


def s2_monotone(u: ScalarField, dirs: DirectionSet | int, shrink: bool = False) -> tuple[ScalarField, ActiveTripletField]:
    """Monotone discrete 2-Hessian (zero at non-interior nodes) and the active triplets."""
    if isinstance(dirs, int):
        dirs = _cached_dirs(dirs)
    op = MonotoneOperator(u.grid, dirs, shrink=shrink)
    vals, active = op.evaluate(u)
    out = np.zeros(u.grid.n**3)
    out[op.nodes] = vals
    return ScalarField(u.grid, out.reshape(u.grid.shape)), active


def jacobian_monotone(u: ScalarField, active: ActiveTripletField, dirs: DirectionSet | int, shrink: bool = False) -> sp.csr_matrix:
    if isinstance(dirs, int):
        dirs = _cached_dirs(dirs)
    return MonotoneOperator(u.grid, dirs, shrink=shrink).jacobian(active)


__all__ = [
    "ActiveTripletField",
    "MonotoneOperator",
    "directional_second_diff",
    "in_gamma",
    "jacobian_monotone",
    "s2_monotone",
    "sigma2",
    "sigma_bar",
]
