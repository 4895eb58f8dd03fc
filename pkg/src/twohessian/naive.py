"""Centered-difference (non-monotone) discretization of the 2-Hessian operator.

Whole-grid evaluations use shifted slices of the core block [1, n-1)^3 and
then keep the interior nodes, so box and embedded (ball) domains share one
code path. Results are returned in interior (C) order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .grid import INTERIOR, Grid3, ScalarField


@dataclass(frozen=True)
class HessianSample:
    dxx: float | np.ndarray
    dyy: float | np.ndarray
    dzz: float | np.ndarray
    dxy: float | np.ndarray
    dxz: float | np.ndarray
    dyz: float | np.ndarray

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [[self.dxx, self.dxy, self.dxz], [self.dxy, self.dyy, self.dyz], [self.dxz, self.dyz, self.dzz]]
        )


@dataclass(frozen=True)
class NeighborAverages:
    """The nine two-point neighbor means a1..a9 (stored as a tuple, a[0] is a1)."""

    a: tuple


# axis pairs for the mixed differences, in the order xy, xz, yz
_PAIRS = ((0, 1), (0, 2), (1, 2))


def _unit(axis: int) -> np.ndarray:
    e = np.zeros(3, dtype=int)
    e[axis] = 1
    return e


def _gather(grid: Grid3, uflat: np.ndarray, nodes: np.ndarray, nu) -> np.ndarray:
    return uflat[nodes + grid.offset(nu)]


def _shift(v: np.ndarray, nu) -> np.ndarray:
    """View of ``v`` at node + nu over the core block [1, n-1)^3."""
    n = v.shape[0]
    return v[tuple(slice(1 + int(a), n - 1 + int(a)) for a in nu)]


def _core_mask(grid: Grid3) -> np.ndarray:
    return grid.interior[1:-1, 1:-1, 1:-1]


def _check_nodes(grid: Grid3, nodes: np.ndarray) -> None:
    if not np.all(grid.labels.ravel()[nodes] == INTERIOR):
        raise ValueError("centered-difference stencil requested at a non-interior node")


def hessian_sample(u: ScalarField, node=None) -> HessianSample:
    """Second differences at one node ``(i, j, k)`` or, if ``node`` is None, at all interior nodes."""
    grid = u.grid
    if node is None:
        return _hessian_all(u)
    nodes = np.atleast_1d(np.ravel_multi_index(tuple(node), grid.shape))
    _check_nodes(grid, nodes)
    uflat = u.values.ravel()
    h2 = grid.h**2
    c = uflat[nodes]
    diag = []
    for ax in range(3):
        e = _unit(ax)
        diag.append((_gather(grid, uflat, nodes, e) - 2.0 * c + _gather(grid, uflat, nodes, -e)) / h2)
    cross = []
    for a, b in _PAIRS:
        ea, eb = _unit(a), _unit(b)
        pp = _gather(grid, uflat, nodes, ea + eb)
        mm = _gather(grid, uflat, nodes, -ea - eb)
        mp = _gather(grid, uflat, nodes, -ea + eb)
        pm = _gather(grid, uflat, nodes, ea - eb)
        cross.append((pp + mm - mp - pm) / (4.0 * h2))
    return HessianSample(*[float(v[0]) for v in diag + cross])


def _hessian_all(u: ScalarField) -> HessianSample:
    v = u.values
    mask = _core_mask(u.grid)
    h2 = u.grid.h**2
    c = _shift(v, (0, 0, 0))
    diag = []
    for ax in range(3):
        e = _unit(ax)
        diag.append(((_shift(v, e) - 2.0 * c + _shift(v, -e)) / h2)[mask])
    cross = []
    for a, b in _PAIRS:
        ea, eb = _unit(a), _unit(b)
        d = _shift(v, ea + eb) + _shift(v, -ea - eb) - _shift(v, -ea + eb) - _shift(v, ea - eb)
        cross.append((d / (4.0 * h2))[mask])
    return HessianSample(*diag, *cross)


def c_of_hessian(hs: HessianSample):
    """Sum of the principal 2x2 minors of the sampled Hessian."""
    return (
        hs.dxx * hs.dyy + hs.dxx * hs.dzz + hs.dyy * hs.dzz
        - hs.dxy**2 - hs.dxz**2 - hs.dyz**2
    )


def s2_naive(u: ScalarField) -> ScalarField:
    """Naive discrete 2-Hessian; zero at non-interior nodes."""
    return ScalarField(u.grid, s2_naive_full(u))


def s2_naive_full(u: ScalarField, backend=None) -> np.ndarray:
    """Full-grid array of the naive operator, via the selected kernel backend."""
    k = kernels if backend is None else kernels.get_backend(backend)
    v = np.ascontiguousarray(u.values, dtype=np.float64)
    return k.naive_s2(v, u.grid.interior.view(np.uint8), u.grid.h)


def neighbor_averages(u: ScalarField) -> NeighborAverages:
    v = u.values
    mask = _core_mask(u.grid)

    def avg(p, q):
        return (0.5 * (_shift(v, p) + _shift(v, q)))[mask]

    ex, ey, ez = _unit(0), _unit(1), _unit(2)
    a = (
        avg(ex, -ex), avg(ey, -ey), avg(ez, -ez),
        avg(ex + ey, -ex - ey), avg(-ex + ey, ex - ey),
        avg(ex + ez, -ex - ez), avg(-ex + ez, ex - ez),
        avg(ey + ez, -ey - ez), avg(ey - ez, -ey + ez),
    )
    return NeighborAverages(a)


class NegativeDiscriminantWarning(RuntimeWarning):
    pass


def _jacobi_discriminant(a, f, h):
    a1, a2, a3 = a[0], a[1], a[2]
    pair = (a1 - a2) ** 2 + (a1 - a3) ** 2 + (a2 - a3) ** 2
    mixed = (a[3] - a[4]) ** 2 + (a[5] - a[6]) ** 2 + (a[7] - a[8]) ** 2
    return 8.0 * pair + 3.0 * mixed + 12.0 * f * h**4


def jacobi_roots(u: ScalarField, f: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Both roots (smaller, larger) of the per-node quadratic, interior order.

    Negative discriminants are clamped to zero.
    """
    a = neighbor_averages(u).a
    disc = _jacobi_discriminant(a, f.interior_values, u.grid.h)
    mean = (a[0] + a[1] + a[2]) / 3.0
    r = np.sqrt(np.maximum(disc, 0.0)) / 12.0
    return mean - r, mean + r


def jacobi_constant_term(u: ScalarField, f: ScalarField) -> np.ndarray:
    """Constant term of the monic per-node quadratic u^2 - (2/3)(a1+a2+a3) u + c = 0."""
    a = neighbor_averages(u).a
    h4 = u.grid.h**4
    mixed = (a[3] - a[4]) ** 2 + (a[5] - a[6]) ** 2 + (a[7] - a[8]) ** 2
    prod = a[0] * a[1] + a[0] * a[2] + a[1] * a[2]
    rhs = h4 * f.interior_values / 4.0 + mixed / 16.0
    return (prod - rhs) / 3.0


def jacobi_update(u: ScalarField, f: ScalarField, clamp: bool = True, backend=None) -> ScalarField:
    """One simultaneous sweep of the smaller-root fixed-point map.

    With ``clamp`` a negative discriminant is set to zero and a warning is
    issued; otherwise a ValueError names the first offending node.
    """
    k = kernels if backend is None else kernels.get_backend(backend)
    grid = u.grid
    v = np.ascontiguousarray(u.values, dtype=np.float64)
    fv = np.ascontiguousarray(f.values, dtype=np.float64)
    out, nneg, first, disc = k.jacobi_sweep(v, fv, grid.interior.view(np.uint8), grid.h)
    if nneg:
        node = tuple(int(i) for i in np.unravel_index(first, grid.shape))
        msg = f"negative discriminant {disc:.3e} at node {node} ({nneg} nodes)"
        if not clamp:
            raise ValueError(msg)
        warnings.warn(msg + "; clamped to 0", NegativeDiscriminantWarning, stacklevel=2)
    return ScalarField(grid, out)


def stencil_weights(grid: Grid3, nodes: np.ndarray, terms) -> tuple:
    """Assemble rows for a list of ``(offset, per-node weight)`` terms; drops non-interior columns."""
    uidx = grid.unknown_index
    rows_of_node = uidx[nodes]
    rows, cols, vals = [], [], []
    for off, w in terms:
        w = np.broadcast_to(w, nodes.shape)
        col = uidx[nodes + grid.offset(off)]
        keep = col >= 0
        rows.append(rows_of_node[keep])
        cols.append(col[keep])
        vals.append(w[keep])
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def jacobian_naive_triplets(u: ScalarField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Jacobian of s2_naive over interior unknowns as (row, col, value) arrays."""
    grid = u.grid
    nodes = grid.interior_flat
    hs = hessian_sample(u)
    h2 = grid.h**2
    d = (hs.dxx, hs.dyy, hs.dzz)
    m = (hs.dxy, hs.dxz, hs.dyz)
    terms = []
    center = np.zeros(nodes.size)
    for ax in range(3):
        # d c / d(D_axax) = trace - D_axax
        cf = (d[(ax + 1) % 3] + d[(ax + 2) % 3]) / h2
        e = _unit(ax)
        terms += [(e, cf), (-e, cf)]
        center -= 2.0 * cf
    terms.append((np.zeros(3, int), center))
    for (a, b), mab in zip(_PAIRS, m):
        cf = -2.0 * mab / (4.0 * h2)
        ea, eb = _unit(a), _unit(b)
        terms += [(ea + eb, cf), (-ea - eb, cf), (-ea + eb, -cf), (ea - eb, -cf)]
    return stencil_weights(grid, nodes, terms)


def jacobian_naive(u: ScalarField) -> sp.csr_matrix:
    rows, cols, vals = jacobian_naive_triplets(u)
    m = u.grid.interior_flat.size
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


def laplacian_matrix(grid: Grid3) -> sp.csr_matrix:
    """Seven-point Laplacian over interior unknowns with Dirichlet elimination."""
    nodes = grid.interior_flat
    cf = np.full(nodes.size, 1.0 / grid.h**2)
    terms = []
    for ax in range(3):
        e = _unit(ax)
        terms += [(e, cf), (-e, cf)]
    terms.append((np.zeros(3, int), -6.0 * cf))
    rows, cols, vals = stencil_weights(grid, nodes, terms)
    m = nodes.size
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m))


def laplacian_boundary_part(u: ScalarField) -> np.ndarray:
    """Contribution of non-interior neighbor values to the seven-point Laplacian at each unknown."""
    grid = u.grid
    nodes = grid.interior_flat
    uflat = u.values.ravel()
    labels = grid.labels.ravel()
    out = np.zeros(nodes.size)
    for ax in range(3):
        for s in (1, -1):
            nb = nodes + s * grid.strides[ax]
            fixed = labels[nb] != INTERIOR
            out[fixed] += uflat[nb[fixed]]
    return out / grid.h**2
