"""NumPy implementation of the monotone-operator kernel.

Used when the compiled extension is unavailable, or when
``TWOHESSIAN_PURE_PYTHON=1`` is set. Must agree with ``_kernels.pyx``
bit-for-bit on the values and argmin.
"""

import numpy as np


def sigma_bar_sorted(x, y, z):
    """The non-decreasing extension evaluated on already ascending arguments."""
    ax = np.abs(x)
    my = np.maximum(y, ax)
    mz = np.maximum(z, ax)
    return x * my + x * mz + my * mz


def directional_diffs(uflat, nodes, offsets, inv_scale):
    """Second differences along each offset, shape (len(offsets), len(nodes))."""
    c = uflat[nodes]
    out = np.empty((offsets.size, nodes.size))
    for d in range(offsets.size):
        o = offsets[d]
        out[d] = (uflat[nodes + o] + uflat[nodes - o] - 2.0 * c) * inv_scale[d]
    return out


def monotone_eval(uflat, nodes, offsets, inv_scale, triplets, ntrip_allowed):
    """Minimum of the extended sigma_2 over triplets, per node.

    Parameters
    ----------
    uflat : (n^3,) float array
    nodes : (m,) int array of flat node indices
    offsets : (ndir,) int array of flat offsets of the used directions
    inv_scale : (ndir,) float array, 1 / (|nu|^2 h^2)
    triplets : (ntrip, 3) int array of indices into ``offsets``
    ntrip_allowed : (m,) int array; node p only scans triplets [0, ntrip_allowed[p])

    Returns
    -------
    vals : (m,) minimum values
    argmin : (m,) index of the first minimizing triplet
    sdir : (m, 3) direction indices of the active triplet, sorted by difference
    sd : (m, 3) the corresponding differences, ascending
    """
    m = nodes.size
    D = directional_diffs(uflat, nodes, offsets, inv_scale)
    vals = np.full(m, np.inf)
    argmin = np.zeros(m, dtype=np.int64)
    for t in range(triplets.shape[0]):
        a, b, c = D[triplets[t, 0]], D[triplets[t, 1]], D[triplets[t, 2]]
        s = np.sort(np.stack([a, b, c]), axis=0)
        v = sigma_bar_sorted(s[0], s[1], s[2])
        better = (v < vals) & (t < ntrip_allowed)
        vals[better] = v[better]
        argmin[better] = t
    tri = triplets[argmin]
    dvals = D[tri.T, np.arange(m)].T
    order = np.argsort(dvals, axis=1, kind="stable")
    sdir = np.take_along_axis(tri, order, axis=1)
    sd = np.take_along_axis(dvals, order, axis=1)
    return vals, argmin, sdir, sd


def _sh(v, di, dj, dk):
    n = v.shape[0]
    return v[1 + di:n - 1 + di, 1 + dj:n - 1 + dj, 1 + dk:n - 1 + dk]


def naive_s2(v, interior, h):
    """Centered-difference 2-Hessian on the full grid, zero off ``interior``."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    h2 = h * h
    c = _sh(v, 0, 0, 0)
    dxx = (_sh(v, 1, 0, 0) - 2.0 * c + _sh(v, -1, 0, 0)) / h2
    dyy = (_sh(v, 0, 1, 0) - 2.0 * c + _sh(v, 0, -1, 0)) / h2
    dzz = (_sh(v, 0, 0, 1) - 2.0 * c + _sh(v, 0, 0, -1)) / h2
    dxy = (_sh(v, 1, 1, 0) + _sh(v, -1, -1, 0) - _sh(v, -1, 1, 0) - _sh(v, 1, -1, 0)) / (4.0 * h2)
    dxz = (_sh(v, 1, 0, 1) + _sh(v, -1, 0, -1) - _sh(v, -1, 0, 1) - _sh(v, 1, 0, -1)) / (4.0 * h2)
    dyz = (_sh(v, 0, 1, 1) + _sh(v, 0, -1, -1) - _sh(v, 0, -1, 1) - _sh(v, 0, 1, -1)) / (4.0 * h2)
    val = dxx * dyy + dxx * dzz + dyy * dzz - dxy * dxy - dxz * dxz - dyz * dyz
    out = np.zeros_like(v)
    core = np.asarray(interior, dtype=bool)[1:-1, 1:-1, 1:-1]
    out[1:-1, 1:-1, 1:-1][core] = val[core]
    return out


def jacobi_sweep(v, f, interior, h):
    """Smaller-root update at every interior node; see ``_kernels.jacobi_sweep``."""
    v = np.ascontiguousarray(v, dtype=np.float64)
    n = v.shape[0]
    h4 = h * h * h * h
    a1 = 0.5 * (_sh(v, 1, 0, 0) + _sh(v, -1, 0, 0))
    a2 = 0.5 * (_sh(v, 0, 1, 0) + _sh(v, 0, -1, 0))
    a3 = 0.5 * (_sh(v, 0, 0, 1) + _sh(v, 0, 0, -1))
    a4 = 0.5 * (_sh(v, 1, 1, 0) + _sh(v, -1, -1, 0))
    a5 = 0.5 * (_sh(v, -1, 1, 0) + _sh(v, 1, -1, 0))
    a6 = 0.5 * (_sh(v, 1, 0, 1) + _sh(v, -1, 0, -1))
    a7 = 0.5 * (_sh(v, -1, 0, 1) + _sh(v, 1, 0, -1))
    a8 = 0.5 * (_sh(v, 0, 1, 1) + _sh(v, 0, -1, -1))
    a9 = 0.5 * (_sh(v, 0, 1, -1) + _sh(v, 0, -1, 1))
    pair = (a1 - a2) * (a1 - a2) + (a1 - a3) * (a1 - a3) + (a2 - a3) * (a2 - a3)
    mixed = (a4 - a5) * (a4 - a5) + (a6 - a7) * (a6 - a7) + (a8 - a9) * (a8 - a9)
    disc = 8.0 * pair + 3.0 * mixed + 12.0 * _sh(f, 0, 0, 0) * h4
    core = np.asarray(interior, dtype=bool)[1:-1, 1:-1, 1:-1]
    neg = (disc < 0) & core
    nclamped = int(neg.sum())
    first, first_disc = -1, 0.0
    if nclamped:
        idx = np.unravel_index(np.flatnonzero(neg)[0], neg.shape)
        first = int(np.ravel_multi_index(tuple(int(i) + 1 for i in idx), (n, n, n)))
        first_disc = float(disc[idx])
    disc = np.where(neg, 0.0, disc)
    new = (a1 + a2 + a3) / 3.0 - np.sqrt(np.maximum(disc, 0.0)) / 12.0
    out = v.copy()
    out[1:-1, 1:-1, 1:-1][core] = new[core]
    return out, nclamped, first, first_disc
