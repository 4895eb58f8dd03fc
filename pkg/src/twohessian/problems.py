"""Test problems for the Dirichlet 2-Hessian equation on [0, 1]^3.

Every callable takes an array of points with shape (..., 3).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .grid import BallsDomain, BoxDomain, Domain

X0 = (0.5, 0.5, 0.5)

Func = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Problem:
    name: str
    f: Func
    u_exact: Func | None = None
    hessian: Callable[[np.ndarray], np.ndarray] | None = None
    g: Func | None = None
    domain: Domain = field(default_factory=BoxDomain)
    params: dict = field(default_factory=dict)
    singular: Callable[[np.ndarray], np.ndarray] | None = None
    admissible: bool = True
    description: str = ""

    def boundary(self, x: np.ndarray) -> np.ndarray:
        if self.g is not None:
            return self.g(x)
        if self.u_exact is not None:
            return self.u_exact(x)
        return np.zeros(x.shape[:-1])


def _r2(x, x0=(0.0, 0.0, 0.0)):
    return np.sum((x - np.asarray(x0)) ** 2, axis=-1)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _radial_hessian(x, x0, d1_over_r, d2):
    """Hessian of a radial profile given u'(r)/r and u''(r) as functions of r."""
    y = x - np.asarray(x0)
    r = np.sqrt(np.sum(y**2, axis=-1))
    a = d1_over_r(r)
    b = d2(r)
    with np.errstate(invalid="ignore", divide="ignore"):
        e = np.where(r[..., None] > 0, y / np.where(r > 0, r, 1.0)[..., None], 0.0)
    eye = np.broadcast_to(np.eye(3), x.shape[:-1] + (3, 3))
    return a[..., None, None] * (eye - _outer(e, e)) + b[..., None, None] * _outer(e, e)


def quadratic() -> Problem:
    D = np.diag([2.0, -1.0, 4.0])
    return Problem(
        name="ex1",
        u_exact=lambda x: x[..., 0] ** 2 - 0.5 * x[..., 1] ** 2 + 2.0 * x[..., 2] ** 2,
        hessian=lambda x: np.broadcast_to(D, x.shape[:-1] + (3, 3)).copy(),
        f=lambda x: np.full(x.shape[:-1], 2.0),
        description="non-convex admissible quadratic",
    )


def smooth_convex_radial(x0=X0) -> Problem:
    def u(x):
        return np.exp(_r2(x, x0) / 2.0)

    def f(x):
        r2 = _r2(x, x0)
        return (3.0 + 2.0 * r2) * np.exp(r2)

    def hess(x):
        return _radial_hessian(x, x0, lambda r: np.exp(r**2 / 2), lambda r: (1 + r**2) * np.exp(r**2 / 2))

    return Problem(name="ex2", u_exact=u, hessian=hess, f=f, params={"x0": tuple(x0)},
                   description="exp(|x-x0|^2/2)")


def smooth_nonconvex_exp() -> Problem:
    def q(x):
        return 2.0 * x[..., 0] ** 2 - x[..., 1] ** 2 + 4.0 * x[..., 2] ** 2

    def f(x):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return 8.0 * (1.0 + 12.0 * x1**2 + 6.0 * x2**2 + 16.0 * x3**2) * np.exp(
            4.0 * x1**2 - 2.0 * x2**2 + 8.0 * x3**2
        )

    def hess(x):
        g = np.stack([4.0 * x[..., 0], -2.0 * x[..., 1], 8.0 * x[..., 2]], axis=-1)
        return np.exp(q(x))[..., None, None] * (np.diag([4.0, -2.0, 8.0]) + _outer(g, g))

    return Problem(name="ex3", u_exact=lambda x: np.exp(q(x)), hessian=hess, f=f,
                   description="exp(2x1^2 - x2^2 + 4x3^2)")


def log_radial() -> Problem:
    def f(x):
        r2 = _r2(x)
        return -4.0 * (-6.0 + r2) / (2.0 + r2) ** 3

    def hess(x):
        return _radial_hessian(x, (0, 0, 0), lambda r: 2.0 / (2.0 + r**2),
                               lambda r: (4.0 - 2.0 * r**2) / (2.0 + r**2) ** 2)

    return Problem(name="ex4", u_exact=lambda x: np.log(2.0 + _r2(x)), hessian=hess, f=f,
                   description="log(2 + |x|^2)")


def nonsmooth_convex(x0=X0, radius=0.2) -> Problem:
    def u(x):
        r = np.sqrt(_r2(x, x0))
        return 0.5 * np.maximum(r - radius, 0.0) ** 2

    def f(x):
        r = np.sqrt(_r2(x, x0))
        out = np.zeros_like(r)
        m = r > radius
        rm = r[m]
        out[m] = 3.0 + 1.0 / (25.0 * rm**2) - 4.0 / (5.0 * rm)
        return out

    def hess(x):
        def d1r(r):
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(r > radius, 1.0 - radius / np.where(r > 0, r, 1.0), 0.0)

        return _radial_hessian(x, x0, d1r, lambda r: np.where(r > radius, 1.0, 0.0))

    def singular(x):
        return np.abs(np.sqrt(_r2(x, x0)) - radius) < 1e-3

    return Problem(name="ex5", u_exact=u, hessian=hess, f=f, singular=singular,
                   params={"x0": tuple(x0), "radius": radius},
                   description="0.5 ((|x-x0| - 0.2)^+)^2")


def blowup() -> Problem:
    def u(x):
        return -np.sqrt(np.maximum(3.0 - _r2(x), 0.0))

    def f(x):
        r2 = _r2(x)
        with np.errstate(divide="ignore"):
            return -(-9.0 + r2) / (-3.0 + r2) ** 2

    def hess(x):
        return _radial_hessian(x, (0, 0, 0), lambda r: 1.0 / np.sqrt(3.0 - r**2),
                               lambda r: 3.0 / (3.0 - r**2) ** 1.5)

    def singular(x):
        return _r2(x) > 3.0 - 1e-3

    return Problem(name="ex6", u_exact=u, hessian=hess, f=f, singular=singular,
                   description="-sqrt(3 - |x|^2), singular at (1,1,1)")


def cube_unit_rhs() -> Problem:
    return Problem(name="ex7", f=lambda x: np.ones(x.shape[:-1]), g=lambda x: np.zeros(x.shape[:-1]),
                   description="f = 1, g = 0 on the cube")


def two_balls(radius=0.3) -> Problem:
    dom = BallsDomain((((0.35, 0.35, 0.5), radius), ((0.65, 0.65, 0.5), radius)))
    return Problem(name="ex8", f=lambda x: np.ones(x.shape[:-1]), g=lambda x: np.zeros(x.shape[:-1]),
                   domain=dom, params={"radius": radius},
                   description="f = 1, g = 0 on a union of two balls")


def catalog(x0=X0) -> list[Problem]:
    return [
        quadratic(),
        smooth_convex_radial(x0),
        smooth_nonconvex_exp(),
        log_radial(),
        nonsmooth_convex(x0),
        blowup(),
        cube_unit_rhs(),
        two_balls(),
    ]


def get_problem(name: str, **kwargs) -> Problem:
    builders = {
        "ex1": quadratic, "ex2": smooth_convex_radial, "ex3": smooth_nonconvex_exp,
        "ex4": log_radial, "ex5": nonsmooth_convex, "ex6": blowup,
        "ex7": cube_unit_rhs, "ex8": two_balls,
    }
    try:
        return builders[name](**kwargs)
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(builders)}") from None


@dataclass
class ValidationReport:
    name: str
    samples: int
    max_residual: float
    worst_point: tuple | None
    admissible_fraction: float
    passed: bool


def validate_problem(p: Problem, samples: int = 200, tol: float = 1e-8, seed: int = 0) -> ValidationReport:
    """Compare the analytic 2-Hessian of ``u_exact`` with ``f`` at random interior points.

    Points inside ``p.singular`` are skipped. The check is relative to max(1, |f|).
    """
    if p.u_exact is None or p.hessian is None:
        raise ValueError(f"problem {p.name} has no exact solution to validate")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 1.0, size=(samples * 2, 3))
    pts = pts[p.domain.contains(pts)]
    if p.singular is not None:
        pts = pts[~p.singular(pts)]
    pts = pts[:samples]
    H = p.hessian(pts)
    tr = np.trace(H, axis1=-2, axis2=-1)
    s2 = 0.5 * (tr**2 - np.einsum("...ij,...ji->...", H, H))
    fv = p.f(pts)
    res = np.abs(s2 - fv) / np.maximum(1.0, np.abs(fv))
    k = int(np.argmax(res)) if res.size else None
    lam = np.linalg.eigvalsh(H)
    adm = (lam[:, 0] + lam[:, 1] >= -1e-12)
    worst = float(res[k]) if k is not None else 0.0
    return ValidationReport(
        name=p.name,
        samples=int(pts.shape[0]),
        max_residual=worst,
        worst_point=tuple(pts[k]) if k is not None else None,
        admissible_fraction=float(adm.mean()) if adm.size else 1.0,
        passed=worst <= tol,
    )
