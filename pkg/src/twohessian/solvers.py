"""Iterative solvers for the discrete Dirichlet 2-Hessian problem.

Four iterations are provided: the smaller-root Jacobi fixed point, the
semi-implicit Poisson iteration, damped Newton (either scheme) and explicit
forward-Euler "parabolic" iteration (either scheme).
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid import Grid3, ScalarField, build_grid
from .monotone import MonotoneOperator, _cached_dirs
from .naive import (
    NegativeDiscriminantWarning,
    hessian_sample,
    jacobi_update,
    jacobian_naive,
    laplacian_boundary_part,
    laplacian_matrix,
    s2_naive_full,
)
from .problems import Problem

log = logging.getLogger(__name__)

SCHEMES = ("naive", "monotone")
METHODS = ("jacobi", "semi_implicit", "newton", "parabolic")
INITS = ("exact_plus_noise", "jacobi_warmstart", "poisson_sqrt2f", "zero")


class SolverError(RuntimeError):
    pass


class LinearSolveError(SolverError):
    pass


@dataclass
class SolverConfig:
    scheme: str = "naive"
    n_theta: int = 1
    method: str = "newton"
    tol: float = 1e-10
    # scale tol by max(1, max|f|) so badly scaled problems can reach it in floating point
    relative_tol: bool = True
    max_iters: int = 100
    damping_min: float = 2.0**-20
    parabolic_alpha_coeff: float = 0.1
    init: str = "jacobi_warmstart"
    noise: float = 0.01
    seed: int = 0
    warmstart_tol: float = 1e-1
    warmstart_max_iters: int = 20000
    shrink: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not 0 < self.damping_min <= 1:
            raise ValueError("damping_min must lie in (0, 1]")


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    final_field: ScalarField | None
    converged: bool
    status: str = ""
    damping_history: list = field(default_factory=list)
    update_history: list = field(default_factory=list)
    timing: float = 0.0
    scheme: str = ""
    method: str = ""
    n: int = 0
    error_inf: float | None = None

    def to_dict(self) -> dict:
        d = {k: v for k, v in self.__dict__.items() if k != "final_field"}
        return json.loads(json.dumps(d, default=float))

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


# ---------------------------------------------------------------------------
# linear algebra


# below this many unknowns a sparse LU is cheaper than building a multigrid hierarchy
DIRECT_MAX = 2500


def _direct(A: sp.csc_matrix, b: np.ndarray, refine: int) -> np.ndarray:
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", spla.MatrixRankWarning)
            lu = spla.splu(A)
    except (RuntimeError, spla.MatrixRankWarning) as exc:
        raise LinearSolveError(f"singular linearization: {exc}") from exc
    v = lu.solve(b)
    for _ in range(refine):
        r = b - A @ v
        if np.max(np.abs(r), initial=0.0) <= 1e-12 * max(1.0, np.max(np.abs(b), initial=0.0)):
            break
        v = v + lu.solve(r)
    return v


def _amg(A: sp.csr_matrix, b: np.ndarray, refine: int) -> np.ndarray:
    import pyamg

    ml = pyamg.smoothed_aggregation_solver(A, symmetry="nonsymmetric")
    bnorm = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    v = np.zeros_like(b)
    r = b.copy()
    for _ in range(refine + 1):
        v = v + ml.solve(r, tol=1e-13, accel="gmres", maxiter=200)
        r = b - A @ v
        if np.max(np.abs(r)) <= 1e-12 * bnorm:
            break
    return v


def _backward_error(A, v, b) -> tuple[float, float]:
    r = float(np.max(np.abs(A @ v - b), initial=0.0))
    anorm = spla.norm(A, np.inf)
    return r, r / (anorm * np.max(np.abs(v), initial=0.0) + np.max(np.abs(b), initial=0.0) + 1e-300)


def linear_solve(A: sp.spmatrix, b: np.ndarray, refine: int = 3, method: str = "auto") -> np.ndarray:
    """Solve ``A v = b`` for a Newton or Poisson step.

    ``method`` is "direct" (sparse LU), "amg" (smoothed-aggregation multigrid
    preconditioned GMRES) or "auto", which picks LU for small systems. Both
    paths apply iterative refinement. A multigrid failure falls back to LU.

    Raises LinearSolveError on a singular factorization, a non-finite result,
    or a normwise backward error above 1e-10.
    """
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1] or A.shape[0] != b.shape[0]:
        raise ValueError(f"shape mismatch: A {A.shape}, b {b.shape}")
    if method == "auto":
        method = "direct" if A.shape[0] <= DIRECT_MAX else "amg"
    v = None
    if method == "amg":
        try:
            v = _amg(A, b, refine)
        except Exception as exc:  # pyamg raises assorted numerical errors
            log.warning("multigrid solve failed (%s); falling back to LU", exc)
            v = None
        if v is not None:
            r, be = _backward_error(A, v, b)
            if not np.isfinite(be) or be > 1e-10:
                log.warning("multigrid backward error %.1e; falling back to LU", be)
                v = None
    elif method != "direct":
        raise ValueError(f"unknown linear solver {method!r}")
    if v is None:
        v = _direct(sp.csc_matrix(A), b, refine)
    if not np.all(np.isfinite(v)):
        raise LinearSolveError("non-finite solution; the linearization is singular")
    r, be = _backward_error(A, v, b)
    if be > 1e-10:
        raise LinearSolveError(f"linear solve residual {r:.3e} (backward error {be:.1e})")
    return v


class PoissonSolver:
    """Repeated solves with the seven-point Dirichlet Laplacian.

    On the full box the operator is diagonalized by the type-I discrete sine
    transform; otherwise the matrix is factorized (small) or handled by
    multigrid-preconditioned CG.
    """

    def __init__(self, grid: Grid3):
        self.grid = grid
        m = grid.n - 2
        self.box = grid.interior_flat.size == m**3
        if self.box:
            k = np.arange(1, m + 1)
            lam = (2.0 * np.cos(np.pi * k / (m + 1)) - 2.0) / grid.h**2
            self.eig = lam[:, None, None] + lam[None, :, None] + lam[None, None, :]
            return
        self.L = sp.csr_matrix(laplacian_matrix(grid))
        if self.L.shape[0] <= DIRECT_MAX:
            self.lu = spla.splu(sp.csc_matrix(self.L))
            self.ml = None
        else:
            import pyamg

            self.lu = None
            # CG needs a positive definite operator
            self.ml = pyamg.smoothed_aggregation_solver(-self.L)

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.box:
            m = self.grid.n - 2
            rhs = b.reshape(m, m, m)
            return sfft.idstn(sfft.dstn(rhs, type=1) / self.eig, type=1).ravel()
        if self.lu is not None:
            return self.lu.solve(b)
        return -self.ml.solve(b, tol=1e-14, accel="cg", maxiter=500)


# ---------------------------------------------------------------------------
# problem setup


@dataclass
class Setup:
    """Grid, sampled data and the discrete operator for one (problem, N, scheme)."""

    problem: Problem
    grid: Grid3
    f: ScalarField
    g: ScalarField
    exact: ScalarField | None
    config: SolverConfig
    monotone: MonotoneOperator | None = None

    @property
    def f_int(self) -> np.ndarray:
        return self.f.interior_values

    @property
    def threshold(self) -> float:
        scale = max(1.0, float(np.max(np.abs(self.f_int)))) if self.config.relative_tol else 1.0
        return self.config.tol * scale

    def operator(self, u: ScalarField) -> np.ndarray:
        """Scheme values at the unknowns."""
        if self.config.scheme == "naive":
            return s2_naive_full(u)[self.grid.interior]
        return self.monotone.evaluate(u)[0]

    def residual(self, u: ScalarField) -> np.ndarray:
        return self.operator(u) - self.f_int

    def naive_residual(self, u: ScalarField) -> np.ndarray:
        return s2_naive_full(u)[self.grid.interior] - self.f_int

    def jacobian(self, u: ScalarField) -> sp.csr_matrix:
        if self.config.scheme == "naive":
            return jacobian_naive(u)
        _, active = self.monotone.evaluate(u)
        return self.monotone.jacobian(active)


def prepare(problem: Problem, n: int, config: SolverConfig, band_width: int | None = None) -> Setup:
    if band_width is None:
        band_width = 1 if config.scheme == "naive" or config.shrink else config.n_theta
    grid = build_grid(n, problem.domain, band_width)
    x = grid.coords()
    with np.errstate(divide="ignore", invalid="ignore"):
        fv = np.where(grid.interior, problem.f(x), 0.0)
    f = ScalarField(grid, fv)
    g = ScalarField(grid, np.asarray(problem.boundary(x), dtype=float))
    exact = ScalarField(grid, problem.u_exact(x)) if problem.u_exact is not None else None
    mono = None
    if config.scheme == "monotone":
        mono = MonotoneOperator(grid, _cached_dirs(config.n_theta), shrink=config.shrink)
    return Setup(problem, grid, f, g, exact, config, mono)


def _poisson_init(s: Setup) -> ScalarField:
    if np.any(s.f_int < 0):
        raise ValueError("the sqrt(2 f) Poisson initialization needs f >= 0")
    rhs = np.sqrt(2.0 * s.f_int) - laplacian_boundary_part(s.g)
    v = PoissonSolver(s.grid).solve(rhs)
    return s.g.with_interior(v)


def initial_field(s: Setup, init: str | None = None) -> ScalarField:
    init = init or s.config.init
    if init == "zero":
        return s.g.with_interior(np.zeros(s.grid.interior_flat.size))
    if init == "poisson_sqrt2f":
        return _poisson_init(s)
    if init == "exact_plus_noise":
        if s.exact is None:
            raise ValueError(f"problem {s.problem.name} has no exact solution for exact_plus_noise")
        rng = np.random.default_rng(s.config.seed)
        a = s.config.noise
        noisy = s.exact.interior_values + rng.uniform(-a, a, size=s.grid.interior_flat.size)
        return s.g.with_interior(noisy)
    if init == "jacobi_warmstart":
        base = initial_field(s, "exact_plus_noise" if s.exact is not None else "poisson_sqrt2f")
        rep = _jacobi_loop(s, base, s.config.warmstart_tol, s.config.warmstart_max_iters)
        log.info("jacobi warm start: %d sweeps, residual %.3e", rep.iterations, rep.residual_history[-1])
        return rep.final_field
    raise ValueError(f"unknown init {init!r}")


# ---------------------------------------------------------------------------
# solvers


def _jacobi_loop(s: Setup, u: ScalarField, threshold: float, max_iters: int, update_tol: float = 0.0) -> SolveReport:
    res0 = float(np.max(np.abs(s.naive_residual(u))))
    hist, upd = [res0], []
    status = "max_iters"
    it = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", NegativeDiscriminantWarning)
        while it < max_iters:
            if hist[-1] < threshold:
                status = "converged"
                break
            new = jacobi_update(u, s.f)
            it += 1
            upd.append(float(np.max(np.abs(new.interior_values - u.interior_values))))
            u = new
            res = float(np.max(np.abs(s.naive_residual(u))))
            hist.append(res)
            if not np.isfinite(res) or res > 1e6 * max(res0, 1e-300):
                status = "diverged"
                break
            if upd[-1] < update_tol:
                status = "converged"
                break
    return SolveReport(it, hist, u, status == "converged", status, update_history=upd)


def solve_jacobi(s: Setup, u0: ScalarField | None = None) -> SolveReport:
    if s.config.scheme != "naive":
        raise ValueError("the Jacobi iteration applies to the naive scheme only")
    u = u0 if u0 is not None else initial_field(s)
    return _jacobi_loop(s, u, s.threshold, s.config.max_iters, update_tol=s.config.tol)


def solve_semi_implicit(s: Setup, u0: ScalarField | None = None) -> SolveReport:
    if np.any(s.f_int < 0):
        raise ValueError("the semi-implicit iteration needs f >= 0")
    lu = PoissonSolver(s.grid)
    bpart = laplacian_boundary_part(s.g)
    u = u0 if u0 is not None else s.g.with_interior(lu.solve(np.sqrt(2.0 * s.f_int) - bpart))
    hist = [float(np.max(np.abs(s.naive_residual(u))))]
    upd = []
    status = "max_iters"
    it = 0
    while it < s.config.max_iters:
        hs = hessian_sample(u)
        frob2 = hs.dxx**2 + hs.dyy**2 + hs.dzz**2 + 2.0 * (hs.dxy**2 + hs.dxz**2 + hs.dyz**2)
        new = s.g.with_interior(lu.solve(np.sqrt(frob2 + 2.0 * s.f_int) - bpart))
        it += 1
        upd.append(float(np.max(np.abs(new.interior_values - u.interior_values))))
        u = new
        hist.append(float(np.max(np.abs(s.naive_residual(u)))))
        if not np.isfinite(upd[-1]):
            status = "diverged"
            break
        if upd[-1] < s.config.tol:
            status = "converged"
            break
    return SolveReport(it, hist, u, status == "converged", status, update_history=upd)


def solve_newton(s: Setup, u0: ScalarField | None = None) -> SolveReport:
    u = u0 if u0 is not None else initial_field(s)
    r = s.residual(u)
    res = float(np.max(np.abs(r)))
    hist, damp = [res], []
    status = "max_iters"
    it = 0
    thresh = s.threshold
    while it < s.config.max_iters:
        if res < thresh:
            status = "converged"
            break
        v = linear_solve(s.jacobian(u), r)
        alpha = 1.0
        while True:
            trial = u.with_interior(u.interior_values - alpha * v)
            r_trial = s.residual(trial)
            res_trial = float(np.max(np.abs(r_trial)))
            if res_trial < res:
                break
            alpha *= 0.5
            if alpha < s.config.damping_min:
                break
        it += 1
        if alpha < s.config.damping_min:
            status = "stagnated"
            log.warning("newton stagnated at residual %.3e after %d iterations", res, it)
            break
        u, r, res = trial, r_trial, res_trial
        hist.append(res)
        damp.append(alpha)
    return SolveReport(it, hist, u, status == "converged", status, damping_history=damp)


def parabolic_step(s: Setup, u: ScalarField, step: float) -> ScalarField:
    """One explicit step; sign follows the scheme (see solve_parabolic)."""
    r = s.residual(u)
    sign = 1.0
    return u.with_interior(u.interior_values + sign * step * r)


def solve_parabolic(s: Setup, u0: ScalarField | None = None, step: float | None = None) -> SolveReport:
    """Forward-Euler iteration.

    Monotone scheme: ``u <- u - alpha (S[u] - f)`` with ``alpha = c h^4``.
    Naive scheme: ``u <- u + dt (S[u] - f)``, kept only to exhibit its failure.
    A residual increase (the nonexpansive bound broken) is counted in the
    status as ``non_contraction`` when the run ends without converging.
    """
    u = u0 if u0 is not None else initial_field(s)
    h4 = s.grid.h**4
    step = step if step is not None else s.config.parabolic_alpha_coeff * h4
    res0 = float(np.max(np.abs(s.residual(u))))
    hist = [res0]
    status = "max_iters"
    increases = 0
    it = 0
    thresh = s.threshold
    while it < s.config.max_iters:
        if hist[-1] < thresh:
            status = "converged"
            break
        u = parabolic_step(s, u, step)
        it += 1
        res = float(np.max(np.abs(s.residual(u))))
        hist.append(res)
        if res > hist[-2] * (1 + 1e-12):
            increases += 1
        if not np.isfinite(res) or res > 1e6 * res0:
            status = "diverged"
            break
    if status == "max_iters" and increases:
        status = "non_contraction"
    rep = SolveReport(it, hist, u, status == "converged", status)
    rep.update_history = [step]
    return rep


SOLVERS = {
    "jacobi": solve_jacobi,
    "semi_implicit": solve_semi_implicit,
    "newton": solve_newton,
    "parabolic": solve_parabolic,
}


def solve(problem: Problem, n: int, config: SolverConfig, u0: ScalarField | None = None) -> SolveReport:
    """Build the grid, initialize per ``config`` and run the configured method."""
    t0 = time.perf_counter()
    s = prepare(problem, n, config)
    rep = SOLVERS[config.method](s, u0)
    rep.timing = time.perf_counter() - t0
    rep.scheme = config.scheme if config.scheme == "naive" else f"monotone({config.n_theta})"
    rep.method = config.method
    rep.n = n
    if s.exact is not None and rep.final_field is not None:
        mask = s.grid.interior
        rep.error_inf = float(np.max(np.abs(rep.final_field.values[mask] - s.exact.values[mask])))
    return rep
