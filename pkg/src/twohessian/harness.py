"""Convergence studies, observed orders and result export.

A study runs one problem over a list of grid sizes for each requested
scheme, records the max-norm error against the exact solution (when one is
known) and the observed order between consecutive rows.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .grid import INTERIOR, ScalarField
from .problems import get_problem
from .solvers import SolverConfig, SolverError, solve

log = logging.getLogger(__name__)


def observed_order(e1: float, e2: float, n1: int, n2: int) -> float:
    """Order ``ln(e1/e2) / ln(h1/h2)`` between two grids with h = 1/(N-1)."""
    if not (e1 > 0 and e2 > 0):
        raise ValueError(f"errors must be positive, got {e1!r} and {e2!r}")
    if n2 <= n1:
        raise ValueError(f"need n2 > n1, got {n1} and {n2}")
    h1, h2 = 1.0 / (n1 - 1), 1.0 / (n2 - 1)
    return math.log(e1 / e2) / math.log(h1 / h2)


# ---------------------------------------------------------------------------
# configuration


def _parse_list(text, cast):
    if isinstance(text, (list, tuple)):
        return tuple(cast(t) for t in text)
    return tuple(cast(t) for t in str(text).replace(",", " ").split())


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    """Settings for a single solve or a convergence study.

    ``schemes`` lists "naive" and/or "monotone"; each monotone entry expands
    to one column per value of ``n_thetas``.
    """

    problem: str = "ex1"
    schemes: tuple = ("naive",)
    n_thetas: tuple = (1,)
    method: str = "newton"
    ns: tuple = (15, 20, 25, 30, 35)
    out_dir: str | None = None
    seed: int = 0
    noise: float = 0.01
    init: str = "jacobi_warmstart"
    tol: float = 1e-10
    relative_tol: bool = True
    max_iters: int = 100
    parabolic_alpha_coeff: float = 0.1
    shrink: bool = False
    export_table: bool = True
    export_history: bool = False
    export_level_sets: bool = False
    export_field: bool = False
    levels: tuple = ()

    def __post_init__(self):
        self.schemes = _parse_list(self.schemes, str)
        self.n_thetas = _parse_list(self.n_thetas, int)
        self.ns = _parse_list(self.ns, int)
        self.levels = _parse_list(self.levels, float)
        for name in ("seed", "max_iters"):
            setattr(self, name, int(getattr(self, name)))
        for name in ("noise", "tol", "parabolic_alpha_coeff"):
            setattr(self, name, float(getattr(self, name)))
        for name in ("relative_tol", "shrink", "export_table", "export_history",
                     "export_level_sets", "export_field"):
            setattr(self, name, _parse_bool(getattr(self, name)))
        if not self.ns:
            raise ValueError("ns must not be empty")
        if any(b <= a for a, b in zip(self.ns, self.ns[1:])):
            raise ValueError(f"ns must be strictly increasing, got {self.ns}")
        bad = [s for s in self.schemes if s not in ("naive", "monotone")]
        if bad or not self.schemes:
            raise ValueError(f"schemes must be 'naive' and/or 'monotone', got {self.schemes}")

    def columns(self) -> list[tuple[str, str, int]]:
        """(label, scheme, n_theta) for every table column."""
        out = []
        for s in self.schemes:
            if s == "naive":
                out.append(("naive", "naive", 1))
            else:
                out.extend((f"monotone({k})", "monotone", k) for k in self.n_thetas)
        return out

    def solver_config(self, scheme: str, n_theta: int) -> SolverConfig:
        return SolverConfig(
            scheme=scheme, n_theta=n_theta, method=self.method, tol=self.tol,
            relative_tol=self.relative_tol, max_iters=self.max_iters,
            parabolic_alpha_coeff=self.parabolic_alpha_coeff, init=self.init,
            noise=self.noise, seed=self.seed, shrink=self.shrink,
        )

    def override(self, **kw) -> "RunConfig":
        """Copy with every non-None keyword replaced."""
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_SECTION = "run"


def load_config(path: str | Path) -> RunConfig:
    """Read a RunConfig from an INI file with a ``[run]`` section.

    List values are comma- or space-separated, e.g. ``ns = 15, 20, 25``.
    """
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    if not parser.has_section(_SECTION):
        raise ValueError(f"{path}: missing [{_SECTION}] section")
    known = {f.name for f in fields(RunConfig)}
    values = dict(parser.items(_SECTION))
    unknown = sorted(set(values) - known)
    if unknown:
        raise ValueError(f"{path}: unknown keys {unknown}")
    if values.get("out_dir", "").strip() == "":
        values.pop("out_dir", None)
    return RunConfig(**values)


def dump_config(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser()
    d = {}
    for k, v in asdict(cfg).items():
        if v is None:
            v = ""
        elif isinstance(v, tuple):
            v = ", ".join(str(x) for x in v)
        d[k] = str(v)
    parser[_SECTION] = d
    from io import StringIO

    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# studies


@dataclass
class TableRow:
    n: int
    error_inf: float | None
    order: float | None
    iterations: int
    final_residual: float | None
    status: str
    message: str = ""
    seconds: float = 0.0

    @property
    def failed(self) -> bool:
        return self.status != "converged"


@dataclass
class ConvergenceTable:
    problem: str
    rows: dict = field(default_factory=dict)

    def add(self, label: str, row: TableRow) -> None:
        rows = self.rows.setdefault(label, [])
        if rows and row.error_inf and rows[-1].error_inf:
            row.order = observed_order(rows[-1].error_inf, row.error_inf, rows[-1].n, row.n)
        rows.append(row)

    def errors(self, label: str) -> list:
        return [r.error_inf for r in self.rows[label]]

    def orders(self, label: str) -> list:
        return [r.order for r in self.rows[label]]

    @property
    def failed(self) -> list[tuple[str, int]]:
        return [(lab, r.n) for lab, rows in self.rows.items() for r in rows if r.failed]

    _CSV_FIELDS = ("scheme", "n", "h", "error_inf", "order", "iterations", "final_residual", "status")

    def to_csv(self, path: str | Path) -> None:
        """Write the table. Timings are left out so reruns are byte-identical."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self._CSV_FIELDS)
            for lab, rows in self.rows.items():
                for r in rows:
                    w.writerow([
                        lab, r.n, repr(1.0 / (r.n - 1)),
                        "" if r.error_inf is None else repr(float(r.error_inf)),
                        "" if r.order is None else repr(float(r.order)),
                        r.iterations,
                        "" if r.final_residual is None else repr(float(r.final_residual)),
                        r.status,
                    ])

    def to_dict(self) -> dict:
        return {"problem": self.problem, "rows": {k: [asdict(r) for r in v] for k, v in self.rows.items()}}

    def format(self) -> str:
        lines = [f"problem {self.problem}"]
        for lab, rows in self.rows.items():
            lines.append(f"  {lab}")
            lines.append(f"    {'N':>4} {'error':>11} {'order':>6} {'iters':>5}  status")
            for r in rows:
                err = "-" if r.error_inf is None else f"{r.error_inf:.3e}"
                order = "-" if r.order is None else f"{r.order:.2f}"
                lines.append(f"    {r.n:>4} {err:>11} {order:>6} {r.iterations:>5}  {r.status}")
        return "\n".join(lines)


def _stem(label: str, n: int) -> str:
    return label.replace("(", "").replace(")", "") + f"_N{n}"


def run_study(cfg: RunConfig, problem=None) -> ConvergenceTable:
    """Solve ``cfg.problem`` on every N for every column of ``cfg``.

    A solver failure is recorded in its row and the study continues. Files
    are written to ``cfg.out_dir`` when it is set.
    """
    problem = problem if problem is not None else get_problem(cfg.problem)
    table = ConvergenceTable(problem.name)
    out = Path(cfg.out_dir) if cfg.out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for label, scheme, nt in cfg.columns():
        for n in cfg.ns:
            scfg = cfg.solver_config(scheme, nt)
            try:
                rep = solve(problem, n, scfg)
            except (SolverError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
                log.warning("%s N=%d failed: %s", label, n, exc)
                table.add(label, TableRow(n, None, None, 0, None, "error", str(exc)))
                continue
            err = rep.error_inf if rep.error_inf is not None and np.isfinite(rep.error_inf) else None
            row = TableRow(n, err, None, rep.iterations, rep.residual_history[-1], rep.status,
                           seconds=rep.timing)
            table.add(label, row)
            log.info("%s N=%d: %s after %d iterations, error %s", label, n, rep.status, rep.iterations, err)
            if out is None:
                continue
            if cfg.export_history:
                (out / f"history_{_stem(label, n)}.json").write_text(rep.to_json(indent=1))
            if cfg.export_level_sets and rep.final_field is not None:
                export_level_sets(rep.final_field, cfg.levels, out / f"levels_{_stem(label, n)}.csv")
            if cfg.export_field and rep.final_field is not None:
                from .grid import export_field_binary

                export_field_binary(rep.final_field, out / f"field_{_stem(label, n)}.f8")
    if out is not None:
        if cfg.export_table:
            table.to_csv(out / f"table_{problem.name}.csv")
        (out / f"study_{problem.name}.json").write_text(json.dumps(table.to_dict(), indent=1))
        (out / "config.ini").write_text(dump_config(cfg))
    return table


# ---------------------------------------------------------------------------
# level sets


def level_set_flags(u: ScalarField, level: float, tol: float = 1e-12) -> np.ndarray:
    """Nodes on or next to the level set ``u = level``.

    A node is flagged if ``|u - level| <= tol`` or if ``u - level`` changes
    sign strictly between it and one of its six axis neighbors.
    """
    d = u.values - level
    flags = np.abs(d) <= tol
    for ax in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        cross = d[tuple(lo)] * d[tuple(hi)] < 0
        flags[tuple(lo)] |= cross
        flags[tuple(hi)] |= cross
    return flags


def export_level_sets(u: ScalarField, levels, path: str | Path, tol: float = 1e-12) -> np.ndarray:
    """CSV of node coordinates, values, labels and one flag column per level.

    Returns the boolean flags with shape (len(levels), n, n, n).
    """
    grid = u.grid
    x = grid.coords().reshape(-1, 3)
    vals = u.values.ravel()
    flags = np.array([level_set_flags(u, c, tol) for c in levels], dtype=bool).reshape(len(levels), -1)
    interior = (grid.labels.ravel() == INTERIOR).astype(int)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "value", "interior"] + [f"level_{c:g}" for c in levels])
        for p in range(vals.size):
            w.writerow([repr(float(c)) for c in x[p]] + [repr(float(vals[p])), int(interior[p])]
                       + [int(f) for f in flags[:, p]])
    return flags.reshape((len(levels),) + grid.shape)


def diagonal_profile(u: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    """Values along the grid diagonal, ``(t, u(t, t, t))``."""
    n = u.grid.n
    i = np.arange(n)
    return i * u.grid.h, u.values[i, i, i]
