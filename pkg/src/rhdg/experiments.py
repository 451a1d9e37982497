"""Experiment drivers: convergence study, tau sweep, CR equivalence, inf-sup."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import (
    DimensionGuardError,
    EocTable,
    compute_errors,
    eoc,
    broken_h1_seminorm,
    infsup_estimate,
    jump_seminorm,
)
from .condensation import condense, solve_condensed
from .cr import compare_with_hdg, hdg_cr_differences, solve_cr
from .exact import ExactSolution, trigonometric_solution
from .hdg import HdgSolution, SpaceSpec, assemble, default_tau, divergence_residual, solve_full
from .mesh import Mesh, read_mesh, structured_unit_square, uniform_refine

log = logging.getLogger(__name__)

EXPERIMENTS = ("conv", "tau-sweep", "cr-equiv", "infsup")
DEFAULT_TAUS = (10.0, 20.0, 40.0, 80.0, 160.0, 320.0)


@dataclass
class RunConfig:
    experiment: str = "conv"
    k: int = 0
    tau: float | None = None
    levels: int = 4
    base_n: int = 4
    quad_boost: int = 4
    out: Path | None = None
    mesh: Path | None = None
    solver: str = "full"
    taus: tuple[float, ...] = DEFAULT_TAUS
    sweep_n: int = 8
    fit_window: int = 4
    equiv_meshes: tuple[int, ...] = (2, 4, 8)
    equiv_taus: tuple[float, ...] = (10.0, 100.0, 1000.0)
    infsup_guard: int = 3000

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.k not in (0, 1, 2):
            raise ValueError("k must be 0, 1 or 2")
        if self.tau is None:
            self.tau = default_tau(self.k)
        SpaceSpec(self.k, self.tau, self.quad_boost)  # validates tau and quad_boost
        if self.levels < 1 or self.base_n < 1:
            raise ValueError("levels and base_n must be positive")
        if self.solver not in ("full", "condensed"):
            raise ValueError("solver must be 'full' or 'condensed'")

    def spec(self, tau: float | None = None, k: int | None = None) -> SpaceSpec:
        return SpaceSpec(self.k if k is None else k, self.tau if tau is None else tau, self.quad_boost)


def fmt_err(x: float | None) -> str:
    return "" if x is None else f"{x:.3E}"


def fmt_order(x: float | None) -> str:
    if x is None:
        return "--"
    return "nan" if math.isnan(x) else f"{x:.2f}"


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def mesh_levels(cfg: RunConfig) -> list[Mesh]:
    if cfg.mesh is not None:
        meshes = [read_mesh(cfg.mesh)]
        for _ in range(cfg.levels - 1):
            meshes.append(uniform_refine(meshes[-1]))
        return meshes
    return [structured_unit_square(cfg.base_n * 2**level) for level in range(cfg.levels)]


def solve_hdg(mesh: Mesh, spec: SpaceSpec, exact: ExactSolution, solver: str = "full") -> tuple[HdgSolution, float]:
    """Solve the manufactured problem and return the solution with its scaled divergence residual."""
    sys = assemble(mesh, spec, exact.f)
    sol = solve_condensed(condense(sys)) if solver == "condensed" else solve_full(sys)
    div = divergence_residual(sol, sys.forms)
    return sol, div / sys.f_norm if sys.f_norm > 0 else div


@dataclass
class ConvergenceResult:
    table: EocTable
    csv: str
    divergence_residuals: list[float] = field(default_factory=list)
    solve_residuals: list[float] = field(default_factory=list)


def run_convergence(cfg: RunConfig, exact: ExactSolution | None = None) -> ConvergenceResult:
    exact = exact or trigonometric_solution()
    spec = cfg.spec()
    reports, divs, res = [], [], []
    for mesh in mesh_levels(cfg):
        sol, div = solve_hdg(mesh, spec, exact, cfg.solver)
        reports.append(compute_errors(sol, exact, cfg.quad_boost))
        divs.append(div)
        res.append(sol.report.relative_residual)
        log.info("k=%d h=%.4f solved (residual %.1e)", spec.k, mesh.h, sol.report.relative_residual)
    if len(reports) > 1:
        table = eoc(reports)
    else:
        table = EocTable(reports, {c: [None] for c in ("l2_u", "h1_u", "h2_weighted", "jump", "energy", "l2_p")})
    header = ["k", "h", "l2_u", "l2_u_order", "h1_u", "h1_u_order", "l2_p", "l2_p_order"]
    rows = []
    for i, r in enumerate(table.reports):
        o = {c: table.orders[c][i] for c in ("l2_u", "h1_u", "l2_p")}
        rows.append([spec.k, f"{r.h:.4f}", fmt_err(r.l2_u), fmt_order(o["l2_u"]), fmt_err(r.h1_u),
                     fmt_order(o["h1_u"]), fmt_err(r.l2_p), fmt_order(o["l2_p"])])
    return ConvergenceResult(table, to_csv(header, rows), divs, res)


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.any(y <= 0):
        return float("nan")
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class TauSweepResult:
    taus: list[float]
    jump: list[float]
    diff_h1: list[float | None]
    diff_p: list[float | None]
    cauchy: list[float]
    slopes: dict[str, float]
    csv: str
    divergence_residuals: list[float] = field(default_factory=list)


def run_tau_sweep(cfg: RunConfig, exact: ExactSolution | None = None) -> TauSweepResult:
    """Solve on a fixed mesh over a geometric tau grid.

    The Cauchy difference at tau compares with the solution at 2 tau, so one
    extra solve at twice the largest tau is made.
    """
    exact = exact or trigonometric_solution()
    mesh = read_mesh(cfg.mesh) if cfg.mesh is not None else structured_unit_square(cfg.sweep_n)
    taus = sorted(cfg.taus)
    sols, divs = {}, []
    for tau in taus + [2 * taus[-1]]:
        sols[tau], div = solve_hdg(mesh, cfg.spec(tau), exact, cfg.solver)
        divs.append(div)
    cr = solve_cr(mesh, exact.f, load_degree=cfg.spec().load_degree) if cfg.k == 0 else None

    jump, dh1, dp, cauchy = [], [], [], []
    for tau in taus:
        s = sols[tau]
        jump.append(jump_seminorm(s))
        if cr is not None:
            a, b = hdg_cr_differences(s, cr)
            dh1.append(a)
            dp.append(b)
        else:
            dh1.append(None)
            dp.append(None)
        cauchy.append(broken_h1_seminorm(mesh, cfg.k, s.u_coeffs - sols[2 * tau].u_coeffs))

    w = slice(len(taus) - cfg.fit_window, None)
    slopes = {"jump": loglog_slope(taus[w], jump[w]), "cauchy_diff": loglog_slope(taus[w], cauchy[w])}
    if cr is not None:
        slopes["diff_to_cr_h1"] = loglog_slope(taus[w], dh1[w])
        slopes["diff_to_cr_p"] = loglog_slope(taus[w], dp[w])

    header = ["tau", "jump", "diff_to_cr_h1", "diff_to_cr_p", "cauchy_diff"]
    rows = [[f"{t:g}", fmt_err(j), fmt_err(a), fmt_err(b), fmt_err(c)]
            for t, j, a, b, c in zip(taus, jump, dh1, dp, cauchy)]
    rows.append(["slope"] + [fmt_order(slopes[c]) if c in slopes else "" for c in header[1:]])
    return TauSweepResult(taus, jump, dh1, dp, cauchy, slopes, to_csv(header, rows), divs)


@dataclass
class EquivalenceResult:
    rows: list[tuple[int, float, float, float]]
    csv: str
    divergence_residuals: list[float] = field(default_factory=list)

    @property
    def max_velocity(self) -> float:
        return max(r[2] for r in self.rows)

    @property
    def max_pressure(self) -> float:
        return max(r[3] for r in self.rows)


def run_cr_equiv(cfg: RunConfig, exact: ExactSolution | None = None) -> EquivalenceResult:
    exact = exact or trigonometric_solution()
    rows, divs = [], []
    for n in cfg.equiv_meshes:
        mesh = structured_unit_square(n)
        cr = solve_cr(mesh, exact.f, load_degree=cfg.spec(k=0).load_degree)
        for tau in cfg.equiv_taus:
            sol, div = solve_hdg(mesh, cfg.spec(tau, k=0), exact, cfg.solver)
            d = compare_with_hdg(sol, cr)
            rows.append((n, tau, d.midpoint_velocity, d.pressure))
            divs.append(div)
    header = ["mesh", "tau", "midpoint_disc", "pressure_disc"]
    text = to_csv(header, [[f"structured({n})", f"{t:g}", fmt_err(a), fmt_err(b)] for n, t, a, b in rows])
    return EquivalenceResult(rows, text, divs)


@dataclass
class InfSupResult:
    ns: list[int]
    hs: list[float]
    betas: list[float]
    skipped: list[int]
    csv: str

    @property
    def ratio(self) -> float:
        return min(self.betas) / max(self.betas)

    @property
    def flagged(self) -> bool:
        return self.ratio < 0.8


def run_infsup(cfg: RunConfig) -> InfSupResult:
    spec = cfg.spec()
    ns, hs, betas, skipped = [], [], [], []
    for level in range(cfg.levels):
        n = cfg.base_n * 2**level
        mesh = structured_unit_square(n)
        try:
            beta = infsup_estimate(mesh, spec, cfg.infsup_guard)
        except DimensionGuardError as exc:
            log.info("skipping structured(%d): %s", n, exc)
            skipped.append(n)
            continue
        ns.append(n)
        hs.append(mesh.h)
        betas.append(beta)
    if not betas:
        raise DimensionGuardError("every level exceeds the dimension guard")
    rows = [[n, f"{h:.4f}", f"{b:.6f}"] for n, h, b in zip(ns, hs, betas)]
    ratio = min(betas) / max(betas)
    rows.append(["min/max", "", f"{ratio:.6f}"])
    return InfSupResult(ns, hs, betas, skipped, to_csv(["n", "h", "beta"], rows))


PLOT_TEMPLATES = {
    "conv": '''import csv
import matplotlib.pyplot as plt

rows = list(csv.DictReader(open({csv!r})))
h = [float(r["h"]) for r in rows]
fig, axes = plt.subplots(1, 3, figsize=(12, 4))
for ax, col, title in zip(axes, ("l2_u", "h1_u", "l2_p"), ("L2 error of u", "H1 error of u", "L2 error of p")):
    ax.loglog(h, [float(r[col]) for r in rows], "o-")
    ax.set_xlabel("h")
    ax.set_title(title)
fig.tight_layout()
fig.savefig({png!r})
''',
    "tau-sweep": '''import csv
import matplotlib.pyplot as plt

rows = [r for r in csv.DictReader(open({csv!r})) if r["tau"] != "slope"]
tau = [float(r["tau"]) for r in rows]
for col in ("jump", "diff_to_cr_h1", "diff_to_cr_p", "cauchy_diff"):
    vals = [float(r[col]) for r in rows if r[col]]
    if len(vals) == len(tau):
        plt.loglog(tau, vals, "o-", label=col)
plt.xlabel("tau")
plt.legend()
plt.savefig({png!r})
''',
}


def write_outputs(cfg: RunConfig, text: str) -> Path | None:
    """Write the CSV and, where a plot makes sense, a companion matplotlib script."""
    if cfg.out is None:
        return None
    out = Path(cfg.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    template = PLOT_TEMPLATES.get(cfg.experiment)
    if template:
        script = out.with_name(out.stem + "_plot.py")
        script.write_text(template.format(csv=out.name, png=out.stem + ".png"))
    return out
