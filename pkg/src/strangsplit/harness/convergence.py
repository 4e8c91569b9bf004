"""
Convergence sweeps against an RK4 reference, error norms and report files.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError, NumericalFailure
from ..matfun import MatFunBackend
from ..multigrid import MultigridConfig
from ..schemes import SchemeConfig, Trajectory, canonical_scheme, integrate, rk4_reference
from .problems import ProblemSpec

log = logging.getLogger(__name__)

CSV_HEADER = ("scheme", "tau", "error", "diffusion_flows", "reaction_flows", "status")


def error_norm(traj: Trajectory, ref: Trajectory, grid) -> float:
    """``max_t ||u(t) - u_ref(t)||_{L2}`` over the trajectory's times, trapezoidal in space.

    ``ref`` may be stored on a finer (aligned) time grid.
    """
    weights = grid.trapezoid_weights()
    ref_times = np.asarray(ref.times)
    worst = 0.0
    for t, u in zip(traj.times, traj.states):
        j = int(np.argmin(np.abs(ref_times - t)))
        if abs(ref_times[j] - t) > 1e-9 * max(1.0, abs(t)):
            raise ConfigError(f"reference has no state at t = {t:.12g}")
        diff = np.asarray(u) - np.asarray(ref.states[j])
        worst = max(worst, math.sqrt(float(np.sum(weights * diff * diff))))
    return worst


@dataclass
class Row:
    scheme: str
    tau: float
    error: float
    diffusion_flows: int
    reaction_flows: int
    status: str = "ok"
    message: str = ""

    @property
    def total_flows(self) -> int:
        return self.diffusion_flows + self.reaction_flows


@dataclass
class ConvergenceReport:
    rows: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    trajectories: dict = field(default_factory=dict)   # (scheme, tau) -> Trajectory, when kept

    def for_scheme(self, scheme: str) -> list:
        return [r for r in self.rows if r.scheme == scheme]

    def error(self, scheme: str, tau: float) -> float:
        for r in self.rows:
            if r.scheme == scheme and math.isclose(r.tau, tau, rel_tol=1e-12):
                return r.error
        raise KeyError((scheme, tau))

    @property
    def failed(self) -> list:
        return [r for r in self.rows if r.status != "ok"]


def fit_slope(taus, errors) -> float:
    """Least-squares slope of log(error) against log(tau)."""
    taus, errors = np.asarray(taus, dtype=float), np.asarray(errors, dtype=float)
    keep = np.isfinite(errors) & (errors > 0)
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(taus[keep]), np.log(errors[keep]), 1)
    return float(slope)


@dataclass
class SweepConfig:
    taus: list | None = None
    tau_ref: float | None = None
    backend: MatFunBackend = field(default_factory=MatFunBackend)
    reaction_substeps: int = 5
    smoother: MultigridConfig | None = None
    m3_extension: str | None = None        # force "harmonic" for problems with a closed form
    fused: bool | None = None
    ordering: str = "reaction"
    keep_trajectories: bool = False


def default_smoother(spec: ProblemSpec) -> MultigridConfig:
    # 1D V-cycles are cheap: iterate to tolerance; 2D keeps the fixed-cycle smoother
    return MultigridConfig(tol=1e-10) if spec.dim == 1 else MultigridConfig()


def run_convergence(spec: ProblemSpec, schemes, cfg: SweepConfig | None = None,
                    reference: Trajectory | None = None) -> ConvergenceReport:
    cfg = SweepConfig() if cfg is None else cfg
    schemes = [canonical_scheme(s) for s in schemes]
    if not schemes:
        raise ConfigError("no schemes requested")
    taus = sorted(spec.taus() if cfg.taus is None else cfg.taus, reverse=True)
    for tau in taus:
        ratio = spec.T / tau
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError(f"tau = {tau:g} does not divide T = {spec.T:g}")
    problem = spec.discretize()
    smoother = cfg.smoother or default_smoother(spec)
    tau_ref = cfg.tau_ref or spec.tau_ref
    if reference is None:
        start = time.perf_counter()
        reference = rk4_reference(problem, tau_ref, spec.T, min(taus))
        log.info("reference %s: %d steps in %.1f s", spec.label, round(spec.T / tau_ref),
                 time.perf_counter() - start)
    report = ConvergenceReport(metadata={
        "problem": spec.label, "dim": spec.dim, "n": spec.n, "T": spec.T, "tau_ref": tau_ref,
        "backend": cfg.backend.kind, "krylov_tol": cfg.backend.tol,
        "reaction_substeps": cfg.reaction_substeps,
        "multigrid": f"cycles={smoother.cycles},sweeps={smoother.pre_sweeps}/{smoother.post_sweeps},"
                     f"damping={smoother.damping:.6g},tol={smoother.tol}",
    })
    for scheme in schemes:
        rule = spec.corrector_rule(scheme, smoother, cfg.m3_extension)
        # finest first: coarser dense matrix functions then follow by doubling
        for tau in reversed(taus):
            sc = SchemeConfig(scheme, tau, spec.T, fused=cfg.fused if scheme in ("strang", "m5b") else None,
                              ordering=cfg.ordering if scheme == "strang" else "reaction",
                              reaction_substeps=cfg.reaction_substeps, backend=cfg.backend,
                              corrector=rule)
            start = time.perf_counter()
            try:
                traj = integrate(problem, sc)
                err = error_norm(traj, reference, problem.grid)
                status, message = ("ok", "") if np.isfinite(err) else ("failed", "non-finite error")
                counts = traj.counters
            except NumericalFailure as exc:
                traj, err, status, message = None, float("nan"), "failed", str(exc)
                counts = None
            row = Row(scheme, tau, err, counts.diffusion if counts else 0,
                      counts.reaction if counts else 0, status, message)
            report.rows.append(row)
            if cfg.keep_trajectories and traj is not None:
                report.trajectories[(scheme, tau)] = traj
            log.info("%s %-6s tau=%.4e error=%.4e flows=%d %s (%.1f s)", spec.label, scheme, tau,
                     err, row.total_flows, status, time.perf_counter() - start)
        report.rows.sort(key=lambda r: (schemes.index(r.scheme), -r.tau))
        ok = [r for r in report.for_scheme(scheme) if r.status == "ok"]
        report.slopes[scheme] = fit_slope([r.tau for r in ok], [r.error for r in ok])
    return report


def _fmt(x: float) -> str:
    return "nan" if not np.isfinite(x) else f"{x:.15e}"


def emit_report(report: ConvergenceReport, path, fmt: str = "csv") -> Path:
    if not report.rows:
        raise ConfigError("empty report")
    path = Path(path)
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for r in report.rows:
                writer.writerow([r.scheme, _fmt(r.tau), _fmt(r.error), r.diffusion_flows,
                                 r.reaction_flows, r.status])
    elif fmt == "plotdata":
        with open(path, "w", newline="\n") as fh:
            fh.write(plotdata(report))
    else:
        raise ConfigError(f"unknown report format {fmt!r}")
    return path


def guide_lines(report: ConvergenceReport) -> dict:
    """Order one and two guides through the largest error at the coarsest tau."""
    ok = [r for r in report.rows if r.status == "ok" and r.error > 0]
    if not ok:
        return {}
    taus = sorted({r.tau for r in report.rows}, reverse=True)
    coarse = max(r.tau for r in ok)
    anchor = max(r.error for r in ok if r.tau == coarse)
    return {p: [(t, anchor * (t / coarse) ** p) for t in taus] for p in (1, 2)}


def plotdata(report: ConvergenceReport) -> str:
    blocks = []
    for scheme in dict.fromkeys(r.scheme for r in report.rows):
        lines = [f"# scheme {scheme} slope {report.slopes.get(scheme, float('nan')):.6f}"]
        lines += [f"{_fmt(r.tau)} {_fmt(r.error)}" for r in report.for_scheme(scheme) if r.status == "ok"]
        blocks.append("\n".join(lines))
    for p, pts in guide_lines(report).items():
        lines = [f"# guide order {p}"] + [f"{_fmt(t)} {_fmt(e)}" for t, e in pts]
        blocks.append("\n".join(lines))
    return "\n\n\n".join(blocks) + "\n"


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        return [Row(r["scheme"], float(r["tau"]), float(r["error"]), int(r["diffusion_flows"]),
                    int(r["reaction_flows"]), r["status"]) for r in reader]


def read_plotdata(text: str) -> dict:
    """Parse :func:`plotdata` output back into ``{title: array of (tau, error)}``."""
    out = {}
    for block in text.strip().split("\n\n\n"):
        lines = block.strip().splitlines()
        title = lines[0].lstrip("# ").strip()
        out[title] = np.array([[float(v) for v in ln.split()] for ln in lines[1:]]).reshape(-1, 2)
    return out
