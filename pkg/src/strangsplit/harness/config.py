"""Plain ``key = value`` configuration files (``#`` starts a comment)."""
from __future__ import annotations

from pathlib import Path

from ..errors import ConfigError
from ..matfun import MatFunBackend
from ..multigrid import MultigridConfig
from .convergence import SweepConfig, default_smoother
from .problems import ProblemSpec, get_problem

# key -> converter
KEYS = {
    "problem": str, "m": float, "M": float, "scale": str, "n": int, "T": float,
    "schemes": lambda v: [s.strip() for s in v.split(",") if s.strip()],
    "scheme": str, "tau": float,
    "taus": lambda v: [float(s) for s in v.split(",") if s.strip()],
    "k_min": int, "k_max": int, "tau_base": float, "tau_ref": float,
    "backend": str, "krylov_dim": int, "krylov_tol": float, "dense_cap": int,
    "reaction_substeps": int, "fused": lambda v: _bool(v), "ordering": str,
    "m3_extension": str,
    "mg_cycles": int, "mg_pre": int, "mg_post": int, "mg_damping": float,
    "mg_tol": lambda v: None if v.lower() in ("none", "") else float(v),
    "out": str, "format": str, "plotdata": str,
}


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def parse(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            out[key] = KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return out


def load(path) -> dict:
    try:
        return parse(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None


def build_problem(opts: dict) -> ProblemSpec:
    spec = get_problem(opts.get("problem", "quadratic1d"), opts.get("m"), opts.get("M"),
                       opts.get("scale", "desk"), opts.get("n"))
    changes = {k: opts[k] for k in ("T", "tau_base", "tau_ref") if k in opts}
    if "k_min" in opts or "k_max" in opts:
        lo, hi = spec.k_range
        changes["k_range"] = (opts.get("k_min", lo), opts.get("k_max", hi))
    return spec.with_overrides(**changes) if changes else spec


def build_backend(opts: dict) -> MatFunBackend:
    kwargs = {}
    for key, name in (("backend", "kind"), ("krylov_dim", "krylov_dim"),
                      ("krylov_tol", "tol"), ("dense_cap", "dense_cap")):
        if key in opts:
            kwargs[name] = opts[key]
    return MatFunBackend(**kwargs)


def build_smoother(opts: dict, spec: ProblemSpec) -> MultigridConfig:
    base = default_smoother(spec)
    return MultigridConfig(
        cycles=opts.get("mg_cycles", base.cycles),
        pre_sweeps=opts.get("mg_pre", base.pre_sweeps),
        post_sweeps=opts.get("mg_post", base.post_sweeps),
        damping=opts.get("mg_damping", base.damping),
        tol=opts.get("mg_tol", base.tol),
    )


def build_sweep(opts: dict, spec: ProblemSpec) -> SweepConfig:
    return SweepConfig(
        taus=opts.get("taus"),
        tau_ref=opts.get("tau_ref"),
        backend=build_backend(opts),
        reaction_substeps=opts.get("reaction_substeps", 5),
        smoother=build_smoother(opts, spec),
        m3_extension=opts.get("m3_extension"),
        fused=opts.get("fused"),
        ordering=opts.get("ordering", "reaction"),
    )
