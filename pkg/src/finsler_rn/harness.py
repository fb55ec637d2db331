"""Verification campaigns over the solution catalog and machine-readable reports.

A suite is described by one structured file (JSON, or YAML when the suffix is
``.yaml``/``.yml``).  Every key is optional::

    solution:
      profile: schwarzschild | schwarzschild_de_sitter | reissner_nordstrom | de_sitter
      base: finsler_sphere | riemann_sphere | hyperbolic | flat
      k: 1            # defaults to the base curvature
      GM: 1.0
      b: 0.0
      Q2_term: 0.0
      eps: 0.3        # Finslerian sphere parameter
    grid:
      n_points: 200
      r_range: [3.0, 8.0]
      theta_range: [0.35, 2.79]
      t_range: [-1.0, 1.0]
      horizon_margin: 1.0e-3
    checks: [ricci_flat, spray_oracle, ...]   # default depends on the profile
    negative: [const_flag]                    # checks expected to be nonzero
    flag_K: 0.05                              # curvature for const_flag
    killing_expected: 4
    tolerances: {ricci_flat: 1.0e-8, ...}
    spectral: {epsilons: [0.05, 0.1, 0.2], l_max: 16, m_max: 3}
    volume: {epsilons: [0.0, 0.3, 0.5, 0.7, 0.9], n_angles: 256}
    geodesic: {n: 10, span: 100.0, tol: 1.0e-10, r_range: null}
    seed: 0
    output: {path: null, format: json}

Reports carry ``schema_version``; each check record has the frozen keys
``name, n_points, max_residual, tolerance, verdict`` plus optional details.
"""

from __future__ import annotations

import copy
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import catalog, geometry, spectral, symmetry
from .errors import ConfigurationError, FinslerError
from .jets import EvalPoint

SCHEMA_VERSION = "1.0"
THREADS_ENV = "FINSLER_RN_THREADS"
SPECTRUM_COLUMNS = ("epsilon", "m", "l_label", "lambda_numeric", "lambda_perturbative", "abs_diff")
CHECK_COLUMNS = ("name", "n_points", "max_residual", "tolerance", "verdict")

DEFAULT_TOLERANCES = {
    "spray_oracle": 1e-8,
    "predecessor_oracle": 1e-8,
    "ricci_oracle": 1e-8,
    "ricci_flat": 1e-8,
    "constant_ricci": 1e-8,
    "rn_ricci": 1e-8,
    "scalar_S": 1e-8,
    "einstein_oracle": 1e-8,
    "riemannian_oracle": 1e-9,
    "const_flag": 1e-8,
    "killing_residual": 1e-10,
    "killing_rank": 0.5,
    "geodesic_drift": 1e-8,
    "volume_ht": 1e-10,
    "volume_bh": 1e-6,
    "spectrum_quartic": 0.25,
    "spectrum_flagged": 0.5,
    "spectrum_exact": 1e-12,
}

# threshold a negative check must exceed, unless overridden
NEGATIVE_TOLERANCES = {"const_flag": 1e-3}

_PROFILE_ALIASES = {
    "f_S": "schwarzschild",
    "f_Sd": "schwarzschild_de_sitter",
    "f_RN": "reissner_nordstrom",
    "f_d": "de_sitter",
}


def _interval(v, name):
    if v is None:
        return None
    if len(v) != 2 or not v[0] < v[1]:
        raise ConfigurationError(f"{name} must be an increasing pair, got {v!r}")
    return (float(v[0]), float(v[1]))


@dataclass
class SuiteConfig:
    """Validated suite description; see the module docstring for the schema."""

    solution: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    checks: list | None = None
    negative: list | None = None
    flag_K: float | None = None
    killing_expected: int | None = None
    tolerances: dict = field(default_factory=dict)
    spectral: dict = field(default_factory=dict)
    volume: dict = field(default_factory=dict)
    geodesic: dict = field(default_factory=dict)
    seed: int = 0
    output: dict = field(default_factory=dict)

    def __post_init__(self):
        sol = {"profile": "schwarzschild", "base": "finsler_sphere", "GM": None, "b": 0.0, "Q2_term": 0.0, "eps": 0.3}
        sol.update(self.solution)
        sol["profile"] = _PROFILE_ALIASES.get(sol["profile"], sol["profile"])
        if sol["profile"] not in catalog.PROFILE_KINDS or sol["profile"] == "custom":
            raise ConfigurationError(f"unknown solution profile {sol['profile']!r}")
        if sol["base"] not in catalog.BASE_KINDS:
            raise ConfigurationError(f"unknown base {sol['base']!r}")
        if sol["GM"] is None:
            sol["GM"] = 0.0 if sol["profile"] == "de_sitter" else 1.0
        if sol["base"] != "finsler_sphere":
            sol["eps"] = 0.0
        sol.setdefault("k", catalog.BASE_CURVATURE[sol["base"]])
        if not 0 <= sol["eps"] < 1:
            raise ConfigurationError(f"eps must lie in [0, 1), got {sol['eps']}")
        self.solution = sol

        grid = {"n_points": 200, "r_range": [3.0, 8.0], "theta_range": [0.35, math.pi - 0.35],
                "t_range": [-1.0, 1.0], "horizon_margin": 1e-3}
        grid.update(self.grid)
        if int(grid["n_points"]) < 1:
            raise ConfigurationError("grid.n_points must be positive")
        grid["n_points"] = int(grid["n_points"])
        for key in ("r_range", "theta_range", "t_range"):
            grid[key] = list(_interval(grid[key], f"grid.{key}"))
        self.grid = grid

        kind = sol["profile"]
        if self.checks is None:
            self.checks = _default_checks(kind, sol["base"])
        if self.negative is None:
            self.negative = ["const_flag"] if kind == "schwarzschild_de_sitter" else []
        unknown = [c for c in list(self.checks) + list(self.negative) if c not in _POINT_CHECKS and c != "killing_rank"]
        if unknown:
            raise ConfigurationError(f"unknown checks: {', '.join(unknown)}")
        if self.flag_K is None:
            self.flag_K = float(sol["b"])

        tol = dict(DEFAULT_TOLERANCES)
        for name in self.negative:
            tol[name] = NEGATIVE_TOLERANCES.get(name, tol[name])
        for name, value in self.tolerances.items():
            if name not in tol:
                raise ConfigurationError(f"tolerance for unknown check {name!r}")
            tol[name] = float(value)
        bad = [n for n, v in tol.items() if not v > 0]
        if bad:
            raise ConfigurationError(f"tolerances must be positive: {', '.join(bad)}")
        self.tolerances = tol

        spec = {"epsilons": [0.05, 0.1, 0.2], "l_max": 16, "m_max": 3}
        spec.update(self.spectral)
        spec["epsilons"] = [float(e) for e in spec["epsilons"]]
        if not spec["epsilons"] or any(not 0 <= e < 1 for e in spec["epsilons"]):
            raise ConfigurationError("spectral.epsilons must be a nonempty list in [0, 1)")
        self.spectral = spec

        vol = {"epsilons": [0.0, 0.3, 0.5, 0.7, 0.9], "n_angles": 256}
        vol.update(self.volume)
        if not vol["epsilons"] or any(not 0 <= e < 1 for e in vol["epsilons"]):
            raise ConfigurationError("volume.epsilons must be a nonempty list in [0, 1)")
        self.volume = vol

        geo = {"n": 10, "span": 100.0, "tol": 1e-10, "r_range": None}
        geo.update(self.geodesic)
        geo["r_range"] = _interval(geo["r_range"], "geodesic.r_range")
        if geo["r_range"] is not None:
            geo["r_range"] = list(geo["r_range"])
        if int(geo["n"]) < 1 or not geo["span"] > 0 or not geo["tol"] > 0:
            raise ConfigurationError("geodesic n, span and tol must be positive")
        self.geodesic = geo

        out = {"path": None, "format": "json"}
        out.update(self.output)
        if out["format"] not in ("json", "csv"):
            raise ConfigurationError(f"output.format must be json or csv, got {out['format']!r}")
        self.output = out
        self.seed = int(self.seed)

    @classmethod
    def from_mapping(cls, data: dict) -> "SuiteConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown configuration keys: {', '.join(sorted(extra))}")
        return cls(**copy.deepcopy(data))

    @classmethod
    def load(cls, path) -> "SuiteConfig":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from None
        try:
            if path.suffix in (".yaml", ".yml"):
                import yaml

                data = yaml.safe_load(text) or {}
            else:
                data = json.loads(text)
        except Exception as exc:
            raise ConfigurationError(f"cannot parse config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigurationError("config file must hold a mapping")
        return cls.from_mapping(data)

    def to_dict(self) -> dict:
        keys = self.__dataclass_fields__
        return {k: copy.deepcopy(getattr(self, k)) for k in keys}

    # -- derived objects ----------------------------------------------------

    def profile(self) -> catalog.RadialProfile:
        s = self.solution
        params = {n: s[n] for n in ("GM", "b", "Q2_term") if s[n]}
        return catalog.RadialProfile(s["profile"], int(s["k"]), **params)

    def base(self) -> catalog.TwoDBase:
        return catalog.TwoDBase(self.solution["base"], self.solution["eps"])

    def fundamental(self):
        return catalog.build_ansatz(self.profile(), self.base(), self.grid["horizon_margin"])

    def region(self) -> symmetry.ChartRegion:
        g = self.grid
        return symmetry.ChartRegion(tuple(g["t_range"]), tuple(g["r_range"]), tuple(g["theta_range"]))


def _default_checks(kind, base):
    common = ["spray_oracle", "killing_residual"]
    by_kind = {
        "schwarzschild": ["predecessor_oracle", "ricci_oracle", "ricci_flat", "einstein_oracle"],
        "schwarzschild_de_sitter": ["predecessor_oracle", "ricci_oracle", "constant_ricci", "const_flag"],
        "reissner_nordstrom": ["predecessor_oracle", "rn_ricci", "scalar_S", "einstein_oracle"],
        "de_sitter": ["predecessor_oracle", "ricci_oracle", "constant_ricci", "const_flag", "killing_rank"],
    }
    checks = common + by_kind[kind]
    if base == "riemann_sphere":
        checks.append("riemannian_oracle")
    return checks


# -- pointwise residuals -----------------------------------------------------


def _rel(a, b, floor: float = 0.0) -> float:
    """Max-norm difference relative to ``max(|b|, floor)``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = max(float(np.max(np.abs(b))), floor)
    return float(np.max(np.abs(a - b))) / (scale if scale > 0 else 1.0)


@dataclass
class _Context:
    config: SuiteConfig
    F: object
    profile: catalog.RadialProfile
    base: catalog.TwoDBase


def _spray_oracle(ctx, at):
    return _rel(geometry.spray(ctx.F, at), catalog.oracle_spray(ctx.profile, ctx.base, at))


def _predecessor_oracle(ctx, at):
    F2R = geometry.curvature_state(ctx.F, at).F2R
    ref = catalog.oracle_predecessor(ctx.profile, ctx.base, at)
    keys = sorted(ref)
    return _rel([F2R[k] for k in keys], [ref[k] for k in keys])


def _ricci_oracle(ctx, at):
    # Ric is scale-invariant in y and vanishes for vacuum solutions
    return _rel(geometry.ricci_scalar(ctx.F, at), catalog.oracle_ricci(ctx.profile, ctx.base, at), 1.0)


def _ricci_flat(ctx, at):
    return abs(geometry.ricci_scalar(ctx.F, at))


def _constant_ricci(ctx, at):
    return abs(geometry.ricci_scalar(ctx.F, at) - 3 * ctx.profile.b)


def _rn_ricci(ctx, at):
    state = geometry.curvature_state(ctx.F, at)
    return _rel(state.ric * state.L, catalog.oracle_rn_F2ricci(ctx.profile, ctx.base, at))


def _scalar_S(ctx, at):
    return abs(geometry.einstein_tensor(ctx.F, at).S)


def _einstein_oracle(ctx, at):
    return _rel(geometry.einstein_tensor(ctx.F, at).einstein, catalog.oracle_einstein(ctx.profile, ctx.base, at))


def _riemannian_oracle(ctx, at):
    oracle = catalog.RiemannianOracle(ctx.profile)
    state = geometry.einstein_tensor(ctx.F, at)
    x, y = list(at.x), np.asarray(at.y)
    return max(
        _rel(state.spray, oracle.spray(x, y)),
        _rel(state.F2R, oracle.F2R(x, y)),
        _rel(state.ric, oracle.ricci_scalar(x, y)),
        _rel(state.ric_tensor, oracle.ricci_tensor(x)),
        _rel(state.einstein, oracle.einstein(x)),
    )


def _const_flag(ctx, at):
    return geometry.flag_residual(ctx.F, at, ctx.config.flag_K)


def _killing_residual(ctx, at):
    fields = [symmetry.coordinate_field(4, 0)]
    if ctx.base.kind in ("finsler_sphere", "riemann_sphere"):
        fields.append(symmetry.coordinate_field(4, 3))
    return max(symmetry.killing_residual(ctx.F, V, at) for V in fields)


_POINT_CHECKS: dict[str, Callable] = {
    "spray_oracle": _spray_oracle,
    "predecessor_oracle": _predecessor_oracle,
    "ricci_oracle": _ricci_oracle,
    "ricci_flat": _ricci_flat,
    "constant_ricci": _constant_ricci,
    "rn_ricci": _rn_ricci,
    "scalar_S": _scalar_S,
    "einstein_oracle": _einstein_oracle,
    "riemannian_oracle": _riemannian_oracle,
    "const_flag": _const_flag,
    "killing_residual": _killing_residual,
}


# -- records and reports -----------------------------------------------------


def check_record(name, residuals, tolerance, negative=False, errors=(), **details) -> dict:
    """One check record.  A negative check passes when every residual exceeds ``tolerance``."""
    residuals = [float(r) for r in residuals]
    record = {
        "name": name,
        "n_points": len(residuals) + len(errors),
        "max_residual": max(residuals) if residuals else None,
        "tolerance": float(tolerance),
        "verdict": "error",
    }
    if negative:
        record["expect"] = "nonzero"
        record["min_residual"] = min(residuals) if residuals else None
    if errors:
        record["errors"] = list(errors)
    elif residuals:
        if negative:
            ok = record["min_residual"] > tolerance
        else:
            ok = record["max_residual"] <= tolerance
        record["verdict"] = "pass" if ok else "fail"
    record.update(details)
    return record


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer") from None


def _run_pointwise(ctx, name, points, negative):
    fn = _POINT_CHECKS[name]

    def one(at):
        try:
            return fn(ctx, at), None
        except (FinslerError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            return None, {"x": list(at.x), "y": list(at.y), "message": f"{type(exc).__name__}: {exc}"}

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(one, points))
    residuals = [r for r, e in results if e is None]
    errors = [e for _, e in results if e is not None]
    return check_record(name, residuals, ctx.config.tolerances[name], negative, errors)


def _killing_expected(config: SuiteConfig) -> int:
    if config.killing_expected is not None:
        return int(config.killing_expected)
    s = config.solution
    if s["profile"] == "de_sitter":
        return 4
    return 2 if s["eps"] > 0 else 4


def _killing_rank_record(config, F) -> dict:
    expected = _killing_expected(config)
    family = symmetry.CandidateFamily(4, config.region())
    try:
        result = symmetry.killing_rank(F, family, seed=config.seed)
    except (FinslerError, ValueError, np.linalg.LinAlgError) as exc:
        return check_record("killing_rank", [], config.tolerances["killing_rank"], errors=[{"message": str(exc)}])
    sv = result.singular_values
    null = sv[sv < symmetry.RANK_RTOL * sv[0]]
    live = sv[sv >= symmetry.RANK_RTOL * sv[0]]
    return check_record(
        "killing_rank",
        [abs(result.rank - expected)],
        config.tolerances["killing_rank"],
        rank=result.rank,
        expected=expected,
        n_equations=result.n_equations,
        n_unknowns=result.n_unknowns,
        spectral_gap=[float(live[-1] / sv[0]), float(null[0] / sv[0]) if null.size else None],
    )


def environment() -> dict:
    import scipy

    from importlib import metadata

    try:
        version = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        version = "unknown"
    return {
        "package_version": version,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
        "threads": _threads(),
    }


def _report(suite, config, checks, started, **extra) -> dict:
    verdicts = [c["verdict"] for c in checks]
    status = "pass" if all(v == "pass" for v in verdicts) else ("error" if "error" in verdicts else "fail")
    report = {
        "schema_version": SCHEMA_VERSION,
        "suite": suite,
        "status": status,
        "checks": checks,
    }
    report.update(extra)
    report["config"] = config.to_dict()
    report["environment"] = environment()
    report["wall_time_s"] = time.perf_counter() - started
    report["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return report


VOLATILE_KEYS = ("wall_time_s", "timestamp")


def payload_digest(report: dict) -> str:
    """SHA-256 of the report without its timing fields."""
    stable = {k: v for k, v in report.items() if k not in VOLATILE_KEYS}
    return hashlib.sha256(json.dumps(stable, sort_keys=True).encode()).hexdigest()


# -- suites ------------------------------------------------------------------


def run_verify(config: SuiteConfig) -> dict:
    """Run the configured pointwise checks over quasi-random admissible points.

    Domain errors at individual points are recorded in the check and turn its
    verdict into ``"error"``; the remaining checks still run.
    """
    started = time.perf_counter()
    F = config.fundamental()
    ctx = _Context(config, F, config.profile(), config.base())
    points = symmetry.sample_points(F, config.grid["n_points"], config.region(), config.seed)
    names = list(dict.fromkeys(list(config.checks) + list(config.negative)))
    records = []
    for name in names:
        if name == "killing_rank":
            records.append(_killing_rank_record(config, F))
        else:
            records.append(_run_pointwise(ctx, name, points, name in config.negative))
    return _report("verify", config, records, started, solution=F.label)


def run_killing(config: SuiteConfig) -> dict:
    """Killing residuals of the known symmetries and the Killing-space dimension."""
    started = time.perf_counter()
    F = config.fundamental()
    ctx = _Context(config, F, config.profile(), config.base())
    points = symmetry.sample_points(F, config.grid["n_points"], config.region(), config.seed)
    records = [_run_pointwise(ctx, "killing_residual", points, False), _killing_rank_record(config, F)]
    return _report("killing", config, records, started, solution=F.label)


def run_volume(config: SuiteConfig) -> dict:
    """Holmes-Thompson and Busemann-Hausdorff volumes of the Finslerian sphere."""
    started = time.perf_counter()
    rows = []
    ht_res, bh_res = [], []
    for eps in config.volume["epsilons"]:
        ht = spectral.ht_volume(eps)
        bh = spectral.bh_volume(eps, config.volume["n_angles"])
        ht_ref = 4 * math.pi / (1 - eps**2)
        ht_res.append(abs(ht - ht_ref) / ht_ref)
        bh_res.append(abs(bh - 4 * math.pi) / (4 * math.pi))
        rows.append({"epsilon": eps, "ht_volume": ht, "ht_closed_form": ht_ref, "bh_volume": bh})
    tol = config.tolerances
    records = [check_record("volume_ht", ht_res, tol["volume_ht"]), check_record("volume_bh", bh_res, tol["volume_bh"])]
    return _report("volume", config, records, started, rows=rows)


def _geodesic_radii(config, profile):
    radii = config.geodesic["r_range"]
    if radii is None:
        horizons = profile.horizons()
        outer = math.inf
        if profile.b > 0 and horizons:
            outer = horizons.pop()
        inner = max(horizons, default=0.0)
        lo = max(4 * inner, 1.0)
        radii = [lo, min(1.5 * lo, 0.4 * outer)]
    if not np.all(profile.f(np.linspace(radii[0], radii[1], 64)) > 0) or not radii[0] < radii[1]:
        raise ConfigurationError(f"f must be positive on the geodesic radii {radii}; set geodesic.r_range")
    return radii


def geodesic_initials(F, profile, base, n, rng, r_range, theta_spread=0.2) -> list[EvalPoint]:
    """Timelike (``L = -1``) states near circular orbits in the equatorial band.

    Where no circular orbit exists (``f' <= 0``) a small angular speed is used.
    States that would fall into a horizon are redrawn.
    """
    out = []
    while len(out) < n:
        r = rng.uniform(*r_range)
        th = math.pi / 2 + rng.uniform(-theta_spread, theta_spread)
        ph = rng.uniform(0, 2 * math.pi)
        f, df = profile.f(r), profile.df(r)
        w2 = r * df / (2 * f - r * df) if 0 < r * df < 2 * f else 0.01
        speed = math.sqrt(w2) / r
        sign = rng.choice([-1.0, 1.0])
        unit = math.sqrt(base.Lbar(th, ph, 0.0, sign))
        y = [0.0, rng.uniform(-0.01, 0.01) * speed * r, rng.uniform(-0.05, 0.05) * speed,
             sign * speed * rng.uniform(0.95, 1.05) / unit]
        y[0] = math.sqrt((1 + F([0.0, r, th, ph], y)) / f)
        at = EvalPoint([0.0, r, th, ph], y)
        K = r**4 * base.Lbar(th, ph, y[2], y[3])
        if F.admissible(at) and _is_bound(profile, r, (f * y[0]) ** 2, K):
            out.append(at)
    return out


def _is_bound(profile, r, E2, K, n=4000) -> bool:
    """True when ``V = f (1 + K / r^2)`` rises above ``E^2`` somewhere inside ``r``.

    ``E = f y^t`` and ``K = r^4 Lbar`` are conserved, so such an orbit never
    falls through the horizon below it.  Outward escape is allowed.
    """
    lo = max((h for h in profile.horizons() if h < r), default=1e-3 * r)
    x = np.linspace(lo, r, n)[1:-1]
    return bool((profile.f(x) * (1 + K / x**2)).max() > E2)


def run_geodesic(config: SuiteConfig) -> dict:
    """Relative drift of ``L`` along random timelike geodesics."""
    started = time.perf_counter()
    F = config.fundamental()
    profile, base = config.profile(), config.base()
    geo = config.geodesic
    rng = np.random.default_rng(config.seed)
    radii = _geodesic_radii(config, profile)
    initials = geodesic_initials(F, profile, base, int(geo["n"]), rng, radii)
    tol = config.tolerances["geodesic_drift"]
    try:
        trajs = geometry.integrate_geodesics(F, initials, float(geo["span"]), float(geo["tol"]))
    except FinslerError as exc:
        record = check_record("geodesic_drift", [], tol, errors=[{"message": str(exc)}])
        return _report("geodesic", config, [record], started, solution=F.label)
    rows = [
        {"x0": list(p.x), "y0": list(p.y), "drift": t.drift, "r_min": float(t.x[:, 1].min()),
         "r_max": float(t.x[:, 1].max()), "steps": int(t.tau.size)}
        for p, t in zip(initials, trajs)
    ]
    record = check_record("geodesic_drift", [r["drift"] for r in rows], tol, r_range=radii)
    return _report("geodesic", config, [record], started, solution=F.label, rows=rows)


def spectrum_rows(eps: float, m: int, l_max: int) -> tuple[list[dict], int]:
    """CSV rows for one block and the number of flagged eigenvalues."""
    block = spectral.assemble_block(eps, m, l_max)
    rows, flagged = [], 0
    for pair in spectral.eigen_solve(block):
        pert = spectral.perturbative_eigenvalue(pair.l, m, eps)
        flagged += pair.flagged
        rows.append({
            "epsilon": eps,
            "m": m,
            "l_label": pair.l,
            "lambda_numeric": pair.value,
            "lambda_perturbative": pert,
            "abs_diff": abs(pair.value - pert),
            "converged": bool(pair.converged),
        })
    return rows, flagged


def run_spectrum(config: SuiteConfig) -> dict:
    """Galerkin spectra against the second-order formula, with a quartic-scaling summary."""
    started = time.perf_counter()
    spec = config.spectral
    epsilons = sorted(set(spec["epsilons"]))
    rows, flagged = [], 0
    for eps in epsilons:
        for m in range(int(spec["m_max"]) + 1):
            block_rows, n_flag = spectrum_rows(eps, m, int(spec["l_max"]))
            rows.extend(block_rows)
            flagged += n_flag
    summary = []
    for eps in epsilons:
        diffs = [r["abs_diff"] for r in rows if r["epsilon"] == eps]
        worst = max(diffs)
        summary.append({"epsilon": eps, "max_abs_diff": worst, "C_fit": worst / eps**4 if eps > 0 else None})
    ratios = []
    positive = [s for s in summary if s["epsilon"] > 0]
    for small, big in zip(positive, positive[1:]):
        observed = big["max_abs_diff"] / small["max_abs_diff"]
        expected = (big["epsilon"] / small["epsilon"]) ** 4
        ratios.append({"epsilons": [small["epsilon"], big["epsilon"]], "observed": observed,
                       "quartic": expected, "normalized": observed / expected})
    tol = config.tolerances
    records = [check_record("spectrum_flagged", [flagged], tol["spectrum_flagged"])]
    if ratios:
        records.append(check_record("spectrum_quartic", [abs(r["normalized"] - 1) for r in ratios], tol["spectrum_quartic"]))
    exact = [s["max_abs_diff"] for s in summary if s["epsilon"] == 0]
    if exact:
        records.append(check_record("spectrum_exact", exact, tol["spectrum_exact"]))
    return _report("spectrum", config, records, started, summary=summary, ratios=ratios, rows=rows)


SUITES = {
    "verify": run_verify,
    "spectrum": run_spectrum,
    "killing": run_killing,
    "volume": run_volume,
    "geodesic": run_geodesic,
}


# -- output ------------------------------------------------------------------


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def render(report: dict, fmt: str = "json") -> str:
    """Serialise a report.  CSV holds spectrum rows or one line per check."""
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"
    buf = io.StringIO()
    if report["suite"] == "spectrum":
        columns, rows = SPECTRUM_COLUMNS, report["rows"]
    else:
        columns, rows = CHECK_COLUMNS, report["checks"]
    writer = csv.DictWriter(buf, fieldnames=columns, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def exit_code(report: dict) -> int:
    return 0 if report["status"] == "pass" else 1


def summary_lines(report: dict) -> list[str]:
    lines = []
    for c in report["checks"]:
        res = c["max_residual"]
        res = "n/a" if res is None else f"{res:.3e}"
        lines.append(f"{c['verdict'].upper():5s} {c['name']:20s} n={c['n_points']:<4d} max={res} tol={c['tolerance']:.1e}")
    for s in report.get("summary", []):
        c_fit = "n/a" if s["C_fit"] is None else f"{s['C_fit']:.4g}"
        lines.append(f"      eps={s['epsilon']:<6g} max|diff|={s['max_abs_diff']:.3e} C={c_fit}")
    for r in report.get("ratios", []):
        lines.append(f"      ratio {r['epsilons'][1]:g}/{r['epsilons'][0]:g}: {r['observed']:.3f} (quartic {r['quartic']:.3f})")
    lines.append(f"status: {report['status']}")
    return lines


def _parse_tol(items):
    out = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"--tol expects NAME=VAL, got {item!r}")
        try:
            out[name] = float(value)
        except ValueError:
            raise ConfigurationError(f"--tol value for {name} is not a number: {value!r}") from None
    return out


def build_parser():
    import argparse

    parser = argparse.ArgumentParser(
        prog="finsler-rn",
        description="Verification campaigns for Finslerian static black-hole solutions.",
        epilog=f"Set {THREADS_ENV} to run pointwise checks on several threads.",
    )
    parser.add_argument("suite", choices=sorted(SUITES), help="which campaign to run")
    parser.add_argument("--config", type=Path, help="suite file (JSON, or YAML by suffix)")
    parser.add_argument("--out", type=Path, help="write the report here instead of stdout")
    parser.add_argument("--format", choices=("json", "csv"), help="report format (default json)")
    parser.add_argument("--seed", type=int, help="seed for quasi-random sampling")
    parser.add_argument("--epsilon", type=float, help="Finslerian sphere parameter; also the only spectral/volume epsilon")
    parser.add_argument("--lmax", type=int, help="spectral truncation degree")
    parser.add_argument("--tol", action="append", metavar="NAME=VAL", help="override one tolerance (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = SuiteConfig.load(args.config) if args.config else SuiteConfig()
        data = config.to_dict()
        if args.seed is not None:
            data["seed"] = args.seed
        if args.epsilon is not None:
            data["solution"]["eps"] = args.epsilon
            data["spectral"]["epsilons"] = [args.epsilon]
            data["volume"]["epsilons"] = [args.epsilon]
        if args.lmax is not None:
            data["spectral"]["l_max"] = args.lmax
        data["tolerances"] = {**config.tolerances, **_parse_tol(args.tol)}
        if args.format:
            data["output"]["format"] = args.format
        if args.out:
            data["output"]["path"] = str(args.out)
        config = SuiteConfig.from_mapping(data)
        report = SUITES[args.suite](config)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    text = render(report, config.output["format"])
    if config.output["path"]:
        Path(config.output["path"]).write_text(text)
        for line in summary_lines(report):
            print(line)
    else:
        sys.stdout.write(text)
    return exit_code(report)
