"""Scenario configs, presets and the runners behind the command line.

A run writes one or more CSV files plus ``manifest.json`` into
``output_path``.  CSV bodies depend only on the config (and its seed), so a
repeated run reproduces them byte for byte; the manifest additionally
records wall time and software versions.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import __version__
from .lattice import LatticeSpec, bloch_bands, bloch_matrix, build_hamiltonian
from .lindblad import ReservoirParams, phi_sweep, reservoir_current, steady_state
from .twa import ORDERINGS, SCHEMES, TwaParams, current_from_estimate, estimate_spdm, transient_populations

SCENARIOS = ("bands", "steady", "phi-sweep", "twa-sweep", "transient")
PRESETS = ("fig2", "fig3", "fig4")


class ConfigError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics if d.level == "error"))


@dataclass(frozen=True)
class Diagnostic:
    level: str  # "error" or "warning"
    field: str
    message: str

    def __str__(self):
        return f"{self.level}: {self.field}: {self.message}"


@dataclass
class TwaSettings:
    """Langevin settings of a scenario; lattice and reservoirs come from the config."""

    g: float | None = None
    dt: float = 0.01
    n_traj: int = 400
    burn_in: float = 200.0
    avg_window: float = 300.0
    seed: int = 0
    sample_every: int = 10
    ordering: str = "P"
    scheme: str = "split"
    batch_size: int = 64
    chunk_steps: int = 1000
    workers: int = 1

    def params(self, spec: LatticeSpec, r: ReservoirParams, g: float | None = None) -> TwaParams:
        kw = dataclasses.asdict(self)
        if g is not None:
            kw["g"] = g
        return TwaParams(spec=spec, reservoirs=r, **kw)


@dataclass
class ScenarioConfig:
    scenario: str
    lattice: LatticeSpec
    reservoirs: ReservoirParams = field(default_factory=ReservoirParams)
    twa: TwaSettings | None = None
    phi_grid: list[float] = field(default_factory=list)
    kappa_grid: list[float] = field(default_factory=list)
    M_grid: list[int] = field(default_factory=list)
    g_grid: list[float] = field(default_factory=list)
    t_final: float = 0.0
    stride: float = 1.0
    output_path: str = "out"
    preset: str | None = None
    defaulted: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ScenarioConfig":
        diags = validate(raw)
        if any(d.level == "error" for d in diags):
            raise ConfigError(diags)
        kw = dict(raw)
        kw["lattice"] = LatticeSpec(**raw["lattice"])
        kw["reservoirs"] = ReservoirParams(**raw.get("reservoirs", {}))
        kw["twa"] = TwaSettings(**raw["twa"]) if raw.get("twa") is not None else None
        for name in ("phi_grid", "kappa_grid", "g_grid", "defaulted"):
            kw[name] = list(raw.get(name, []))
        kw["M_grid"] = [int(m) for m in raw.get("M_grid", [])]
        return cls(**kw)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        return cls.from_dict(json.loads(text))

    @property
    def seed(self) -> int | None:
        return None if self.twa is None else self.twa.seed


def _field_names(cls) -> set[str]:
    return {f.name for f in dataclasses.fields(cls)}


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate(config: ScenarioConfig | Mapping[str, Any]) -> list[Diagnostic]:
    """Range and consistency checks; returns diagnostics, never raises."""
    raw = config.to_dict() if isinstance(config, ScenarioConfig) else config
    out: list[Diagnostic] = []

    def err(f, msg):
        out.append(Diagnostic("error", f, msg))

    def warn(f, msg):
        out.append(Diagnostic("warning", f, msg))

    if not isinstance(raw, Mapping):
        return [Diagnostic("error", "<root>", "config must be a JSON object")]
    for key in set(raw) - _field_names(ScenarioConfig):
        err(key, "unknown field")

    scenario = raw.get("scenario")
    if scenario not in SCENARIOS:
        err("scenario", f"must be one of {', '.join(SCENARIOS)}, got {scenario!r}")

    lat = raw.get("lattice")
    J = 1.0
    if not isinstance(lat, Mapping):
        err("lattice", "missing or not an object")
        lat = {}
    else:
        for key in set(lat) - _field_names(LatticeSpec):
            err(f"lattice.{key}", "unknown field")
        M = lat.get("M")
        if not (isinstance(M, int) and not isinstance(M, bool) and M >= 1):
            err("lattice.M", f"must be a positive integer, got {M!r}")
        J = lat.get("J", 1.0)
        if not (_is_number(J) and J > 0):
            err("lattice.J", f"must be positive, got {J!r}")
            J = 1.0
        if not _is_number(lat.get("phi", 0.0)):
            err("lattice.phi", "must be a finite number")
        U = lat.get("U", 0.0)
        if not (_is_number(U) and U >= 0):
            err("lattice.U", f"must be non-negative, got {U!r}")

    res = raw.get("reservoirs", {})
    gammas = []
    n_L = 1.0
    if not isinstance(res, Mapping):
        err("reservoirs", "not an object")
        res = {}
    for key in set(res) - _field_names(ReservoirParams):
        err(f"reservoirs.{key}", "unknown field")
    defaults = ReservoirParams()
    for name in ("gamma_L", "gamma_R"):
        v = res.get(name, getattr(defaults, name))
        if not (_is_number(v) and v > 0):
            err(f"reservoirs.{name}", f"must be positive, got {v!r}")
        else:
            gammas.append(v)
    for name in ("n_L", "n_R"):
        v = res.get(name, getattr(defaults, name))
        if not (_is_number(v) and v >= 0):
            err(f"reservoirs.{name}", f"must be non-negative, got {v!r}")
    nl, nr = res.get("n_L", defaults.n_L), res.get("n_R", defaults.n_R)
    if _is_number(nl) and _is_number(nr):
        n_L = nl
        if nl < nr:
            warn("reservoirs", "n_L < n_R: source and drain are reversed, the current is negative")

    twa = raw.get("twa")
    if scenario in ("twa-sweep", "transient") and twa is None:
        err("twa", f"scenario {scenario!r} needs TWA settings")
    if twa is not None:
        if not isinstance(twa, Mapping):
            err("twa", "not an object")
            twa = {}
        for key in set(twa) - _field_names(TwaSettings):
            err(f"twa.{key}", "unknown field")
        d = TwaSettings()
        dt = twa.get("dt", d.dt)
        if not (_is_number(dt) and dt > 0):
            err("twa.dt", f"must be positive, got {dt!r}")
        else:
            bound = 0.1 / max([J] + gammas)
            if dt > bound:
                warn("twa.dt", f"{dt:g} exceeds the stability bound 0.1/max(J, gamma) = {bound:g}")
        gs = [twa.get("g", d.g)] + list(raw.get("g_grid", []))
        for g in gs:
            if g is None:
                continue
            if not (_is_number(g) and g >= 0):
                err("twa.g", f"must be non-negative, got {g!r}")
            elif g > 0 and n_L == 0:
                err("twa.g", "g > 0 with n_L = 0: U = g / n_L is undefined")
        n_traj = twa.get("n_traj", d.n_traj)
        need = 2 if scenario == "twa-sweep" else 1
        if not (isinstance(n_traj, int) and n_traj >= need):
            err("twa.n_traj", f"must be an integer >= {need}, got {n_traj!r}")
        if not (_is_number(twa.get("burn_in", d.burn_in)) and twa.get("burn_in", d.burn_in) >= 0):
            err("twa.burn_in", "must be non-negative")
        if not (_is_number(twa.get("avg_window", d.avg_window)) and twa.get("avg_window", d.avg_window) > 0):
            err("twa.avg_window", "must be positive")
        seed = twa.get("seed", d.seed)
        if not (isinstance(seed, int) and 0 <= seed < 2**64):
            err("twa.seed", "must be an unsigned 64-bit integer")
        if twa.get("ordering", d.ordering) not in ORDERINGS:
            err("twa.ordering", f"must be one of {ORDERINGS}")
        scheme = twa.get("scheme", d.scheme)
        if scheme not in SCHEMES:
            err("twa.scheme", f"must be one of {SCHEMES}")
        elif scheme == "heun" and any(g for g in gs if _is_number(g)):
            warn("twa.scheme", "plain Heun is unstable for the interaction term; use 'split'")
        for name in ("sample_every", "batch_size", "chunk_steps", "workers"):
            v = twa.get(name, getattr(d, name))
            if not (isinstance(v, int) and v >= 1):
                err(f"twa.{name}", "must be an integer >= 1")

    for name in ("phi_grid", "kappa_grid", "g_grid"):
        grid = raw.get(name, [])
        if not isinstance(grid, list) or not all(_is_number(x) for x in grid):
            err(name, "must be a list of finite numbers")
    if not all(isinstance(m, int) and m >= 1 for m in raw.get("M_grid", []) or []):
        err("M_grid", "must be a list of positive integers")
    if scenario in ("bands", "phi-sweep", "twa-sweep") and not raw.get("phi_grid"):
        err("phi_grid", f"scenario {scenario!r} needs a non-empty phi_grid")
    if scenario == "bands" and not raw.get("kappa_grid"):
        err("kappa_grid", "scenario 'bands' needs a non-empty kappa_grid")
    if scenario == "transient":
        tf, st = raw.get("t_final", 0.0), raw.get("stride", 1.0)
        if not (_is_number(st) and st > 0 and _is_number(tf) and tf >= st):
            err("t_final", "transient needs stride > 0 and t_final >= stride")
    if not isinstance(raw.get("output_path", "out"), str) or not raw.get("output_path", "out"):
        err("output_path", "must be a non-empty path")
    return out


def kappa_grid(n: int) -> list[float]:
    """n quasimomenta uniformly covering [-pi, pi)."""
    return list(-np.pi + 2 * np.pi * np.arange(n) / n)


def preset(name: str, out: str | None = None, seed: int | None = None) -> ScenarioConfig:
    """Figure presets.  Parameters absent from the figure captions are listed in ``defaulted``."""
    if name == "fig2":
        cfg = ScenarioConfig(
            scenario="phi-sweep",
            lattice=LatticeSpec(M=2),
            reservoirs=ReservoirParams(0.4, 0.4, 1.0, 0.5),
            phi_grid=list(np.linspace(0.0, np.pi, 61)),
            M_grid=[2, 3, 4, 5, 6, 7],
            defaulted=["lattice.J", "reservoirs.n_L", "phi_grid"],
        )
    elif name == "fig3":
        cfg = ScenarioConfig(
            scenario="twa-sweep",
            lattice=LatticeSpec(M=5),
            reservoirs=ReservoirParams(0.4, 0.4, 1.0, 0.5),
            twa=TwaSettings(g=None, dt=0.02, n_traj=200, burn_in=1500.0, avg_window=1000.0),
            phi_grid=list(np.linspace(0.0, np.pi, 9)),
            g_grid=[0.0, 0.7, 2.0],
            defaulted=["lattice.J", "reservoirs.n_L", "phi_grid", "twa.dt", "twa.n_traj",
                       "twa.burn_in", "twa.avg_window", "twa.seed"],
        )
    elif name == "fig4":
        cfg = ScenarioConfig(
            scenario="transient",
            lattice=LatticeSpec(M=3, phi=float(np.pi)),
            reservoirs=ReservoirParams(0.4, 0.4, 1.0, 0.0),
            twa=TwaSettings(g=4.0, dt=0.02, n_traj=400),
            t_final=1000.0,
            stride=2.0,
            defaulted=["lattice.J", "reservoirs.n_L", "twa.dt", "twa.seed", "t_final", "stride"],
        )
    else:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    cfg.preset = name
    cfg.output_path = out or f"out/{name}"
    if seed is not None and cfg.twa is not None:
        cfg.twa.seed = seed
    return cfg


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return repr(float(x))


def _csv_text(columns: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


@dataclass
class Table:
    name: str
    columns: dict[str, str]  # column -> unit/description
    rows: list


def _scenario_bands(cfg: ScenarioConfig) -> tuple[list[Table], dict]:
    J = cfg.lattice.J
    rows = []
    for phi in cfg.phi_grid:
        for k in cfg.kappa_grid:
            e0, em, ep = bloch_bands(phi, k, J)
            ev = np.linalg.eigvalsh(bloch_matrix(phi, k, J))
            rows.append([phi, k, float(em), float(e0), float(ep), *ev])
    cols = {
        "phi": "rad", "kappa": "rad (per lattice cell)",
        "eps_minus": "J", "eps_zero": "J", "eps_plus": "J",
        "bloch_1": "J", "bloch_2": "J", "bloch_3": "J",
    }
    return [Table("bands", cols, rows)], {}


def _scenario_steady(cfg: ScenarioConfig) -> tuple[list[Table], dict]:
    H = build_hamiltonian(cfg.lattice)
    rho = steady_state(H, cfg.reservoirs)
    cur = reservoir_current(rho, cfg.reservoirs)
    L = cfg.lattice.L
    rows = [[l + 1, m + 1, rho[l, m].real, rho[l, m].imag] for l in range(L) for m in range(L)]
    spdm = Table("spdm", {"row": "site l (1-based)", "col": "site m (1-based)",
                          "re": "particles", "im": "particles"}, rows)
    current = Table(
        "current",
        {"M": "rhombs", "phi": "rad", "current": "particles per unit time (J units)",
         "normalized_current": "current / n_L", "current_per_bias": "current / (n_L - n_R)"},
        [[cfg.lattice.M, cfg.lattice.phi, cur.value, cur.normalized, cur.per_bias]],
    )
    return [spdm, current], {"current": cur.value, "normalized_current": cur.normalized}


def _scenario_phi_sweep(cfg: ScenarioConfig) -> tuple[list[Table], dict]:
    Ms = cfg.M_grid or [cfg.lattice.M]
    rows = []
    for M in Ms:
        for phi, rec in zip(cfg.phi_grid, phi_sweep(M, cfg.reservoirs, cfg.phi_grid, J=cfg.lattice.J)):
            rows.append([M, phi, rec.value, rec.normalized, rec.per_bias])
    cols = {"M": "rhombs", "phi": "rad", "current": "particles per unit time (J units)",
            "normalized_current": "current / n_L", "current_per_bias": "current / (n_L - n_R)"}
    return [Table("phi_sweep", cols, rows)], {}


def _scenario_twa_sweep(cfg: ScenarioConfig) -> tuple[list[Table], dict]:
    gs = cfg.g_grid or [cfg.twa.g if cfg.twa.g is not None else cfg.lattice.U * cfg.reservoirs.n_L]
    rows = []
    r = cfg.reservoirs
    for g in gs:
        for phi in cfg.phi_grid:
            spec = dataclasses.replace(cfg.lattice, phi=float(phi))
            est = estimate_spdm(cfg.twa.params(spec, r, g=g))
            cur = current_from_estimate(est, r, "time")
            snap = current_from_estimate(est, r, "snapshot")
            rows.append([spec.M, g, phi, cur.value, cur.normalized, cur.stderr, cur.stderr / r.n_L,
                         snap.value, snap.stderr])
    cols = {"M": "rhombs", "g": "J (g = U n_L)", "phi": "rad",
            "current": "particles per unit time (J units), time+ensemble average",
            "normalized_current": "current / n_L", "stderr": "standard error of current",
            "normalized_stderr": "stderr / n_L",
            "snapshot_current": "ensemble-only estimate at the end of the window",
            "snapshot_stderr": "standard error of snapshot_current"}
    return [Table("twa_sweep", cols, rows)], {}


def _scenario_transient(cfg: ScenarioConfig) -> tuple[list[Table], dict]:
    tp = transient_populations(cfg.twa.params(cfg.lattice, cfg.reservoirs), cfg.t_final, cfg.stride)
    labels = cfg.lattice.labels()
    rows = [[t, *m, *e] for t, m, e in zip(tp.times, tp.mean, tp.stderr)]
    cols = {"t": "1/J"}
    cols.update({lab: "particles" for lab in labels})
    cols.update({f"{lab}_stderr": "particles" for lab in labels})
    return [Table("transient", cols, rows)], {}


_RUNNERS = {
    "bands": _scenario_bands,
    "steady": _scenario_steady,
    "phi-sweep": _scenario_phi_sweep,
    "twa-sweep": _scenario_twa_sweep,
    "transient": _scenario_transient,
}


@dataclass
class RunResult:
    files: dict[str, Path]
    manifest: dict


def run(config: ScenarioConfig) -> RunResult:
    """Execute a scenario and write its CSV files and manifest."""
    diags = validate(config)
    if any(d.level == "error" for d in diags):
        raise ConfigError(diags)
    out = Path(config.output_path)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    tables, summary = _RUNNERS[config.scenario](config)
    wall = time.perf_counter() - t0

    files = {}
    outputs = {}
    for tab in tables:
        path = out / f"{tab.name}.csv"
        path.write_text(_csv_text(list(tab.columns), tab.rows))
        files[tab.name] = path
        outputs[path.name] = {"rows": len(tab.rows), "columns": tab.columns}
    manifest = {
        "tool": "rhombic-transport",
        "version": __version__,
        "scenario": config.scenario,
        "preset": config.preset,
        "seed": config.seed,
        "config": config.to_dict(),
        "defaulted": config.defaulted,
        "warnings": [str(d) for d in diags],
        "outputs": outputs,
        "summary": summary,
        "wall_time_s": wall,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    mpath = out / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    files["manifest"] = mpath
    return RunResult(files, manifest)
