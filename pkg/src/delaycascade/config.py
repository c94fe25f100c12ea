"""Run configuration: sectioned ``key = value`` text with bracketed lists.

Exactly one system section is allowed: ``[model]`` (generic cascade), ``[hes1]``
(raw Hes1 parameters, rescaled on use) or ``[cooke]`` (scalar vector-disease
model, integrated through the generic right-hand-side hook).
"""

from __future__ import annotations

import configparser
import json
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .kernels import DelayKernel, Dirac, Tabulated, Uniform
from .model import Affine, CascadeSpec, Hes1RawParams, Hill, TabulatedFeedback, hes1_spec, rescale_hes1

SYSTEM_SECTIONS = ("model", "hes1", "cooke")


class ConfigError(ValueError):
    def __init__(self, where: str, message: str):
        self.where = where
        super().__init__(f"{where}: {message}")


# ---------------------------------------------------------------- value parsing


def _number(raw: str, where: str) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise ConfigError(where, f"expected a number, got {raw!r}") from None
    if not math.isfinite(val):
        raise ConfigError(where, "must be finite")
    return val


def _integer(raw: str, where: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(where, f"expected an integer, got {raw!r}") from None


def _number_list(raw: str, where: str) -> tuple[float, ...]:
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        raise ConfigError(where, f"expected a bracketed list, got {raw!r}") from None
    if not isinstance(val, list):
        raise ConfigError(where, f"expected a bracketed list, got {raw!r}")
    out = []
    for i, v in enumerate(val):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{where}[{i}]", f"expected a finite number, got {v!r}")
        out.append(float(v))
    return tuple(out)


def _positive(val: float, where: str) -> float:
    if not val > 0:
        raise ConfigError(where, f"must be positive, got {val!r}")
    return val


def _positive_list(vals, where: str):
    for i, v in enumerate(vals):
        _positive(v, f"{where}[{i}]")
    return vals


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _Section:
    def __init__(self, cp: configparser.ConfigParser, name: str, allowed: set[str]):
        self.name = name
        self.items = dict(cp.items(name)) if cp.has_section(name) else {}
        for key in self.items:
            if key not in allowed:
                raise ConfigError(f"{name}.{key}", "unknown key")
        self.used: set[str] = set()

    def where(self, key: str) -> str:
        return f"{self.name}.{key}"

    def get(self, key: str, conv, default=None, required=False):
        if key not in self.items:
            if required:
                raise ConfigError(self.where(key), "missing required key")
            return default
        return conv(self.items[key], self.where(key))


# ---------------------------------------------------------------- sections


@dataclass(frozen=True)
class ModelSection:
    k: int
    mu: tuple[float, ...]
    alpha: tuple[float, ...]
    feedback: str
    hill_mu: float | None = None
    hill_b: float | None = None
    hill_h: float | None = None
    affine_slope: float | None = None
    affine_intercept: float | None = None
    table_file: str | None = None

    KEYS = {"k", "mu", "alpha", "feedback", "hill.mu", "hill.b", "hill.h", "affine.slope",
            "affine.intercept", "table.file"}

    def feedback_fn(self):
        if self.feedback == "hill":
            return Hill(self.hill_mu, self.hill_b, self.hill_h)
        if self.feedback == "affine":
            return Affine(self.affine_slope, self.affine_intercept, (0.0, math.inf))
        xs, ys = _read_two_columns(self.table_file, "model.table.file")
        return TabulatedFeedback(xs, ys)

    def items(self):
        out = {"k": self.k, "mu": self.mu, "alpha": self.alpha, "feedback": self.feedback}
        if self.feedback == "hill":
            out.update({"hill.mu": self.hill_mu, "hill.b": self.hill_b, "hill.h": self.hill_h})
        elif self.feedback == "affine":
            out.update({"affine.slope": self.affine_slope, "affine.intercept": self.affine_intercept})
        else:
            out["table.file"] = self.table_file
        return out


@dataclass(frozen=True)
class CookeSection:
    """``x'(t) = b x(t-τ)(1 - x(t)) - c x(t)``."""

    b: float
    c: float
    tau: float

    KEYS = {"b", "c", "tau"}

    def rhs(self):
        b, c = self.b, self.c

        def cooke_rhs(x, x_tau):
            return b * x_tau * (1.0 - x) - c * x

        return cooke_rhs

    def items(self):
        return {"b": self.b, "c": self.c, "tau": self.tau}


@dataclass(frozen=True)
class KernelEntry:
    kind: str
    at: float | None = None
    a: float | None = None
    b: float | None = None
    file: str | None = None

    def build(self, tau: float, where: str) -> DelayKernel:
        try:
            if self.kind == "dirac":
                return Dirac(self.at, tau)
            if self.kind == "uniform":
                return Uniform(self.a, self.b, tau)
            nodes, dens = _read_two_columns(self.file, where)
            return Tabulated(nodes, dens, tau, source=self.file)
        except (TypeError, ValueError) as exc:
            raise ConfigError(where, str(exc)) from None


@dataclass(frozen=True)
class DelaysSection:
    tau: float
    kernels: tuple[tuple[int, KernelEntry], ...]

    def kernel_for(self, j: int) -> DelayKernel:
        for idx, entry in self.kernels:
            if idx == j:
                return entry.build(self.tau, f"delays.{_kernel_key(j)}")
        return Dirac(0.0, self.tau)

    def items(self):
        out: dict[str, Any] = {"tau": self.tau}
        for j, e in self.kernels:
            key = _kernel_key(j)
            out[key] = e.kind
            for attr in ("at", "a", "b", "file"):
                val = getattr(e, attr)
                if val is not None:
                    out[f"{key}.{attr}"] = val
        return out


def _kernel_key(j: int) -> str:
    return "kernel" if j == 1 else f"kernel{j}"


@dataclass(frozen=True)
class SimulationSection:
    t_end: float = 200.0
    step: float = 0.01
    tol: float = 1e-6
    window: float | None = None
    seed: int = 0
    mc_runs: int = 100
    bounds: tuple[float, ...] | None = None
    phi: tuple[float, ...] | None = None
    nodes: int = 11

    KEYS = {"t_end", "step", "tol", "window", "seed", "mc_runs", "bounds", "phi", "nodes"}


@dataclass(frozen=True)
class AnalysisSection:
    m_max: int = 200
    samples_per_face: int = 64
    majorant_grid: int = 4096
    radius_bound: float = 1e-8
    slope_slack: float = 1e-6
    k_radius: tuple[float, ...] | None = None
    cone_upper: float = 50.0

    KEYS = {"m_max", "samples_per_face", "majorant_grid", "radius_bound", "slope_slack", "k_radius",
            "cone_upper"}


@dataclass(frozen=True)
class OutputSection:
    dir: str | None = None

    KEYS = {"dir"}


@dataclass(frozen=True)
class RunConfig:
    model: ModelSection | None = None
    hes1: Hes1RawParams | None = None
    cooke: CookeSection | None = None
    delays: DelaysSection | None = None
    simulation: SimulationSection = field(default_factory=SimulationSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    output: OutputSection = field(default_factory=OutputSection)
    source: str | None = field(default=None, compare=False)

    @property
    def system(self) -> str:
        return next(name for name in SYSTEM_SECTIONS if getattr(self, name) is not None)

    @property
    def k(self) -> int:
        if self.model is not None:
            return self.model.k
        return 2 if self.hes1 is not None else 1

    def build(self):
        """``(spec, steady state target)`` for cascade systems; ``None`` spec for Cooke."""
        from .model import steady_state

        if self.cooke is not None:
            return None, (0.0,)
        if self.hes1 is not None:
            res = rescale_hes1(self.hes1)
            if self.delays is None:
                return res.spec, (res.mu, 1.0)
            spec = hes1_spec(res.mu, res.b, res.h, self.delays.kernel_for(1))
            return spec, (res.mu, 1.0)
        m = self.model
        if self.delays is None:
            kernels = tuple(Dirac(0.0, 0.0) for _ in range(m.k))
        else:
            kernels = tuple(self.delays.kernel_for(j) for j in range(1, m.k + 1))
        try:
            spec = CascadeSpec(m.k, m.mu, m.alpha, m.feedback_fn(), kernels)
        except ValueError as exc:
            raise ConfigError("model", str(exc)) from None
        return spec, steady_state(spec).xbar


def _read_two_columns(path, where):
    import csv

    rows = []
    try:
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].strip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if rows:
                        raise ConfigError(where, f"bad row {row!r} in {path}") from None
    except OSError as exc:
        raise ConfigError(where, f"cannot read {path}: {exc.strerror}") from None
    if len(rows) < 2:
        raise ConfigError(where, f"{path} needs at least two data rows")
    xs, ys = zip(*rows)
    return xs, ys


# ---------------------------------------------------------------- parse / serialize


def _resolve(raw: str, base: Path, where: str) -> str:
    p = Path(raw)
    if not p.is_absolute():
        p = base / p
    if not p.is_file():
        raise ConfigError(where, f"file not found: {p}")
    return str(p.resolve())


def _parse_model(sec: _Section, base: Path) -> ModelSection:
    k = sec.get("k", _integer, required=True)
    if k < 1:
        raise ConfigError(sec.where("k"), "must be >= 1")
    mu = _positive_list(sec.get("mu", _number_list, required=True), sec.where("mu"))
    alpha = _positive_list(sec.get("alpha", _number_list, default=()), sec.where("alpha"))
    if len(mu) != k:
        raise ConfigError(sec.where("mu"), f"needs {k} entries, got {len(mu)}")
    if len(alpha) != k - 1:
        raise ConfigError(sec.where("alpha"), f"needs {k - 1} entries, got {len(alpha)}")
    kind = sec.get("feedback", lambda r, w: r.strip(), required=True)
    if kind == "hill":
        vals = {name: _positive(sec.get(f"hill.{name}", _number, required=True), sec.where(f"hill.{name}"))
                for name in ("mu", "b", "h")}
        return ModelSection(k, mu, alpha, kind, hill_mu=vals["mu"], hill_b=vals["b"], hill_h=vals["h"])
    if kind == "affine":
        return ModelSection(k, mu, alpha, kind,
                            affine_slope=sec.get("affine.slope", _number, required=True),
                            affine_intercept=sec.get("affine.intercept", _number, required=True))
    if kind == "table":
        path = sec.get("table.file", lambda r, w: _resolve(r.strip(), base, w), required=True)
        return ModelSection(k, mu, alpha, kind, table_file=path)
    raise ConfigError(sec.where("feedback"), f"expected hill|affine|table, got {kind!r}")


def _parse_hes1(sec: _Section) -> Hes1RawParams:
    names = {"alpha": "alpha", "k": "k_half", "h": "h", "beta": "beta", "k_r": "k_r", "k_p": "k_p",
             "tau_r": "tau_r"}
    vals = {attr: _positive(sec.get(key, _number, required=True), sec.where(key))
            for key, attr in names.items()}
    if vals["h"] < 1:
        raise ConfigError(sec.where("h"), "must be >= 1")
    return Hes1RawParams(**vals)


def _parse_delays(sec: _Section, base: Path, k: int) -> DelaysSection:
    tau = sec.get("tau", _number, required=True)
    if tau < 0:
        raise ConfigError(sec.where("tau"), "must be nonnegative")
    entries = []
    for j in range(1, k + 1):
        key = _kernel_key(j)
        kind = sec.get(key, lambda r, w: r.strip())
        if kind is None:
            continue
        if kind == "dirac":
            e = KernelEntry(kind, at=sec.get(f"{key}.at", _number, required=True))
        elif kind == "uniform":
            e = KernelEntry(kind, a=sec.get(f"{key}.a", _number, required=True),
                            b=sec.get(f"{key}.b", _number, required=True))
        elif kind == "table":
            e = KernelEntry(kind, file=sec.get(f"{key}.file", lambda r, w: _resolve(r.strip(), base, w),
                                               required=True))
        else:
            raise ConfigError(sec.where(key), f"expected dirac|uniform|table, got {kind!r}")
        e.build(tau, sec.where(key))
        entries.append((j, e))
    return DelaysSection(tau, tuple(entries))


def _parse_dataclass(cls, sec: _Section):
    kwargs = {}
    for f in fields(cls):
        key = f.name
        if key not in sec.items:
            continue
        default = f.default
        if key in ("bounds", "phi", "k_radius"):
            kwargs[key] = sec.get(key, _number_list)
        elif isinstance(default, int) and not isinstance(default, bool):
            kwargs[key] = sec.get(key, _integer)
        elif key == "dir":
            kwargs[key] = sec.items[key].strip()
        else:
            kwargs[key] = sec.get(key, _number)
    return cls(**kwargs)


def parse_config_text(text: str, base_dir: str | Path = ".", source: str | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keys are case-sensitive
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    known = set(SYSTEM_SECTIONS) | {"delays", "simulation", "analysis", "output"}
    for name in cp.sections():
        if name not in known:
            raise ConfigError(name, "unknown section")
    present = [s for s in SYSTEM_SECTIONS if cp.has_section(s)]
    if len(present) != 1:
        which = " and ".join(present) if present else "none"
        raise ConfigError("config", f"exactly one of [model], [hes1], [cooke] is required (found {which})")
    base = Path(base_dir)
    kw: dict[str, Any] = {}
    system = present[0]
    if system == "model":
        kw["model"] = _parse_model(_Section(cp, "model", ModelSection.KEYS), base)
    elif system == "hes1":
        kw["hes1"] = _parse_hes1(_Section(cp, "hes1", {"alpha", "k", "h", "beta", "k_r", "k_p", "tau_r"}))
    else:
        sec = _Section(cp, "cooke", CookeSection.KEYS)
        kw["cooke"] = CookeSection(
            _positive(sec.get("b", _number, required=True), "cooke.b"),
            _positive(sec.get("c", _number, required=True), "cooke.c"),
            sec.get("tau", _number, required=True),
        )
        if kw["cooke"].tau < 0:
            raise ConfigError("cooke.tau", "must be nonnegative")
    k = kw["model"].k if "model" in kw else (2 if "hes1" in kw else 1)
    if cp.has_section("delays"):
        if system == "cooke":
            raise ConfigError("delays", "the [cooke] system carries its own tau")
        allowed = {"tau"}
        for j in range(1, k + 1):
            key = _kernel_key(j)
            allowed |= {key, f"{key}.at", f"{key}.a", f"{key}.b", f"{key}.file"}
        kw["delays"] = _parse_delays(_Section(cp, "delays", allowed), base, k)
    kw["simulation"] = _parse_dataclass(SimulationSection, _Section(cp, "simulation", SimulationSection.KEYS))
    kw["analysis"] = _parse_dataclass(AnalysisSection, _Section(cp, "analysis", AnalysisSection.KEYS))
    kw["output"] = _parse_dataclass(OutputSection, _Section(cp, "output", OutputSection.KEYS))
    _validate_numbers(kw, k)
    return RunConfig(**kw, source=source)


def _validate_numbers(kw, k):
    sim: SimulationSection = kw["simulation"]
    for name in ("t_end", "step", "tol"):
        _positive(getattr(sim, name), f"simulation.{name}")
    if sim.window is not None:
        _positive(sim.window, "simulation.window")
    if sim.mc_runs < 1:
        raise ConfigError("simulation.mc_runs", "must be >= 1")
    if sim.nodes < 2:
        raise ConfigError("simulation.nodes", "must be >= 2")
    if sim.bounds is not None and (len(sim.bounds) not in (2, 2 * k)):
        raise ConfigError("simulation.bounds", f"needs [lo, hi] or {k} lo/hi pairs")
    if sim.bounds is not None:
        pairs = [sim.bounds[i:i + 2] for i in range(0, len(sim.bounds), 2)]
        for i, (lo, hi) in enumerate(pairs):
            if hi < lo:
                raise ConfigError(f"simulation.bounds[{2 * i + 1}]", "upper bound below lower bound")
    if sim.phi is not None and len(sim.phi) != k:
        raise ConfigError("simulation.phi", f"needs {k} entries")
    an: AnalysisSection = kw["analysis"]
    if an.m_max < 2:
        raise ConfigError("analysis.m_max", "must be >= 2")
    if an.k_radius is not None:
        if len(an.k_radius) != k:
            raise ConfigError("analysis.k_radius", f"needs {k} entries")
        for i, r in enumerate(an.k_radius):
            if r < 0:
                raise ConfigError(f"analysis.k_radius[{i}]", "must be nonnegative")


def parse_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(p), f"cannot read config: {exc.strerror}") from None
    return parse_config_text(text, p.parent, str(p))


def serialize_config(cfg: RunConfig) -> str:
    blocks = []

    def block(name, items):
        lines = [f"[{name}]"] + [f"{k} = {_fmt(v)}" for k, v in items.items() if v is not None]
        blocks.append("\n".join(lines))

    if cfg.model is not None:
        block("model", cfg.model.items())
    if cfg.hes1 is not None:
        h = cfg.hes1
        block("hes1", {"alpha": h.alpha, "k": h.k_half, "h": h.h, "beta": h.beta, "k_r": h.k_r,
                       "k_p": h.k_p, "tau_r": h.tau_r})
    if cfg.cooke is not None:
        block("cooke", cfg.cooke.items())
    if cfg.delays is not None:
        block("delays", cfg.delays.items())
    for name in ("simulation", "analysis", "output"):
        sec = getattr(cfg, name)
        block(name, {f.name: getattr(sec, f.name) for f in fields(sec)})
    return "\n\n".join(blocks) + "\n"
