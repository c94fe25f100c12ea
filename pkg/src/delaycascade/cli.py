"""Command-line entry point.

Exit status: 0 on success with a positive verdict, 2 when the computation
succeeded but the verdict is negative (unstable, uncertified, not converged),
1 on errors.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
import tempfile
import traceback
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import hill, stability
from .attractor import CertificationError, box_sequence, hes1_cycle_map, verify_strong_attractor
from .config import ConfigError, RunConfig, parse_config
from .kernels import Dirac
from .model import cone_slope_sampled, hill_derivatives, rescale_hes1
from .solver import (
    InitialHistory,
    check_convergence,
    default_window,
    integrate_batch,
    integrate_rhs,
    random_history,
)

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2
SWEEP_CHUNK = 50


class CliError(RuntimeError):
    pass


def bundled_config(name: str) -> Path:
    """Path of a configuration shipped with the package (``hes1_h2`` or ``hes1_h2.cfg``)."""
    if not name.endswith(".cfg"):
        name += ".cfg"
    return Path(str(resources.files("delaycascade") / "configs" / name))


# ---------------------------------------------------------------- output helpers


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _g(v) -> str:
    return "" if v is None else f"{v:.17g}"


def _csv(header: str, rows) -> str:
    buf = io.StringIO()
    buf.write(header + "\n")
    for row in rows:
        buf.write(",".join(r if isinstance(r, str) else _g(r) for r in row) + "\n")
    return buf.getvalue()


def _out_dir(args, cfg: RunConfig | None) -> Path | None:
    if args.out:
        return Path(args.out)
    if cfg is not None and cfg.output.dir:
        base = Path(cfg.source).parent if cfg.source else Path(".")
        return base / cfg.output.dir
    return None


def _emit(args, cfg, name: str, text: str) -> None:
    out = _out_dir(args, cfg)
    if out is None:
        sys.stdout.write(text)
    else:
        atomic_write(out / name, text)
        print(f"wrote {out / name}")


def _load(args) -> RunConfig:
    if not args.config:
        raise CliError("--config is required for this subcommand")
    return parse_config(args.config)


# ---------------------------------------------------------------- shared analysis


def linearization(cfg: RunConfig, spec, xbar):
    """``(LinearizationData, cone slopes, kernels)`` at the steady state of a cascade config."""
    if cfg.cooke is not None:
        c = cfg.cooke
        # linearization at 0: γ = b, μ = c; on [0, 1] |b x_τ (1 - x)| <= b x_τ gives the cone slope b
        data = stability.LinearizationData((c.c,), (c.b,), (c.tau,))
        return data, (c.b,), None
    f = spec.feedback
    if cfg.hes1 is not None:
        res = rescale_hes1(cfg.hes1)
        gamma1 = hill_derivatives(1.0, res.feedback).df
        cone1 = hill.cone_slope(res.h, res.b, res.mu)
    else:
        xk = xbar[-1]
        gamma1 = f.derivative(xk)
        upper = max(cfg.analysis.cone_upper, 10.0 * xk)
        cone1 = cone_slope_sampled(f, xk, upper)
    gammas = (gamma1,) + tuple(spec.alpha)
    cones = (abs(cone1),) + tuple(spec.alpha)
    taus = None
    if all(isinstance(k, Dirac) for k in spec.kernels):
        taus = tuple(-k.at for k in spec.kernels)
    data = stability.LinearizationData(spec.mu, gammas, taus)
    return data, cones, spec.kernels


def certify(cfg: RunConfig) -> stability.StabilityReport:
    if cfg.hes1 is not None:
        return hill.check_hes1_global(cfg.hes1)
    spec, xbar = cfg.build()
    data, cones, kernels = linearization(cfg, spec, xbar)
    return stability.classify(data, alphas_available=cones)


def _histories(cfg: RunConfig, k: int, tau: float, seed: int | None):
    sim = cfg.simulation
    if seed is None and sim.phi is not None:
        return InitialHistory.constant(sim.phi, tau)
    bounds = _bounds(cfg, k)
    return random_history(sim.seed if seed is None else seed, k, tau, bounds, sim.nodes)


def _bounds(cfg: RunConfig, k: int) -> np.ndarray:
    b = cfg.simulation.bounds
    if b is None:
        b = (0.0, 1.0) if cfg.cooke is not None else (0.0, 2.0)
    arr = np.asarray(b, dtype=float)
    return np.broadcast_to(arr, (k, 2)) if arr.size == 2 else arr.reshape(k, 2)


def _integrate(cfg: RunConfig, spec, phis, t_end, step):
    if cfg.cooke is not None:
        c = cfg.cooke
        return integrate_rhs(c.rhs(), 1, c.tau, list(phis), t_end, step)
    return integrate_batch(spec, list(phis), t_end, step)


def _tau(cfg: RunConfig, spec) -> float:
    return cfg.cooke.tau if cfg.cooke is not None else spec.tau


# ---------------------------------------------------------------- subcommands


def cmd_simulate(args) -> int:
    cfg = _load(args)
    spec, target = cfg.build()
    sim = cfg.simulation
    tau = _tau(cfg, spec)
    seed = args.seed
    phi = _histories(cfg, cfg.k, tau, seed)
    traj = _integrate(cfg, spec, [phi], sim.t_end, sim.step)[0]
    window = sim.window if sim.window is not None else default_window(tau)
    verdict = check_convergence(traj, target, sim.tol, min(window, sim.t_end))
    k = traj.states.shape[1]
    header = "t," + ",".join(f"x{j + 1}" for j in range(k))
    rows = ([t, *x] for t, x in zip(traj.times.tolist(), traj.states.tolist()))
    _emit(args, cfg, "trajectory.csv", _csv(header, rows))
    print(f"converged={verdict.converged} sup_deviation={verdict.sup_deviation:.6g} "
          f"window={verdict.window:g} target={','.join(_g(v) for v in target)}", file=sys.stderr)
    return EXIT_OK


def cmd_check_stability(args) -> int:
    cfg = _load(args)
    spec, xbar = cfg.build()
    data, cones, kernels = linearization(cfg, spec, xbar)
    rep = stability.classify(data, alphas_available=cones, kernels=kernels)
    print(rep.summary())
    for note in rep.notes:
        print(f"note: {note}")
    print(stability.CSV_HEADER)
    print(rep.csv_row())
    return EXIT_OK if rep.verdict is stability.Verdict.GLOBALLY_STABLE else EXIT_NEGATIVE


def cmd_check_hes1(args) -> int:
    cfg = _load(args)
    if cfg.hes1 is None:
        raise CliError("check-hes1 needs a [hes1] section")
    rep = hill.check_hes1_global(cfg.hes1)
    print(rep.summary())
    for note in rep.notes:
        print(f"note: {note}")
    print(stability.CSV_HEADER)
    print(rep.csv_row())
    return EXIT_OK if rep.verdict is stability.Verdict.GLOBALLY_STABLE else EXIT_NEGATIVE


def cmd_hopf(args) -> int:
    cfg = _load(args)
    spec, xbar = cfg.build()
    data, _, kernels = linearization(cfg, spec, xbar)
    rep = stability.classify(data, kernels=kernels)
    print(stability.CSV_HEADER)
    print(rep.csv_row())
    for note in rep.notes:
        print(f"note: {note}", file=sys.stderr)
    if rep.verdict is stability.Verdict.HOPF_BOUNDARY:
        return EXIT_OK
    return EXIT_NEGATIVE


def cmd_region_curve(args) -> int:
    curve = hill.region_curve(args.h_min, args.h_max, args.points)
    cfg = parse_config(args.config) if args.config else None
    _emit(args, cfg, "region_curve.csv", _csv("h,threshold", curve.rows()))
    return EXIT_OK


def cmd_attractor(args) -> int:
    cfg = _load(args)
    if cfg.hes1 is None:
        raise CliError("attractor needs a [hes1] section")
    res = rescale_hes1(cfg.hes1)
    an = cfg.analysis
    cmap = hes1_cycle_map(res.h, res.b, res.mu, an.slope_slack)
    if an.k_radius is not None:
        K = an.k_radius
    else:
        bounds = _bounds(cfg, 2)
        center = np.array([res.mu, 1.0])
        K = tuple(np.maximum(np.abs(bounds[:, 0] - center), np.abs(bounds[:, 1] - center)).tolist())
    try:
        boxes = box_sequence(cmap, K, an.m_max, an.majorant_grid)
    except CertificationError as exc:
        print(f"certification failed: {exc}")
        return EXIT_NEGATIVE
    rep = verify_strong_attractor(cmap, boxes, an.samples_per_face, an.radius_bound)
    header = "m," + ",".join(f"a_{j + 1}" for j in range(boxes.k))
    _emit(args, cfg, "attractor.csv", _csv(header, boxes.rows()))
    for line in rep.lines():
        print(line)
    return EXIT_OK if rep.passed else EXIT_NEGATIVE


@dataclass(frozen=True)
class SweepReport:
    runs: int
    converged: int
    worst_deviation: float
    failures: tuple[tuple[int, float], ...] = field(default=())

    def summary(self) -> str:
        return (f"runs={self.runs} converged={self.converged} "
                f"worst_deviation={self.worst_deviation:.6g}")


def run_sweep(cfg: RunConfig, runs: int, base_seed: int = 0) -> tuple[SweepReport, list]:
    """Integrate from ``runs`` random histories (seeds ``base_seed+1..base_seed+runs``)."""
    spec, target = cfg.build()
    sim = cfg.simulation
    tau = _tau(cfg, spec)
    bounds = _bounds(cfg, cfg.k)
    window = sim.window if sim.window is not None else default_window(tau)
    seeds = [base_seed + i for i in range(1, runs + 1)]
    rows = []
    for start in range(0, runs, SWEEP_CHUNK):
        chunk = seeds[start:start + SWEEP_CHUNK]
        phis = [random_history(s, cfg.k, tau, bounds, sim.nodes) for s in chunk]
        for s, traj in zip(chunk, _integrate(cfg, spec, phis, sim.t_end, sim.step)):
            v = check_convergence(traj, target, sim.tol, window)
            rows.append((s, v.converged, v.sup_deviation))
    failures = tuple((s, d) for s, ok, d in rows if not ok)
    rep = SweepReport(runs, sum(ok for _, ok, _ in rows), max(d for _, _, d in rows), failures)
    return rep, rows


def cmd_sweep(args) -> int:
    cfg = _load(args)
    cert = certify(cfg)
    if cert.verdict is not stability.Verdict.GLOBALLY_STABLE and not args.force:
        print(f"parameters not certified ({cert.verdict.value}); use --force to sweep anyway")
        return EXIT_NEGATIVE
    runs = args.runs if args.runs is not None else cfg.simulation.mc_runs
    base = args.seed if args.seed is not None else cfg.simulation.seed
    rep, rows = run_sweep(cfg, runs, base)
    text = _csv("seed,converged,sup_deviation", ((str(s), str(int(ok)), d) for s, ok, d in rows))
    _emit(args, cfg, "sweep.csv", text)
    print(f"certificate={cert.verdict.value} {rep.summary()}")
    return EXIT_OK if rep.converged == rep.runs else EXIT_NEGATIVE


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delaycascade",
        description="Global stability, Hopf boundaries and simulation of delayed reaction cascades.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, config_required=True):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=config_required, help="run configuration file")
        p.add_argument("--out", help="output directory (default: [output] dir, else stdout)")
        p.set_defaults(func=func)
        return p

    p = add("simulate", cmd_simulate, "integrate one trajectory and write trajectory.csv")
    p.add_argument("--seed", type=int, help="random initial history with this seed")
    add("check-stability", cmd_check_stability, "delay-independent global stability test")
    add("check-hes1", cmd_check_hes1, "Hes1 region test from raw parameters")
    add("hopf", cmd_hopf, "crossing frequency and critical delay")
    p = add("region-curve", cmd_region_curve, "critical ratio as a function of h", config_required=False)
    p.add_argument("--h-min", type=float, default=1.0)
    p.add_argument("--h-max", type=float, default=10.0)
    p.add_argument("--points", type=int, default=91)
    add("attractor", cmd_attractor, "nested-box strong attractor certificate")
    p = add("sweep", cmd_sweep, "Monte Carlo convergence sweep over random histories")
    p.add_argument("--runs", type=int, help="number of runs (default: [simulation] mc_runs)")
    p.add_argument("--seed", type=int, help="seed offset; runs use seeds offset+1..offset+runs")
    p.add_argument("--force", action="store_true", help="sweep even without a stability certificate")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, CliError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error [{_provenance(exc)}.{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_ERROR


def _provenance(exc: BaseException) -> str:
    """Name of the innermost package module on the traceback (``cli`` if none)."""
    pkg_dir = Path(__file__).resolve().parent
    module = "cli"
    for frame in traceback.extract_tb(exc.__traceback__):
        path = Path(frame.filename).resolve()
        if path.parent == pkg_dir:
            module = path.stem.lstrip("_") or module
    return module


if __name__ == "__main__":
    sys.exit(main())
