"""Command-line front end.

Every subcommand compiles its flags into one JSON-shaped configuration
document, which is validated by :class:`ExperimentConfig` and then run.
``desslab run --config FILE`` executes such a document directly. A copy of
the validated configuration is written next to the artifacts, so any output
directory can be regenerated from its own ``config.json``.

Exit codes: 0 success, 2 configuration or I/O error, 3 when a Riccati
iteration hit its iteration cap. Divergence is data and exits 0.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .ifp import ABLATION_HORIZON
from .ofsynth import build_of_plant, ifp_report, of_synthesis, separation_radii, simulate_of
from .output import dumps_json, emit_csv, emit_heatmap_svg, emit_json
from .riccati import DareOptions, Status, fc_synthesis
from .ring import RingSpec, SensorConfig, augment
from .sim import IMPULSE_HORIZON, TOL_DIVERGE, closed_loop_impulse, open_loop_impulse
from .sweep import SweepRow, ablation_grid, find_breakpoint, sweep_cost_vs_a, sweep_cost_vs_delay

__all__ = ["ConfigError", "ExperimentConfig", "emit_csv", "emit_heatmap_svg", "main", "run"]

log = logging.getLogger("desslab")

EXPERIMENTS = ("impulse", "synth", "sweep-a", "sweep-delay", "breakpoint", "ablate", "ofsynth")
FORMATS = ("csv", "json", "svg")
EXIT_OK, EXIT_CONFIG, EXIT_MAXITER = 0, 2, 3

_REQUIRED = {
    "impulse": ("n", "a", "mode"),
    "synth": ("n", "a", "mode"),
    "sweep-a": ("n", "a_grid", "mode"),
    "sweep-delay": ("n", "a", "d"),
    "breakpoint": ("n", "q"),
    "ablate": ("n", "a", "d"),
    "ofsynth": ("n", "a"),
}
_DEFAULTS = {
    "impulse": {"q": 1, "d": 3, "T": IMPULSE_HORIZON, "node": 1},
    "synth": {"q": 1, "d": 3},
    "sweep-a": {"q": 1, "d": 3},
    "sweep-delay": {"q": 1},
    "breakpoint": {"tol": 1e-6},
    "ablate": {"q": 1, "T": ABLATION_HORIZON, "modes": ["slow", "diverse"]},
    "ofsynth": {"d": 1, "T": 40},
}


class ConfigError(ValueError):
    pass


# -- parameter parsing ------------------------------------------------------

def parse_int_list(v) -> List[int]:
    """``5``, ``"5,8"``, ``"1..8"`` (inclusive) or a list."""
    if isinstance(v, (list, tuple)):
        out = []
        for x in v:
            out.extend(parse_int_list(x))
        return out
    if isinstance(v, bool):
        raise ConfigError(f"expected integer, got {v!r}")
    if isinstance(v, int):
        return [v]
    if isinstance(v, float) and v.is_integer():
        return [int(v)]
    s = str(v).strip()
    try:
        if "," in s:
            return parse_int_list(s.split(","))
        if ".." in s:
            lo, hi = s.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ConfigError(f"empty range {s!r}")
            return list(range(lo, hi + 1))
        return [int(s)]
    except ValueError as exc:
        raise ConfigError(f"cannot read integer(s) from {v!r}") from exc


def parse_grid(v) -> List[float]:
    """``"start:stop:step"`` (inclusive stop), a comma list, a number or a list."""
    if isinstance(v, (list, tuple)):
        return [float(x) for x in v]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [float(v)]
    s = str(v).strip()
    try:
        if ":" in s:
            start, stop, step = (float(x) for x in s.split(":"))
            if step <= 0 or stop < start:
                raise ConfigError(f"bad grid {s!r}")
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(count)]
        return [float(x) for x in s.split(",")]
    except ValueError as exc:
        raise ConfigError(f"cannot read grid from {v!r}") from exc


def _one(values, name):
    if len(values) != 1:
        raise ConfigError(f"{name} takes a single value here, got {values}")
    return values[0]


def _normalize(experiment: str, raw: dict) -> dict:
    p = dict(_DEFAULTS[experiment])
    p.update({k: v for k, v in raw.items() if v is not None})
    missing = [k for k in _REQUIRED[experiment] if k not in p]
    if missing:
        raise ConfigError(f"{experiment}: missing parameter(s) {', '.join(missing)}")
    out = {}
    for key, v in p.items():
        if key == "n":
            ns = parse_int_list(v)
            out["n"] = ns if experiment in ("sweep-a", "breakpoint") else _one(ns, "n")
        elif key in ("q", "T", "node", "d_a", "d_s", "m", "p"):
            out[key] = _one(parse_int_list(v), key)
        elif key == "d":
            ds = parse_int_list(v)
            out["d"] = ds if experiment == "sweep-delay" else _one(ds, "d")
        elif key == "a":
            grid = parse_grid(v)
            out["a"] = grid if experiment == "ablate" else _one(grid, "a")
        elif key == "a_grid":
            out["a_grid"] = parse_grid(v)
        elif key == "tol":
            out["tol"] = float(v)
        elif key == "mode":
            out["mode"] = str(v)
        elif key == "modes":
            out["modes"] = [str(m) for m in (v.split(",") if isinstance(v, str) else v)]
        else:
            raise ConfigError(f"{experiment}: unknown parameter {key!r}")
    _check_values(experiment, out)
    return out


def _check_values(experiment, p):
    allowed = ("open", "fast", "slow", "diverse") if experiment == "impulse" else ("fast", "slow", "diverse")
    if "mode" in p and p["mode"] not in allowed:
        raise ConfigError(f"mode must be one of {allowed}, got {p['mode']!r}")
    for m in p.get("modes", ()):
        if m not in ("slow", "diverse"):
            raise ConfigError(f"ablation modes must be slow or diverse, got {m!r}")
    for key in ("a_grid", "d", "n", "a", "modes"):
        if isinstance(p.get(key), list) and not p[key]:
            raise ConfigError(f"{key} grid is empty")
    ns = p["n"] if isinstance(p["n"], list) else [p["n"]]
    if any(n < 3 for n in ns):
        raise ConfigError("ring size n must be at least 3")
    ds = p.get("d", 0)
    if any(d < 0 for d in (ds if isinstance(ds, list) else [ds])):
        raise ConfigError("delays must be non-negative")
    if p.get("T", 1) < 1:
        raise ConfigError("horizon T must be at least 1")
    if "q" in p and not 1 <= p["q"] <= min(ns):
        raise ConfigError(f"q must lie in [1, n], got {p['q']}")
    if experiment == "breakpoint" and p["q"] >= min(ns):
        raise ConfigError("breakpoint needs q < n")
    a_vals = p.get("a_grid") or (p["a"] if isinstance(p.get("a"), list) else [p.get("a", 1.0)])
    if any(not (a > 0 and math.isfinite(a)) for a in a_vals):
        raise ConfigError("instability scale a must be positive and finite")


def default_output_dir() -> str:
    return os.environ.get("DESSLAB_OUT") or "desslab_out"


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict
    output_dir: str = field(default_factory=default_output_dir)
    formats: Tuple[str, ...] = FORMATS
    solver: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(doc) - {"experiment", "params", "output", "solver"}
        if unknown:
            raise ConfigError(f"unknown configuration key(s): {', '.join(sorted(unknown))}")
        exp = doc.get("experiment")
        if exp not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
        params = doc.get("params") or {}
        if not isinstance(params, dict):
            raise ConfigError("params must be an object")
        output = doc.get("output") or {}
        formats = output.get("formats", list(FORMATS))
        if isinstance(formats, str):
            formats = formats.split(",")
        bad = [f for f in formats if f not in FORMATS]
        if bad or not formats:
            raise ConfigError(f"formats must be a nonempty subset of {FORMATS}, got {formats}")
        solver = doc.get("solver") or {}
        known = {f.name for f in fields(DareOptions)}
        if set(solver) - known:
            raise ConfigError(f"unknown solver option(s): {', '.join(sorted(set(solver) - known))}")
        cfg = cls(
            experiment=exp,
            params=_normalize(exp, params),
            output_dir=str(output.get("dir") or default_output_dir()),
            formats=tuple(f for f in FORMATS if f in formats),
            solver=dict(solver),
        )
        cfg.options()
        return cfg

    def options(self) -> DareOptions:
        try:
            return DareOptions(**self.solver)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad solver options: {exc}") from exc

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params,
            "output": {"dir": self.output_dir, "formats": list(self.formats)},
            "solver": self.solver,
        }


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_dict(doc)


# -- experiment runners -----------------------------------------------------

class _Sink:
    """Writes only the requested formats into the output directory."""

    def __init__(self, cfg: ExperimentConfig):
        self.dir = Path(cfg.output_dir)
        self.formats = cfg.formats
        self.written: List[Path] = []

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            self.written.append(emit_csv(header, rows, self.dir / name))

    def json(self, name, obj):
        if "json" in self.formats:
            self.written.append(emit_json(obj, self.dir / name))

    def svg(self, name, matrix, **kw):
        if "svg" in self.formats:
            self.written.append(emit_heatmap_svg(matrix, self.dir / name, **kw))


def _sensors(mode: str, q: int, d: int) -> SensorConfig:
    return {"fast": lambda: SensorConfig.fast(q, d), "slow": lambda: SensorConfig.slow(d),
            "diverse": lambda: SensorConfig.diverse(q, d)}[mode]()


def _synth_summary(res) -> dict:
    return {"status": res.status, "iterations": res.iterations, "cost_total": res.cost_total,
            "cost_per_node": res.cost_per_node, "closed_loop_radius": res.closed_loop_radius,
            "stabilizing": res.stabilizing}


def _run_impulse(cfg, sink, opts, workers):
    p = cfg.params
    spec = RingSpec(p["n"], p["a"])
    mode, T = p["mode"], p["T"]
    sensors = SensorConfig.slow(p["d"]) if mode == "open" else _sensors(mode, p["q"], p["d"])
    sensors.validate_for(spec)
    plant = augment(spec, sensors)
    summary: Dict[str, object] = {"params": p}
    statuses = []
    if mode == "open":
        traj = open_loop_impulse(plant, p["node"], T)
    else:
        res = fc_synthesis(plant, opts)
        statuses.append(res.status)
        summary["synthesis"] = _synth_summary(res)
        traj = closed_loop_impulse(plant, res.gain, p["node"], T)
    summary["classification"] = str(traj.classification)
    summary["empirical_cost"] = traj.empirical_cost

    N, m = traj.states.shape[1], traj.inputs.shape[1]
    header = ["t"] + [f"x_{i}" for i in range(1, N + 1)] + [f"u_{i}" for i in range(1, m + 1)]
    rows = []
    for t in range(T + 1):
        u = list(traj.inputs[t]) if t < T else [None] * m
        rows.append([t] + list(traj.states[t]) + u)
    rows.append(["empirical_cost", traj.empirical_cost] + [None] * (N + m - 1))
    sink.csv("trajectory.csv", header, rows)
    sink.json("summary.json", summary)
    sink.svg("trajectory.svg", traj.states[:T].T, block=spec.n, clip=TOL_DIVERGE,
             axis_labels=("state", "time step"), title=f"{mode} impulse response")
    return statuses


def _run_synth(cfg, sink, opts, workers):
    p = cfg.params
    spec = RingSpec(p["n"], p["a"])
    sensors = _sensors(p["mode"], p["q"], p["d"])
    sensors.validate_for(spec)
    res = fc_synthesis(augment(spec, sensors), opts)
    gain = res.gain
    sink.json("synth.json", {"params": p, "synthesis": _synth_summary(res)})
    header = ["row"] + [f"y_{j}" for j in range(1, gain.shape[1] + 1)]
    sink.csv("gain.csv", header, [[i + 1] + list(r) for i, r in enumerate(gain)])
    sink.svg("gain.svg", gain, block=spec.n, axis_labels=("gain row", "sensor"),
             title=f"{p['mode']} gain L")
    return [res.status]


def _sweep_out(sink, stem, rows: List[SweepRow]):
    sink.csv(f"{stem}.csv", SweepRow.FIELDS, [[r.as_record()[f] for f in SweepRow.FIELDS] for r in rows])
    sink.json(f"{stem}.json", [r.as_record() for r in rows])
    return [r.status for r in rows]


def _run_sweep_a(cfg, sink, opts, workers):
    p = cfg.params
    sensors = _sensors(p["mode"], p["q"], p["d"])
    rows = sweep_cost_vs_a(p["n"], p["a_grid"], sensors, opts, workers)
    return _sweep_out(sink, "sweep_a", rows)


def _run_sweep_delay(cfg, sink, opts, workers):
    p = cfg.params
    rows = sweep_cost_vs_delay(p["n"], p["a"], p["q"], p["d"], opts, workers)
    return _sweep_out(sink, "sweep_delay", rows)


def _run_breakpoint(cfg, sink, opts, workers):
    p = cfg.params
    bps = [find_breakpoint(n, p["q"], p["tol"], opts) for n in p["n"]]
    recs = [bp.as_record() for bp in bps]
    sink.json("breakpoint.json", recs[0] if len(recs) == 1 else recs)
    keys = ("n", "q", "a_analytic", "a_empirical", "gap")
    sink.csv("breakpoint.csv", keys, [[r[k] for k in keys] for r in recs])
    return []


def _run_ablate(cfg, sink, opts, workers):
    p = cfg.params
    reports = ablation_grid(p["n"], p["a"], p["d"], p["modes"], p["q"], opts, p["T"], workers)
    keys = ("n", "a", "d", "mode", "intact", "intact_cost", "ablated", "ablated_cost",
            "ablated_radius", "alternation_detected")
    recs = []
    for r in reports:
        rec = {"n": r.spec.n, "a": r.spec.a, "d": r.sensors.d, "mode": r.sensors.mode.value,
               "intact": str(r.intact), "intact_cost": r.intact_cost, "ablated": str(r.ablated),
               "ablated_cost": r.ablated_cost, "ablated_radius": r.ablated_radius,
               "alternation_detected": r.alternation_detected}
        recs.append(rec)
        sink.svg(f"ablated_{rec['mode']}_a{r.spec.a:g}.svg", r.ablated_trajectory.states.T,
                 block=r.spec.n, clip=TOL_DIVERGE, axis_labels=("state", "time step"),
                 title=f"{rec['mode']} with IFP rows removed, a={r.spec.a:g}")
    sink.csv("ablation.csv", keys, [[rec[k] for k in keys] for rec in recs])
    sink.json("ablation.json", [dict(rec, block_norms=list(r.block_norms)) for rec, r in zip(recs, reports)])
    return [r.synthesis.status for r in reports]


def _run_ofsynth(cfg, sink, opts, workers):
    p = cfg.params
    spec = RingSpec(p["n"], p["a"])
    n = spec.n
    m, pr = p.get("m", n), p.get("p", n)
    if not (1 <= m <= n and 1 <= pr <= n):
        raise ConfigError("actuator count m and sensor count p must lie in [1, n]")
    d_a = p.get("d_a", p["d"])
    d_s = p.get("d_s", p["d"])
    plant = build_of_plant(spec, np.eye(n)[:, :m], np.eye(n)[:pr], d_a, d_s)
    gains = of_synthesis(plant, opts=opts)
    rho, rho_k, rho_l = separation_radii(plant, gains)
    L_norm, K_norm = np.linalg.norm(gains.L), np.linalg.norm(gains.K)
    out = {
        "params": p,
        "status_control": gains.status_control,
        "status_filter": gains.status_filter,
        "residual_L2": gains.residual_L2,
        "residual_K3": gains.residual_K3,
        "relative_residual_L2": gains.residual_L2 / L_norm if L_norm else 0.0,
        "relative_residual_K3": gains.residual_K3 / K_norm if K_norm else 0.0,
        "radius_joint": rho,
        "radius_control": rho_k,
        "radius_filter": rho_l,
        "pathways": ifp_report(gains, plant).as_dict(),
    }
    if d_a == d_s == 1 and gains.converged:
        traj = simulate_of(plant, gains, p["T"])
        out["final_ring_norm"] = float(np.max(np.abs(traj.x_r[-1])))
    sink.json("ofsynth.json", out)
    sink.svg("observer_gain.svg", gains.L, block=n, axis_labels=("state", "sensor"), title="observer gain L")
    sink.svg("controller_gain.svg", gains.K.T, block=n, axis_labels=("state", "actuator"),
             title="controller gain K (transposed)")
    return [gains.status_control, gains.status_filter]


_RUNNERS = {
    "impulse": _run_impulse,
    "synth": _run_synth,
    "sweep-a": _run_sweep_a,
    "sweep-delay": _run_sweep_delay,
    "breakpoint": _run_breakpoint,
    "ablate": _run_ablate,
    "ofsynth": _run_ofsynth,
}


def run(cfg: ExperimentConfig, workers: int = 1) -> int:
    """Execute a validated configuration; returns the process exit code."""
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(dumps_json(cfg.to_dict()), encoding="utf-8")
    except OSError as exc:
        log.error("cannot write to output directory %s: %s", out, exc)
        return EXIT_CONFIG
    sink = _Sink(cfg)
    try:
        statuses = _RUNNERS[cfg.experiment](cfg, sink, cfg.options(), workers)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("write failed: %s", exc)
        return EXIT_CONFIG
    for path in sink.written:
        log.info("wrote %s", path)
    if any(s is Status.MAX_ITER for s in statuses):
        log.error("Riccati iteration hit max_iter; results for those cells are not converged")
        return EXIT_MAXITER
    return EXIT_OK


# -- argument parsing -------------------------------------------------------

def _common(sp):
    sp.add_argument("--out", help="output directory (default: $DESSLAB_OUT or ./desslab_out)")
    sp.add_argument("--formats", default="csv,json,svg", help="comma list from csv,json,svg")
    sp.add_argument("--workers", type=int, default=1, help="process count for grid sweeps")
    sp.add_argument("--tol-rel", type=float)
    sp.add_argument("--max-iter", type=int)
    sp.add_argument("--divergence-norm", type=float)
    sp.add_argument("--pinv-rel-tol", type=float)
    sp.add_argument("--no-accelerate", action="store_true", help="plain fixed-point iteration")
    sp.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="desslab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="run a JSON configuration file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("impulse", help="impulse response of the open or closed loop")
    sp.add_argument("--n", required=True)
    sp.add_argument("--a", required=True)
    sp.add_argument("--mode", required=True, choices=("open", "fast", "slow", "diverse"))
    sp.add_argument("--q")
    sp.add_argument("--d")
    sp.add_argument("--T")
    sp.add_argument("--node")
    _common(sp)

    sp = sub.add_parser("synth", help="optimal full-control gain and cost")
    sp.add_argument("--n", required=True)
    sp.add_argument("--a", required=True)
    sp.add_argument("--mode", required=True, choices=("fast", "slow", "diverse"))
    sp.add_argument("--q")
    sp.add_argument("--d")
    _common(sp)

    sp = sub.add_parser("sweep-a", help="cost against instability scale")
    sp.add_argument("--n", required=True, help="ring size(s): 5, 5,8 or 5..10")
    sp.add_argument("--a-grid", dest="a_grid", required=True, help="start:stop:step, inclusive")
    sp.add_argument("--mode", required=True, choices=("fast", "slow", "diverse"))
    sp.add_argument("--q")
    sp.add_argument("--d")
    _common(sp)

    sp = sub.add_parser("sweep-delay", help="cost against delay for all three sensing modes")
    sp.add_argument("--n", required=True)
    sp.add_argument("--a", required=True)
    sp.add_argument("--q")
    sp.add_argument("--d", required=True, help="delays, e.g. 1..8")
    _common(sp)

    sp = sub.add_parser("breakpoint", help="largest stabilizable a for fast-only sensing")
    sp.add_argument("--n", required=True)
    sp.add_argument("--q", required=True)
    sp.add_argument("--tol")
    _common(sp)

    sp = sub.add_parser("ablate", help="remove the internal feedback rows of the gain")
    sp.add_argument("--n", required=True)
    sp.add_argument("--a", required=True, help="one value or a comma list")
    sp.add_argument("--d", required=True)
    sp.add_argument("--q")
    sp.add_argument("--modes")
    sp.add_argument("--T")
    _common(sp)

    sp = sub.add_parser("ofsynth", help="output feedback with delayed actuation and sensing")
    sp.add_argument("--n", required=True)
    sp.add_argument("--a", required=True)
    sp.add_argument("--d")
    sp.add_argument("--d-a", dest="d_a")
    sp.add_argument("--d-s", dest="d_s")
    sp.add_argument("--m", help="number of actuators (first m ring nodes)")
    sp.add_argument("--p", help="number of sensors (first p ring nodes)")
    sp.add_argument("--T")
    _common(sp)
    return ap


_PARAM_KEYS = ("n", "a", "a_grid", "mode", "modes", "q", "d", "d_a", "d_s", "m", "p", "T", "node", "tol")
_SOLVER_KEYS = ("tol_rel", "max_iter", "divergence_norm", "pinv_rel_tol")


def config_from_args(args) -> ExperimentConfig:
    params = {k: getattr(args, k) for k in _PARAM_KEYS if getattr(args, k, None) is not None}
    solver = {k: getattr(args, k) for k in _SOLVER_KEYS if getattr(args, k, None) is not None}
    if args.no_accelerate:
        solver["accelerate"] = False
    doc = {
        "experiment": args.command,
        "params": params,
        "output": {"dir": args.out or default_output_dir(), "formats": args.formats},
        "solver": solver,
    }
    return ExperimentConfig.from_dict(doc)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="desslab: %(message)s")
    try:
        cfg = load_config(args.config) if args.command == "run" else config_from_args(args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    if args.workers < 1:
        log.error("--workers must be at least 1")
        return EXIT_CONFIG
    return run(cfg, args.workers)


if __name__ == "__main__":
    sys.exit(main())
