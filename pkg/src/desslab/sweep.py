"""Grid experiments: cost versus instability and delay, breaking points, ablation grid.

Every grid cell is an independent pure task. Cells may be farmed out to a
process pool; results are always sorted by their parameter key before they
are returned, so the output never depends on the worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional, Sequence

import numpy as np

from .ifp import ABLATION_HORIZON, AblationReport, ablation_study
from .riccati import DEFAULT_OPTIONS, DareOptions, Status, classify_stabilizable, fc_synthesis
from .ring import RingSpec, SensorConfig, SensorMode, _mode_gains, augment

MODE_ORDER = (SensorMode.FAST_ONLY, SensorMode.SLOW_ONLY, SensorMode.DIVERSE)
BISECT_TOL = 1e-6


@dataclass(frozen=True)
class SweepRow:
    n: int
    a: float
    q: Optional[int]
    d: int
    mode: SensorMode
    cost_per_node: float
    cost_total: float
    stabilizable: bool
    closed_loop_radius: Optional[float]
    status: Status = Status.CONVERGED
    classification: Optional[str] = None

    FIELDS = ("n", "a", "q", "d", "mode", "cost_per_node", "cost_total",
              "stabilizable", "closed_loop_radius")

    @property
    def key(self):
        return (self.n, self.a, self.d, MODE_ORDER.index(self.mode), self.q or 0)

    def as_record(self) -> dict:
        rec = {f: getattr(self, f) for f in self.FIELDS}
        rec["mode"] = self.mode.value
        return rec


@dataclass(frozen=True)
class BreakPoint:
    n: int
    q: int
    a_analytic: float
    a_empirical: float
    tol: float = BISECT_TOL

    @property
    def gap(self) -> float:
        if math.isinf(self.a_analytic) and math.isinf(self.a_empirical):
            return 0.0
        return abs(self.a_analytic - self.a_empirical)

    def as_record(self) -> dict:
        return {"n": self.n, "q": self.q, "a_analytic": self.a_analytic,
                "a_empirical": self.a_empirical, "gap": self.gap}


def parallel_map(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """``list(map(fn, tasks))``, optionally spread across processes."""
    tasks = list(tasks)
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def evaluate_cell(task) -> SweepRow:
    """Synthesize one ``(spec, sensors, opts)`` cell."""
    spec, sensors, opts = task
    res = fc_synthesis(augment(spec, sensors), opts)
    ok = res.stabilizing
    return SweepRow(
        n=spec.n, a=float(spec.a), q=sensors.q, d=sensors.d, mode=sensors.mode,
        cost_per_node=res.cost_per_node if ok else math.inf,
        cost_total=res.cost_total if ok else math.inf,
        stabilizable=ok,
        closed_loop_radius=res.closed_loop_radius if ok else None,
        status=res.status,
    )


def _sorted(rows: Iterable[SweepRow]) -> List[SweepRow]:
    return sorted(rows, key=lambda r: r.key)


def sweep_cost_vs_a(n_list: Iterable[int], a_grid: Sequence[float], sensors: SensorConfig,
                    opts: DareOptions = DEFAULT_OPTIONS, workers: int = 1) -> List[SweepRow]:
    a_grid = [float(a) for a in a_grid]
    if not a_grid:
        raise ValueError("a_grid is empty")
    if any(b <= a for a, b in zip(a_grid, a_grid[1:])):
        raise ValueError("a_grid must be strictly ascending")
    tasks = []
    for n in n_list:
        for a in a_grid:
            spec = RingSpec(n, a)
            sensors.validate_for(spec)
            tasks.append((spec, sensors, opts))
    return _sorted(parallel_map(evaluate_cell, tasks, workers))


def sweep_cost_vs_delay(n: int, a: float, q: int, d_range: Iterable[int],
                        opts: DareOptions = DEFAULT_OPTIONS, workers: int = 1) -> List[SweepRow]:
    """Fast-only, slow-only and diverse rows for every delay in ``d_range``."""
    d_range = list(d_range)
    if not d_range:
        raise ValueError("d_range is empty")
    spec = RingSpec(n, a)
    tasks = []
    for d in d_range:
        for cfg in (SensorConfig.fast(q, d), SensorConfig.slow(d), SensorConfig.diverse(q, d)):
            cfg.validate_for(spec)
            tasks.append((spec, cfg, opts))
    return _sorted(parallel_map(evaluate_cell, tasks, workers))


def analytic_breakpoint(n: int, q: int) -> float:
    """``3 / s_{q+1}`` with ``s`` the sorted magnitudes ``|1 + 2 cos(2 pi k / n)|``.

    Infinite when the first uncovered mode has eigenvalue zero.
    """
    if not 1 <= q < n:
        raise ValueError(f"need 1 <= q < n, got q={q}, n={n}")
    s = np.sort(np.abs(_mode_gains(n)))[::-1]
    nxt = s[q]
    return math.inf if nxt < 1e-12 else 3.0 / float(nxt)


def _stabilizable_fast(n, q, a, opts):
    # delay states are invisible to the fast sensor, so d = 0 decides every d
    return classify_stabilizable(augment(RingSpec(n, a), SensorConfig.fast(q, 0)), opts)


def find_breakpoint(n: int, q: int, bisect_tol: float = BISECT_TOL,
                    opts: DareOptions = DEFAULT_OPTIONS) -> BreakPoint:
    """Smallest ``a`` at which fast-only sensing with ``q`` sensors stops stabilizing."""
    a_an = analytic_breakpoint(n, q)
    lo, hi = 1.0, 3.0 * n
    if not _stabilizable_fast(n, q, lo, opts):
        return BreakPoint(n, q, a_an, lo, bisect_tol)
    if _stabilizable_fast(n, q, hi, opts):
        return BreakPoint(n, q, a_an, math.inf, bisect_tol)
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if _stabilizable_fast(n, q, mid, opts):
            lo = mid
        else:
            hi = mid
    return BreakPoint(n, q, a_an, 0.5 * (lo + hi), bisect_tol)


def _ablation_cell(task) -> AblationReport:
    spec, sensors, opts, T = task
    return ablation_study(spec, sensors, opts, T)


def ablation_grid(n: int, a_list: Iterable[float], d: int,
                  modes: Iterable = (SensorMode.SLOW_ONLY, SensorMode.DIVERSE),
                  q: int = 1, opts: DareOptions = DEFAULT_OPTIONS, T: Optional[int] = None,
                  workers: int = 1) -> List[AblationReport]:
    T = ABLATION_HORIZON if T is None else T
    tasks = []
    for a in sorted(float(x) for x in a_list):
        for mode in sorted((SensorMode(m) for m in modes), key=MODE_ORDER.index):
            if mode is SensorMode.FAST_ONLY:
                raise ValueError("fast-only controllers have no IFP layer to ablate")
            cfg = SensorConfig.slow(d) if mode is SensorMode.SLOW_ONLY else SensorConfig.diverse(q, d)
            tasks.append((RingSpec(n, a), cfg, opts, T))
    return parallel_map(_ablation_cell, tasks, workers)
